#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "ganlm/errors.hpp"
#include "ganlm/rng.hpp"
#include "ganlm/tensor.hpp"

namespace ganlm {

struct NamedParam {
  std::string name;
  Var var;
};

// Ordered, named trainable tensors. Declaration order is checkpoint order.
class ParamSet {
 public:
  Var& add(std::string name, Tensor init) {
    params_.push_back(NamedParam{std::move(name), Var(std::move(init), true)});
    return params_.back().var;
  }

  std::size_t size() const noexcept { return params_.size(); }
  const NamedParam& operator[](std::size_t i) const { return params_[i]; }
  NamedParam& operator[](std::size_t i) { return params_[i]; }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }

  std::vector<Var> vars() const {
    std::vector<Var> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p.var);
    return out;
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.var.value().size();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p.var.zero_grad();
  }

  // Deep copy: fresh nodes with the same values.
  ParamSet clone() const {
    ParamSet out;
    for (const auto& p : params_) out.add(p.name, p.var.value());
    return out;
  }

 private:
  std::vector<NamedParam> params_;
};

inline Tensor truncated_normal(Shape shape, double stddev, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = stddev * rng.truncated_normal();
  return t;
}

struct AdamWConfig {
  double learning_rate = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
};

// AdamW with bias correction and decoupled weight decay:
//   p <- p - lr * wd * p
//   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
//   p <- p - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
// A parameter no gradient reached is stepped with g = 0.
class AdamW {
 public:
  AdamW(std::vector<Var> params, AdamWConfig config) : params_(std::move(params)), config_(config) {
    if (!(config_.learning_rate > 0.0)) throw ContractError("AdamW learning rate must be > 0");
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
      m_.emplace_back(p.shape());
      v_.emplace_back(p.shape());
    }
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Var& p = params_[i];
      Tensor& value = p.mutable_value();
      if (m_[i].shape() != value.shape()) {
        throw DimensionError("AdamW: parameter " + std::to_string(i) + " has shape " + shape_str(value.shape()) +
                             " but optimizer state has " + shape_str(m_[i].shape()));
      }
      const bool has = p.has_grad();
      const double* g = has ? p.grad().data() : nullptr;
      double* w = value.data();
      double* m = m_[i].data();
      double* v = v_[i].data();
      const double decay = 1.0 - config_.learning_rate * config_.weight_decay;
      for (std::size_t j = 0, n = value.size(); j < n; ++j) {
        const double gj = has ? g[j] : 0.0;
        w[j] *= decay;
        m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * gj;
        v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * gj * gj;
        const double mhat = m[j] / bc1;
        const double vhat = v[j] / bc2;
        w[j] -= config_.learning_rate * mhat / (std::sqrt(vhat) + config_.epsilon);
      }
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  long step_count() const noexcept { return t_; }
  const AdamWConfig& config() const noexcept { return config_; }
  const Tensor& first_moment(std::size_t i) const { return m_.at(i); }
  const Tensor& second_moment(std::size_t i) const { return v_.at(i); }

 private:
  std::vector<Var> params_;
  AdamWConfig config_;
  std::vector<Tensor> m_, v_;
  long t_ = 0;
};

}  // namespace ganlm
