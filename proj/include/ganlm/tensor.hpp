#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ganlm/errors.hpp"

namespace ganlm {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

// Dense row-major array of doubles.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

  Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), data_(std::move(values)) {
    if (shape_size(shape_) != data_.size()) {
      throw DimensionError("tensor shape " + shape_str(shape_) + " holds " +
                           std::to_string(shape_size(shape_)) + " values, got " +
                           std::to_string(data_.size()));
    }
  }

  static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> v;
    v.reserve(r * c);
    for (const auto& row : rows) {
      if (row.size() != c) throw DimensionError("ragged matrix literal");
      v.insert(v.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(v));
  }

  static Tensor vector(std::initializer_list<double> values) {
    return Tensor({values.size()}, std::vector<double>(values));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return shape_.empty() && data_.empty(); }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

  double item() const {
    if (data_.size() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape_));
    return data_[0];
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  // Same values, new shape of equal size.
  Tensor reshaped(Shape shape) const& {
    Tensor t = *this;
    return std::move(t).reshaped(std::move(shape));
  }
  Tensor reshaped(Shape shape) && {
    if (shape_size(shape) != data_.size()) {
      throw DimensionError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    }
    shape_ = std::move(shape);
    return std::move(*this);
  }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

struct Node {
  Tensor value;
  Tensor grad;  // lazily allocated; empty until something accumulates into it
  bool requires_grad = false;

  Tensor& ensure_grad() {
    if (grad.size() != value.size() || grad.shape() != value.shape()) grad = Tensor(value.shape());
    return grad;
  }
};

// Handle to a value in the computation. Copies share the node.
class Var {
 public:
  Var() : node_(std::make_shared<Node>()) {}
  explicit Var(Tensor value, bool requires_grad = false) : node_(std::make_shared<Node>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }

  const Tensor& value() const noexcept { return node_->value; }
  // Direct access for optimizers and initializers. Not recorded.
  Tensor& mutable_value() noexcept { return node_->value; }
  const Shape& shape() const noexcept { return node_->value.shape(); }
  bool requires_grad() const noexcept { return node_->requires_grad; }
  bool has_grad() const noexcept { return node_->grad.size() == node_->value.size() && !node_->grad.empty(); }

  // Gradient, zero-filled if nothing reached this value.
  const Tensor& grad() const { return node_->ensure_grad(); }
  Tensor& mutable_grad() { return node_->ensure_grad(); }
  void zero_grad() { node_->grad = Tensor(); }

  Node& node() const noexcept { return *node_; }
  const std::shared_ptr<Node>& node_ptr() const noexcept { return node_; }

  bool same_node(const Var& other) const noexcept { return node_ == other.node_; }

 private:
  std::shared_ptr<Node> node_;
};

namespace detail {
inline bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}
}  // namespace detail

inline bool grad_enabled() { return detail::grad_mode(); }

// Disables recording for its lifetime; ops then produce plain values.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode()) { detail::grad_mode() = false; }
  ~NoGradGuard() { detail::grad_mode() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Ordered record of differentiable operations. Creation order is a
// topological order, so backward walks the record once in reverse.
class Tape {
 public:
  using BackwardFn = std::function<void(const Tensor& out_grad)>;

  void record(std::shared_ptr<Node> out, BackwardFn fn) {
    entries_.push_back(Entry{std::move(out), std::move(fn)});
  }

  std::size_t size() const noexcept { return entries_.size(); }
  void clear() { entries_.clear(); }

  // Seeds d(loss)/d(loss) = 1, runs every recorded rule in reverse order and
  // clears the record. Leaf gradients accumulate until zero_grad().
  void backward(const Var& loss) {
    if (loss.value().size() != 1) {
      throw ContractError("backward needs a scalar loss, got shape " + shape_str(loss.shape()));
    }
    Node& root = loss.node();
    root.ensure_grad()[0] += 1.0;
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
      Node& out = *it->out;
      if (out.grad.size() != out.value.size() || out.grad.empty()) continue;
      it->backward(out.grad);
    }
    entries_.clear();
  }

 private:
  struct Entry {
    std::shared_ptr<Node> out;
    BackwardFn backward;
  };
  std::vector<Entry> entries_;
};

inline Tape& active_tape() {
  thread_local Tape tape;
  return tape;
}

inline void backward(const Var& loss) { active_tape().backward(loss); }

// A constant (no gradient) copy of the value.
inline Var detach(const Var& v) { return Var(v.value(), false); }

inline void check_finite(const Tensor& t, const char* where) {
  if (!t.all_finite()) throw NumericError(std::string("non-finite value in ") + where);
}

}  // namespace ganlm
