#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "ganlm/errors.hpp"
#include "ganlm/rng.hpp"
#include "ganlm/tensor.hpp"

namespace ganlm {

enum class Mode { kTrain, kEval };

namespace detail {

inline Var make_result(Tensor value, std::initializer_list<Var> inputs, Tape::BackwardFn fn) {
  Var out(std::move(value), false);
  if (!grad_enabled()) return out;
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (!any) return out;
  out.node().requires_grad = true;
  active_tape().record(out.node_ptr(), std::move(fn));
  return out;
}

inline void accumulate(const Var& target, const Tensor& delta) {
  if (!target.requires_grad()) return;
  Tensor& g = target.node().ensure_grad();
  double* gp = g.data();
  const double* dp = delta.data();
  for (std::size_t i = 0, n = g.size(); i < n; ++i) gp[i] += dp[i];
}

inline void require_rank(const Var& v, std::size_t rank, const char* op) {
  if (v.shape().size() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                         shape_str(v.shape()));
  }
}

// C[m x n] += op(A) * op(B). Row i of C depends only on row i of op(A), with
// a fixed summation order over the inner dimension.
inline void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m x n] += A^T * B with A stored [k x m].
inline void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = a + p * m;
    const double* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = arow[i];
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

inline std::vector<double> transpose_copy(const double* src, std::size_t rows, std::size_t cols) {
  std::vector<double> t(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) t[c * rows + r] = src[r * cols + c];
  return t;
}

// C[m x n] += A * B^T with B stored [n x k].
inline void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c) {
  const auto bt = transpose_copy(b, n, k);
  gemm_nn(m, k, n, a, bt.data(), c);
}

}  // namespace detail

// [m x k] * [k x n] -> [m x n]
inline Var matmul(const Var& a, const Var& b) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0]) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(sa) + " and " + shape_str(sb));
  }
  const std::size_t m = sa[0], k = sa[1], n = sb[1];
  Tensor out({m, n});
  detail::gemm_nn(m, k, n, a.value().data(), b.value().data(), out.data());
  return detail::make_result(std::move(out), {a, b}, [a, b, m, k, n](const Tensor& g) {
    if (a.requires_grad()) {
      Tensor da({m, k});
      detail::gemm_nt(m, n, k, g.data(), b.value().data(), da.data());
      detail::accumulate(a, da);
    }
    if (b.requires_grad()) {
      Tensor db({k, n});
      detail::gemm_tn(k, m, n, a.value().data(), g.data(), db.data());
      detail::accumulate(b, db);
    }
  });
}

// Batched product over the leading axis: [B x m x k] * [B x k x n], or with
// transpose_b, [B x m x k] * [B x n x k]^T.
inline Var bmm(const Var& a, const Var& b, bool transpose_b = false) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  const bool ok = sa.size() == 3 && sb.size() == 3 && sa[0] == sb[0] &&
                  (transpose_b ? sa[2] == sb[2] : sa[2] == sb[1]);
  if (!ok) throw DimensionError("bmm: incompatible shapes " + shape_str(sa) + " and " + shape_str(sb));
  const std::size_t batch = sa[0], m = sa[1], k = sa[2];
  const std::size_t n = transpose_b ? sb[1] : sb[2];
  Tensor out({batch, m, n});
  for (std::size_t i = 0; i < batch; ++i) {
    const double* ap = a.value().data() + i * m * k;
    const double* bp = b.value().data() + i * k * n;
    double* cp = out.data() + i * m * n;
    if (transpose_b)
      detail::gemm_nt(m, k, n, ap, bp, cp);
    else
      detail::gemm_nn(m, k, n, ap, bp, cp);
  }
  return detail::make_result(std::move(out), {a, b}, [a, b, batch, m, k, n, transpose_b](const Tensor& g) {
    Tensor da, db;
    if (a.requires_grad()) da = Tensor(a.shape());
    if (b.requires_grad()) db = Tensor(b.shape());
    for (std::size_t i = 0; i < batch; ++i) {
      const double* gp = g.data() + i * m * n;
      const double* ap = a.value().data() + i * m * k;
      const double* bp = b.value().data() + i * k * n;
      if (a.requires_grad()) {
        // dA = G * B^T (plain) or G * B (transposed operand)
        if (transpose_b)
          detail::gemm_nn(m, n, k, gp, bp, da.data() + i * m * k);
        else
          detail::gemm_nt(m, n, k, gp, bp, da.data() + i * m * k);
      }
      if (b.requires_grad()) {
        // dB = A^T * G (plain) or G^T * A (transposed operand)
        if (transpose_b)
          detail::gemm_tn(n, m, k, gp, ap, db.data() + i * k * n);
        else
          detail::gemm_tn(k, m, n, ap, gp, db.data() + i * k * n);
      }
    }
    if (a.requires_grad()) detail::accumulate(a, da);
    if (b.requires_grad()) detail::accumulate(b, db);
  });
}

namespace detail {

// b broadcasts over a when b's shape equals a trailing suffix of a's shape.
inline std::size_t broadcast_repeats(const Shape& sa, const Shape& sb, const char* op) {
  if (sb.size() > sa.size() || !std::equal(sb.rbegin(), sb.rend(), sa.rbegin())) {
    throw DimensionError(std::string(op) + ": cannot broadcast " + shape_str(sb) + " onto " + shape_str(sa));
  }
  return shape_size(sa) / std::max<std::size_t>(shape_size(sb), 1);
}

inline Tensor reduce_broadcast(const Tensor& g, const Shape& target, std::size_t repeats, double sign) {
  Tensor out(target);
  const std::size_t inner = out.size();
  for (std::size_t r = 0; r < repeats; ++r) {
    const double* gp = g.data() + r * inner;
    for (std::size_t j = 0; j < inner; ++j) out[j] += sign * gp[j];
  }
  return out;
}

inline Var add_sub(const Var& a, const Var& b, double sign, const char* op) {
  const std::size_t repeats = broadcast_repeats(a.shape(), b.shape(), op);
  Tensor out = a.value();
  const std::size_t inner = b.value().size();
  const double* bp = b.value().data();
  for (std::size_t r = 0; r < repeats; ++r) {
    double* op_ = out.data() + r * inner;
    for (std::size_t j = 0; j < inner; ++j) op_[j] += sign * bp[j];
  }
  return make_result(std::move(out), {a, b}, [a, b, repeats, sign](const Tensor& g) {
    accumulate(a, g);
    if (b.requires_grad()) accumulate(b, reduce_broadcast(g, b.shape(), repeats, sign));
  });
}

template <typename F, typename DF>
Var unary(const Var& x, F f, DF df) {
  Tensor out(x.shape());
  const double* xp = x.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xp[i]);
  return make_result(std::move(out), {x}, [x, df](const Tensor& g) {
    Tensor dx(x.shape());
    const double* xp = x.value().data();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = g[i] * df(xp[i]);
    accumulate(x, dx);
  });
}

}  // namespace detail

// a + b, where b may be broadcast over leading axes of a (e.g. a bias row).
inline Var add(const Var& a, const Var& b) { return detail::add_sub(a, b, 1.0, "add"); }
inline Var sub(const Var& a, const Var& b) { return detail::add_sub(a, b, -1.0, "sub"); }

inline Var scale(const Var& x, double s) {
  return detail::unary(x, [s](double v) { return s * v; }, [s](double) { return s; });
}

inline Var hadamard(const Var& a, const Var& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("hadamard: shapes differ " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return detail::make_result(std::move(out), {a, b}, [a, b](const Tensor& g) {
    if (a.requires_grad()) {
      Tensor da(a.shape());
      for (std::size_t i = 0; i < da.size(); ++i) da[i] = g[i] * b.value()[i];
      detail::accumulate(a, da);
    }
    if (b.requires_grad()) {
      Tensor db(b.shape());
      for (std::size_t i = 0; i < db.size(); ++i) db[i] = g[i] * a.value()[i];
      detail::accumulate(b, db);
    }
  });
}

inline Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  return detail::make_result(Tensor::scalar(s), {x}, [x](const Tensor& g) {
    detail::accumulate(x, Tensor(x.shape(), g[0]));
  });
}

inline Var mean(const Var& x) {
  const std::size_t n = x.value().size();
  if (n == 0) throw ContractError("mean of an empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(n));
}

// Column means of [n x h] -> [h].
inline Var mean_rows(const Var& x) {
  detail::require_rank(x, 2, "mean_rows");
  const std::size_t n = x.shape()[0], h = x.shape()[1];
  if (n == 0) throw ContractError("mean_rows of zero rows");
  Tensor out({h});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < h; ++j) out[j] += x.value()[i * h + j];
  for (std::size_t j = 0; j < h; ++j) out[j] /= static_cast<double>(n);
  return detail::make_result(std::move(out), {x}, [x, n, h](const Tensor& g) {
    Tensor dx(x.shape());
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < h; ++j) dx[i * h + j] = g[j] / static_cast<double>(n);
    detail::accumulate(x, dx);
  });
}

inline Var l2_norm_sq(const Var& x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v * v;
  return detail::make_result(Tensor::scalar(s), {x}, [x](const Tensor& g) {
    Tensor dx(x.shape());
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = 2.0 * x.value()[i] * g[0];
    detail::accumulate(x, dx);
  });
}

inline Var leaky_relu(const Var& x, double slope = 0.2) {
  return detail::unary(
      x, [slope](double v) { return v > 0.0 ? v : slope * v; },
      [slope](double v) { return v > 0.0 ? 1.0 : slope; });
}

// Exact (erf) GELU.
inline Var gelu(const Var& x) {
  constexpr double kInvSqrt2 = 0.7071067811865475244;
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  return detail::unary(
      x, [](double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); },
      [inv_sqrt_2pi](double v) {
        return 0.5 * (1.0 + std::erf(v * kInvSqrt2)) + v * inv_sqrt_2pi * std::exp(-0.5 * v * v);
      });
}

inline Var log(const Var& x) {
  return detail::unary(x, [](double v) { return std::log(v); }, [](double v) { return 1.0 / v; });
}

// Normalizes over the last axis, then applies gain and bias of that width.
inline Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5) {
  if (x.shape().empty()) throw DimensionError("layer_norm of a scalar");
  const std::size_t n = x.shape().back();
  if (gain.shape() != Shape{n} || bias.shape() != Shape{n}) {
    throw DimensionError("layer_norm: gain/bias " + shape_str(gain.shape()) + "/" + shape_str(bias.shape()) +
                         " do not match width " + std::to_string(n));
  }
  const std::size_t rows = x.value().size() / n;
  Tensor xhat(x.shape());
  std::vector<double> inv_std(rows);
  Tensor out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xp = x.value().data() + r * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += xp[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (xp[j] - mu) * (xp[j] - mu);
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[r * n + j] = (xp[j] - mu) * inv_std[r];
      out[r * n + j] = xhat[r * n + j] * gain.value()[j] + bias.value()[j];
    }
  }
  return detail::make_result(
      std::move(out), {x, gain, bias},
      [x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std), rows, n](const Tensor& g) {
        if (gain.requires_grad() || bias.requires_grad()) {
          Tensor dg({n}), db({n});
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < n; ++j) {
              dg[j] += g[r * n + j] * xhat[r * n + j];
              db[j] += g[r * n + j];
            }
          detail::accumulate(gain, dg);
          detail::accumulate(bias, db);
        }
        if (x.requires_grad()) {
          Tensor dx(x.shape());
          const double inv_n = 1.0 / static_cast<double>(n);
          for (std::size_t r = 0; r < rows; ++r) {
            double s1 = 0.0, s2 = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              const double dxh = g[r * n + j] * gain.value()[j];
              s1 += dxh;
              s2 += dxh * xhat[r * n + j];
            }
            for (std::size_t j = 0; j < n; ++j) {
              const double dxh = g[r * n + j] * gain.value()[j];
              dx[r * n + j] = inv_std[r] * (dxh - inv_n * s1 - xhat[r * n + j] * inv_n * s2);
            }
          }
          detail::accumulate(x, dx);
        }
      });
}

// Inverted dropout: kept units are scaled by 1/(1-rate) in training; identity
// in evaluation mode. Draws one uniform per element from rng in training.
inline Var dropout(const Var& x, double rate, Rng& rng, Mode mode) {
  if (mode == Mode::kEval || rate <= 0.0) return x;
  if (rate >= 1.0) throw ContractError("dropout rate must be < 1");
  const double keep_scale = 1.0 / (1.0 - rate);
  Tensor mask(x.shape());
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    mask[i] = rng.uniform() < rate ? 0.0 : keep_scale;
    out[i] = x.value()[i] * mask[i];
  }
  return detail::make_result(std::move(out), {x}, [x, mask = std::move(mask)](const Tensor& g) {
    Tensor dx(x.shape());
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = g[i] * mask[i];
    detail::accumulate(x, dx);
  });
}

namespace detail {
struct AxisSplit {
  std::size_t outer, count, inner;
};

inline AxisSplit split_axis(const Shape& s, int axis, const char* op) {
  const int rank = static_cast<int>(s.size());
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) throw DimensionError(std::string(op) + ": axis out of range for " + shape_str(s));
  AxisSplit out{1, s[static_cast<std::size_t>(axis)], 1};
  for (int i = 0; i < axis; ++i) out.outer *= s[static_cast<std::size_t>(i)];
  for (int i = axis + 1; i < rank; ++i) out.inner *= s[static_cast<std::size_t>(i)];
  if (out.count == 0) throw DimensionError(std::string(op) + ": empty axis");
  return out;
}
}  // namespace detail

// Max-subtracted softmax along one axis.
inline Var softmax(const Var& logits, int axis = -1) {
  const auto [outer, c, inner] = detail::split_axis(logits.shape(), axis, "softmax");
  Tensor out(logits.shape());
  const double* xp = logits.value().data();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * c * inner + in;
      double mx = xp[base];
      for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, xp[base + j * inner]);
      double z = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        const double e = std::exp(xp[base + j * inner] - mx);
        out[base + j * inner] = e;
        z += e;
      }
      for (std::size_t j = 0; j < c; ++j) out[base + j * inner] /= z;
    }
  Tensor probs = out;
  return detail::make_result(std::move(out), {logits},
                             [logits, probs = std::move(probs), outer, c, inner](const Tensor& g) {
                               Tensor dx(logits.shape());
                               for (std::size_t o = 0; o < outer; ++o)
                                 for (std::size_t in = 0; in < inner; ++in) {
                                   const std::size_t base = o * c * inner + in;
                                   double dot = 0.0;
                                   for (std::size_t j = 0; j < c; ++j)
                                     dot += g[base + j * inner] * probs[base + j * inner];
                                   for (std::size_t j = 0; j < c; ++j) {
                                     const std::size_t idx = base + j * inner;
                                     dx[idx] = probs[idx] * (g[idx] - dot);
                                   }
                                 }
                               detail::accumulate(logits, dx);
                             });
}

namespace detail {
inline double log_sum_exp(const double* row, std::size_t begin, std::size_t end) {
  double mx = row[begin];
  for (std::size_t j = begin + 1; j < end; ++j) mx = std::max(mx, row[j]);
  double z = 0.0;
  for (std::size_t j = begin; j < end; ++j) z += std::exp(row[j] - mx);
  return mx + std::log(z);
}
}  // namespace detail

// Row-wise log-softmax of [b x c].
inline Var log_softmax(const Var& logits) {
  detail::require_rank(logits, 2, "log_softmax");
  const std::size_t b = logits.shape()[0], c = logits.shape()[1];
  Tensor out(logits.shape());
  for (std::size_t i = 0; i < b; ++i) {
    const double* row = logits.value().data() + i * c;
    const double lse = detail::log_sum_exp(row, 0, c);
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = row[j] - lse;
  }
  Tensor saved = out;
  return detail::make_result(std::move(out), {logits}, [logits, saved = std::move(saved), b, c](const Tensor& g) {
    Tensor dx(logits.shape());
    for (std::size_t i = 0; i < b; ++i) {
      double gs = 0.0;
      for (std::size_t j = 0; j < c; ++j) gs += g[i * c + j];
      for (std::size_t j = 0; j < c; ++j) dx[i * c + j] = g[i * c + j] - std::exp(saved[i * c + j]) * gs;
    }
    detail::accumulate(logits, dx);
  });
}

// log p(column | row) for each row of [b x c] logits -> [b].
inline Var log_prob_of_class(const Var& logits, std::size_t column) {
  detail::require_rank(logits, 2, "log_prob_of_class");
  const std::size_t b = logits.shape()[0], c = logits.shape()[1];
  if (column >= c) throw IndexError("class column " + std::to_string(column) + " out of range for width " + std::to_string(c));
  Tensor out({b});
  Tensor probs(logits.shape());
  for (std::size_t i = 0; i < b; ++i) {
    const double* row = logits.value().data() + i * c;
    const double lse = detail::log_sum_exp(row, 0, c);
    out[i] = row[column] - lse;
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] = std::exp(row[j] - lse);
  }
  return detail::make_result(std::move(out), {logits}, [logits, probs = std::move(probs), b, c, column](const Tensor& g) {
    Tensor dx(logits.shape());
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t j = 0; j < c; ++j) dx[i * c + j] = g[i] * ((j == column ? 1.0 : 0.0) - probs[i * c + j]);
    detail::accumulate(logits, dx);
  });
}

// log(1 - p(column | row)) for each row, computed as
// logsumexp(other columns) - logsumexp(all columns), clamped to <= 0 -> [b].
inline Var log_prob_not_class(const Var& logits, std::size_t column) {
  detail::require_rank(logits, 2, "log_prob_not_class");
  const std::size_t b = logits.shape()[0], c = logits.shape()[1];
  if (c < 2) throw DimensionError("log_prob_not_class needs at least 2 columns");
  if (column >= c) throw IndexError("class column " + std::to_string(column) + " out of range for width " + std::to_string(c));
  Tensor out({b});
  Tensor probs_all(logits.shape());
  Tensor probs_rest(logits.shape());
  std::vector<double> rest(c - 1);
  for (std::size_t i = 0; i < b; ++i) {
    const double* row = logits.value().data() + i * c;
    for (std::size_t j = 0, r = 0; j < c; ++j)
      if (j != column) rest[r++] = row[j];
    const double lse_all = detail::log_sum_exp(row, 0, c);
    const double lse_rest = detail::log_sum_exp(rest.data(), 0, c - 1);
    out[i] = std::min(lse_rest - lse_all, 0.0);
    for (std::size_t j = 0; j < c; ++j) {
      probs_all[i * c + j] = std::exp(row[j] - lse_all);
      probs_rest[i * c + j] = j == column ? 0.0 : std::exp(row[j] - lse_rest);
    }
  }
  return detail::make_result(
      std::move(out), {logits},
      [logits, pa = std::move(probs_all), pr = std::move(probs_rest), b, c](const Tensor& g) {
        Tensor dx(logits.shape());
        for (std::size_t i = 0; i < b; ++i)
          for (std::size_t j = 0; j < c; ++j) dx[i * c + j] = g[i] * (pr[i * c + j] - pa[i * c + j]);
        detail::accumulate(logits, dx);
      });
}

// Mean over rows with mask[i] of -log softmax(logits[i])[targets[i]].
// Returns 0 with zero gradient when no row is masked in.
inline Var cross_entropy_from_logits(const Var& logits, std::span<const int> targets, const std::vector<bool>& mask) {
  detail::require_rank(logits, 2, "cross_entropy_from_logits");
  const std::size_t b = logits.shape()[0], c = logits.shape()[1];
  if (targets.size() != b || mask.size() != b) {
    throw DimensionError("cross_entropy_from_logits: " + std::to_string(b) + " rows but " +
                         std::to_string(targets.size()) + " targets and " + std::to_string(mask.size()) +
                         " mask entries");
  }
  std::size_t count = 0;
  for (std::size_t i = 0; i < b; ++i) {
    if (!mask[i]) continue;
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= c) {
      throw IndexError("target " + std::to_string(targets[i]) + " out of range for " + std::to_string(c) + " classes");
    }
    ++count;
  }
  if (count == 0) return detail::make_result(Tensor::scalar(0.0), {logits}, [](const Tensor&) {});
  Tensor probs(logits.shape());
  double loss = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    if (!mask[i]) continue;
    const double* row = logits.value().data() + i * c;
    const double lse = detail::log_sum_exp(row, 0, c);
    loss -= row[targets[i]] - lse;
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] = std::exp(row[j] - lse);
  }
  const double inv = 1.0 / static_cast<double>(count);
  std::vector<int> t(targets.begin(), targets.end());
  std::vector<bool> m = mask;
  return detail::make_result(Tensor::scalar(loss * inv), {logits},
                             [logits, probs = std::move(probs), t = std::move(t), m = std::move(m), b, c,
                              inv](const Tensor& g) {
                               Tensor dx(logits.shape());
                               for (std::size_t i = 0; i < b; ++i) {
                                 if (!m[i]) continue;
                                 for (std::size_t j = 0; j < c; ++j) {
                                   const double onehot = static_cast<int>(j) == t[i] ? 1.0 : 0.0;
                                   dx[i * c + j] = g[0] * inv * (probs[i * c + j] - onehot);
                                 }
                               }
                               detail::accumulate(logits, dx);
                             });
}

// Rows of a [V x d] table selected by ids -> [n x d].
inline Var embedding(const Var& table, std::span<const int> ids) {
  detail::require_rank(table, 2, "embedding");
  const std::size_t vocab = table.shape()[0], d = table.shape()[1];
  Tensor out({ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
      throw IndexError("token id " + std::to_string(ids[i]) + " out of range for table of " + std::to_string(vocab) + " rows");
    }
    std::copy_n(table.value().data() + static_cast<std::size_t>(ids[i]) * d, d, out.data() + i * d);
  }
  std::vector<int> saved(ids.begin(), ids.end());
  return detail::make_result(std::move(out), {table}, [table, saved = std::move(saved), d](const Tensor& g) {
    Tensor& gt = table.node().ensure_grad();
    for (std::size_t i = 0; i < saved.size(); ++i) {
      double* dst = gt.data() + static_cast<std::size_t>(saved[i]) * d;
      const double* src = g.data() + i * d;
      for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
    }
  });
}

inline Var gather_rows(const Var& x, std::span<const std::size_t> rows) {
  detail::require_rank(x, 2, "gather_rows");
  const std::size_t n = x.shape()[0], d = x.shape()[1];
  Tensor out({rows.size(), d});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= n) throw IndexError("row " + std::to_string(rows[i]) + " out of range for " + std::to_string(n) + " rows");
    std::copy_n(x.value().data() + rows[i] * d, d, out.data() + i * d);
  }
  std::vector<std::size_t> saved(rows.begin(), rows.end());
  return detail::make_result(std::move(out), {x}, [x, saved = std::move(saved), d](const Tensor& g) {
    Tensor dx(x.shape());
    for (std::size_t i = 0; i < saved.size(); ++i)
      for (std::size_t j = 0; j < d; ++j) dx[saved[i] * d + j] += g[i * d + j];
    detail::accumulate(x, dx);
  });
}

inline Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return detail::make_result(std::move(out), {x}, [x](const Tensor& g) {
    detail::accumulate(x, g.reshaped(x.shape()));
  });
}

// Axis permutation for rank <= 4: out.shape[i] = x.shape[perm[i]].
inline Var permute(const Var& x, std::vector<std::size_t> perm) {
  const Shape& s = x.shape();
  const std::size_t rank = s.size();
  if (perm.size() != rank || rank > 4) throw DimensionError("permute: bad permutation for " + shape_str(s));
  std::array<std::size_t, 4> dims{1, 1, 1, 1}, in_strides{0, 0, 0, 0};
  std::vector<bool> seen(rank, false);
  for (std::size_t i = 0; i < rank; ++i) {
    if (perm[i] >= rank || seen[perm[i]]) throw DimensionError("permute: invalid axis list");
    seen[perm[i]] = true;
  }
  std::vector<std::size_t> stride(rank, 1);
  for (std::size_t i = rank; i-- > 1;) stride[i - 1] = stride[i] * s[i];
  Shape out_shape(rank);
  const std::size_t pad = 4 - rank;
  for (std::size_t i = 0; i < rank; ++i) {
    out_shape[i] = s[perm[i]];
    dims[pad + i] = s[perm[i]];
    in_strides[pad + i] = stride[perm[i]];
  }
  auto run = [dims, in_strides](const double* src, double* dst, bool scatter) {
    std::size_t o = 0;
    for (std::size_t a = 0; a < dims[0]; ++a)
      for (std::size_t b = 0; b < dims[1]; ++b)
        for (std::size_t c = 0; c < dims[2]; ++c)
          for (std::size_t d = 0; d < dims[3]; ++d, ++o) {
            const std::size_t in = a * in_strides[0] + b * in_strides[1] + c * in_strides[2] + d * in_strides[3];
            if (scatter)
              dst[in] += src[o];
            else
              dst[o] = src[in];
          }
  };
  Tensor out(out_shape);
  run(x.value().data(), out.data(), false);
  return detail::make_result(std::move(out), {x}, [x, run](const Tensor& g) {
    Tensor dx(x.shape());
    run(g.data(), dx.data(), true);
    detail::accumulate(x, dx);
  });
}

// i.i.d. standard normals, filled in row-major order.
inline Tensor sample_gaussian(Rng& rng, Shape shape) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = rng.normal();
  return t;
}

// x [n x in] * weight [in x out] + bias [out]
inline Var linear(const Var& x, const Var& weight, const Var& bias) { return add(matmul(x, weight), bias); }

}  // namespace ganlm
