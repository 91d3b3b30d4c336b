// Copyright 2026 The salsa Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Dense row-major float64 tensors with define-by-run reverse-mode
// differentiation.
//
// A Tensor is a shared handle to a TensorNode. Operations whose inputs
// require gradients record a backward closure and keep their parents alive;
// the graph is dropped together with the last handle to its root. Leaves
// accumulate gradients across backward calls until zero_grad().

#ifndef SALSA_TENSOR_HPP_
#define SALSA_TENSOR_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "salsa/error.hpp"

namespace salsa {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

struct TensorNode {
  Shape shape;
  std::vector<double> values;
  std::optional<std::vector<double>> grad;
  bool requires_grad = false;
  // Backward edge record. Empty for leaves.
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward;
  const char* op = "leaf";

  std::span<double> grad_buffer() {
    if (!grad) grad.emplace(values.size(), 0.0);
    return *grad;
  }
};

namespace detail {

inline bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}

}  // namespace detail

/// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode()) { detail::grad_mode() = false; }
  ~NoGradGuard() { detail::grad_mode() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

class Tensor {
 public:
  Tensor() = default;

  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false)
      : node_(std::make_shared<TensorNode>()) {
    if (shape_size(shape) != values.size()) {
      raise(ErrorKind::kDimension, "shape ", shape_string(shape), " holds ",
            shape_size(shape), " values, got ", values.size());
    }
    node_->shape = std::move(shape);
    node_->values = std::move(values);
    node_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const std::size_t n = shape_size(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
  }

  static Tensor full(Shape shape, double value, bool requires_grad = false) {
    const std::size_t n = shape_size(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value),
                  requires_grad);
  }

  static Tensor scalar(double value, bool requires_grad = false) {
    return Tensor({1}, {value}, requires_grad);
  }

  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows,
                       bool requires_grad = false) {
    std::vector<double> values;
    std::size_t cols = rows.size() ? rows.begin()->size() : 0;
    for (const auto& row : rows) {
      if (row.size() != cols) raise(ErrorKind::kDimension, "ragged matrix literal");
      values.insert(values.end(), row.begin(), row.end());
    }
    return Tensor({rows.size(), cols}, std::move(values), requires_grad);
  }

  static Tensor from_node(std::shared_ptr<TensorNode> node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t size() const { return node_->values.size(); }
  std::size_t rows() const { return node_->shape.at(0); }
  std::size_t cols() const { return node_->shape.at(1); }

  std::span<const double> values() const { return node_->values; }
  // Only leaves should be mutated (optimizer updates, finite differences).
  std::span<double> mutable_values() { return node_->values; }
  double operator[](std::size_t i) const { return node_->values[i]; }
  double at(std::size_t r, std::size_t c) const {
    return node_->values[r * node_->shape[1] + c];
  }

  double item() const {
    if (size() != 1) {
      raise(ErrorKind::kDimension, "item() on tensor of shape ",
            shape_string(shape()));
    }
    return node_->values[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool value) { node_->requires_grad = value; }
  bool is_leaf() const { return !node_->backward; }

  const std::optional<std::vector<double>>& grad() const { return node_->grad; }
  void zero_grad() { node_->grad.reset(); }

  /// Gradient value i, treating an absent gradient as zero.
  double grad_at(std::size_t i) const {
    return node_->grad ? (*node_->grad)[i] : 0.0;
  }

  /// Deep copy of the values as a fresh leaf.
  Tensor clone(bool requires_grad = false) const {
    return Tensor(shape(), node_->values, requires_grad);
  }

  TensorNode& node() const { return *node_; }
  const std::shared_ptr<TensorNode>& node_ptr() const { return node_; }

  void backward() const;

 private:
  std::shared_ptr<TensorNode> node_;
};

namespace detail {

inline Tensor make_result(Shape shape, std::vector<double> values,
                          std::initializer_list<const Tensor*> parents,
                          std::function<void(TensorNode&)> backward,
                          const char* op) {
  Tensor out(std::move(shape), std::move(values));
  if (!grad_mode()) return out;
  bool needs = false;
  for (const Tensor* p : parents) needs = needs || p->requires_grad();
  if (!needs) return out;
  TensorNode& node = out.node();
  node.requires_grad = true;
  node.op = op;
  for (const Tensor* p : parents) node.parents.push_back(p->node_ptr());
  node.backward = std::move(backward);
  return out;
}

inline Tensor make_result(Shape shape, std::vector<double> values,
                          const std::vector<Tensor>& parents,
                          std::function<void(TensorNode&)> backward,
                          const char* op) {
  Tensor out(std::move(shape), std::move(values));
  if (!grad_mode()) return out;
  bool needs = false;
  for (const Tensor& p : parents) needs = needs || p.requires_grad();
  if (!needs) return out;
  TensorNode& node = out.node();
  node.requires_grad = true;
  node.op = op;
  for (const Tensor& p : parents) node.parents.push_back(p.node_ptr());
  node.backward = std::move(backward);
  return out;
}

inline void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.shape().size() != rank) {
    raise(ErrorKind::kDimension, op, " expects rank ", rank, ", got ",
          shape_string(t.shape()));
  }
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    raise(ErrorKind::kDimension, op, " shape mismatch: ", shape_string(a.shape()),
          " vs ", shape_string(b.shape()));
  }
}

// c[m,n] += a[m,k] * b[k,n]
inline void gemm_nn(const double* a, const double* b, double* c, std::size_t m,
                    std::size_t k, std::size_t n) {
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

// c[k,n] += a[m,k]^T * b[m,n]
inline void gemm_tn(const double* a, const double* b, double* c, std::size_t m,
                    std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    const double* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      double* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

inline std::vector<double> transposed(const double* a, std::size_t rows,
                                      std::size_t cols) {
  std::vector<double> out(rows * cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[j * rows + i] = a[i * cols + j];
  return out;
}

}  // namespace detail

inline void Tensor::backward() const {
  if (size() != 1) {
    raise(ErrorKind::kDimension, "backward() needs a scalar root, got ",
          shape_string(shape()));
  }
  if (!requires_grad()) return;

  // Iterative post-order DFS; every node enters the order exactly once.
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> visited;
  std::vector<std::pair<TensorNode*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorNode* parent = node->parents[next++].get();
      if (parent->requires_grad && !visited.count(parent)) {
        visited.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode* node = *it;
    if (node->backward && node->grad) node->backward(*node);
  }
}

// ---------------------------------------------------------------------------
// Linear algebra

/// a[m,k] x b[k,n] -> [m,n]
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  detail::require_rank(a, 2, "matmul");
  detail::require_rank(b, 2, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    raise(ErrorKind::kDimension, "matmul shape mismatch: ",
          shape_string(a.shape()), " x ", shape_string(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  detail::gemm_nn(a.values().data(), b.values().data(), out.data(), m, k, n);
  return detail::make_result(
      {m, n}, std::move(out), {&a, &b},
      [m, k, n](TensorNode& self) {
        TensorNode& pa = *self.parents[0];
        TensorNode& pb = *self.parents[1];
        const double* dc = self.grad->data();
        if (pa.requires_grad) {
          // dA = dC * B^T
          auto bt = detail::transposed(pb.values.data(), k, n);
          detail::gemm_nn(dc, bt.data(), pa.grad_buffer().data(), m, n, k);
        }
        if (pb.requires_grad) {
          // dB = A^T * dC
          detail::gemm_tn(pa.values.data(), dc, pb.grad_buffer().data(), m, k, n);
        }
      },
      "matmul");
}

/// a[m,k] x b[n,k]^T -> [m,n]. Linear layers store weights as [out, in].
inline Tensor matmul_transposed(const Tensor& a, const Tensor& b) {
  detail::require_rank(a, 2, "matmul_transposed");
  detail::require_rank(b, 2, "matmul_transposed");
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) {
    raise(ErrorKind::kDimension, "matmul_transposed shape mismatch: ",
          shape_string(a.shape()), " x ", shape_string(b.shape()), "^T");
  }
  std::vector<double> out(m * n, 0.0);
  auto bt = detail::transposed(b.values().data(), n, k);
  detail::gemm_nn(a.values().data(), bt.data(), out.data(), m, k, n);
  return detail::make_result(
      {m, n}, std::move(out), {&a, &b},
      [m, k, n](TensorNode& self) {
        TensorNode& pa = *self.parents[0];
        TensorNode& pb = *self.parents[1];
        const double* dc = self.grad->data();
        if (pa.requires_grad) {
          // dA = dC * B
          detail::gemm_nn(dc, pb.values.data(), pa.grad_buffer().data(), m, n, k);
        }
        if (pb.requires_grad) {
          // dB = dC^T * A
          detail::gemm_tn(dc, pa.values.data(), pb.grad_buffer().data(), m, n, k);
        }
      },
      "matmul_transposed");
}

inline Tensor transpose(const Tensor& a) {
  detail::require_rank(a, 2, "transpose");
  const std::size_t m = a.rows(), n = a.cols();
  return detail::make_result(
      {n, m}, detail::transposed(a.values().data(), m, n), {&a},
      [m, n](TensorNode& self) {
        TensorNode& pa = *self.parents[0];
        auto g = pa.grad_buffer();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) g[i * n + j] += (*self.grad)[j * m + i];
      },
      "transpose");
}

// ---------------------------------------------------------------------------
// Elementwise

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return detail::make_result(
      a.shape(), std::move(out), {&a, &b},
      [](TensorNode& self) {
        for (auto& parent : self.parents) {
          if (!parent->requires_grad) continue;
          auto g = parent->grad_buffer();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += (*self.grad)[i];
        }
      },
      "add");
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return detail::make_result(
      a.shape(), std::move(out), {&a, &b},
      [](TensorNode& self) {
        for (std::size_t p = 0; p < 2; ++p) {
          TensorNode& parent = *self.parents[p];
          if (!parent.requires_grad) continue;
          const double sign = p == 0 ? 1.0 : -1.0;
          auto g = parent.grad_buffer();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign * (*self.grad)[i];
        }
      },
      "sub");
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return detail::make_result(
      a.shape(), std::move(out), {&a, &b},
      [](TensorNode& self) {
        TensorNode& pa = *self.parents[0];
        TensorNode& pb = *self.parents[1];
        const auto& dc = *self.grad;
        if (pa.requires_grad) {
          auto g = pa.grad_buffer();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += dc[i] * pb.values[i];
        }
        if (pb.requires_grad) {
          auto g = pb.grad_buffer();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += dc[i] * pa.values[i];
        }
      },
      "mul");
}

inline Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * factor;
  return detail::make_result(
      a.shape(), std::move(out), {&a},
      [factor](TensorNode& self) {
        auto g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * (*self.grad)[i];
      },
      "scale");
}

/// x[m,n] + bias[n] broadcast over rows.
inline Tensor add_rowwise(const Tensor& x, const Tensor& bias) {
  detail::require_rank(x, 2, "add_rowwise");
  const std::size_t m = x.rows(), n = x.cols();
  if (bias.size() != n) {
    raise(ErrorKind::kDimension, "add_rowwise bias ", shape_string(bias.shape()),
          " does not match ", shape_string(x.shape()));
  }
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = x[i * n + j] + bias[j];
  return detail::make_result(
      x.shape(), std::move(out), {&x, &bias},
      [m, n](TensorNode& self) {
        TensorNode& px = *self.parents[0];
        TensorNode& pb = *self.parents[1];
        const auto& dc = *self.grad;
        if (px.requires_grad) {
          auto g = px.grad_buffer();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += dc[i];
        }
        if (pb.requires_grad) {
          auto g = pb.grad_buffer();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) g[j] += dc[i * n + j];
        }
      },
      "add_rowwise");
}

/// GELU, tanh approximation.
inline Tensor gelu(const Tensor& x) {
  constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double kA = 0.044715;
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = x[i];
    out[i] = 0.5 * v * (1.0 + std::tanh(kC * (v + kA * v * v * v)));
  }
  return detail::make_result(
      x.shape(), std::move(out), {&x},
      [](TensorNode& self) {
        TensorNode& px = *self.parents[0];
        auto g = px.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double v = px.values[i];
          const double t = std::tanh(kC * (v + kA * v * v * v));
          const double d = 0.5 * (1.0 + t) +
                           0.5 * v * (1.0 - t * t) * kC * (1.0 + 3.0 * kA * v * v);
          g[i] += d * (*self.grad)[i];
        }
      },
      "gelu");
}

inline double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Tensor sigmoid(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = logistic(x[i]);
  return detail::make_result(
      x.shape(), std::move(out), {&x},
      [](TensorNode& self) {
        auto g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double y = self.values[i];
          g[i] += y * (1.0 - y) * (*self.grad)[i];
        }
      },
      "sigmoid");
}

// ---------------------------------------------------------------------------
// Normalization

/// Softmax along `axis`, max-subtracted.
inline Tensor softmax(const Tensor& x, std::size_t axis) {
  const Shape& shape = x.shape();
  if (axis >= shape.size()) {
    raise(ErrorKind::kDimension, "softmax axis ", axis, " invalid for ",
          shape_string(shape));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= shape[d];
  for (std::size_t d = axis + 1; d < shape.size(); ++d) inner *= shape[d];
  const std::size_t n = shape[axis];

  std::vector<double> out(x.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, x[base + i * inner]);
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double e = std::exp(x[base + i * inner] - mx);
        out[base + i * inner] = e;
        sum += e;
      }
      for (std::size_t i = 0; i < n; ++i) out[base + i * inner] /= sum;
    }
  }
  return detail::make_result(
      shape, std::move(out), {&x},
      [outer, inner, n](TensorNode& self) {
        auto g = self.parents[0]->grad_buffer();
        const auto& y = self.values;
        const auto& dy = *self.grad;
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = o * n * inner + in;
            double dot = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
              const std::size_t k = base + i * inner;
              dot += dy[k] * y[k];
            }
            for (std::size_t i = 0; i < n; ++i) {
              const std::size_t k = base + i * inner;
              g[k] += y[k] * (dy[k] - dot);
            }
          }
        }
      },
      "softmax");
}

/// Sets entries above the diagonal of a square score matrix to -inf.
inline Tensor causal_mask(const Tensor& scores) {
  detail::require_rank(scores, 2, "causal_mask");
  const std::size_t t = scores.rows();
  if (scores.cols() != t) {
    raise(ErrorKind::kDimension, "causal_mask needs a square matrix, got ",
          shape_string(scores.shape()));
  }
  std::vector<double> out(scores.values().begin(), scores.values().end());
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = i + 1; j < t; ++j)
      out[i * t + j] = -std::numeric_limits<double>::infinity();
  return detail::make_result(
      scores.shape(), std::move(out), {&scores},
      [t](TensorNode& self) {
        auto g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < t; ++i)
          for (std::size_t j = 0; j <= i; ++j) g[i * t + j] += (*self.grad)[i * t + j];
      },
      "causal_mask");
}

inline constexpr double kLayerNormEpsilon = 1e-5;

/// Per-row normalization over the last axis followed by gain * x + bias.
inline Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  detail::require_rank(x, 2, "layer_norm");
  const std::size_t m = x.rows(), n = x.cols();
  if (gain.size() != n || bias.size() != n) {
    raise(ErrorKind::kDimension, "layer_norm gain ", shape_string(gain.shape()),
          " / bias ", shape_string(bias.shape()), " do not match ",
          shape_string(x.shape()));
  }
  std::vector<double> out(m * n), xhat(m * n), rstd(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = x.values().data() + i * n;
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += row[j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<double>(n);
    rstd[i] = 1.0 / std::sqrt(var + kLayerNormEpsilon);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (row[j] - mean) * rstd[i];
      out[i * n + j] = xhat[i * n + j] * gain[j] + bias[j];
    }
  }
  return detail::make_result(
      x.shape(), std::move(out), {&x, &gain, &bias},
      [m, n, xhat = std::move(xhat), rstd = std::move(rstd)](TensorNode& self) {
        TensorNode& px = *self.parents[0];
        TensorNode& pg = *self.parents[1];
        TensorNode& pb = *self.parents[2];
        const auto& dy = *self.grad;
        if (pg.requires_grad) {
          auto g = pg.grad_buffer();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) g[j] += dy[i * n + j] * xhat[i * n + j];
        }
        if (pb.requires_grad) {
          auto g = pb.grad_buffer();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) g[j] += dy[i * n + j];
        }
        if (px.requires_grad) {
          auto g = px.grad_buffer();
          const double inv_n = 1.0 / static_cast<double>(n);
          for (std::size_t i = 0; i < m; ++i) {
            double sum_d = 0.0, sum_dx = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              const double d = dy[i * n + j] * pg.values[j];
              sum_d += d;
              sum_dx += d * xhat[i * n + j];
            }
            for (std::size_t j = 0; j < n; ++j) {
              const double d = dy[i * n + j] * pg.values[j];
              g[i * n + j] +=
                  rstd[i] * (d - sum_d * inv_n - xhat[i * n + j] * sum_dx * inv_n);
            }
          }
        }
      },
      "layer_norm");
}

// ---------------------------------------------------------------------------
// Indexing

/// Rows of `table` selected by `ids`, e.g. token embeddings.
inline Tensor gather_rows(const Tensor& table, std::span<const std::size_t> ids) {
  detail::require_rank(table, 2, "gather_rows");
  const std::size_t n = table.cols();
  std::vector<std::size_t> index(ids.begin(), ids.end());
  std::vector<double> out(index.size() * n);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= table.rows()) {
      raise(ErrorKind::kDimension, "gather_rows index ", index[i],
            " out of range for ", shape_string(table.shape()));
    }
    std::copy_n(table.values().data() + index[i] * n, n, out.data() + i * n);
  }
  const std::size_t count = index.size();
  return detail::make_result(
      {count, n}, std::move(out), {&table},
      [n, index = std::move(index)](TensorNode& self) {
        auto g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < index.size(); ++i)
          for (std::size_t j = 0; j < n; ++j) g[index[i] * n + j] += (*self.grad)[i * n + j];
      },
      "gather_rows");
}

/// Leading `count` rows of `x`.
inline Tensor first_rows(const Tensor& x, std::size_t count) {
  detail::require_rank(x, 2, "first_rows");
  if (count > x.rows()) {
    raise(ErrorKind::kDimension, "first_rows(", count, ") on ",
          shape_string(x.shape()));
  }
  std::vector<std::size_t> ids(count);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  return gather_rows(x, ids);
}

/// Entries (row, cols[0]), (row, cols[1]), ... as a [1, |cols|] tensor.
inline Tensor take(const Tensor& x, std::size_t row, std::span<const std::size_t> cols) {
  detail::require_rank(x, 2, "take");
  if (row >= x.rows()) {
    raise(ErrorKind::kDimension, "take row ", row, " out of range for ",
          shape_string(x.shape()));
  }
  const std::size_t n = x.cols();
  std::vector<std::size_t> index(cols.begin(), cols.end());
  std::vector<double> out(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= n) {
      raise(ErrorKind::kDimension, "take column ", index[i], " out of range for ",
            shape_string(x.shape()));
    }
    out[i] = x[row * n + index[i]];
  }
  const std::size_t count = index.size();
  return detail::make_result(
      {1, count}, std::move(out), {&x},
      [row, n, index = std::move(index)](TensorNode& self) {
        auto g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < index.size(); ++i) g[row * n + index[i]] += (*self.grad)[i];
      },
      "take");
}

inline Tensor slice_columns(const Tensor& x, std::size_t start, std::size_t count) {
  detail::require_rank(x, 2, "slice_columns");
  const std::size_t m = x.rows(), n = x.cols();
  if (start + count > n) {
    raise(ErrorKind::kDimension, "slice_columns [", start, ",", start + count,
          ") out of range for ", shape_string(x.shape()));
  }
  std::vector<double> out(m * count);
  for (std::size_t i = 0; i < m; ++i)
    std::copy_n(x.values().data() + i * n + start, count, out.data() + i * count);
  return detail::make_result(
      {m, count}, std::move(out), {&x},
      [m, n, start, count](TensorNode& self) {
        auto g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < count; ++j)
            g[i * n + start + j] += (*self.grad)[i * count + j];
      },
      "slice_columns");
}

inline Tensor concat_columns(const std::vector<Tensor>& parts) {
  if (parts.empty()) raise(ErrorKind::kDimension, "concat_columns of nothing");
  const std::size_t m = parts.front().rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    detail::require_rank(p, 2, "concat_columns");
    if (p.rows() != m) {
      raise(ErrorKind::kDimension, "concat_columns row mismatch: ",
            shape_string(p.shape()), " vs ", m, " rows");
    }
    widths.push_back(p.cols());
    total += p.cols();
  }
  std::vector<double> out(m * total);
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(p.values().data() + i * p.cols(), p.cols(),
                  out.data() + i * total + offset);
    offset += p.cols();
  }
  return detail::make_result(
      {m, total}, std::move(out), parts,
      [m, total, widths = std::move(widths)](TensorNode& self) {
        std::size_t offset = 0;
        for (std::size_t p = 0; p < widths.size(); ++p) {
          TensorNode& parent = *self.parents[p];
          if (parent.requires_grad) {
            auto g = parent.grad_buffer();
            for (std::size_t i = 0; i < m; ++i)
              for (std::size_t j = 0; j < widths[p]; ++j)
                g[i * widths[p] + j] += (*self.grad)[i * total + offset + j];
          }
          offset += widths[p];
        }
      },
      "concat_columns");
}

inline Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) raise(ErrorKind::kDimension, "concat_rows of nothing");
  const std::size_t n = parts.front().cols();
  std::vector<double> out;
  std::size_t rows = 0;
  for (const Tensor& p : parts) {
    detail::require_rank(p, 2, "concat_rows");
    if (p.cols() != n) {
      raise(ErrorKind::kDimension, "concat_rows column mismatch: ",
            shape_string(p.shape()), " vs ", n, " columns");
    }
    out.insert(out.end(), p.values().begin(), p.values().end());
    rows += p.rows();
  }
  return detail::make_result(
      {rows, n}, std::move(out), parts,
      [](TensorNode& self) {
        std::size_t offset = 0;
        for (auto& parent : self.parents) {
          const std::size_t len = parent->values.size();
          if (parent->requires_grad) {
            auto g = parent->grad_buffer();
            for (std::size_t i = 0; i < len; ++i) g[i] += (*self.grad)[offset + i];
          }
          offset += len;
        }
      },
      "concat_rows");
}

// ---------------------------------------------------------------------------
// Reductions and losses

inline Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.values()) total += v;
  return detail::make_result(
      {1}, {total}, {&x},
      [](TensorNode& self) {
        auto g = self.parents[0]->grad_buffer();
        const double d = (*self.grad)[0];
        for (double& v : g) v += d;
      },
      "sum");
}

inline Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

inline constexpr double kLogClamp = 1e-12;

/// -(1/N) sum_i sum_c y[i,c] log(max(p[i,c], 1e-12)) over N rows.
inline Tensor cross_entropy(const Tensor& probs, const Tensor& one_hot) {
  detail::require_rank(probs, 2, "cross_entropy");
  detail::require_same_shape(probs, one_hot, "cross_entropy");
  const std::size_t rows = probs.rows();
  const double inv_n = 1.0 / static_cast<double>(rows);
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (one_hot[i] != 0.0) total -= one_hot[i] * std::log(std::max(probs[i], kLogClamp));
  }
  return detail::make_result(
      {1}, {total * inv_n}, {&probs, &one_hot},
      [inv_n](TensorNode& self) {
        TensorNode& pp = *self.parents[0];
        TensorNode& py = *self.parents[1];
        const double d = (*self.grad)[0];
        if (pp.requires_grad) {
          auto g = pp.grad_buffer();
          for (std::size_t i = 0; i < g.size(); ++i) {
            if (py.values[i] != 0.0 && pp.values[i] > kLogClamp)
              g[i] -= d * inv_n * py.values[i] / pp.values[i];
          }
        }
        if (py.requires_grad) {
          auto g = py.grad_buffer();
          for (std::size_t i = 0; i < g.size(); ++i)
            g[i] -= d * inv_n * std::log(std::max(pp.values[i], kLogClamp));
        }
      },
      "cross_entropy");
}

inline Tensor one_hot(std::span<const std::size_t> labels, std::size_t classes) {
  std::vector<double> values(labels.size() * classes, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= classes) {
      raise(ErrorKind::kDimension, "one_hot label ", labels[i], " >= ", classes);
    }
    values[i * classes + labels[i]] = 1.0;
  }
  return Tensor({labels.size(), classes}, std::move(values));
}

}  // namespace salsa

#endif  // SALSA_TENSOR_HPP_
