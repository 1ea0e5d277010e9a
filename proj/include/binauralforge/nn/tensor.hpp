// Copyright 2026 The BinauralForge Authors
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

#ifndef BINAURALFORGE_NN_TENSOR_HPP
#define BINAURALFORGE_NN_TENSOR_HPP

#include <cblas.h>

#include <algorithm>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <unordered_set>
#include <vector>

#include "binauralforge/common.hpp"

namespace bf::nn {

using Shape = std::vector<int64_t>;

inline int64_t numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), int64_t{1},
                         std::multiplies<int64_t>());
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i)
    out += (i ? "," : "") + std::to_string(s[i]);
  return out + "]";
}

inline void check_same_shape(const Shape& a, const Shape& b,
                             const char* op) {
  if (a != b)
    throw RuntimeError(std::string(op) + ": shape mismatch " + shape_str(a) +
                       " vs " + shape_str(b));
}

// --- BLAS-backed GEMM (row-major) -----------------------------------------

inline void gemm(bool ta, bool tb, int m, int n, int k, float alpha,
                 const float* a, int lda, const float* b, int ldb, float beta,
                 float* c, int ldc) {
  cblas_sgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans,
              tb ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb,
              beta, c, ldc);
}
inline void gemm(bool ta, bool tb, int m, int n, int k, double alpha,
                 const double* a, int lda, const double* b, int ldb,
                 double beta, double* c, int ldc) {
  cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans,
              tb ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb,
              beta, c, ldc);
}

// --- Reverse-mode autodiff tensor ------------------------------------------
//
// Define-by-run graph of shared nodes. backward() runs the tape in reverse
// topological order, accumulating into .grad of every requires-grad leaf.

template <class T>
class Tensor {
 public:
  struct Node {
    Shape shape;
    std::vector<T> val;
    std::vector<T> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;  // pushes this->grad into parents

    void ensure_grad() {
      if (grad.empty()) grad.assign(val.size(), T(0));
    }
  };

  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  static Tensor zeros(const Shape& shape, bool requires_grad = false) {
    auto n = std::make_shared<Node>();
    n->shape = shape;
    n->val.assign(static_cast<size_t>(numel(shape)), T(0));
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }
  static Tensor from_values(const Shape& shape, std::vector<T> values,
                            bool requires_grad = false) {
    check(static_cast<int64_t>(values.size()) == numel(shape),
          "Tensor: value count does not match shape " + shape_str(shape));
    auto n = std::make_shared<Node>();
    n->shape = shape;
    n->val = std::move(values);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }
  static Tensor randn(const Shape& shape, Rng& rng, T stddev = T(1),
                      bool requires_grad = false) {
    auto t = zeros(shape, requires_grad);
    for (auto& v : t.node_->val) v = static_cast<T>(rng.normal()) * stddev;
    return t;
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int64_t size() const { return static_cast<int64_t>(node_->val.size()); }
  std::vector<T>& values() { return node_->val; }
  const std::vector<T>& values() const { return node_->val; }
  std::vector<T>& grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  bool requires_grad() const { return node_->requires_grad; }
  std::shared_ptr<Node> node() const { return node_; }

  T item() const {
    check(node_->val.size() == 1, "Tensor::item: not a scalar");
    return node_->val[0];
  }

  void zero_grad() { node_->grad.assign(node_->val.size(), T(0)); }

  // Reverse-mode sweep from a scalar output.
  void backward() {
    check(node_->val.size() == 1, "backward: output must be scalar");
    std::vector<std::shared_ptr<Node>> order;
    std::unordered_set<Node*> seen;
    std::function<void(const std::shared_ptr<Node>&)> visit =
        [&](const std::shared_ptr<Node>& n) {
          if (!n || seen.count(n.get())) return;
          seen.insert(n.get());
          for (auto& p : n->parents) visit(p);
          order.push_back(n);
        };
    visit(node_);
    node_->ensure_grad();
    node_->grad[0] = T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      auto& n = **it;
      if (n.backprop && !n.grad.empty()) n.backprop(n);
    }
  }

  // Builds a result node; helper for op implementations.
  static Tensor make_op(Shape shape, std::vector<std::shared_ptr<Node>> parents,
                        std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->val.assign(static_cast<size_t>(numel(n->shape)), T(0));
    bool needs = false;
    for (auto& p : parents) needs = needs || (p && p->requires_grad);
    n->requires_grad = needs;
    if (needs) {
      n->parents = std::move(parents);
      n->backprop = std::move(backprop);
    }
    return Tensor(std::move(n));
  }

 private:
  std::shared_ptr<Node> node_;
};

// --- Elementwise ops -------------------------------------------------------

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a.shape(), b.shape(), "add");
  auto an = a.node(), bn = b.node();
  auto out = Tensor<T>::make_op(
      a.shape(), {an, bn}, [an, bn](typename Tensor<T>::Node& n) {
        if (an->requires_grad) {
          an->ensure_grad();
          for (size_t i = 0; i < n.grad.size(); ++i) an->grad[i] += n.grad[i];
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (size_t i = 0; i < n.grad.size(); ++i) bn->grad[i] += n.grad[i];
        }
      });
  auto& v = out.values();
  for (size_t i = 0; i < v.size(); ++i) v[i] = an->val[i] + bn->val[i];
  return out;
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a.shape(), b.shape(), "sub");
  auto an = a.node(), bn = b.node();
  auto out = Tensor<T>::make_op(
      a.shape(), {an, bn}, [an, bn](typename Tensor<T>::Node& n) {
        if (an->requires_grad) {
          an->ensure_grad();
          for (size_t i = 0; i < n.grad.size(); ++i) an->grad[i] += n.grad[i];
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (size_t i = 0; i < n.grad.size(); ++i) bn->grad[i] -= n.grad[i];
        }
      });
  auto& v = out.values();
  for (size_t i = 0; i < v.size(); ++i) v[i] = an->val[i] - bn->val[i];
  return out;
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a.shape(), b.shape(), "mul");
  auto an = a.node(), bn = b.node();
  auto out = Tensor<T>::make_op(
      a.shape(), {an, bn}, [an, bn](typename Tensor<T>::Node& n) {
        if (an->requires_grad) {
          an->ensure_grad();
          for (size_t i = 0; i < n.grad.size(); ++i)
            an->grad[i] += n.grad[i] * bn->val[i];
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (size_t i = 0; i < n.grad.size(); ++i)
            bn->grad[i] += n.grad[i] * an->val[i];
        }
      });
  auto& v = out.values();
  for (size_t i = 0; i < v.size(); ++i) v[i] = an->val[i] * bn->val[i];
  return out;
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, T s) {
  auto an = a.node();
  auto out = Tensor<T>::make_op(
      a.shape(), {an}, [an, s](typename Tensor<T>::Node& n) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) an->grad[i] += s * n.grad[i];
      });
  auto& v = out.values();
  for (size_t i = 0; i < v.size(); ++i) v[i] = s * an->val[i];
  return out;
}

template <class T>
Tensor<T> silu(const Tensor<T>& a) {
  auto an = a.node();
  auto out = Tensor<T>::make_op(
      a.shape(), {an}, [an](typename Tensor<T>::Node& n) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) {
          const T x = an->val[i];
          const T sig = T(1) / (T(1) + std::exp(-x));
          an->grad[i] += n.grad[i] * sig * (T(1) + x * (T(1) - sig));
        }
      });
  auto& v = out.values();
  for (size_t i = 0; i < v.size(); ++i) {
    const T x = an->val[i];
    v[i] = x / (T(1) + std::exp(-x));
  }
  return out;
}

template <class T>
Tensor<T> exp_(const Tensor<T>& a) {
  auto an = a.node();
  auto out = Tensor<T>::make_op(
      a.shape(), {an}, [an](typename Tensor<T>::Node& n) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i)
          an->grad[i] += n.grad[i] * n.val[i];
      });
  auto& v = out.values();
  for (size_t i = 0; i < v.size(); ++i) v[i] = std::exp(an->val[i]);
  return out;
}

// Elementwise clamp; gradient is passed through inside the active range and
// zeroed at saturated entries.
template <class T>
Tensor<T> clamp(const Tensor<T>& a, T lo, T hi) {
  auto an = a.node();
  auto out = Tensor<T>::make_op(
      a.shape(), {an}, [an, lo, hi](typename Tensor<T>::Node& n) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i)
          if (an->val[i] > lo && an->val[i] < hi) an->grad[i] += n.grad[i];
      });
  auto& v = out.values();
  for (size_t i = 0; i < v.size(); ++i)
    v[i] = std::min(hi, std::max(lo, an->val[i]));
  return out;
}

// --- Reductions ------------------------------------------------------------

template <class T>
Tensor<T> sum(const Tensor<T>& a) {
  auto an = a.node();
  auto out = Tensor<T>::make_op(
      Shape{1}, {an}, [an](typename Tensor<T>::Node& n) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (auto& g : an->grad) g += n.grad[0];
      });
  T acc = T(0);
  for (T v : an->val) acc += v;
  out.values()[0] = acc;
  return out;
}

template <class T>
Tensor<T> mean(const Tensor<T>& a) {
  auto an = a.node();
  const T inv = T(1) / static_cast<T>(an->val.size());
  auto out = Tensor<T>::make_op(
      Shape{1}, {an}, [an, inv](typename Tensor<T>::Node& n) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (auto& g : an->grad) g += n.grad[0] * inv;
      });
  T acc = T(0);
  for (T v : an->val) acc += v;
  out.values()[0] = acc * inv;
  return out;
}

// Mean squared error between two same-shaped tensors.
template <class T>
Tensor<T> mse(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a.shape(), b.shape(), "mse");
  auto d = sub(a, b);
  return mean(mul(d, d));
}

// --- Shape ops -------------------------------------------------------------

template <class T>
Tensor<T> reshape(const Tensor<T>& a, const Shape& shape) {
  check(numel(shape) == numel(a.shape()),
        "reshape: element count mismatch " + shape_str(a.shape()) + " -> " +
            shape_str(shape));
  auto an = a.node();
  auto out = Tensor<T>::make_op(
      shape, {an}, [an](typename Tensor<T>::Node& n) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) an->grad[i] += n.grad[i];
      });
  out.values() = an->val;
  return out;
}

// Concatenation along an axis.
template <class T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
  check(!parts.empty(), "concat: no inputs");
  Shape shape = parts[0].shape();
  check(axis >= 0 && axis < static_cast<int>(shape.size()),
        "concat: bad axis");
  int64_t total = 0;
  for (const auto& p : parts) {
    check(p.shape().size() == shape.size(), "concat: rank mismatch");
    for (size_t d = 0; d < shape.size(); ++d)
      if (static_cast<int>(d) != axis)
        check(p.shape()[d] == shape[d], "concat: shape mismatch off-axis");
    total += p.shape()[axis];
  }
  shape[axis] = total;
  int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= shape[d];
  for (size_t d = axis + 1; d < shape.size(); ++d) inner *= shape[d];

  std::vector<std::shared_ptr<typename Tensor<T>::Node>> nodes;
  std::vector<int64_t> widths;
  for (const auto& p : parts) {
    nodes.push_back(p.node());
    widths.push_back(p.shape()[axis] * inner);
  }
  const int64_t out_width = total * inner;
  auto out = Tensor<T>::make_op(
      shape, {nodes.begin(), nodes.end()},
      [nodes, widths, outer, out_width](typename Tensor<T>::Node& n) {
        int64_t off = 0;
        for (size_t p = 0; p < nodes.size(); ++p) {
          if (nodes[p]->requires_grad) {
            nodes[p]->ensure_grad();
            for (int64_t o = 0; o < outer; ++o)
              for (int64_t i = 0; i < widths[p]; ++i)
                nodes[p]->grad[o * widths[p] + i] +=
                    n.grad[o * out_width + off + i];
          }
          off += widths[p];
        }
      });
  auto& v = out.values();
  int64_t off = 0;
  for (size_t p = 0; p < nodes.size(); ++p) {
    for (int64_t o = 0; o < outer; ++o)
      for (int64_t i = 0; i < widths[p]; ++i)
        v[o * out_width + off + i] = nodes[p]->val[o * widths[p] + i];
    off += widths[p];
  }
  return out;
}

// Splits along an axis into chunks of the given sizes.
template <class T>
std::vector<Tensor<T>> split(const Tensor<T>& a,
                             const std::vector<int64_t>& sizes, int axis) {
  const Shape& shape = a.shape();
  check(axis >= 0 && axis < static_cast<int>(shape.size()), "split: bad axis");
  int64_t total = 0;
  for (int64_t s : sizes) total += s;
  check(total == shape[axis], "split: sizes do not cover axis");
  int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= shape[d];
  for (size_t d = axis + 1; d < shape.size(); ++d) inner *= shape[d];
  const int64_t in_width = shape[axis] * inner;

  std::vector<Tensor<T>> out;
  auto an = a.node();
  int64_t off = 0;
  for (int64_t s : sizes) {
    Shape ps = shape;
    ps[axis] = s;
    const int64_t width = s * inner;
    const int64_t this_off = off;
    auto piece = Tensor<T>::make_op(
        ps, {an},
        [an, outer, width, in_width, this_off](typename Tensor<T>::Node& n) {
          if (!an->requires_grad) return;
          an->ensure_grad();
          for (int64_t o = 0; o < outer; ++o)
            for (int64_t i = 0; i < width; ++i)
              an->grad[o * in_width + this_off + i] += n.grad[o * width + i];
        });
    auto& v = piece.values();
    for (int64_t o = 0; o < outer; ++o)
      for (int64_t i = 0; i < width; ++i)
        v[o * width + i] = an->val[o * in_width + this_off + i];
    out.push_back(std::move(piece));
    off += width;
  }
  return out;
}

// --- Softmax (last axis) ---------------------------------------------------

template <class T>
Tensor<T> softmax(const Tensor<T>& a) {
  const Shape& shape = a.shape();
  const int64_t cols = shape.back();
  const int64_t rows = numel(shape) / cols;
  auto an = a.node();
  auto out = Tensor<T>::make_op(
      shape, {an}, [an, rows, cols](typename Tensor<T>::Node& n) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (int64_t r = 0; r < rows; ++r) {
          const T* y = n.val.data() + r * cols;
          const T* dy = n.grad.data() + r * cols;
          T dot = T(0);
          for (int64_t c = 0; c < cols; ++c) dot += y[c] * dy[c];
          for (int64_t c = 0; c < cols; ++c)
            an->grad[r * cols + c] += y[c] * (dy[c] - dot);
        }
      });
  auto& v = out.values();
  for (int64_t r = 0; r < rows; ++r) {
    T mx = an->val[r * cols];
    for (int64_t c = 1; c < cols; ++c)
      mx = std::max(mx, an->val[r * cols + c]);
    T z = T(0);
    for (int64_t c = 0; c < cols; ++c) {
      v[r * cols + c] = std::exp(an->val[r * cols + c] - mx);
      z += v[r * cols + c];
    }
    for (int64_t c = 0; c < cols; ++c) v[r * cols + c] /= z;
  }
  return out;
}

// --- Matmul ----------------------------------------------------------------

// a [M,K] x b [K,N] -> [M,N].
template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  check(a.shape().size() == 2 && b.shape().size() == 2,
        "matmul: expected rank-2 tensors, got " + shape_str(a.shape()) +
            " and " + shape_str(b.shape()));
  const int64_t M = a.shape()[0], K = a.shape()[1];
  check(b.shape()[0] == K, "matmul: inner dim mismatch " +
                               shape_str(a.shape()) + " x " +
                               shape_str(b.shape()));
  const int64_t N = b.shape()[1];
  auto an = a.node(), bn = b.node();
  auto out = Tensor<T>::make_op(
      Shape{M, N}, {an, bn}, [an, bn, M, K, N](typename Tensor<T>::Node& n) {
        if (an->requires_grad) {
          an->ensure_grad();
          gemm(false, true, (int)M, (int)K, (int)N, T(1), n.grad.data(), (int)N,
               bn->val.data(), (int)N, T(1), an->grad.data(), (int)K);
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          gemm(true, false, (int)K, (int)N, (int)M, T(1), an->val.data(),
               (int)K, n.grad.data(), (int)N, T(1), bn->grad.data(), (int)N);
        }
      });
  gemm(false, false, (int)M, (int)N, (int)K, T(1), an->val.data(), (int)K,
       bn->val.data(), (int)N, T(0), out.values().data(), (int)N);
  return out;
}

// Adds a bias vector over the last axis: x [..., N] + b [N].
template <class T>
Tensor<T> add_row_bias(const Tensor<T>& x, const Tensor<T>& b) {
  const int64_t N = x.shape().back();
  check(b.shape() == Shape{N}, "add_row_bias: bias shape mismatch");
  const int64_t rows = numel(x.shape()) / N;
  auto xn = x.node(), bn = b.node();
  auto out = Tensor<T>::make_op(
      x.shape(), {xn, bn}, [xn, bn, rows, N](typename Tensor<T>::Node& n) {
        if (xn->requires_grad) {
          xn->ensure_grad();
          for (size_t i = 0; i < n.grad.size(); ++i) xn->grad[i] += n.grad[i];
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (int64_t r = 0; r < rows; ++r)
            for (int64_t c = 0; c < N; ++c)
              bn->grad[c] += n.grad[r * N + c];
        }
      });
  auto& v = out.values();
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t c = 0; c < N; ++c)
      v[r * N + c] = xn->val[r * N + c] + bn->val[c];
  return out;
}

// Adds a per-channel bias over [B,C,H,W].
template <class T>
Tensor<T> add_channel_bias(const Tensor<T>& x, const Tensor<T>& b) {
  check(x.shape().size() == 4, "add_channel_bias: expected [B,C,H,W]");
  const int64_t B = x.shape()[0], C = x.shape()[1],
                HW = x.shape()[2] * x.shape()[3];
  check(b.shape() == Shape{C}, "add_channel_bias: bias shape mismatch");
  auto xn = x.node(), bn = b.node();
  auto out = Tensor<T>::make_op(
      x.shape(), {xn, bn}, [xn, bn, B, C, HW](typename Tensor<T>::Node& n) {
        if (xn->requires_grad) {
          xn->ensure_grad();
          for (size_t i = 0; i < n.grad.size(); ++i) xn->grad[i] += n.grad[i];
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (int64_t i = 0; i < B; ++i)
            for (int64_t c = 0; c < C; ++c) {
              T acc = T(0);
              const T* g = n.grad.data() + (i * C + c) * HW;
              for (int64_t k = 0; k < HW; ++k) acc += g[k];
              bn->grad[c] += acc;
            }
        }
      });
  auto& v = out.values();
  for (int64_t i = 0; i < B; ++i)
    for (int64_t c = 0; c < C; ++c) {
      const T bias = bn->val[c];
      T* dst = v.data() + (i * C + c) * HW;
      const T* src = xn->val.data() + (i * C + c) * HW;
      for (int64_t k = 0; k < HW; ++k) dst[k] = src[k] + bias;
    }
  return out;
}

}  // namespace bf::nn

#endif  // BINAURALFORGE_NN_TENSOR_HPP
