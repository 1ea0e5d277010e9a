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

#ifndef BINAURALFORGE_NN_LAYERS_HPP
#define BINAURALFORGE_NN_LAYERS_HPP

#include <map>
#include <string>
#include <vector>

#include "binauralforge/nn/conv.hpp"
#include "binauralforge/nn/tensor.hpp"

namespace bf::nn {

// --- Additional ops used by layers ----------------------------------------

template <class T>
Tensor<T> transpose2d(const Tensor<T>& a) {
  check(a.shape().size() == 2, "transpose2d: expected rank-2");
  const int64_t M = a.shape()[0], N = a.shape()[1];
  auto an = a.node();
  auto out = Tensor<T>::make_op(
      Shape{N, M}, {an}, [an, M, N](typename Tensor<T>::Node& n) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (int64_t i = 0; i < M; ++i)
          for (int64_t j = 0; j < N; ++j)
            an->grad[i * N + j] += n.grad[j * M + i];
      });
  auto& v = out.values();
  for (int64_t i = 0; i < M; ++i)
    for (int64_t j = 0; j < N; ++j) v[j * M + i] = an->val[i * N + j];
  return out;
}

// Gathers rows of a table [V,d] -> [n,d]; backward scatter-adds, so gradient
// flows into embedding tables.
template <class T>
Tensor<T> select_rows(const Tensor<T>& table, const std::vector<int64_t>& idx) {
  check(table.shape().size() == 2, "select_rows: table must be rank-2");
  const int64_t V = table.shape()[0], d = table.shape()[1];
  for (int64_t i : idx)
    check(i >= 0 && i < V, "select_rows: index out of range");
  auto tn = table.node();
  auto out = Tensor<T>::make_op(
      Shape{static_cast<int64_t>(idx.size()), d}, {tn},
      [tn, idx, d](typename Tensor<T>::Node& n) {
        if (!tn->requires_grad) return;
        tn->ensure_grad();
        for (size_t r = 0; r < idx.size(); ++r)
          for (int64_t c = 0; c < d; ++c)
            tn->grad[idx[r] * d + c] += n.grad[r * d + c];
      });
  auto& v = out.values();
  for (size_t r = 0; r < idx.size(); ++r)
    for (int64_t c = 0; c < d; ++c) v[r * d + c] = tn->val[idx[r] * d + c];
  return out;
}

// --- Parameter registry ----------------------------------------------------

template <class T>
struct ParamRegistry {
  std::vector<std::pair<std::string, Tensor<T>>> params;

  Tensor<T> add(const std::string& name, Tensor<T> t) {
    for (const auto& [n, _] : params)
      check(n != name, "ParamRegistry: duplicate parameter name " + name);
    params.emplace_back(name, t);
    return t;
  }
  Tensor<T> find(const std::string& name) const {
    for (const auto& [n, t] : params)
      if (n == name) return t;
    throw RuntimeError("ParamRegistry: no parameter named " + name);
  }
  void zero_grads() {
    for (auto& [_, t] : params) t.zero_grad();
  }
  int64_t count() const {
    int64_t n = 0;
    for (const auto& [_, t] : params) n += t.size();
    return n;
  }
};

// --- Layers ----------------------------------------------------------------

template <class T>
struct Linear {
  Tensor<T> w, b;

  Linear() = default;
  Linear(ParamRegistry<T>& reg, const std::string& name, int64_t in,
         int64_t out, Rng& rng) {
    const T std = static_cast<T>(std::sqrt(2.0 / in));
    w = reg.add(name + ".w",
                Tensor<T>::randn(Shape{in, out}, rng, std, true));
    b = reg.add(name + ".b", Tensor<T>::zeros(Shape{out}, true));
  }
  // x [..., in] -> [..., out]
  Tensor<T> forward(const Tensor<T>& x) const {
    Shape s = x.shape();
    const int64_t in = s.back();
    const int64_t rows = numel(s) / in;
    auto y = matmul(reshape(x, Shape{rows, in}), w);
    y = add_row_bias(y, b);
    s.back() = w.shape()[1];
    return reshape(y, s);
  }
};

template <class T>
struct Conv2d {
  Tensor<T> w, b;
  int stride = 1, pad = 1;

  Conv2d() = default;
  Conv2d(ParamRegistry<T>& reg, const std::string& name, int64_t in,
         int64_t out, int k, int stride_, int pad_, Rng& rng)
      : stride(stride_), pad(pad_) {
    const T std = static_cast<T>(std::sqrt(2.0 / (in * k * k)));
    w = reg.add(name + ".w",
                Tensor<T>::randn(Shape{out, in, k, k}, rng, std, true));
    b = reg.add(name + ".b", Tensor<T>::zeros(Shape{out}, true));
  }
  Tensor<T> forward(const Tensor<T>& x) const {
    return add_channel_bias(conv2d(x, w, stride, pad), b);
  }
};

template <class T>
struct ConvTranspose2d {
  Tensor<T> w, b;
  int stride = 2, pad = 1;

  ConvTranspose2d() = default;
  ConvTranspose2d(ParamRegistry<T>& reg, const std::string& name, int64_t in,
                  int64_t out, int k, int stride_, int pad_, Rng& rng)
      : stride(stride_), pad(pad_) {
    const T std = static_cast<T>(std::sqrt(2.0 / (in * k * k)));
    w = reg.add(name + ".w",
                Tensor<T>::randn(Shape{in, out, k, k}, rng, std, true));
    b = reg.add(name + ".b", Tensor<T>::zeros(Shape{out}, true));
  }
  Tensor<T> forward(const Tensor<T>& x) const {
    return add_channel_bias(conv2d_transpose(x, w, stride, pad), b);
  }
};

template <class T>
struct GroupNorm {
  Tensor<T> gamma, beta;
  int groups = 8;

  GroupNorm() = default;
  GroupNorm(ParamRegistry<T>& reg, const std::string& name, int64_t channels,
            int groups_)
      : groups(groups_) {
    auto g = Tensor<T>::zeros(Shape{channels}, true);
    for (auto& v : g.values()) v = T(1);
    gamma = reg.add(name + ".gamma", g);
    beta = reg.add(name + ".beta", Tensor<T>::zeros(Shape{channels}, true));
  }
  Tensor<T> forward(const Tensor<T>& x) const {
    return group_norm(x, groups, gamma, beta);
  }
};

// Multi-head cross-attention: queries [B,Nq,d] attend over a context
// [L,d_ctx] shared across the batch. softmax(Q K^T / sqrt(dh)) V with learned
// projections of the context as K and V.
template <class T>
struct CrossAttention {
  Linear<T> wq, wk, wv, wo;
  int heads = 4;
  int64_t dim = 0;

  CrossAttention() = default;
  CrossAttention(ParamRegistry<T>& reg, const std::string& name, int64_t d,
                 int64_t d_ctx, int heads_, Rng& rng)
      : heads(heads_), dim(d) {
    check(d % heads_ == 0, "CrossAttention: dim not divisible by heads");
    wq = Linear<T>(reg, name + ".q", d, d, rng);
    wk = Linear<T>(reg, name + ".k", d_ctx, d, rng);
    wv = Linear<T>(reg, name + ".v", d_ctx, d, rng);
    wo = Linear<T>(reg, name + ".o", d, d, rng);
  }

  Tensor<T> forward(const Tensor<T>& x, const Tensor<T>& context) const {
    check(x.shape().size() == 3, "CrossAttention: queries must be [B,Nq,d]");
    check(context.shape().size() == 2,
          "CrossAttention: context must be [L,d_ctx]");
    const int64_t B = x.shape()[0], Nq = x.shape()[1];
    check(x.shape()[2] == dim, "CrossAttention: query dim mismatch, got " +
                                   shape_str(x.shape()));
    const int64_t dh = dim / heads;
    const T inv_sqrt = static_cast<T>(1.0 / std::sqrt(double(dh)));

    auto k_all = wk.forward(context);  // [L, d]
    auto v_all = wv.forward(context);
    std::vector<int64_t> head_sizes(heads, dh);
    auto k_heads = split(k_all, head_sizes, 1);
    auto v_heads = split(v_all, head_sizes, 1);

    std::vector<Tensor<T>> batch_out;
    auto x_rows = split(reshape(x, Shape{B, Nq * dim}),
                        std::vector<int64_t>(B, 1), 0);
    for (int64_t b = 0; b < B; ++b) {
      auto xb = reshape(x_rows[b], Shape{Nq, dim});
      auto q = wq.forward(xb);  // [Nq, d]
      auto q_heads = split(q, head_sizes, 1);
      std::vector<Tensor<T>> outs;
      for (int h = 0; h < heads; ++h) {
        auto scores = scale(matmul(q_heads[h], transpose2d(k_heads[h])),
                            inv_sqrt);                 // [Nq, L]
        auto att = softmax(scores);                    // rows sum to 1
        outs.push_back(matmul(att, v_heads[h]));       // [Nq, dh]
      }
      auto merged = wo.forward(concat(outs, 1));       // [Nq, d]
      batch_out.push_back(reshape(merged, Shape{1, Nq, dim}));
    }
    return concat(batch_out, 0);
  }
};

// Sinusoidal position/timestep features (no parameters, no gradient).
template <class T>
Tensor<T> sinusoidal_embedding(int step, int64_t dim) {
  auto t = Tensor<T>::zeros(Shape{1, dim});
  auto& v = t.values();
  const int64_t half = dim / 2;
  for (int64_t i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * i / half);
    v[i] = static_cast<T>(std::sin(step * freq));
    v[half + i] = static_cast<T>(std::cos(step * freq));
  }
  return t;
}

// Mean cross-entropy over rows of [B, K] logits, computed via a numerically
// stable log-sum-exp; backward is softmax minus one-hot.
template <class T>
Tensor<T> cross_entropy(const Tensor<T>& logits,
                        const std::vector<int64_t>& labels) {
  check(logits.shape().size() == 2, "cross_entropy: expected [B, K] logits");
  const int64_t B = logits.shape()[0], K = logits.shape()[1];
  check(static_cast<int64_t>(labels.size()) == B,
        "cross_entropy: label count mismatch");
  for (int64_t y : labels)
    check(y >= 0 && y < K, "cross_entropy: label out of range");
  auto an = logits.node();
  auto probs = std::make_shared<std::vector<T>>(an->val.size());
  auto out = Tensor<T>::make_op(
      Shape{1}, {an}, [an, probs, labels, B, K](typename Tensor<T>::Node& n) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        const T g = n.grad[0] / static_cast<T>(B);
        for (int64_t b = 0; b < B; ++b)
          for (int64_t k = 0; k < K; ++k)
            an->grad[b * K + k] +=
                g * ((*probs)[b * K + k] - T(k == labels[b] ? 1 : 0));
      });
  T acc = T(0);
  for (int64_t b = 0; b < B; ++b) {
    const T* row = an->val.data() + b * K;
    T mx = row[0];
    for (int64_t k = 1; k < K; ++k) mx = std::max(mx, row[k]);
    T sum = T(0);
    for (int64_t k = 0; k < K; ++k) sum += std::exp(row[k] - mx);
    const T lse = mx + std::log(sum);
    for (int64_t k = 0; k < K; ++k)
      (*probs)[b * K + k] = std::exp(row[k] - lse);
    acc += lse - row[labels[b]];
  }
  out.values()[0] = acc / static_cast<T>(B);
  return out;
}

}  // namespace bf::nn

#endif  // BINAURALFORGE_NN_LAYERS_HPP
