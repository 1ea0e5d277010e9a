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

#ifndef BINAURALFORGE_NN_CONV_HPP
#define BINAURALFORGE_NN_CONV_HPP

#include <vector>

#include "binauralforge/nn/tensor.hpp"

namespace bf::nn {

namespace conv_detail {

// im2col: x [C,H,W] -> cols [C*kh*kw, OH*OW] for the given stride/pad.
template <class T>
void im2col(const T* x, int C, int H, int W, int kh, int kw, int stride,
            int pad, int OH, int OW, T* cols) {
  for (int c = 0; c < C; ++c) {
    for (int i = 0; i < kh; ++i) {
      for (int j = 0; j < kw; ++j) {
        T* row = cols + ((static_cast<int64_t>(c) * kh + i) * kw + j) *
                            (static_cast<int64_t>(OH) * OW);
        for (int oh = 0; oh < OH; ++oh) {
          const int h = oh * stride - pad + i;
          if (h < 0 || h >= H) {
            for (int ow = 0; ow < OW; ++ow) row[oh * OW + ow] = T(0);
            continue;
          }
          const T* src = x + (static_cast<int64_t>(c) * H + h) * W;
          for (int ow = 0; ow < OW; ++ow) {
            const int w = ow * stride - pad + j;
            row[oh * OW + ow] = (w >= 0 && w < W) ? src[w] : T(0);
          }
        }
      }
    }
  }
}

// Scatter-add inverse of im2col.
template <class T>
void col2im(const T* cols, int C, int H, int W, int kh, int kw, int stride,
            int pad, int OH, int OW, T* x) {
  for (int c = 0; c < C; ++c) {
    for (int i = 0; i < kh; ++i) {
      for (int j = 0; j < kw; ++j) {
        const T* row = cols + ((static_cast<int64_t>(c) * kh + i) * kw + j) *
                                  (static_cast<int64_t>(OH) * OW);
        for (int oh = 0; oh < OH; ++oh) {
          const int h = oh * stride - pad + i;
          if (h < 0 || h >= H) continue;
          T* dst = x + (static_cast<int64_t>(c) * H + h) * W;
          for (int ow = 0; ow < OW; ++ow) {
            const int w = ow * stride - pad + j;
            if (w >= 0 && w < W) dst[w] += row[oh * OW + ow];
          }
        }
      }
    }
  }
}

}  // namespace conv_detail

// conv2d: x [B,Cin,H,W], w [Cout,Cin,kh,kw] -> [B,Cout,OH,OW].
template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, int stride, int pad) {
  check(x.shape().size() == 4, "conv2d: input must be [B,C,H,W], got " +
                                   shape_str(x.shape()));
  check(w.shape().size() == 4, "conv2d: weight must be [O,C,kh,kw], got " +
                                   shape_str(w.shape()));
  const int B = (int)x.shape()[0], C = (int)x.shape()[1],
            H = (int)x.shape()[2], W = (int)x.shape()[3];
  const int O = (int)w.shape()[0], kh = (int)w.shape()[2],
            kw = (int)w.shape()[3];
  check(w.shape()[1] == C, "conv2d: channel mismatch input " +
                               shape_str(x.shape()) + " vs weight " +
                               shape_str(w.shape()));
  check(stride >= 1 && pad >= 0, "conv2d: bad stride/pad");
  const int OH = (H + 2 * pad - kh) / stride + 1;
  const int OW = (W + 2 * pad - kw) / stride + 1;
  check(OH >= 1 && OW >= 1, "conv2d: output would be empty");
  const int CKK = C * kh * kw;
  const int64_t patch = static_cast<int64_t>(OH) * OW;

  auto xn = x.node(), wn = w.node();
  auto out = Tensor<T>::make_op(
      Shape{B, O, OH, OW}, {xn, wn},
      [=](typename Tensor<T>::Node& n) {
        std::vector<T> cols(static_cast<size_t>(CKK) * patch);
        for (int b = 0; b < B; ++b) {
          const T* dy = n.grad.data() + static_cast<int64_t>(b) * O * patch;
          if (wn->requires_grad || xn->requires_grad)
            conv_detail::im2col(xn->val.data() +
                                    static_cast<int64_t>(b) * C * H * W,
                                C, H, W, kh, kw, stride, pad, OH, OW,
                                cols.data());
          if (wn->requires_grad) {
            wn->ensure_grad();
            // dW += dY [O,patch] x cols^T [patch,CKK]
            gemm(false, true, O, CKK, (int)patch, T(1), dy, (int)patch,
                 cols.data(), (int)patch, T(1), wn->grad.data(), CKK);
          }
          if (xn->requires_grad) {
            xn->ensure_grad();
            // dcols = W^T [CKK,O] x dY [O,patch]
            std::vector<T> dcols(static_cast<size_t>(CKK) * patch);
            gemm(true, false, CKK, (int)patch, O, T(1), wn->val.data(), CKK,
                 dy, (int)patch, T(0), dcols.data(), (int)patch);
            conv_detail::col2im(dcols.data(), C, H, W, kh, kw, stride, pad, OH,
                                OW,
                                xn->grad.data() +
                                    static_cast<int64_t>(b) * C * H * W);
          }
        }
      });
  std::vector<T> cols(static_cast<size_t>(CKK) * patch);
  for (int b = 0; b < B; ++b) {
    conv_detail::im2col(xn->val.data() + static_cast<int64_t>(b) * C * H * W,
                        C, H, W, kh, kw, stride, pad, OH, OW, cols.data());
    gemm(false, false, O, (int)patch, CKK, T(1), wn->val.data(), CKK,
         cols.data(), (int)patch, T(0),
         out.values().data() + static_cast<int64_t>(b) * O * patch,
         (int)patch);
  }
  return out;
}

// conv2d_transpose: x [B,Cin,H,W], w [Cin,Cout,kh,kw] ->
// [B,Cout,(H-1)*stride-2*pad+kh, (W-1)*stride-2*pad+kw].
template <class T>
Tensor<T> conv2d_transpose(const Tensor<T>& x, const Tensor<T>& w, int stride,
                           int pad) {
  check(x.shape().size() == 4 && w.shape().size() == 4,
        "conv2d_transpose: bad ranks");
  const int B = (int)x.shape()[0], C = (int)x.shape()[1],
            H = (int)x.shape()[2], W = (int)x.shape()[3];
  check(w.shape()[0] == C, "conv2d_transpose: channel mismatch input " +
                               shape_str(x.shape()) + " vs weight " +
                               shape_str(w.shape()));
  const int O = (int)w.shape()[1], kh = (int)w.shape()[2],
            kw = (int)w.shape()[3];
  const int OH = (H - 1) * stride - 2 * pad + kh;
  const int OW = (W - 1) * stride - 2 * pad + kw;
  check(OH >= 1 && OW >= 1, "conv2d_transpose: output would be empty");
  const int OKK = O * kh * kw;
  const int64_t patch = static_cast<int64_t>(H) * W;  // im2col grid of OUTPUT

  auto xn = x.node(), wn = w.node();
  auto out = Tensor<T>::make_op(
      Shape{B, O, OH, OW}, {xn, wn},
      [=](typename Tensor<T>::Node& n) {
        std::vector<T> cols(static_cast<size_t>(OKK) * patch);
        for (int b = 0; b < B; ++b) {
          // im2col of the OUTPUT gradient with the same stride/pad maps the
          // transpose conv back onto an ordinary conv.
          conv_detail::im2col(n.grad.data() +
                                  static_cast<int64_t>(b) * O * OH * OW,
                              O, OH, OW, kh, kw, stride, pad, H, W,
                              cols.data());
          if (xn->requires_grad) {
            xn->ensure_grad();
            // dx = W [C,OKK] x cols [OKK,patch]
            gemm(false, false, C, (int)patch, OKK, T(1), wn->val.data(), OKK,
                 cols.data(), (int)patch, T(1),
                 xn->grad.data() + static_cast<int64_t>(b) * C * patch,
                 (int)patch);
          }
          if (wn->requires_grad) {
            wn->ensure_grad();
            // dW += x [C,patch] x cols^T [patch,OKK]
            gemm(false, true, C, OKK, (int)patch, T(1),
                 xn->val.data() + static_cast<int64_t>(b) * C * patch,
                 (int)patch, cols.data(), (int)patch, T(1), wn->grad.data(),
                 OKK);
          }
        }
      });
  std::vector<T> cols(static_cast<size_t>(OKK) * patch);
  for (int b = 0; b < B; ++b) {
    // cols = W^T [OKK,C] x x [C,patch]; scatter into the output grid.
    gemm(true, false, OKK, (int)patch, C, T(1), wn->val.data(), OKK,
         xn->val.data() + static_cast<int64_t>(b) * C * patch, (int)patch,
         T(0), cols.data(), (int)patch);
    conv_detail::col2im(cols.data(), O, OH, OW, kh, kw, stride, pad, H, W,
                        out.values().data() +
                            static_cast<int64_t>(b) * O * OH * OW);
  }
  return out;
}

// Group normalization over [B,C,H,W] with affine per-channel gamma/beta.
template <class T>
Tensor<T> group_norm(const Tensor<T>& x, int groups, const Tensor<T>& gamma,
                     const Tensor<T>& beta, T eps = T(1e-5)) {
  check(x.shape().size() == 4, "group_norm: expected [B,C,H,W]");
  const int B = (int)x.shape()[0], C = (int)x.shape()[1];
  const int64_t HW = x.shape()[2] * x.shape()[3];
  check(C % groups == 0, "group_norm: channels not divisible by groups");
  check(gamma.shape() == Shape{C} && beta.shape() == Shape{C},
        "group_norm: affine shape mismatch");
  const int cg = C / groups;
  const int64_t gsize = cg * HW;

  auto xn = x.node(), gn = gamma.node(), bn = beta.node();
  // Cache per-(batch,group) statistics for backward.
  auto stats = std::make_shared<std::vector<T>>(
      static_cast<size_t>(B) * groups * 2);
  auto out = Tensor<T>::make_op(
      x.shape(), {xn, gn, bn},
      [=](typename Tensor<T>::Node& n) {
        for (int b = 0; b < B; ++b) {
          for (int g = 0; g < groups; ++g) {
            const T mu = (*stats)[(b * groups + g) * 2];
            const T istd = (*stats)[(b * groups + g) * 2 + 1];
            const int64_t base = (static_cast<int64_t>(b) * C + g * cg) * HW;
            // xhat = (x - mu) * istd; y = gamma*xhat + beta
            T sum_dxhat = T(0), sum_dxhat_xhat = T(0);
            for (int c = 0; c < cg; ++c) {
              const T gam = gn->val[g * cg + c];
              for (int64_t k = 0; k < HW; ++k) {
                const int64_t idx = base + c * HW + k;
                const T xhat = (xn->val[idx] - mu) * istd;
                const T dxhat = n.grad[idx] * gam;
                sum_dxhat += dxhat;
                sum_dxhat_xhat += dxhat * xhat;
              }
            }
            if (gn->requires_grad || bn->requires_grad) {
              gn->ensure_grad();
              bn->ensure_grad();
              for (int c = 0; c < cg; ++c) {
                T dg = T(0), db = T(0);
                for (int64_t k = 0; k < HW; ++k) {
                  const int64_t idx = base + c * HW + k;
                  const T xhat = (xn->val[idx] - mu) * istd;
                  dg += n.grad[idx] * xhat;
                  db += n.grad[idx];
                }
                gn->grad[g * cg + c] += dg;
                bn->grad[g * cg + c] += db;
              }
            }
            if (xn->requires_grad) {
              xn->ensure_grad();
              const T inv_n = T(1) / static_cast<T>(gsize);
              for (int c = 0; c < cg; ++c) {
                const T gam = gn->val[g * cg + c];
                for (int64_t k = 0; k < HW; ++k) {
                  const int64_t idx = base + c * HW + k;
                  const T xhat = (xn->val[idx] - mu) * istd;
                  const T dxhat = n.grad[idx] * gam;
                  xn->grad[idx] += istd * (dxhat - inv_n * sum_dxhat -
                                           xhat * inv_n * sum_dxhat_xhat);
                }
              }
            }
          }
        }
      });
  auto& v = out.values();
  for (int b = 0; b < B; ++b) {
    for (int g = 0; g < groups; ++g) {
      const int64_t base = (static_cast<int64_t>(b) * C + g * cg) * HW;
      T mu = T(0);
      for (int64_t i = 0; i < gsize; ++i) mu += xn->val[base + i];
      mu /= static_cast<T>(gsize);
      T var = T(0);
      for (int64_t i = 0; i < gsize; ++i) {
        const T d = xn->val[base + i] - mu;
        var += d * d;
      }
      var /= static_cast<T>(gsize);
      const T istd = T(1) / std::sqrt(var + eps);
      (*stats)[(b * groups + g) * 2] = mu;
      (*stats)[(b * groups + g) * 2 + 1] = istd;
      for (int c = 0; c < cg; ++c) {
        const T gam = gn->val[g * cg + c];
        const T bet = bn->val[g * cg + c];
        for (int64_t k = 0; k < HW; ++k) {
          const int64_t idx = base + c * HW + k;
          v[idx] = gam * (xn->val[idx] - mu) * istd + bet;
        }
      }
    }
  }
  return out;
}

}  // namespace bf::nn

#endif  // BINAURALFORGE_NN_CONV_HPP
