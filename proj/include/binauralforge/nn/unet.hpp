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

#ifndef BINAURALFORGE_NN_UNET_HPP
#define BINAURALFORGE_NN_UNET_HPP

#include <string>
#include <vector>

#include "binauralforge/nn/checkpoint.hpp"
#include "binauralforge/nn/layers.hpp"
#include "binauralforge/prompt.hpp"

namespace bf::nn {

// Learned 3-token conditioning: [event, azimuth, kind] rows plus a distinct
// null token used for classifier-free guidance.
template <class T>
struct ConditioningEmbedder {
  Tensor<T> event_table, azimuth_table, kind_table, null_token;
  int64_t d_text = 64;

  ConditioningEmbedder() = default;
  ConditioningEmbedder(ParamRegistry<T>& reg, int64_t n_events, int64_t d,
                       Rng& rng)
      : d_text(d) {
    const T std = T(0.3);
    event_table = reg.add(
        "cond.event", Tensor<T>::randn(Shape{n_events, d}, rng, std, true));
    azimuth_table = reg.add(
        "cond.azimuth",
        Tensor<T>::randn(Shape{AzimuthGrid::kClasses, d}, rng, std, true));
    kind_table =
        reg.add("cond.kind", Tensor<T>::randn(Shape{3, d}, rng, std, true));
    null_token =
        reg.add("cond.null", Tensor<T>::randn(Shape{1, d}, rng, std, true));
  }

  // tau = [event_vec, azimuth_vec, kind_vec], shape [3, d_text].
  Tensor<T> embed(const Conditioning& cond) const {
    auto e = select_rows(event_table, {cond.event_id});
    auto a = select_rows(azimuth_table, {cond.azimuth_class});
    auto k = select_rows(kind_table, {static_cast<int64_t>(cond.kind)});
    return concat(std::vector<Tensor<T>>{e, a, k}, 0);
  }

  // All rows equal to the learned null token; independent of conditioning.
  Tensor<T> null_embedding() const {
    return select_rows(null_token, {0, 0, 0});
  }
};

struct UnetConfig {
  int in_channels = 8;
  std::vector<int> widths = {32, 64, 128};  // 3 resolutions
  int res_blocks = 2;
  int heads = 4;
  int64_t d_ctx = 64;
  int64_t time_dim = 64;
  int norm_groups = 8;
};

namespace unet_detail {

inline int fit_groups(int groups, int channels) {
  int g = std::min(groups, channels);
  while (channels % g != 0) --g;
  return g;
}

// [B,C,H,W] <-> [B,HW,C] token layout for the attention blocks.
template <class T>
Tensor<T> to_tokens(const Tensor<T>& x) {
  const int64_t B = x.shape()[0], C = x.shape()[1],
                HW = x.shape()[2] * x.shape()[3];
  auto rows = split(reshape(x, Shape{B, C * HW}),
                    std::vector<int64_t>(B, 1), 0);
  std::vector<Tensor<T>> out;
  for (auto& r : rows)
    out.push_back(
        reshape(transpose2d(reshape(r, Shape{C, HW})), Shape{1, HW, C}));
  return concat(out, 0);
}

template <class T>
Tensor<T> from_tokens(const Tensor<T>& t, int64_t H, int64_t W) {
  const int64_t B = t.shape()[0], HW = t.shape()[1], C = t.shape()[2];
  auto rows = split(reshape(t, Shape{B, HW * C}),
                    std::vector<int64_t>(B, 1), 0);
  std::vector<Tensor<T>> out;
  for (auto& r : rows)
    out.push_back(
        reshape(transpose2d(reshape(r, Shape{HW, C})), Shape{1, C, H, W}));
  return concat(out, 0);
}

}  // namespace unet_detail

template <class T>
struct ResBlock {
  GroupNorm<T> norm1, norm2;
  Conv2d<T> conv1, conv2;
  Linear<T> time_proj;
  Conv2d<T> skip;  // 1x1 when channel count changes
  bool has_skip = false;

  ResBlock() = default;
  ResBlock(ParamRegistry<T>& reg, const std::string& name, int in, int out,
           int64_t time_dim, int groups, Rng& rng) {
    norm1 = GroupNorm<T>(reg, name + ".norm1", in, unet_detail::fit_groups(groups, in));
    conv1 = Conv2d<T>(reg, name + ".conv1", in, out, 3, 1, 1, rng);
    time_proj = Linear<T>(reg, name + ".time", time_dim, out, rng);
    norm2 = GroupNorm<T>(reg, name + ".norm2", out, unet_detail::fit_groups(groups, out));
    conv2 = Conv2d<T>(reg, name + ".conv2", out, out, 3, 1, 1, rng);
    if (in != out) {
      has_skip = true;
      skip = Conv2d<T>(reg, name + ".skip", in, out, 1, 1, 0, rng);
    }
  }

  Tensor<T> forward(const Tensor<T>& x, const Tensor<T>& temb) const {
    auto h = conv1.forward(silu(norm1.forward(x)));
    // temb [1,time_dim] -> per-channel shift
    auto shift = time_proj.forward(temb);  // [1, out]
    h = add_channel_bias(h, reshape(shift, Shape{shift.shape()[1]}));
    h = conv2.forward(silu(norm2.forward(h)));
    auto res = has_skip ? skip.forward(x) : x;
    return add(h, res);
  }
};

template <class T>
struct AttnBlock {
  GroupNorm<T> norm;
  CrossAttention<T> attn;

  AttnBlock() = default;
  AttnBlock(ParamRegistry<T>& reg, const std::string& name, int channels,
            int64_t d_ctx, int heads, int groups, Rng& rng) {
    norm = GroupNorm<T>(reg, name + ".norm", channels,
                        unet_detail::fit_groups(groups, channels));
    int h = std::min(heads, channels);
    while (channels % h != 0) --h;
    attn = CrossAttention<T>(reg, name + ".attn", channels, d_ctx, h, rng);
  }

  Tensor<T> forward(const Tensor<T>& x, const Tensor<T>& context) const {
    const int64_t H = x.shape()[2], W = x.shape()[3];
    auto tokens = unet_detail::to_tokens(norm.forward(x));
    auto out = attn.forward(tokens, context);
    return add(x, unet_detail::from_tokens(out, H, W));
  }
};

// Denoiser: 3-resolution U-Net, cross-attention at the two lowest
// resolutions, sinusoidal timestep embedding through a 2-layer MLP.
template <class T>
struct Unet {
  UnetConfig cfg;
  Linear<T> time_mlp1, time_mlp2;
  Conv2d<T> conv_in, conv_out;
  GroupNorm<T> norm_out;
  std::vector<ResBlock<T>> down1, down2, mid;
  AttnBlock<T> attn2, attn_mid, attn_up2;
  Conv2d<T> downsample1, downsample2;
  ConvTranspose2d<T> upsample2, upsample1;
  ResBlock<T> up2_res, up1_res;

  Unet() = default;
  Unet(ParamRegistry<T>& reg, const UnetConfig& c, Rng& rng) : cfg(c) {
    check(cfg.widths.size() == 3, "Unet: expected 3 resolution widths");
    const int w1 = cfg.widths[0], w2 = cfg.widths[1], w3 = cfg.widths[2];
    time_mlp1 = Linear<T>(reg, "time.mlp1", cfg.time_dim, cfg.time_dim, rng);
    time_mlp2 = Linear<T>(reg, "time.mlp2", cfg.time_dim, cfg.time_dim, rng);
    conv_in = Conv2d<T>(reg, "conv_in", cfg.in_channels, w1, 3, 1, 1, rng);
    for (int i = 0; i < cfg.res_blocks; ++i)
      down1.emplace_back(reg, "down1.res" + std::to_string(i), w1, w1,
                         cfg.time_dim, cfg.norm_groups, rng);
    downsample1 = Conv2d<T>(reg, "down1.pool", w1, w2, 3, 2, 1, rng);
    for (int i = 0; i < cfg.res_blocks; ++i)
      down2.emplace_back(reg, "down2.res" + std::to_string(i), w2, w2,
                         cfg.time_dim, cfg.norm_groups, rng);
    attn2 = AttnBlock<T>(reg, "down2.attn", w2, cfg.d_ctx, cfg.heads,
                         cfg.norm_groups, rng);
    downsample2 = Conv2d<T>(reg, "down2.pool", w2, w3, 3, 2, 1, rng);
    mid.emplace_back(reg, "mid.res0", w3, w3, cfg.time_dim, cfg.norm_groups,
                     rng);
    attn_mid = AttnBlock<T>(reg, "mid.attn", w3, cfg.d_ctx, cfg.heads,
                            cfg.norm_groups, rng);
    mid.emplace_back(reg, "mid.res1", w3, w3, cfg.time_dim, cfg.norm_groups,
                     rng);
    upsample2 = ConvTranspose2d<T>(reg, "up2.unpool", w3, w2, 4, 2, 1, rng);
    up2_res = ResBlock<T>(reg, "up2.res", w2 + w2, w2, cfg.time_dim,
                          cfg.norm_groups, rng);
    attn_up2 = AttnBlock<T>(reg, "up2.attn", w2, cfg.d_ctx, cfg.heads,
                            cfg.norm_groups, rng);
    upsample1 = ConvTranspose2d<T>(reg, "up1.unpool", w2, w1, 4, 2, 1, rng);
    up1_res = ResBlock<T>(reg, "up1.res", w1 + w1, w1, cfg.time_dim,
                          cfg.norm_groups, rng);
    norm_out = GroupNorm<T>(reg, "out.norm", w1,
                            unet_detail::fit_groups(cfg.norm_groups, w1));
    conv_out = Conv2d<T>(reg, "out.conv", w1, cfg.in_channels, 3, 1, 1, rng);
  }

  // x [B,C,H,W] with H, W divisible by 4; context [L,d_ctx]; returns
  // predicted noise of identical shape.
  Tensor<T> forward(const Tensor<T>& x, int step,
                    const Tensor<T>& context) const {
    check(x.shape().size() == 4 && x.shape()[1] == cfg.in_channels,
          "Unet: input shape " + shape_str(x.shape()) + " incompatible");
    check(x.shape()[2] % 4 == 0 && x.shape()[3] % 4 == 0,
          "Unet: spatial dims must divide 4, got " + shape_str(x.shape()));
    auto temb = sinusoidal_embedding<T>(step, cfg.time_dim);
    temb = time_mlp2.forward(silu(time_mlp1.forward(temb)));

    auto h1 = conv_in.forward(x);
    for (const auto& r : down1) h1 = r.forward(h1, temb);
    auto h2 = downsample1.forward(h1);
    for (const auto& r : down2) h2 = r.forward(h2, temb);
    h2 = attn2.forward(h2, context);
    auto h3 = downsample2.forward(h2);
    h3 = mid[0].forward(h3, temb);
    h3 = attn_mid.forward(h3, context);
    h3 = mid[1].forward(h3, temb);

    auto u2 = upsample2.forward(h3);
    u2 = up2_res.forward(concat(std::vector<Tensor<T>>{u2, h2}, 1), temb);
    u2 = attn_up2.forward(u2, context);
    auto u1 = upsample1.forward(u2);
    u1 = up1_res.forward(concat(std::vector<Tensor<T>>{u1, h1}, 1), temb);
    return conv_out.forward(silu(norm_out.forward(u1)));
  }
};

}  // namespace bf::nn

#endif  // BINAURALFORGE_NN_UNET_HPP
