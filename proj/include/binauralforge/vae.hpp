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

#ifndef BINAURALFORGE_VAE_HPP
#define BINAURALFORGE_VAE_HPP

#include <cmath>
#include <string>
#include <vector>

#include "binauralforge/dsp.hpp"
#include "binauralforge/nn/layers.hpp"
#include "binauralforge/nn/optim.hpp"

namespace bf {

enum class VaeKind : int { MEL = 0, STFT = 1, DUAL = 2 };

struct VaeConfig {
  VaeKind kind = VaeKind::MEL;
  int in_channels = 2;       // 2 (MEL) | 6 (STFT) | 8 (DUAL)
  int compression = 4;       // r: 4 (MEL) | 8 (STFT, DUAL)
  int latent_channels = 8;   // C
  std::vector<int> widths;   // one entry per stride-2 stage
  double kl_weight = 1e-6;

  static VaeConfig mel(std::vector<int> w = {16, 32}) {
    return {VaeKind::MEL, 2, 4, 8, std::move(w), 1e-6};
  }
  static VaeConfig stft(std::vector<int> w = {16, 32, 48}) {
    return {VaeKind::STFT, 6, 8, 8, std::move(w), 1e-6};
  }
  static VaeConfig dual(std::vector<int> w = {16, 32, 48}) {
    return {VaeKind::DUAL, 8, 8, 8, std::move(w), 1e-6};
  }

  int stages() const {
    int r = compression, s = 0;
    while (r > 1) {
      check(r % 2 == 0, "VaeConfig: compression must be a power of two");
      r /= 2;
      ++s;
    }
    return s;
  }
  void validate() const {
    check(latent_channels > 0 && in_channels > 0, "VaeConfig: bad channels");
    check(static_cast<int>(widths.size()) == stages(),
          "VaeConfig: widths count must equal log2(compression)");
  }
};

template <class T>
struct Posterior {
  nn::Tensor<T> mu, logvar;  // [B, C, T/r, F/r]
};

template <class T>
struct ElboParts {
  nn::Tensor<T> total;
  double recon = 0, kl = 0;
};

// Convolutional VAE over FeatureTensors. Encoder downsamples by stride-2
// stages, emits 2C maps split into (mu, logvar); decoder mirrors with
// transposed convolutions.
template <class T>
class Vae {
 public:
  Vae() = default;
  Vae(const VaeConfig& cfg, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    const auto& w = cfg_.widths;
    const int n = cfg_.stages();
    enc_in_ = nn::Conv2d<T>(reg_, "enc.in", cfg_.in_channels, w[0], 3, 1, 1,
                            rng);
    for (int i = 0; i < n; ++i) {
      const int ci = w[i], co = w[std::min(i + 1, n - 1)];
      enc_down_.emplace_back(reg_, "enc.down" + std::to_string(i), ci, co, 3,
                             2, 1, rng);
      enc_mix_.emplace_back(reg_, "enc.mix" + std::to_string(i), co, co, 3, 1,
                            1, rng);
    }
    enc_norm_ = nn::GroupNorm<T>(reg_, "enc.norm", w[n - 1],
                                 norm_groups(w[n - 1]));
    enc_out_ = nn::Conv2d<T>(reg_, "enc.out", w[n - 1],
                             2 * cfg_.latent_channels, 3, 1, 1, rng);
    dec_in_ = nn::Conv2d<T>(reg_, "dec.in", cfg_.latent_channels, w[n - 1], 3,
                            1, 1, rng);
    for (int i = n - 1; i >= 0; --i) {
      const int ci = w[std::min(i + 1, n - 1)], co = w[i];
      dec_up_.emplace_back(reg_, "dec.up" + std::to_string(i), ci, co, 4, 2,
                           1, rng);
      dec_mix_.emplace_back(reg_, "dec.mix" + std::to_string(i), co, co, 3, 1,
                            1, rng);
    }
    dec_norm_ = nn::GroupNorm<T>(reg_, "dec.norm", w[0], norm_groups(w[0]));
    dec_out_ = nn::Conv2d<T>(reg_, "dec.out", w[0], cfg_.in_channels, 3, 1, 1,
                             rng);
  }

  const VaeConfig& config() const { return cfg_; }
  nn::ParamRegistry<T>& params() { return reg_; }
  const nn::ParamRegistry<T>& params() const { return reg_; }

  Posterior<T> encode(const nn::Tensor<T>& x) const {
    check_input(x);
    auto h = enc_in_.forward(x);
    for (size_t i = 0; i < enc_down_.size(); ++i) {
      h = nn::silu(enc_down_[i].forward(nn::silu(h)));
      h = enc_mix_[i].forward(h);
    }
    h = enc_out_.forward(nn::silu(enc_norm_.forward(h)));
    const int C = cfg_.latent_channels;
    auto halves = nn::split(h, {C, C}, 1);
    return {halves[0], nn::clamp(halves[1], T(-30), T(20))};
  }

  nn::Tensor<T> sample_posterior(const Posterior<T>& p, Rng& rng) const {
    auto eps = nn::Tensor<T>::randn(p.mu.shape(), rng, T(1), false);
    auto sigma = nn::exp_(nn::scale(p.logvar, T(0.5)));
    return nn::add(p.mu, nn::mul(sigma, eps));
  }

  nn::Tensor<T> decode(const nn::Tensor<T>& z) const {
    check(z.shape().size() == 4 && z.shape()[1] == cfg_.latent_channels,
          "Vae::decode: latent shape " + nn::shape_str(z.shape()) +
              " incompatible");
    auto h = dec_in_.forward(z);
    for (size_t i = 0; i < dec_up_.size(); ++i) {
      h = nn::silu(dec_up_[i].forward(nn::silu(h)));
      h = dec_mix_[i].forward(h);
    }
    return dec_out_.forward(nn::silu(dec_norm_.forward(h)));
  }

  ElboParts<T> elbo_loss(const nn::Tensor<T>& x, const nn::Tensor<T>& xhat,
                         const Posterior<T>& p, double kl_weight) const {
    auto recon = nn::mse(xhat, x);
    auto ones = nn::Tensor<T>::zeros(p.mu.shape());
    for (auto& v : ones.values()) v = T(1);
    auto inner = nn::sub(nn::add(nn::mul(p.mu, p.mu), nn::exp_(p.logvar)),
                         nn::add(ones, p.logvar));
    auto kl = nn::scale(nn::mean(inner), T(0.5));
    ElboParts<T> out;
    out.recon = static_cast<double>(recon.values()[0]);
    out.kl = static_cast<double>(kl.values()[0]);
    out.total = nn::add(recon, nn::scale(kl, static_cast<T>(kl_weight)));
    return out;
  }

 private:
  static int norm_groups(int channels) {
    int g = std::min(8, channels);
    while (channels % g != 0) --g;
    return g;
  }
  void check_input(const nn::Tensor<T>& x) const {
    const auto& s = x.shape();
    check(s.size() == 4 && s[1] == cfg_.in_channels,
          "Vae: input shape " + nn::shape_str(s) + " expects " +
              std::to_string(cfg_.in_channels) + " channels");
    check(s[2] % cfg_.compression == 0 && s[3] % cfg_.compression == 0,
          "Vae: spatial dims " + nn::shape_str(s) +
              " not divisible by compression " +
              std::to_string(cfg_.compression));
  }

  VaeConfig cfg_;
  nn::ParamRegistry<T> reg_;
  nn::Conv2d<T> enc_in_, enc_out_, dec_in_, dec_out_;
  std::vector<nn::Conv2d<T>> enc_down_, enc_mix_, dec_mix_;
  std::vector<nn::ConvTranspose2d<T>> dec_up_;
  nn::GroupNorm<T> enc_norm_, dec_norm_;
};

// --- Feature <-> network input packing -------------------------------------

// Frequency bins STFT features carry; the Dual-VAE pads Mel rows up to this.
inline constexpr int kDualFreqBins = 256;

template <class T>
std::vector<T> pack_feature(const FeatureTensor& f) {
  std::vector<T> out(f.data.size());
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<T>(f.data[i]);
  return out;
}

// Dual input: [mel_L, mel_R, stft x6] with the Mel frequency axis zero-padded
// to the STFT bin count.
template <class T>
std::vector<T> pack_dual(const FeatureTensor& mel, const FeatureTensor& stft) {
  check(mel.kind == FeatureKind::MEL && stft.kind == FeatureKind::STFT,
        "pack_dual: expected a (MEL, STFT) pair");
  check(mel.frames == stft.frames, "pack_dual: frame count mismatch");
  check(stft.bins == kDualFreqBins, "pack_dual: unexpected STFT bin count");
  const int64_t Tn = mel.frames, Fm = mel.bins, Fs = stft.bins;
  std::vector<T> out((mel.channels + stft.channels) * Tn * Fs, T(0));
  for (int c = 0; c < mel.channels; ++c)
    for (int64_t t = 0; t < Tn; ++t)
      for (int64_t f = 0; f < Fm; ++f)
        out[(c * Tn + t) * Fs + f] =
            static_cast<T>(mel.data[(c * Tn + t) * Fm + f]);
  const int64_t off = mel.channels * Tn * Fs;
  for (size_t i = 0; i < stft.data.size(); ++i)
    out[off + i] = static_cast<T>(stft.data[i]);
  return out;
}

// Splits a decoded dual plane back into (mel, stft) features, stripping the
// Mel padding.
template <class T>
void unpack_dual(const std::vector<T>& plane, FeatureTensor& mel,
                 FeatureTensor& stft) {
  const int64_t Tn = mel.frames, Fm = mel.bins, Fs = stft.bins;
  check(plane.size() ==
            static_cast<size_t>((mel.channels + stft.channels) * Tn * Fs),
        "unpack_dual: plane size mismatch");
  for (int c = 0; c < mel.channels; ++c)
    for (int64_t t = 0; t < Tn; ++t)
      for (int64_t f = 0; f < Fm; ++f)
        mel.data[(c * Tn + t) * Fm + f] =
            static_cast<double>(plane[(c * Tn + t) * Fs + f]);
  const int64_t off = mel.channels * Tn * Fs;
  for (size_t i = 0; i < stft.data.size(); ++i)
    stft.data[i] = static_cast<double>(plane[off + i]);
}

// Renormalizes the (cos, sin) channel pairs of an STFT feature to unit norm
// per cell; degenerate cells fall back to zero phase.
inline void renormalize_phase(FeatureTensor& f) {
  check(f.kind == FeatureKind::STFT, "renormalize_phase: STFT features only");
  const int64_t plane = f.frames * f.bins;
  for (int ear = 0; ear < 2; ++ear) {
    double* c = f.data.data() + (3 * ear + 1) * plane;
    double* s = f.data.data() + (3 * ear + 2) * plane;
    for (int64_t i = 0; i < plane; ++i) {
      const double n = std::hypot(c[i], s[i]);
      if (n > 1e-12) {
        c[i] /= n;
        s[i] /= n;
      } else {
        c[i] = 1.0;
        s[i] = 0.0;
      }
    }
  }
}

// --- Training --------------------------------------------------------------

struct VaeTrainLog {
  std::vector<double> loss, recon, kl;
};

// Scalar latent standardization (mean/std over posterior means of a probe
// batch); diffusion operates on (z - mean) / std.
struct LatentScale {
  double mean = 0.0;
  double std = 1.0;
};

template <class T>
nn::Tensor<T> batch_tensor(const std::vector<const std::vector<T>*>& samples,
                           int channels, int64_t H, int64_t W) {
  const int64_t B = static_cast<int64_t>(samples.size());
  auto x = nn::Tensor<T>::zeros(nn::Shape{B, channels, H, W});
  auto& v = x.values();
  const size_t plane = static_cast<size_t>(channels) * H * W;
  for (int64_t b = 0; b < B; ++b) {
    check(samples[b]->size() == plane, "batch_tensor: sample size mismatch");
    std::copy(samples[b]->begin(), samples[b]->end(),
              v.begin() + b * plane);
  }
  return x;
}

// Deterministic single-threaded training loop; samples cycle in order.
template <class T>
VaeTrainLog train_vae(Vae<T>& vae, const std::vector<std::vector<T>>& data,
                      int64_t H, int64_t W,
                      const nn::OptimizerConfig& opt_cfg, int steps,
                      int batch_size, Rng& rng) {
  check(!data.empty(), "train_vae: empty dataset");
  auto opt = nn::make_adam(vae.params(), opt_cfg);
  VaeTrainLog log;
  size_t cursor = 0;
  for (int step = 0; step < steps; ++step) {
    std::vector<const std::vector<T>*> batch;
    for (int b = 0; b < batch_size; ++b) {
      batch.push_back(&data[cursor]);
      cursor = (cursor + 1) % data.size();
    }
    auto x = batch_tensor<T>(batch, vae.config().in_channels, H, W);
    auto post = vae.encode(x);
    auto z = vae.sample_posterior(post, rng);
    auto xhat = vae.decode(z);
    auto parts = vae.elbo_loss(x, xhat, post, vae.config().kl_weight);
    vae.params().zero_grads();
    parts.total.backward();
    opt.step();
    log.loss.push_back(static_cast<double>(parts.total.values()[0]));
    log.recon.push_back(parts.recon);
    log.kl.push_back(parts.kl);
  }
  return log;
}

template <class T>
LatentScale compute_latent_scale(const Vae<T>& vae,
                                 const std::vector<std::vector<T>>& probe,
                                 int64_t H, int64_t W) {
  check(!probe.empty(), "compute_latent_scale: empty probe batch");
  double sum = 0, sq = 0;
  size_t n = 0;
  for (const auto& s : probe) {
    std::vector<const std::vector<T>*> one{&s};
    auto x = batch_tensor<T>(one, vae.config().in_channels, H, W);
    auto post = vae.encode(x);
    for (T v : post.mu.values()) {
      sum += static_cast<double>(v);
      sq += static_cast<double>(v) * static_cast<double>(v);
      ++n;
    }
  }
  LatentScale out;
  out.mean = sum / static_cast<double>(n);
  const double var = sq / static_cast<double>(n) - out.mean * out.mean;
  out.std = std::sqrt(std::max(var, 1e-12));
  return out;
}

// Encode with the posterior mean (no sampling) and return the flat latent.
template <class T>
std::vector<T> encode_mean(const Vae<T>& vae, const std::vector<T>& sample,
                           int64_t H, int64_t W) {
  std::vector<const std::vector<T>*> one{&sample};
  auto x = batch_tensor<T>(one, vae.config().in_channels, H, W);
  return vae.encode(x).mu.values();
}

// Decode a flat latent of shape [C, H/r, W/r]; STFT-bearing kinds get their
// phase channels renormalized by the callers that rebuild FeatureTensors.
template <class T>
std::vector<T> decode_flat(const Vae<T>& vae, const std::vector<T>& latent,
                           int64_t Hl, int64_t Wl) {
  auto z = nn::Tensor<T>::from_values(nn::Shape{1, vae.config().latent_channels, Hl, Wl},
                         latent);
  return vae.decode(z).values();
}

template <class T>
struct DualRoundtrip {
  FeatureTensor mel_hat, stft_hat;
  StftGrid fused;
};

// Encode a paired (mel, stft) clip through the dual VAE with the posterior
// mean, decode, split the branches, and fuse inverted-mel magnitude with the
// decoded STFT phase.
template <class T>
DualRoundtrip<T> dual_roundtrip(const FeatureTensor& mel,
                                const FeatureTensor& stft, const Vae<T>& vae,
                                const MelFilterbank& fb) {
  check(vae.config().kind == VaeKind::DUAL,
        "dual_roundtrip: requires a DUAL-kind VAE");
  check(mel.frames == stft.frames && mel.valid_frames == stft.valid_frames,
        "dual_roundtrip: unpaired features");
  auto packed = pack_dual<T>(mel, stft);
  const int64_t H = mel.frames, W = stft.bins;
  auto z = encode_mean(vae, packed, H, W);
  const int r = vae.config().compression;
  auto plane = decode_flat(vae, z, H / r, W / r);

  DualRoundtrip<T> out;
  out.mel_hat = mel;
  out.stft_hat = stft;
  unpack_dual(plane, out.mel_hat, out.stft_hat);
  renormalize_phase(out.stft_hat);
  auto mag = invert_mel(out.mel_hat, fb);
  auto phase = stft_feature_to_grid(out.stft_hat, mel.valid_frames);
  out.fused = merge_phase(mag, phase);
  return out;
}

}  // namespace bf

#endif  // BINAURALFORGE_VAE_HPP
