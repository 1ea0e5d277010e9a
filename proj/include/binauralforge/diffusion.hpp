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

#ifndef BINAURALFORGE_DIFFUSION_HPP
#define BINAURALFORGE_DIFFUSION_HPP

#include <cmath>
#include <functional>
#include <vector>

#include "binauralforge/nn/tensor.hpp"

namespace bf {

// Linear DDPM schedule with closed-form derived arrays. Index 0 holds step
// n = 1. step_index maps local steps back to the training-time step used for
// the denoiser's timestep embedding (identity unless subsampled).
struct NoiseSchedule {
  int N = 0;
  std::vector<double> beta, alpha, alpha_bar, beta_tilde;
  std::vector<int> step_index;

  double beta_at(int n) const { return beta[idx(n)]; }
  double alpha_at(int n) const { return alpha[idx(n)]; }
  double alpha_bar_at(int n) const { return alpha_bar[idx(n)]; }
  double beta_tilde_at(int n) const { return beta_tilde[idx(n)]; }
  int train_step(int n) const { return step_index[idx(n)]; }

 private:
  size_t idx(int n) const {
    check(n >= 1 && n <= N, "NoiseSchedule: step out of range");
    return static_cast<size_t>(n - 1);
  }
};

inline NoiseSchedule linear_schedule(int N, double beta1 = 1e-4,
                                     double betaN = 0.02) {
  check(N >= 1, "linear_schedule: N must be >= 1");
  check(beta1 > 0 && betaN < 1 && beta1 <= betaN,
        "linear_schedule: invalid beta endpoints");
  NoiseSchedule s;
  s.N = N;
  s.beta.resize(N);
  s.alpha.resize(N);
  s.alpha_bar.resize(N);
  s.beta_tilde.resize(N);
  s.step_index.resize(N);
  double prod = 1.0;
  for (int i = 0; i < N; ++i) {
    s.beta[i] = N == 1 ? beta1 : beta1 + (betaN - beta1) * i / (N - 1);
    s.alpha[i] = 1.0 - s.beta[i];
    prod *= s.alpha[i];
    s.alpha_bar[i] = prod;
    s.beta_tilde[i] =
        i == 0 ? s.beta[0]
               : (1.0 - s.alpha_bar[i - 1]) / (1.0 - s.alpha_bar[i]) *
                     s.beta[i];
    s.step_index[i] = i + 1;
  }
  return s;
}

// Coarsens a schedule to `steps` entries at uniform stride, recomputing beta
// from alpha_bar ratios so each coarse step spans several fine ones.
inline NoiseSchedule subsample_schedule(const NoiseSchedule& full, int steps) {
  check(steps >= 1 && steps <= full.N,
        "subsample_schedule: steps out of range");
  if (steps == full.N) return full;
  NoiseSchedule s;
  s.N = steps;
  s.beta.resize(steps);
  s.alpha.resize(steps);
  s.alpha_bar.resize(steps);
  s.beta_tilde.resize(steps);
  s.step_index.resize(steps);
  for (int i = 0; i < steps; ++i) {
    // Evenly spaced picks that always include the terminal step N.
    const int n = steps == 1
                      ? full.N
                      : 1 + static_cast<int>(std::llround(
                                static_cast<double>(i) * (full.N - 1) /
                                (steps - 1)));
    s.step_index[i] = n;
    s.alpha_bar[i] = full.alpha_bar_at(n);
    s.alpha[i] = i == 0 ? s.alpha_bar[0] : s.alpha_bar[i] / s.alpha_bar[i - 1];
    s.beta[i] = 1.0 - s.alpha[i];
    s.beta_tilde[i] =
        i == 0 ? s.beta[0]
               : (1.0 - s.alpha_bar[i - 1]) / (1.0 - s.alpha_bar[i]) *
                     s.beta[i];
  }
  return s;
}

// --- Latent pair -----------------------------------------------------------

// Channel-concat layout for the two branch latents. The branches have equal
// per-channel cell counts (H*W == Hs*Ws); the STFT block is reinterpreted on
// the common (H, W) grid, which is the identity on row-major storage. Either
// channel count may be zero for single-branch variants.
struct LatentLayout {
  int c_mel = 8, c_stft = 8;
  int64_t H = 80, W = 16;    // common grid (Mel-native)
  int64_t Hs = 40, Ws = 32;  // STFT-native grid

  int channels() const { return c_mel + c_stft; }
  int64_t cells() const { return H * W; }
  size_t total() const { return static_cast<size_t>(channels()) * cells(); }
  void validate() const {
    check(c_mel >= 0 && c_stft >= 0 && channels() > 0,
          "LatentLayout: bad channel counts");
    check(c_stft == 0 || Hs * Ws == H * W,
          "LatentLayout: branch cell counts differ");
  }
};

template <class T>
struct LatentPair {
  std::vector<T> mel, stft;
};

template <class T>
std::vector<T> concat_pair(const LatentPair<T>& p, const LatentLayout& lay) {
  lay.validate();
  check(p.mel.size() == static_cast<size_t>(lay.c_mel) * lay.cells() &&
            p.stft.size() == static_cast<size_t>(lay.c_stft) * lay.cells(),
        "concat_pair: latent sizes do not match layout");
  std::vector<T> out;
  out.reserve(lay.total());
  out.insert(out.end(), p.mel.begin(), p.mel.end());
  out.insert(out.end(), p.stft.begin(), p.stft.end());
  return out;
}

template <class T>
LatentPair<T> split_pair(const std::vector<T>& flat, const LatentLayout& lay) {
  lay.validate();
  check(flat.size() == lay.total(), "split_pair: size mismatch");
  const size_t nm = static_cast<size_t>(lay.c_mel) * lay.cells();
  LatentPair<T> p;
  p.mel.assign(flat.begin(), flat.begin() + nm);
  p.stft.assign(flat.begin() + nm, flat.end());
  return p;
}

// --- Forward process -------------------------------------------------------

template <class T>
struct ForwardSample {
  std::vector<T> z_n, eps;
};

template <class T>
ForwardSample<T> forward_sample(const std::vector<T>& z0, int n,
                                const NoiseSchedule& sched, Rng& rng) {
  const double ab = sched.alpha_bar_at(n);
  const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
  ForwardSample<T> out;
  out.z_n.resize(z0.size());
  out.eps.resize(z0.size());
  for (size_t i = 0; i < z0.size(); ++i) {
    out.eps[i] = static_cast<T>(rng.normal());
    out.z_n[i] = static_cast<T>(a * static_cast<double>(z0[i]) +
                                b * static_cast<double>(out.eps[i]));
  }
  return out;
}

// --- Reverse process -------------------------------------------------------

template <class T>
std::vector<T> ddpm_step(const std::vector<T>& z_n, int n,
                         const std::vector<T>& eps_hat,
                         const NoiseSchedule& sched, Rng& rng) {
  check(z_n.size() == eps_hat.size(), "ddpm_step: size mismatch");
  const double a = sched.alpha_at(n);
  const double ab = sched.alpha_bar_at(n);
  const double inv_sqrt_a = 1.0 / std::sqrt(a);
  const double coef = (1.0 - a) / std::sqrt(1.0 - ab);
  const double sigma = n > 1 ? std::sqrt(sched.beta_tilde_at(n)) : 0.0;
  std::vector<T> out(z_n.size());
  for (size_t i = 0; i < out.size(); ++i) {
    const double mu = inv_sqrt_a * (static_cast<double>(z_n[i]) -
                                    coef * static_cast<double>(eps_hat[i]));
    out[i] = static_cast<T>(n > 1 ? mu + sigma * rng.normal() : mu);
  }
  return out;
}

// Inference-time denoiser: (noisy latent, training step index, context) ->
// predicted noise. ctx == nullptr selects the null embedding.
template <class T>
using DenoiserFn = std::function<std::vector<T>(
    const std::vector<T>&, int, const std::vector<T>*)>;

// eps_hat = w * eps(z, tau) + (1 - w) * eps(z, null).
template <class T>
std::vector<T> cfg_predict(const DenoiserFn<T>& denoiser,
                           const std::vector<T>& z_n, int n,
                           const std::vector<T>& tau, double w) {
  auto cond = denoiser(z_n, n, &tau);
  if (w == 1.0) return cond;
  auto uncond = denoiser(z_n, n, nullptr);
  check(cond.size() == uncond.size(), "cfg_predict: denoiser size mismatch");
  std::vector<T> out(cond.size());
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<T>(w * static_cast<double>(cond[i]) +
                            (1.0 - w) * static_cast<double>(uncond[i]));
  return out;
}

template <class T>
LatentPair<T> sample(const DenoiserFn<T>& denoiser, const std::vector<T>& tau,
                     const NoiseSchedule& sched, int steps, double w, Rng& rng,
                     const LatentLayout& lay) {
  lay.validate();
  const NoiseSchedule s = subsample_schedule(sched, steps);
  std::vector<T> z(lay.total());
  for (auto& v : z) v = static_cast<T>(rng.normal());
  for (int n = s.N; n >= 1; --n) {
    auto eps_hat = cfg_predict(denoiser, z, s.train_step(n), tau, w);
    check(eps_hat.size() == z.size(), "sample: denoiser size mismatch");
    z = ddpm_step(z, n, eps_hat, s, rng);
  }
  return split_pair(z, lay);
}

// Exact E[eps | z_n] when the data distribution is standard normal; used to
// validate the sampler without any training.
template <class T>
std::vector<T> gaussian_oracle_denoiser(const std::vector<T>& z_n, int n,
                                        const NoiseSchedule& sched) {
  const double g = std::sqrt(1.0 - sched.alpha_bar_at(n));
  std::vector<T> out(z_n.size());
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<T>(g * static_cast<double>(z_n[i]));
  return out;
}

// --- Training objective ----------------------------------------------------

// Graph-building denoiser used during training.
template <class T>
using TrainDenoiserFn = std::function<nn::Tensor<T>(
    const nn::Tensor<T>&, int, const nn::Tensor<T>&)>;

// Eq.-style LDM objective: one shared step for both branches, independent
// noise per branch, per-branch MSE summed (gamma_n = 1).
template <class T>
nn::Tensor<T> ldm_loss(const LatentPair<T>& pair, const nn::Tensor<T>& tau,
                       const nn::Tensor<T>& null_tau,
                       const NoiseSchedule& sched,
                       const TrainDenoiserFn<T>& denoiser,
                       const LatentLayout& lay, double cond_drop_p, Rng& rng,
                       bool* dropped = nullptr) {
  lay.validate();
  const int n = 1 + static_cast<int>(rng.uniform() * sched.N);
  auto fm = forward_sample(pair.mel, std::min(n, sched.N), sched, rng);
  auto fs = forward_sample(pair.stft, std::min(n, sched.N), sched, rng);
  LatentPair<T> noisy{fm.z_n, fs.z_n};
  auto z = nn::Tensor<T>::from_values(
      nn::Shape{1, lay.channels(), lay.H, lay.W}, concat_pair(noisy, lay));
  const bool drop = rng.uniform() < cond_drop_p;
  if (dropped) *dropped = drop;
  auto eps_hat = denoiser(z, std::min(n, sched.N), drop ? null_tau : tau);
  check(eps_hat.shape() == z.shape(), "ldm_loss: denoiser shape mismatch");
  if (lay.c_mel == 0 || lay.c_stft == 0) {
    // Single-branch variant: one MSE over the whole latent.
    const auto& eps = lay.c_mel > 0 ? fm.eps : fs.eps;
    auto tgt = nn::Tensor<T>::from_values(z.shape(), eps);
    return nn::mse(eps_hat, tgt);
  }
  auto parts = nn::split(
      eps_hat, std::vector<int64_t>{lay.c_mel, lay.c_stft}, 1);
  auto tgt_m = nn::Tensor<T>::from_values(nn::Shape{1, lay.c_mel, lay.H, lay.W}, fm.eps);
  auto tgt_s = nn::Tensor<T>::from_values(nn::Shape{1, lay.c_stft, lay.H, lay.W}, fs.eps);
  return nn::add(nn::mse(parts[0], tgt_m), nn::mse(parts[1], tgt_s));
}

}  // namespace bf

#endif  // BINAURALFORGE_DIFFUSION_HPP
