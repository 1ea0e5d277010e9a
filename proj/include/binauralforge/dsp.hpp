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

#ifndef BINAURALFORGE_DSP_HPP
#define BINAURALFORGE_DSP_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <complex>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "binauralforge/audio_io.hpp"
#include "binauralforge/common.hpp"
#include "binauralforge/fft.hpp"

namespace bf {

// Time and frequency dims of features fed to the VAEs are padded to a
// multiple of this (covers compression ratios 4 and 8).
inline constexpr int kPadMultiple = 8;

struct StftConfig {
  int n_fft = 512;
  int win_length = 512;
  int hop_length = 256;
  bool center = true;

  void validate() const {
    check(n_fft > 0 && win_length > 0 && hop_length > 0,
          "StftConfig: sizes must be positive");
    check(hop_length <= win_length && win_length <= n_fft,
          "StftConfig: need hop <= win <= n_fft");
  }
  int bins() const { return n_fft / 2 + 1; }

  // Periodic Hann.
  std::vector<double> window() const {
    std::vector<double> w(win_length);
    for (int i = 0; i < win_length; ++i)
      w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / win_length);
    return w;
  }
  int frame_count(size_t samples) const {
    check(center, "frame_count: only center mode supported");
    return 1 + static_cast<int>(samples / hop_length);
  }
};

// Complex STFT coefficients, [channel][frame][bin] in a flat buffer.
struct StftGrid {
  int channels = 0;
  int frames = 0;
  int bins = 0;
  std::vector<cpx> data;

  cpx& at(int c, int t, int f) {
    return data[(static_cast<size_t>(c) * frames + t) * bins + f];
  }
  const cpx& at(int c, int t, int f) const {
    return data[(static_cast<size_t>(c) * frames + t) * bins + f];
  }
  static StftGrid zeros(int channels, int frames, int bins) {
    StftGrid g;
    g.channels = channels;
    g.frames = frames;
    g.bins = bins;
    g.data.assign(static_cast<size_t>(channels) * frames * bins, cpx(0, 0));
    return g;
  }
};

// Real-valued magnitude spectrogram, same indexing as StftGrid.
struct MagnitudeSpectrogram {
  int channels = 0;
  int frames = 0;
  int bins = 0;
  std::vector<double> data;

  double& at(int c, int t, int f) {
    return data[(static_cast<size_t>(c) * frames + t) * bins + f];
  }
  double at(int c, int t, int f) const {
    return data[(static_cast<size_t>(c) * frames + t) * bins + f];
  }
  static MagnitudeSpectrogram zeros(int channels, int frames, int bins) {
    MagnitudeSpectrogram m;
    m.channels = channels;
    m.frames = frames;
    m.bins = bins;
    m.data.assign(static_cast<size_t>(channels) * frames * bins, 0.0);
    return m;
  }
};

enum class FeatureKind : uint32_t { MEL = 0, STFT = 1 };

// Real feature maps for the VAEs: [channels][T][F] with T, F padded to
// kPadMultiple. Padded cells are exactly zero in every map.
struct FeatureTensor {
  FeatureKind kind = FeatureKind::MEL;
  int channels = 0;
  int frames = 0;       // padded T
  int bins = 0;         // padded F
  int valid_frames = 0; // frames carrying data
  int sample_rate = kCanonicalRate;
  int hop = 256;
  std::vector<double> data;

  double& at(int c, int t, int f) {
    return data[(static_cast<size_t>(c) * frames + t) * bins + f];
  }
  double at(int c, int t, int f) const {
    return data[(static_cast<size_t>(c) * frames + t) * bins + f];
  }
  size_t size() const { return data.size(); }
};

inline int pad_up(int n, int multiple = kPadMultiple) {
  return (n + multiple - 1) / multiple * multiple;
}

// --- STFT ------------------------------------------------------------------

inline StftGrid stft(const AudioClip& clip, const StftConfig& cfg) {
  clip.validate();
  cfg.validate();
  check(clip.length() > 0, "stft: empty clip");
  const auto win = cfg.window();
  const int T = cfg.frame_count(clip.length());
  StftGrid grid = StftGrid::zeros(clip.channels(), T, cfg.bins());
  std::vector<double> frame(cfg.n_fft);
  const int offset = cfg.n_fft / 2;  // center padding
  for (int c = 0; c < clip.channels(); ++c) {
    const auto& x = clip.samples[c];
    for (int t = 0; t < T; ++t) {
      const long start = static_cast<long>(t) * cfg.hop_length - offset;
      std::fill(frame.begin(), frame.end(), 0.0);
      for (int i = 0; i < cfg.win_length; ++i) {
        const long k = start + i;
        if (k >= 0 && k < static_cast<long>(x.size()))
          frame[i] = x[k] * win[i];
      }
      auto spec = rfft(frame);
      for (int f = 0; f < cfg.bins(); ++f) grid.at(c, t, f) = spec[f];
    }
  }
  return grid;
}

// Overlap-add inverse with window-square normalization; exact inverse of
// stft() for any hop with nonzero accumulated window energy.
inline AudioClip istft(const StftGrid& grid, const StftConfig& cfg,
                       size_t length) {
  cfg.validate();
  check(grid.bins == cfg.bins(), "istft: grid bins incompatible with config");
  check(grid.channels >= 1, "istft: empty grid");
  const auto win = cfg.window();
  const int offset = cfg.n_fft / 2;
  const size_t padded_len =
      static_cast<size_t>(grid.frames - 1) * cfg.hop_length + cfg.n_fft;
  AudioClip out;
  out.sample_rate = kCanonicalRate;
  out.samples.assign(grid.channels, std::vector<double>(length, 0.0));
  std::vector<double> acc(padded_len), wsq(padded_len);
  std::vector<cpx> spec(cfg.bins());
  for (int c = 0; c < grid.channels; ++c) {
    std::fill(acc.begin(), acc.end(), 0.0);
    std::fill(wsq.begin(), wsq.end(), 0.0);
    for (int t = 0; t < grid.frames; ++t) {
      for (int f = 0; f < cfg.bins(); ++f) spec[f] = grid.at(c, t, f);
      auto frame = irfft(spec, cfg.n_fft);
      const size_t start = static_cast<size_t>(t) * cfg.hop_length;
      for (int i = 0; i < cfg.win_length; ++i) {
        acc[start + i] += frame[i] * win[i];
        wsq[start + i] += win[i] * win[i];
      }
    }
    for (size_t i = 0; i < length; ++i) {
      const size_t k = i + offset;
      if (k < padded_len && wsq[k] > 1e-12)
        out.samples[c][i] = acc[k] / wsq[k];
    }
  }
  return out;
}

// --- Mel filterbank --------------------------------------------------------

struct MelFilterbank {
  int n_mels = 0;
  int n_bins = 0;
  int sample_rate = kCanonicalRate;
  std::vector<double> weights;  // [n_mels][n_bins], row-major
  std::vector<double> center_freqs_hz;

  double at(int m, int f) const { return weights[static_cast<size_t>(m) * n_bins + f]; }
};

namespace mel_detail {

// Slaney mel scale: linear below 1 kHz, logarithmic above.
inline double hz_to_mel(double hz) {
  const double f_sp = 200.0 / 3.0;
  const double min_log_hz = 1000.0;
  const double logstep = std::log(6.4) / 27.0;
  if (hz < min_log_hz) return hz / f_sp;
  return min_log_hz / f_sp + std::log(hz / min_log_hz) / logstep;
}
inline double mel_to_hz(double mel) {
  const double f_sp = 200.0 / 3.0;
  const double min_log_mel = 1000.0 / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  if (mel < min_log_mel) return mel * f_sp;
  return 1000.0 * std::exp(logstep * (mel - min_log_mel));
}

}  // namespace mel_detail

inline MelFilterbank mel_filterbank(int n_mels, int n_bins, int sample_rate) {
  check(n_mels >= 1, "mel_filterbank: n_mels must be >= 1");
  check(n_mels <= n_bins, "mel_filterbank: n_mels exceeds n_bins");
  const double f_max = sample_rate / 2.0;
  const int n_fft = (n_bins - 1) * 2;
  MelFilterbank fb;
  fb.n_mels = n_mels;
  fb.n_bins = n_bins;
  fb.sample_rate = sample_rate;
  fb.weights.assign(static_cast<size_t>(n_mels) * n_bins, 0.0);
  const double mel_lo = mel_detail::hz_to_mel(0.0);
  const double mel_hi = mel_detail::hz_to_mel(f_max);
  std::vector<double> mel_pts(n_mels + 2);
  for (int i = 0; i < n_mels + 2; ++i)
    mel_pts[i] =
        mel_detail::mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1));
  fb.center_freqs_hz.resize(n_mels);
  for (int m = 0; m < n_mels; ++m) fb.center_freqs_hz[m] = mel_pts[m + 1];
  for (int m = 0; m < n_mels; ++m) {
    const double lo = mel_pts[m], ctr = mel_pts[m + 1], hi = mel_pts[m + 2];
    const double norm = 2.0 / (hi - lo);  // Slaney area normalization
    for (int f = 0; f < n_bins; ++f) {
      const double hz = static_cast<double>(f) * sample_rate / n_fft;
      double w = 0.0;
      if (hz >= lo && hz <= ctr && ctr > lo)
        w = (hz - lo) / (ctr - lo);
      else if (hz > ctr && hz <= hi && hi > ctr)
        w = (hi - hz) / (hi - ctr);
      fb.weights[static_cast<size_t>(m) * n_bins + f] = w * norm;
    }
  }
  return fb;
}

// --- Feature extraction ----------------------------------------------------

// Compressed mel-magnitude maps, one channel per ear: log1p(sqrt(power)),
// matching the log1p(|X|) scale of the STFT branch so both VAE inputs share
// a near-zero-mean range. T padded to kPadMultiple with exact zeros.
inline FeatureTensor mel_spectrogram(const StftGrid& grid,
                                     const MelFilterbank& fb) {
  check(grid.bins == fb.n_bins, "mel_spectrogram: bin count mismatch");
  FeatureTensor ft;
  ft.kind = FeatureKind::MEL;
  ft.channels = grid.channels;
  ft.valid_frames = grid.frames;
  ft.frames = pad_up(grid.frames);
  ft.bins = fb.n_mels;
  ft.sample_rate = fb.sample_rate;
  ft.data.assign(static_cast<size_t>(ft.channels) * ft.frames * ft.bins, 0.0);
  for (int c = 0; c < grid.channels; ++c) {
    for (int t = 0; t < grid.frames; ++t) {
      for (int m = 0; m < fb.n_mels; ++m) {
        double p = 0.0;
        for (int f = 0; f < grid.bins; ++f) {
          const double mag = std::abs(grid.at(c, t, f));
          p += fb.at(m, f) * mag * mag;
        }
        ft.at(c, t, m) = std::log1p(std::sqrt(p));
      }
    }
  }
  return ft;
}

// STFT feature triplet per ear: [log1p(|X|), cos(phi), sin(phi)].
// The Nyquist bin is dropped so F = n_fft/2 divides the compression ratio;
// it is reinserted as zero on inversion. atan2(0, 0) = 0 fixes the phase of
// zero cells (cos 1, sin 0) inside the valid region.
inline FeatureTensor stft_feature(const StftGrid& grid) {
  FeatureTensor ft;
  ft.kind = FeatureKind::STFT;
  ft.channels = grid.channels * 3;
  ft.valid_frames = grid.frames;
  ft.frames = pad_up(grid.frames);
  ft.bins = grid.bins - 1;  // drop Nyquist
  ft.data.assign(static_cast<size_t>(ft.channels) * ft.frames * ft.bins, 0.0);
  for (int ear = 0; ear < grid.channels; ++ear) {
    for (int t = 0; t < grid.frames; ++t) {
      for (int f = 0; f < ft.bins; ++f) {
        const cpx v = grid.at(ear, t, f);
        const double mag = std::abs(v);
        const double phi = std::atan2(v.imag(), v.real());
        ft.at(3 * ear + 0, t, f) = std::log1p(mag);
        ft.at(3 * ear + 1, t, f) = std::cos(phi);
        ft.at(3 * ear + 2, t, f) = std::sin(phi);
      }
    }
  }
  return ft;
}

// Inverse of stft_feature over its valid region.
inline StftGrid stft_feature_to_grid(const FeatureTensor& ft, int frames = -1) {
  check(ft.kind == FeatureKind::STFT, "stft_feature_to_grid: kind must be STFT");
  check(ft.channels % 3 == 0, "stft_feature_to_grid: channels not a triplet");
  const int ears = ft.channels / 3;
  const int T = frames > 0 ? frames : ft.valid_frames;
  check(T <= ft.frames, "stft_feature_to_grid: frame count exceeds tensor");
  StftGrid grid = StftGrid::zeros(ears, T, ft.bins + 1);
  for (int ear = 0; ear < ears; ++ear) {
    for (int t = 0; t < T; ++t) {
      for (int f = 0; f < ft.bins; ++f) {
        const double mag = std::expm1(ft.at(3 * ear + 0, t, f));
        const double phi =
            std::atan2(ft.at(3 * ear + 2, t, f), ft.at(3 * ear + 1, t, f));
        grid.at(ear, t, f) = std::polar(std::max(mag, 0.0), phi);
      }
      // Nyquist bin stays zero.
    }
  }
  return grid;
}

// --- Mel inversion ---------------------------------------------------------

// Nonnegative least squares per frame: min_{s >= 0} ||Phi s - m||^2 with
// m = expm1(M)^2 undoing the log1p(sqrt(power)) compression. Warm start from
// the least-norm solution of the underdetermined system, then projected
// FISTA. Returns sqrt(s) as magnitude.
inline MagnitudeSpectrogram invert_mel(const FeatureTensor& mel,
                                       const MelFilterbank& fb,
                                       double* max_rel_residual = nullptr,
                                       int max_iters = 400, double tol = 1e-8) {
  check(mel.kind == FeatureKind::MEL, "invert_mel: input kind must be MEL");
  check(mel.bins == fb.n_mels, "invert_mel: mel band count mismatch");
  using Mat = Eigen::MatrixXd;
  using Vec = Eigen::VectorXd;
  const int M = fb.n_mels, F = fb.n_bins;
  Mat Phi(M, F);
  for (int m = 0; m < M; ++m)
    for (int f = 0; f < F; ++f) Phi(m, f) = fb.at(m, f);
  const Mat G = Phi * Phi.transpose();
  Eigen::LDLT<Mat> ldlt(G + 1e-12 * Mat::Identity(M, M));
  // Lipschitz constant of the gradient: top eigenvalue of Phi^T Phi.
  const double L = Eigen::SelfAdjointEigenSolver<Mat>(G)
                       .eigenvalues()
                       .maxCoeff();
  const int T = mel.valid_frames;
  MagnitudeSpectrogram out = MagnitudeSpectrogram::zeros(mel.channels, T, F);
  double worst = 0.0;
  for (int c = 0; c < mel.channels; ++c) {
    for (int t = 0; t < T; ++t) {
      Vec target(M);
      for (int m = 0; m < M; ++m) {
        const double a = std::max(std::expm1(mel.at(c, t, m)), 0.0);
        target(m) = a * a;
      }
      const double tnorm = target.norm();
      if (tnorm < 1e-14) continue;  // silent frame -> zero magnitude
      Vec s = (Phi.transpose() * ldlt.solve(target)).cwiseMax(0.0);
      Vec y = s, s_prev = s;
      double tk = 1.0;
      for (int it = 0; it < max_iters; ++it) {
        Vec resid = Phi * y - target;
        if (resid.norm() / tnorm < tol) {
          s = y.cwiseMax(0.0);
          break;
        }
        Vec grad = Phi.transpose() * resid;
        s = (y - grad / L).cwiseMax(0.0);
        const double tk1 = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
        y = s + ((tk - 1.0) / tk1) * (s - s_prev);
        s_prev = s;
        tk = tk1;
      }
      worst = std::max(worst, (Phi * s - target).norm() / tnorm);
      for (int f = 0; f < F; ++f) out.at(c, t, f) = std::sqrt(s(f));
    }
  }
  if (max_rel_residual) *max_rel_residual = worst;
  return out;
}

// --- Phase merge and Griffin-Lim ------------------------------------------

inline StftGrid merge_phase(const MagnitudeSpectrogram& mag,
                            const StftGrid& phase_source) {
  check(mag.channels == phase_source.channels &&
            mag.frames == phase_source.frames && mag.bins == phase_source.bins,
        "merge_phase: shape mismatch");
  StftGrid out = StftGrid::zeros(mag.channels, mag.frames, mag.bins);
  for (size_t i = 0; i < out.data.size(); ++i) {
    const cpx p = phase_source.data[i];
    const double pm = std::abs(p);
    // Scaling the source cell keeps |out| == mag exact when mag == |p|:
    // the ratio is then exactly 1.0 and the cell passes through unchanged.
    out.data[i] = pm > 0.0 ? p * (mag.data[i] / pm) : cpx(mag.data[i], 0.0);
  }
  return out;
}

// Alternating-projection phase retrieval from a magnitude spectrogram.
inline AudioClip griffin_lim(const MagnitudeSpectrogram& mag,
                             const StftConfig& cfg, int iters,
                             size_t length = 0) {
  check(iters >= 1, "griffin_lim: iters must be >= 1");
  check(mag.bins == cfg.bins(), "griffin_lim: bins incompatible with config");
  if (length == 0)
    length = static_cast<size_t>(mag.frames - 1) * cfg.hop_length;
  StftGrid grid = StftGrid::zeros(mag.channels, mag.frames, mag.bins);
  for (size_t i = 0; i < grid.data.size(); ++i)
    grid.data[i] = cpx(mag.data[i], 0.0);  // zero initial phase
  AudioClip x;
  for (int it = 0; it < iters; ++it) {
    x = istft(grid, cfg, length);
    StftGrid re = stft(x, cfg);
    check(re.frames == mag.frames, "griffin_lim: frame drift");
    for (size_t i = 0; i < grid.data.size(); ++i) {
      const cpx v = re.data[i];
      const double vm = std::abs(v);
      const cpx unit = vm > 0.0 ? v / vm : cpx(1.0, 0.0);
      grid.data[i] = mag.data[i] * unit;
    }
  }
  return istft(grid, cfg, length);
}

// Relative distance between |STFT(x)| and a target magnitude; the quantity
// griffin_lim drives down.
inline double spectral_convergence(const AudioClip& x,
                                   const MagnitudeSpectrogram& mag,
                                   const StftConfig& cfg) {
  StftGrid g = stft(x, cfg);
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < mag.data.size(); ++i) {
    const double d = std::abs(g.data[i]) - mag.data[i];
    num += d * d;
    den += mag.data[i] * mag.data[i];
  }
  return den > 0.0 ? std::sqrt(num / den) : 0.0;
}

// --- FeatureTensor serialization -------------------------------------------
// Header: 8 x uint32 LE {magic, kind, channels, T, F, r, sample_rate, hop},
// then channels*T*F float32 LE.

inline constexpr uint32_t kFeatureMagic = 0x42464655;  // "UFFB" bytes on disk

inline void write_feature(const FeatureTensor& ft, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw RuntimeError("write_feature: cannot open: " + path);
  auto put_u32 = [&](uint32_t v) {
    uint8_t b[4] = {static_cast<uint8_t>(v & 0xff),
                    static_cast<uint8_t>((v >> 8) & 0xff),
                    static_cast<uint8_t>((v >> 16) & 0xff),
                    static_cast<uint8_t>((v >> 24) & 0xff)};
    f.write(reinterpret_cast<char*>(b), 4);
  };
  put_u32(kFeatureMagic);
  put_u32(static_cast<uint32_t>(ft.kind));
  put_u32(static_cast<uint32_t>(ft.channels));
  put_u32(static_cast<uint32_t>(ft.frames));
  put_u32(static_cast<uint32_t>(ft.bins));
  put_u32(static_cast<uint32_t>(ft.valid_frames));
  put_u32(static_cast<uint32_t>(kPadMultiple));
  put_u32(static_cast<uint32_t>(ft.sample_rate));
  put_u32(static_cast<uint32_t>(ft.hop));
  for (double d : ft.data) {
    float v = static_cast<float>(d);
    uint32_t u;
    std::memcpy(&u, &v, 4);
    put_u32(u);
  }
  if (!f) throw RuntimeError("write_feature: write failed: " + path);
}

inline FeatureTensor read_feature(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw RuntimeError("read_feature: cannot open: " + path);
  auto get_u32 = [&]() {
    uint8_t b[4];
    f.read(reinterpret_cast<char*>(b), 4);
    if (!f) throw RuntimeError("read_feature: truncated file: " + path);
    return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 |
           uint32_t(b[3]) << 24;
  };
  if (get_u32() != kFeatureMagic)
    throw RuntimeError("read_feature: bad magic: " + path);
  FeatureTensor ft;
  ft.kind = static_cast<FeatureKind>(get_u32());
  ft.channels = static_cast<int>(get_u32());
  ft.frames = static_cast<int>(get_u32());
  ft.bins = static_cast<int>(get_u32());
  // Stored explicitly: a frame of digital silence is all-zero under the
  // log1p compression, so the count cannot be recovered from the payload.
  ft.valid_frames = static_cast<int>(get_u32());
  get_u32();  // pad multiple
  ft.sample_rate = static_cast<int>(get_u32());
  ft.hop = static_cast<int>(get_u32());
  check(ft.valid_frames >= 0 && ft.valid_frames <= ft.frames,
        "read_feature: bad valid frame count: " + path);
  const size_t n = static_cast<size_t>(ft.channels) * ft.frames * ft.bins;
  ft.data.resize(n);
  for (size_t i = 0; i < n; ++i) {
    uint32_t u = get_u32();
    float v;
    std::memcpy(&v, &u, 4);
    ft.data[i] = v;
  }
  return ft;
}

}  // namespace bf

#endif  // BINAURALFORGE_DSP_HPP
