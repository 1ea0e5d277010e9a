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

#ifndef BINAURALFORGE_LOCALIZER_HPP
#define BINAURALFORGE_LOCALIZER_HPP

#include <algorithm>
#include <array>
#include <string>
#include <vector>

#include "binauralforge/audio_io.hpp"
#include "binauralforge/dsp.hpp"
#include "binauralforge/nn/layers.hpp"
#include "binauralforge/nn/optim.hpp"
#include "binauralforge/spatial.hpp"

namespace bf {

// Phase and magnitude maps per ear from the binaural STFT.
struct LocalizerInput {
  int frames = 0, bins = 0;
  std::vector<double> phase;  // [2][T][F]
  std::vector<double> mag;    // [2][T][F], log1p compressed

  double& pha_at(int ear, int t, int f) {
    return phase[(static_cast<size_t>(ear) * frames + t) * bins + f];
  }
  double& mag_at(int ear, int t, int f) {
    return mag[(static_cast<size_t>(ear) * frames + t) * bins + f];
  }
  double pha_at(int ear, int t, int f) const {
    return phase[(static_cast<size_t>(ear) * frames + t) * bins + f];
  }
  double mag_at(int ear, int t, int f) const {
    return mag[(static_cast<size_t>(ear) * frames + t) * bins + f];
  }
};

inline LocalizerInput featurize(const AudioClip& clip, const StftConfig& cfg) {
  check(clip.samples.size() == 2, "featurize: stereo clip required");
  auto grid = stft(clip, cfg);
  LocalizerInput in;
  in.frames = grid.frames;
  in.bins = grid.bins;
  in.phase.resize(2 * static_cast<size_t>(grid.frames) * grid.bins);
  in.mag.resize(in.phase.size());
  for (int ear = 0; ear < 2; ++ear)
    for (int t = 0; t < grid.frames; ++t)
      for (int f = 0; f < grid.bins; ++f) {
        const cpx v = grid.at(ear, t, f);
        in.mag_at(ear, t, f) = std::log1p(std::abs(v));
        in.pha_at(ear, t, f) = std::abs(v) > 0.0 ? std::arg(v) : 0.0;
      }
  return in;
}

struct LocalizerConfig {
  int time_frames = 64;           // uniform stride subsample of the clip
  int freq_bins = 192;            // lowest bins kept; wide enough to cover
                                  // the rear-shadow cue band (3-6 kHz)
  std::vector<int> branch_widths = {16, 32, 64};
  std::vector<int> comb_widths = {64, 64};
  std::vector<int> fc_widths = {128, 64};
  int classes = AzimuthGrid::kClasses;
};

// Network input plane [4][T0][F0]: [cos IPD, sin IPD, mag_L, mag_R], where
// IPD = pha_L - pha_R is the interaural phase difference. The cos/sin pair
// is content-invariant and free of wrap discontinuities, which is what lets
// a judge trained on a few dozen sources generalize across clip content.
// Time axis stride-subsampled over the whole clip, frequency cropped to the
// low bins.
template <class T>
std::vector<T> pack_localizer_input(const LocalizerInput& in,
                                    const LocalizerConfig& cfg) {
  check(in.bins >= cfg.freq_bins, "pack_localizer_input: too few bins");
  check(in.frames >= cfg.time_frames,
        "pack_localizer_input: too few frames");
  const int T0 = cfg.time_frames, F0 = cfg.freq_bins;
  std::vector<T> out(4 * static_cast<size_t>(T0) * F0);
  auto put = [&](int c, int t, int f, double v) {
    out[(static_cast<size_t>(c) * T0 + t) * F0 + f] = static_cast<T>(v);
  };
  for (int t = 0; t < T0; ++t) {
    const int ts = static_cast<int>(
        static_cast<int64_t>(t) * in.frames / T0);
    for (int f = 0; f < F0; ++f) {
      const double ipd = in.pha_at(0, ts, f) - in.pha_at(1, ts, f);
      put(0, t, f, std::cos(ipd));
      put(1, t, f, std::sin(ipd));
      put(2, t, f, in.mag_at(0, ts, f));
      put(3, t, f, in.mag_at(1, ts, f));
    }
  }
  return out;
}

// Ear swap on a packed plane: IPD negates (cos kept, sin flipped) and the
// magnitude maps trade places. With the synthetic mirror-symmetric HRIR this
// maps azimuth class c to (12 - c) % 12.
template <class T>
std::vector<T> swap_ears(const std::vector<T>& plane,
                         const LocalizerConfig& cfg) {
  const size_t cell = static_cast<size_t>(cfg.time_frames) * cfg.freq_bins;
  check(plane.size() == 4 * cell, "swap_ears: size mismatch");
  std::vector<T> out(plane.size());
  std::copy_n(plane.begin(), cell, out.begin());
  for (size_t i = 0; i < cell; ++i) out[cell + i] = -plane[cell + i];
  std::copy_n(plane.begin() + 2 * cell, cell, out.begin() + 3 * cell);
  std::copy_n(plane.begin() + 3 * cell, cell, out.begin() + 2 * cell);
  return out;
}

inline int mirror_class(int c) {
  return (AzimuthGrid::kClasses - c) % AzimuthGrid::kClasses;
}

// Stack of (stride-2 conv, group norm, SiLU) stages.
template <class T>
struct ConvStack {
  std::vector<nn::Conv2d<T>> convs;
  std::vector<nn::GroupNorm<T>> norms;

  ConvStack() = default;
  ConvStack(nn::ParamRegistry<T>& reg, const std::string& name, int in,
            const std::vector<int>& widths, Rng& rng) {
    int c = in;
    for (size_t i = 0; i < widths.size(); ++i) {
      convs.emplace_back(reg, name + ".conv" + std::to_string(i), c,
                         widths[i], 3, 2, 1, rng);
      int g = std::min(8, widths[i]);
      while (widths[i] % g != 0) --g;
      norms.emplace_back(reg, name + ".norm" + std::to_string(i), widths[i],
                         g);
      c = widths[i];
    }
  }

  nn::Tensor<T> forward(const nn::Tensor<T>& x) const {
    auto h = x;
    for (size_t i = 0; i < convs.size(); ++i)
      h = nn::silu(norms[i].forward(convs[i].forward(h)));
    return h;
  }
};

// Dual-branch azimuth classifier: separate phase/magnitude conv trunks,
// channel concat, two combined conv stages, three fully connected layers.
template <class T>
class LocalizerNet {
 public:
  LocalizerNet() = default;
  LocalizerNet(const LocalizerConfig& cfg, Rng& rng) : cfg_(cfg) {
    pha_ = ConvStack<T>(reg_, "pha", 2, cfg.branch_widths, rng);
    mag_ = ConvStack<T>(reg_, "mag", 2, cfg.branch_widths, rng);
    comb_ = ConvStack<T>(reg_, "comb", 2 * cfg.branch_widths.back(),
                         cfg.comb_widths, rng);
    int64_t h = cfg.time_frames, w = cfg.freq_bins;
    for (size_t i = 0;
         i < cfg.branch_widths.size() + cfg.comb_widths.size(); ++i) {
      h = (h + 1) / 2;
      w = (w + 1) / 2;
    }
    flat_ = cfg.comb_widths.back() * h * w;
    fc1_ = nn::Linear<T>(reg_, "fc1", flat_, cfg.fc_widths[0], rng);
    fc2_ = nn::Linear<T>(reg_, "fc2", cfg.fc_widths[0], cfg.fc_widths[1],
                         rng);
    fc3_ = nn::Linear<T>(reg_, "fc3", cfg.fc_widths[1], cfg.classes, rng);
  }

  const LocalizerConfig& config() const { return cfg_; }
  nn::ParamRegistry<T>& params() { return reg_; }
  const nn::ParamRegistry<T>& params() const { return reg_; }

  nn::Tensor<T> logits(const nn::Tensor<T>& x) const {
    const int64_t B = x.shape()[0];
    check(x.shape() ==
              nn::Shape{B, 4, cfg_.time_frames, cfg_.freq_bins},
          "LocalizerNet: bad input shape " + nn::shape_str(x.shape()));
    auto branches = nn::split(x, std::vector<int64_t>{2, 2}, 1);
    auto e = nn::concat(
        std::vector<nn::Tensor<T>>{pha_.forward(branches[0]),
                                   mag_.forward(branches[1])},
        1);
    auto h = comb_.forward(e);
    h = nn::reshape(h, nn::Shape{B, flat_});
    h = nn::silu(fc1_.forward(h));
    h = nn::silu(fc2_.forward(h));
    return fc3_.forward(h);
  }

  // Probability vector; sums to 1 per row.
  std::vector<double> predict(const std::vector<T>& plane) const {
    auto x = nn::Tensor<T>::from_values(
        nn::Shape{1, 4, cfg_.time_frames, cfg_.freq_bins}, plane);
    auto p = nn::softmax(logits(x));
    std::vector<double> out(p.values().size());
    for (size_t i = 0; i < out.size(); ++i)
      out[i] = static_cast<double>(p.values()[i]);
    return out;
  }

  int predict_class(const std::vector<T>& plane) const {
    auto p = predict(plane);
    return static_cast<int>(
        std::max_element(p.begin(), p.end()) - p.begin());
  }

  int predict_azimuth(const AudioClip& clip, const StftConfig& scfg) const {
    auto plane = pack_localizer_input<T>(featurize(clip, scfg), cfg_);
    return AzimuthGrid::kStepDeg * predict_class(plane);
  }

 private:
  LocalizerConfig cfg_;
  nn::ParamRegistry<T> reg_;
  ConvStack<T> pha_, mag_, comb_;
  nn::Linear<T> fc1_, fc2_, fc3_;
  int64_t flat_ = 0;
};

// Single-trunk event classifier over Mel features; its penultimate layer
// doubles as the embedding used by the distribution metrics.
template <class T>
class EventClassifier {
 public:
  struct Config {
    int in_channels = 2;
    int time_frames = 64;
    int freq_bins = 64;
    std::vector<int> widths = {16, 32, 64};
    int embed_dim = 64;
    int classes = 12;
  };

  EventClassifier() = default;
  EventClassifier(const Config& cfg, Rng& rng) : cfg_(cfg) {
    trunk_ = ConvStack<T>(reg_, "trunk", cfg.in_channels, cfg.widths, rng);
    int64_t h = cfg.time_frames, w = cfg.freq_bins;
    for (size_t i = 0; i < cfg.widths.size(); ++i) {
      h = (h + 1) / 2;
      w = (w + 1) / 2;
    }
    flat_ = cfg.widths.back() * h * w;
    fc_embed_ = nn::Linear<T>(reg_, "fc_embed", flat_, cfg.embed_dim, rng);
    fc_out_ = nn::Linear<T>(reg_, "fc_out", cfg.embed_dim, cfg.classes, rng);
  }

  const Config& config() const { return cfg_; }
  nn::ParamRegistry<T>& params() { return reg_; }
  const nn::ParamRegistry<T>& params() const { return reg_; }

  // Time-subsampled crop of a Mel feature into the network plane.
  std::vector<T> pack(const FeatureTensor& mel) const {
    check(mel.kind == FeatureKind::MEL, "EventClassifier: MEL input only");
    check(mel.bins >= cfg_.freq_bins && mel.valid_frames >= cfg_.time_frames,
          "EventClassifier: feature too small");
    std::vector<T> out(static_cast<size_t>(cfg_.in_channels) *
                       cfg_.time_frames * cfg_.freq_bins);
    for (int c = 0; c < cfg_.in_channels; ++c)
      for (int t = 0; t < cfg_.time_frames; ++t) {
        const int ts = static_cast<int>(static_cast<int64_t>(t) *
                                        mel.valid_frames / cfg_.time_frames);
        for (int f = 0; f < cfg_.freq_bins; ++f)
          out[(static_cast<size_t>(c) * cfg_.time_frames + t) *
                  cfg_.freq_bins +
              f] = static_cast<T>(mel.at(c, ts, f));
      }
    return out;
  }

  nn::Tensor<T> embed_t(const nn::Tensor<T>& x) const {
    const int64_t B = x.shape()[0];
    auto h = trunk_.forward(x);
    h = nn::reshape(h, nn::Shape{B, flat_});
    return nn::silu(fc_embed_.forward(h));
  }

  nn::Tensor<T> logits(const nn::Tensor<T>& x) const {
    return fc_out_.forward(embed_t(x));
  }

  std::vector<double> embed(const std::vector<T>& plane) const {
    auto x = nn::Tensor<T>::from_values(
        nn::Shape{1, cfg_.in_channels, cfg_.time_frames, cfg_.freq_bins},
        plane);
    auto e = embed_t(x);
    std::vector<double> out(e.values().size());
    for (size_t i = 0; i < out.size(); ++i)
      out[i] = static_cast<double>(e.values()[i]);
    return out;
  }

  std::vector<double> class_probs(const std::vector<T>& plane) const {
    auto x = nn::Tensor<T>::from_values(
        nn::Shape{1, cfg_.in_channels, cfg_.time_frames, cfg_.freq_bins},
        plane);
    auto p = nn::softmax(logits(x));
    std::vector<double> out(p.values().size());
    for (size_t i = 0; i < out.size(); ++i)
      out[i] = static_cast<double>(p.values()[i]);
    return out;
  }

 private:
  Config cfg_;
  nn::ParamRegistry<T> reg_;
  ConvStack<T> trunk_;
  nn::Linear<T> fc_embed_, fc_out_;
  int64_t flat_ = 0;
};

// --- Training --------------------------------------------------------------

struct ClassifierTrainResult {
  std::vector<double> loss_history;
  double val_acc = 0.0;
  double val_mae_deg = 0.0;  // azimuth judges only
  std::vector<std::vector<int>> confusion;  // [true][pred]
};

inline void write_confusion_csv(const std::vector<std::vector<int>>& m,
                                const std::string& path) {
  std::ofstream f(path);
  if (!f) throw RuntimeError("write_confusion_csv: cannot open: " + path);
  for (const auto& row : m) {
    for (size_t j = 0; j < row.size(); ++j)
      f << row[j] << (j + 1 < row.size() ? "," : "");
    f << "\n";
  }
}

// Generic deterministic cross-entropy trainer over pre-packed planes.
// logits_fn maps a batch tensor to [B, classes].
template <class T, class LogitsFn>
std::vector<double> train_classifier(
    nn::ParamRegistry<T>& params, const LogitsFn& logits_fn,
    const std::vector<std::vector<T>>& planes,
    const std::vector<int>& labels, const nn::Shape& sample_shape,
    const nn::OptimizerConfig& opt_cfg, int epochs, int batch_size,
    Rng& rng) {
  check(planes.size() == labels.size() && !planes.empty(),
        "train_classifier: bad dataset");
  auto opt = nn::make_adam(params, opt_cfg);
  std::vector<size_t> order(planes.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<double> history;
  const size_t plane_n = planes[0].size();
  for (int epoch = 0; epoch < epochs; ++epoch) {
    // Fisher-Yates with the run's generator keeps epochs reproducible.
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1],
                order[static_cast<size_t>(rng.uniform() * i)]);
    double epoch_loss = 0.0;
    int batches = 0;
    for (size_t at = 0; at < order.size(); at += batch_size) {
      const size_t bsz = std::min<size_t>(batch_size, order.size() - at);
      nn::Shape bshape = sample_shape;
      bshape[0] = static_cast<int64_t>(bsz);
      std::vector<T> flat(bsz * plane_n);
      std::vector<int64_t> ys(bsz);
      for (size_t b = 0; b < bsz; ++b) {
        std::copy(planes[order[at + b]].begin(),
                  planes[order[at + b]].end(), flat.begin() + b * plane_n);
        ys[b] = labels[order[at + b]];
      }
      auto x = nn::Tensor<T>::from_values(bshape, std::move(flat));
      auto loss = nn::cross_entropy(logits_fn(x), ys);
      params.zero_grads();
      loss.backward();
      opt.step();
      epoch_loss += static_cast<double>(loss.values()[0]);
      ++batches;
    }
    history.push_back(epoch_loss / batches);
  }
  return history;
}

// Trains the azimuth judge on a spatialized dataset manifest with ear-swap
// mirror augmentation; reports held-out accuracy, angular MAE, and the
// confusion matrix.
template <class T>
ClassifierTrainResult train_localizer(LocalizerNet<T>& net,
                                      const DatasetManifest& manifest,
                                      const StftConfig& scfg,
                                      const nn::OptimizerConfig& opt_cfg,
                                      int epochs, int batch_size, Rng& rng) {
  const auto& cfg = net.config();
  std::vector<std::vector<T>> train_planes, val_planes;
  std::vector<int> train_labels, val_labels;
  std::array<bool, AzimuthGrid::kClasses> seen{};
  for (const auto& rec : manifest.records) {
    auto clip = read_wav(rec.output);
    auto plane = pack_localizer_input<T>(featurize(clip, scfg), cfg);
    seen[rec.azimuth_class] = true;
    if (rec.split == "val") {
      val_planes.push_back(std::move(plane));
      val_labels.push_back(rec.azimuth_class);
    } else {
      train_planes.push_back(swap_ears(plane, cfg));
      train_labels.push_back(mirror_class(rec.azimuth_class));
      train_planes.push_back(std::move(plane));
      train_labels.push_back(rec.azimuth_class);
    }
  }
  check(std::count(seen.begin(), seen.end(), true) > 1,
        "train_localizer: dataset covers a single azimuth class");
  check(!train_planes.empty() && !val_planes.empty(),
        "train_localizer: empty split");

  ClassifierTrainResult res;
  res.loss_history = train_classifier(
      net.params(), [&](const nn::Tensor<T>& x) { return net.logits(x); },
      train_planes, train_labels,
      nn::Shape{1, 4, cfg.time_frames, cfg.freq_bins}, opt_cfg, epochs,
      batch_size, rng);

  res.confusion.assign(cfg.classes, std::vector<int>(cfg.classes, 0));
  int correct = 0;
  double mae = 0.0;
  for (size_t i = 0; i < val_planes.size(); ++i) {
    const int pred = net.predict_class(val_planes[i]);
    res.confusion[val_labels[i]][pred]++;
    if (pred == val_labels[i]) ++correct;
    const double d = std::abs(AzimuthGrid::kStepDeg *
                              (double)(pred - val_labels[i]));
    mae += std::min(d, 360.0 - d);
  }
  res.val_acc = static_cast<double>(correct) / val_planes.size();
  res.val_mae_deg = mae / val_planes.size();
  return res;
}

}  // namespace bf

#endif  // BINAURALFORGE_LOCALIZER_HPP
