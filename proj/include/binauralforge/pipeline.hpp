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

#ifndef BINAURALFORGE_PIPELINE_HPP
#define BINAURALFORGE_PIPELINE_HPP

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "binauralforge/diffusion.hpp"
#include "binauralforge/dsp.hpp"
#include "binauralforge/localizer.hpp"
#include "binauralforge/metrics.hpp"
#include "binauralforge/nn/unet.hpp"
#include "binauralforge/prompt.hpp"
#include "binauralforge/vae.hpp"

namespace bf {

// --- Feature cache ---------------------------------------------------------

struct FeatureConfigs {
  StftConfig stft;
  int n_mels = 64;
};

struct CachedPair {
  std::string mel_path, stft_path;
};

struct FeatureCacheResult {
  std::vector<CachedPair> pairs;  // aligned with manifest.records
  int hits = 0, misses = 0;
};

namespace pipeline_detail {

inline uint64_t file_fnv1a(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  check(static_cast<bool>(f), "file_fnv1a: cannot open: " + path);
  uint64_t h = 1469598103934665603ull;
  char buf[4096];
  while (f.read(buf, sizeof(buf)) || f.gcount() > 0) {
    for (std::streamsize i = 0; i < f.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
    if (!f) break;
  }
  return h;
}

inline std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

inline bool cache_entry_valid(const std::string& path) {
  namespace fs = std::filesystem;
  if (!fs::exists(path) || !fs::exists(path + ".crc")) return false;
  std::ifstream c(path + ".crc");
  std::string stored;
  c >> stored;
  return stored == hex64(file_fnv1a(path));
}

inline void write_cache_crc(const std::string& path) {
  std::ofstream c(path + ".crc");
  c << hex64(file_fnv1a(path)) << "\n";
}

}  // namespace pipeline_detail

// Computes (or reuses) Mel and STFT features per manifest record,
// content-addressed by the clip bytes and feature parameters so entries go
// stale the moment a clip is re-rendered differently at the same path.
inline FeatureCacheResult cache_features(const DatasetManifest& manifest,
                                         const FeatureConfigs& cfgs,
                                         const std::string& cache_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(cache_dir);
  const auto fb = mel_filterbank(cfgs.n_mels, cfgs.stft.n_fft / 2 + 1,
                                 kCanonicalRate);
  FeatureCacheResult res;
  for (const auto& rec : manifest.records) {
    const std::string key =
        pipeline_detail::hex64(pipeline_detail::file_fnv1a(rec.output)) +
        "|fft" + std::to_string(cfgs.stft.n_fft) + "|hop" +
        std::to_string(cfgs.stft.hop_length) + "|mel" +
        std::to_string(cfgs.n_mels);
    const std::string stem =
        (fs::path(cache_dir) / pipeline_detail::hex64(spatial_detail::fnv1a(key))).string();
    CachedPair pair{stem + "_mel.bff", stem + "_stft.bff"};
    if (pipeline_detail::cache_entry_valid(pair.mel_path) &&
        pipeline_detail::cache_entry_valid(pair.stft_path)) {
      ++res.hits;
    } else {
      auto clip = read_wav(rec.output);
      auto grid = stft(clip, cfgs.stft);
      write_feature(mel_spectrogram(grid, fb), pair.mel_path);
      write_feature(stft_feature(grid), pair.stft_path);
      pipeline_detail::write_cache_crc(pair.mel_path);
      pipeline_detail::write_cache_crc(pair.stft_path);
      ++res.misses;
    }
    res.pairs.push_back(std::move(pair));
  }
  return res;
}

// --- Variants --------------------------------------------------------------

enum class Variant { MEL_BASE = 0, STFT_BASE = 1, DUALSPEC = 2,
                     DUALSPEC_D = 3 };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::MEL_BASE: return "mel_base";
    case Variant::STFT_BASE: return "stft_base";
    case Variant::DUALSPEC: return "dualspec";
    case Variant::DUALSPEC_D: return "dualspec_d";
  }
  return "?";
}

inline Variant variant_from_name(const std::string& s) {
  for (Variant v : {Variant::MEL_BASE, Variant::STFT_BASE, Variant::DUALSPEC,
                    Variant::DUALSPEC_D})
    if (s == variant_name(v)) return v;
  throw ConfigError("unknown variant: " + s);
}

// Latent geometry for padded toy features (T=320; F=64 Mel / 256 STFT).
inline LatentLayout variant_layout(Variant v) {
  switch (v) {
    case Variant::MEL_BASE:
      return LatentLayout{8, 0, 80, 16, 0, 0};
    case Variant::STFT_BASE:
      return LatentLayout{0, 8, 40, 32, 40, 32};
    case Variant::DUALSPEC:
      return LatentLayout{8, 8, 80, 16, 40, 32};
    case Variant::DUALSPEC_D:
      return LatentLayout{0, 8, 40, 32, 40, 32};
  }
  throw ConfigError("variant_layout: bad variant");
}

// Denoiser, conditioning tables, schedule, and latent statistics for one
// trained text-to-spatial-audio variant.
template <class T>
struct VariantModel {
  Variant variant = Variant::DUALSPEC;
  LatentLayout layout;
  nn::UnetConfig unet_cfg;
  nn::ParamRegistry<T> reg;
  nn::Unet<T> unet;
  nn::ConditioningEmbedder<T> cond;
  NoiseSchedule sched;
  LatentScale scale_mel, scale_stft;

  VariantModel(Variant v, int n_events, const nn::UnetConfig& ucfg,
               const NoiseSchedule& schedule, Rng& rng)
      : variant(v), layout(variant_layout(v)), unet_cfg(ucfg),
        sched(schedule) {
    unet_cfg.in_channels = layout.channels();
    unet = nn::Unet<T>(reg, unet_cfg, rng);
    cond = nn::ConditioningEmbedder<T>(reg, n_events, unet_cfg.d_ctx, rng);
  }

  nn::Tensor<T> tau(const Conditioning& c) const { return cond.embed(c); }
};

// --- Latent dataset --------------------------------------------------------

template <class T>
struct LatentSample {
  LatentPair<T> pair;
  Conditioning cond;
};

// Per-record descriptor kind: seeded, stable across reruns of one config.
inline DescriptorKind pick_descriptor_kind(const std::string& clip_path,
                                           uint64_t seed) {
  return static_cast<DescriptorKind>(
      spatial_detail::fnv1a(clip_path + "#" + std::to_string(seed)) % 3);
}

template <class T>
void standardize(std::vector<T>& v, const LatentScale& s) {
  for (auto& x : v)
    x = static_cast<T>((static_cast<double>(x) - s.mean) / s.std);
}

template <class T>
void destandardize(std::vector<T>& v, const LatentScale& s) {
  for (auto& x : v)
    x = static_cast<T>(static_cast<double>(x) * s.std + s.mean);
}

template <class T>
LatentScale scale_of(const std::vector<std::vector<T>>& latents) {
  double sum = 0, sq = 0;
  size_t n = 0;
  for (const auto& l : latents)
    for (T v : l) {
      sum += static_cast<double>(v);
      sq += static_cast<double>(v) * static_cast<double>(v);
      ++n;
    }
  check(n > 0, "scale_of: no latents");
  LatentScale s;
  s.mean = sum / n;
  s.std = std::sqrt(std::max(sq / n - s.mean * s.mean, 1e-12));
  return s;
}

// Encodes train-split features to posterior-mean latents, computes the
// standardization scalars on the model, and attaches conditioning tuples.
template <class T>
std::vector<LatentSample<T>> build_latent_dataset(
    const DatasetManifest& manifest, const FeatureCacheResult& cache,
    VariantModel<T>& model, const Vae<T>* mel_vae, const Vae<T>* stft_vae,
    const Vae<T>* dual_vae, const EventVocab& vocab, uint64_t kind_seed) {
  check(cache.pairs.size() == manifest.records.size(),
        "build_latent_dataset: cache/manifest mismatch");
  const auto& lay = model.layout;
  std::vector<LatentSample<T>> out;
  std::vector<std::vector<T>> mels, stfts;
  for (size_t i = 0; i < manifest.records.size(); ++i) {
    const auto& rec = manifest.records[i];
    if (rec.split == "val") continue;
    LatentSample<T> s;
    s.cond.event_id = vocab.lookup(rec.event);
    s.cond.azimuth_class = rec.azimuth_class;
    s.cond.kind = pick_descriptor_kind(rec.output, kind_seed);
    const auto mel = read_feature(cache.pairs[i].mel_path);
    const auto stf = read_feature(cache.pairs[i].stft_path);
    if (model.variant == Variant::DUALSPEC_D) {
      check(dual_vae, "build_latent_dataset: dual VAE required");
      s.pair.stft = encode_mean(*dual_vae, pack_dual<T>(mel, stf),
                                mel.frames, stf.bins);
    } else {
      if (lay.c_mel > 0) {
        check(mel_vae, "build_latent_dataset: Mel VAE required");
        s.pair.mel = encode_mean(*mel_vae, pack_feature<T>(mel), mel.frames,
                                 mel.bins);
      }
      if (lay.c_stft > 0) {
        check(stft_vae, "build_latent_dataset: STFT VAE required");
        s.pair.stft = encode_mean(*stft_vae, pack_feature<T>(stf),
                                  stf.frames, stf.bins);
      }
    }
    if (!s.pair.mel.empty()) mels.push_back(s.pair.mel);
    if (!s.pair.stft.empty()) stfts.push_back(s.pair.stft);
    out.push_back(std::move(s));
  }
  check(!out.empty(), "build_latent_dataset: no training records");
  model.scale_mel = mels.empty() ? LatentScale{} : scale_of(mels);
  model.scale_stft = stfts.empty() ? LatentScale{} : scale_of(stfts);
  for (auto& s : out) {
    standardize(s.pair.mel, model.scale_mel);
    standardize(s.pair.stft, model.scale_stft);
  }
  return out;
}

// --- Training --------------------------------------------------------------

template <class T>
std::vector<double> train_variant(VariantModel<T>& model,
                                  const std::vector<LatentSample<T>>& data,
                                  const nn::OptimizerConfig& opt_cfg,
                                  int steps, double cond_drop_p, Rng& rng) {
  check(!data.empty(), "train_variant: empty latent dataset");
  auto opt = nn::make_adam(model.reg, opt_cfg);
  auto null_tau = model.cond.null_embedding();
  TrainDenoiserFn<T> denoiser =
      [&](const nn::Tensor<T>& z, int n, const nn::Tensor<T>& ctx) {
        return model.unet.forward(z, n, ctx);
      };
  std::vector<double> losses;
  size_t cursor = 0;
  for (int step = 0; step < steps; ++step) {
    const auto& s = data[cursor];
    cursor = (cursor + 1) % data.size();
    auto loss = ldm_loss(s.pair, model.tau(s.cond),
                         model.cond.null_embedding(), model.sched, denoiser,
                         model.layout, cond_drop_p, rng);
    model.reg.zero_grads();
    loss.backward();
    opt.step();
    losses.push_back(static_cast<double>(loss.values()[0]));
  }
  return losses;
}

// --- Generation ------------------------------------------------------------

struct GenerationResult {
  AudioClip clip;
  Conditioning cond;
  double peak_rescale = 1.0;  // applied when decode exceeds full scale
};

// Frame count carrying real signal for the canonical 5 s / 16 kHz clip.
inline int canonical_valid_frames(const StftConfig& scfg,
                                  const ClipSpec& spec = {}) {
  return 1 + static_cast<int>(spec.target_samples() / scfg.hop_length);
}

template <class T>
GenerationResult generate(const VariantModel<T>& model,
                          const Vae<T>* mel_vae, const Vae<T>* stft_vae,
                          const Vae<T>* dual_vae, const std::string& prompt,
                          const EventVocab& vocab, const StftConfig& scfg,
                          int steps, double guidance, uint64_t seed) {
  GenerationResult res;
  res.cond = parse_prompt(prompt, vocab);
  const auto& lay = model.layout;

  auto tau_t = model.tau(res.cond);
  const std::vector<T>& tau_flat = tau_t.values();
  DenoiserFn<T> denoiser = [&](const std::vector<T>& z, int n,
                               const std::vector<T>* ctx) {
    auto zt = nn::Tensor<T>::from_values(
        nn::Shape{1, lay.channels(), lay.H, lay.W}, z);
    auto c = ctx ? tau_t : model.cond.null_embedding();
    return model.unet.forward(zt, n, c).values();
  };
  Rng rng(seed);
  auto pair = sample(denoiser, tau_flat, model.sched, steps, guidance, rng,
                     lay);
  destandardize(pair.mel, model.scale_mel);
  destandardize(pair.stft, model.scale_stft);

  const int n_mels = 64, n_bins = scfg.n_fft / 2 + 1;
  const auto fb = mel_filterbank(n_mels, n_bins, kCanonicalRate);
  const int valid = canonical_valid_frames(scfg);
  const int64_t Tpad = (valid + kPadMultiple - 1) / kPadMultiple * kPadMultiple;
  const ClipSpec spec;

  auto mel_feature_of = [&](const std::vector<T>& plane) {
    FeatureTensor f;
    f.kind = FeatureKind::MEL;
    f.channels = 2;
    f.frames = static_cast<int>(Tpad);
    f.bins = n_mels;
    f.valid_frames = valid;
    f.sample_rate = kCanonicalRate;
    f.hop = scfg.hop_length;
    f.data.assign(plane.begin(), plane.end());
    return f;
  };
  auto stft_feature_of = [&](const std::vector<T>& plane) {
    FeatureTensor f;
    f.kind = FeatureKind::STFT;
    f.channels = 6;
    f.frames = static_cast<int>(Tpad);
    f.bins = n_bins - 1;
    f.valid_frames = valid;
    f.sample_rate = kCanonicalRate;
    f.hop = scfg.hop_length;
    f.data.assign(plane.begin(), plane.end());
    renormalize_phase(f);
    return f;
  };

  AudioClip clip;
  switch (model.variant) {
    case Variant::MEL_BASE: {
      check(mel_vae, "generate: Mel VAE required");
      auto plane = decode_flat(*mel_vae, pair.mel, lay.H, lay.W);
      auto mag = invert_mel(mel_feature_of(plane), fb);
      clip = griffin_lim(mag, scfg, 32, spec.target_samples());
      break;
    }
    case Variant::STFT_BASE: {
      check(stft_vae, "generate: STFT VAE required");
      auto plane = decode_flat(*stft_vae, pair.stft, lay.Hs, lay.Ws);
      auto grid = stft_feature_to_grid(stft_feature_of(plane), valid);
      clip = istft(grid, scfg, spec.target_samples());
      break;
    }
    case Variant::DUALSPEC: {
      check(mel_vae && stft_vae, "generate: both VAEs required");
      auto mel_plane = decode_flat(*mel_vae, pair.mel, lay.H, lay.W);
      auto stft_plane = decode_flat(*stft_vae, pair.stft, lay.Hs, lay.Ws);
      auto mag = invert_mel(mel_feature_of(mel_plane), fb);
      auto phase = stft_feature_to_grid(stft_feature_of(stft_plane), valid);
      clip = istft(merge_phase(mag, phase), scfg, spec.target_samples());
      break;
    }
    case Variant::DUALSPEC_D: {
      check(dual_vae, "generate: dual VAE required");
      auto plane = decode_flat(*dual_vae, pair.stft, lay.Hs, lay.Ws);
      // Split the decoded 8-channel plane back into branch features.
      FeatureTensor mel = mel_feature_of(std::vector<T>(
          static_cast<size_t>(2) * Tpad * n_mels, T(0)));
      FeatureTensor stf = stft_feature_of(std::vector<T>(
          static_cast<size_t>(6) * Tpad * (n_bins - 1), T(0)));
      unpack_dual(plane, mel, stf);
      renormalize_phase(stf);
      auto mag = invert_mel(mel, fb);
      auto phase = stft_feature_to_grid(stf, valid);
      clip = istft(merge_phase(mag, phase), scfg, spec.target_samples());
      break;
    }
  }
  clip.sample_rate = kCanonicalRate;
  for (auto& ch : clip.samples) ch.resize(spec.target_samples(), 0.0);
  if (clip.samples.size() == 1) clip.samples.push_back(clip.samples[0]);

  double peak = 0.0;
  for (const auto& ch : clip.samples)
    for (double v : ch) peak = std::max(peak, std::abs(v));
  if (peak > 0.999) {
    res.peak_rescale = 0.999 / peak;
    for (auto& ch : clip.samples)
      for (auto& v : ch) v *= res.peak_rescale;
  }
  res.clip = std::move(clip);
  return res;
}

// --- Evaluation ------------------------------------------------------------

struct EvalReport {
  double fd = 0, kl = 0, is = 1, mae_deg = 0, acc_frac = 0;
  double psnr_db = 0, ssim_score = 0;
  bool has_paired = false;
  int n_samples = 0;
  std::string embedder_tag, judge_tag;

  nlohmann::json to_json() const {
    nlohmann::json j{{"fd", fd},     {"kl", kl},
                     {"is", is},     {"mae", mae_deg},
                     {"acc", acc_frac}, {"n_samples", n_samples},
                     {"embedder_tag", embedder_tag},
                     {"judge_tag", judge_tag}};
    if (has_paired) {
      j["psnr"] = psnr_db;
      j["ssim"] = ssim_score;
    }
    return j;
  }
};

template <class T>
struct EvalInputs {
  // Generated clips with their prompt-derived ground truth.
  std::vector<AudioClip> clips;
  std::vector<Conditioning> truth;
  // Reference clips matched by (event, azimuth) for FD/KL.
  std::vector<AudioClip> references;
  std::vector<const AudioClip*> paired;  // optional per-clip pair for PSNR
};

template <class T>
EvalReport evaluate(const EvalInputs<T>& in, const LocalizerNet<T>& judge,
                    const EventClassifier<T>& embedder,
                    const StftConfig& scfg) {
  check(!in.clips.empty(), "evaluate: empty input set");
  check(in.clips.size() == in.truth.size(), "evaluate: truth mismatch");
  const auto fb =
      mel_filterbank(64, scfg.n_fft / 2 + 1, kCanonicalRate);
  auto mel_of = [&](const AudioClip& clip) {
    return mel_spectrogram(stft(clip, scfg), fb);
  };

  EvalReport rep;
  rep.n_samples = static_cast<int>(in.clips.size());
  rep.embedder_tag = "toy-event-classifier";
  rep.judge_tag = "toy-azimuth-judge";

  std::vector<double> true_deg, pred_deg;
  std::vector<int> true_cls, pred_cls;
  std::vector<std::vector<double>> gen_embed, gen_probs;
  for (size_t i = 0; i < in.clips.size(); ++i) {
    const int pred = judge.predict_azimuth(in.clips[i], scfg);
    pred_deg.push_back(pred);
    pred_cls.push_back(pred / AzimuthGrid::kStepDeg);
    true_deg.push_back(AzimuthGrid::to_degrees(in.truth[i].azimuth_class));
    true_cls.push_back(in.truth[i].azimuth_class);
    auto plane = embedder.pack(mel_of(in.clips[i]));
    gen_embed.push_back(embedder.embed(plane));
    gen_probs.push_back(embedder.class_probs(plane));
  }
  rep.mae_deg = angular_mae(true_deg, pred_deg);
  rep.acc_frac = acc(true_cls, pred_cls);

  if (in.references.size() >= 2 && in.clips.size() >= 2) {
    std::vector<std::vector<double>> ref_embed, ref_probs;
    for (const auto& ref : in.references) {
      auto plane = embedder.pack(mel_of(ref));
      ref_embed.push_back(embedder.embed(plane));
      ref_probs.push_back(embedder.class_probs(plane));
    }
    rep.fd = frechet_distance(gaussian_stats(ref_embed),
                              gaussian_stats(gen_embed));
    if (ref_probs.size() == gen_probs.size())
      rep.kl = kl_divergence(ref_probs, gen_probs);
  }
  rep.is = inception_score(gen_probs);

  if (!in.paired.empty()) {
    check(in.paired.size() == in.clips.size(), "evaluate: paired mismatch");
    double psum = 0, ssum = 0;
    for (size_t i = 0; i < in.clips.size(); ++i) {
      std::vector<double> x, y;
      for (const auto& ch : in.clips[i].samples)
        x.insert(x.end(), ch.begin(), ch.end());
      for (const auto& ch : in.paired[i]->samples)
        y.insert(y.end(), ch.begin(), ch.end());
      psum += psnr(x, y, 1.0);
      ssum += ssim(x, y, 2.0);
    }
    rep.psnr_db = psum / in.clips.size();
    rep.ssim_score = ssum / in.clips.size();
    rep.has_paired = true;
  }
  return rep;
}

}  // namespace bf

#endif  // BINAURALFORGE_PIPELINE_HPP
