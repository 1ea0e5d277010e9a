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

#ifndef BINAURALFORGE_SPATIAL_HPP
#define BINAURALFORGE_SPATIAL_HPP

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "binauralforge/audio_io.hpp"
#include "binauralforge/common.hpp"

namespace bf {

// 12 horizontal classes, 30 degrees apart, clockwise, 0 = front.
struct AzimuthGrid {
  static constexpr int kClasses = 12;
  static constexpr int kStepDeg = 30;
  static int to_degrees(int azimuth_class) {
    check(azimuth_class >= 0 && azimuth_class < kClasses,
          "AzimuthGrid: class index out of range");
    return azimuth_class * kStepDeg;
  }
  static int to_class(int degrees) {
    check(degrees >= 0 && degrees < 360 && degrees % kStepDeg == 0,
          "AzimuthGrid: degrees not on the 30-degree grid");
    return degrees / kStepDeg;
  }
};

enum class HrirSource { Measured, Synthetic };

// Per-azimuth stereo impulse response pairs at 16 kHz.
struct HrirBank {
  struct Pair {
    std::vector<double> left;
    std::vector<double> right;
  };
  std::vector<Pair> irs;  // indexed by azimuth class
  HrirSource source = HrirSource::Synthetic;

  void validate() const {
    check(static_cast<int>(irs.size()) == AzimuthGrid::kClasses,
          "HrirBank: expected 12 azimuth entries");
    for (const auto& p : irs) {
      check(!p.left.empty() && p.left.size() == p.right.size(),
            "HrirBank: unequal or empty tap counts");
      for (double t : p.left) check(std::isfinite(t), "HrirBank: non-finite tap");
      for (double t : p.right) check(std::isfinite(t), "HrirBank: non-finite tap");
    }
  }
  int taps() const { return static_cast<int>(irs.at(0).left.size()); }
};

// Spherical-head HRIR fixture: Woodworth ITD, up to 6 dB ILD, first-order
// head-shadow low-pass on the far ear, and a pinna-shadow low-pass on both
// ears for rear sources. The rear cue is what disambiguates front/back pairs
// (theta vs 180 - theta), which share identical ITD and ILD on a sphere.
// Built so left/right mirror pairs are sample-exact swaps.
inline HrirBank synth_spherical_hrir(double head_radius = 0.0875,
                                     int taps = 128,
                                     int sample_rate = kCanonicalRate) {
  check(head_radius > 0, "synth_spherical_hrir: head_radius must be positive");
  const double c = 343.0;
  const double base_delay = taps / 4.0;  // shared causal offset, samples

  auto fractional_impulse = [&](double delay) {
    // Windowed-sinc fractional delay.
    std::vector<double> h(taps, 0.0);
    for (int n = 0; n < taps; ++n) {
      const double x = n - delay;
      const double sinc = x == 0.0 ? 1.0 : std::sin(kPi * x) / (kPi * x);
      const double u = (n - delay) / (taps / 2.0);
      if (u <= -1.0 || u >= 1.0) continue;
      h[n] = sinc * (0.5 + 0.5 * std::cos(kPi * u));  // Hann taper
    }
    return h;
  };
  auto one_pole_lowpass = [&](std::vector<double> x, double cutoff_hz) {
    const double a = 1.0 - std::exp(-2.0 * kPi * cutoff_hz / sample_rate);
    double y = 0.0;
    for (double& v : x) {
      y += a * (v - y);
      v = y;
    }
    return x;
  };

  HrirBank bank;
  bank.source = HrirSource::Synthetic;
  bank.irs.resize(AzimuthGrid::kClasses);
  for (int k = 0; k < AzimuthGrid::kClasses; ++k) {
    const double theta = AzimuthGrid::to_degrees(k) * kPi / 180.0;
    const double lateral = std::sin(theta);  // >0: source right of median plane
    const double ear_bearing = std::asin(std::abs(lateral));
    const double itd = (head_radius / c) * (ear_bearing + std::sin(ear_bearing));
    const double itd_samples = itd * sample_rate;

    std::vector<double> near_ir = fractional_impulse(base_delay);
    std::vector<double> far_ir = fractional_impulse(base_delay + itd_samples);
    const double depth = std::cos(theta);  // <0: source behind the head
    if (depth < 0.0) {
      // Second-order pinna shadow; steep enough that front/back pairs stay
      // separable after log-magnitude compression downstream.
      const double rear_cutoff = 6000.0 - 4500.0 * (-depth);
      for (int pass = 0; pass < 2; ++pass) {
        near_ir = one_pole_lowpass(std::move(near_ir), rear_cutoff);
        far_ir = one_pole_lowpass(std::move(far_ir), rear_cutoff);
      }
    }
    const double ild_gain = std::pow(10.0, -6.0 * std::abs(lateral) / 20.0);
    if (std::abs(lateral) > 0.0) {
      const double nyquist = sample_rate / 2.0;
      const double cutoff = nyquist - (nyquist - 1500.0) * std::abs(lateral);
      far_ir = one_pole_lowpass(std::move(far_ir), cutoff);
      for (double& v : far_ir) v *= ild_gain;
    }
    if (lateral > 0.0) {  // source on the right: right ear near
      bank.irs[k].right = near_ir;
      bank.irs[k].left = far_ir;
    } else if (lateral < 0.0) {
      bank.irs[k].left = near_ir;
      bank.irs[k].right = far_ir;
    } else {  // front or back: symmetric
      bank.irs[k].left = near_ir;
      bank.irs[k].right = near_ir;
    }
  }
  bank.validate();
  return bank;
}

// Loads measured HRIRs from azimuth_000.wav ... azimuth_330.wav (stereo).
inline HrirBank load_hrir_bank(const std::string& dir,
                               int sample_rate = kCanonicalRate) {
  HrirBank bank;
  bank.source = HrirSource::Measured;
  bank.irs.resize(AzimuthGrid::kClasses);
  size_t taps = 0;
  for (int k = 0; k < AzimuthGrid::kClasses; ++k) {
    const int deg = AzimuthGrid::to_degrees(k);
    char name[32];
    std::snprintf(name, sizeof(name), "azimuth_%03d.wav", deg);
    const std::filesystem::path path = std::filesystem::path(dir) / name;
    if (!std::filesystem::exists(path))
      throw RuntimeError("load_hrir_bank: missing impulse response for azimuth " +
                         std::to_string(deg) + " (" + path.string() + ")");
    AudioClip ir = read_wav(path.string());
    check(ir.channels() == 2, "load_hrir_bank: " + path.string() +
                                  " must be stereo (left, right)");
    if (ir.sample_rate != sample_rate) ir = resample(ir, sample_rate);
    bank.irs[k].left = ir.samples[0];
    bank.irs[k].right = ir.samples[1];
    taps = std::max(taps, ir.length());
  }
  // Equalize tap counts by zero-padding to the longest response.
  for (auto& p : bank.irs) {
    p.left.resize(taps, 0.0);
    p.right.resize(taps, 0.0);
  }
  bank.validate();
  return bank;
}

// Convolves a mono clip with the HRIR pair of one azimuth class.
// Full convolution truncated to the input length.
inline AudioClip spatialize(const AudioClip& mono, const HrirBank& bank,
                            int azimuth_class) {
  mono.validate();
  bank.validate();
  check(mono.channels() == 1, "spatialize: input must be mono");
  check(azimuth_class >= 0 && azimuth_class < AzimuthGrid::kClasses,
        "spatialize: azimuth class out of range");
  const auto& pair = bank.irs[azimuth_class];
  const size_t n = mono.length();
  const size_t taps = pair.left.size();
  AudioClip out;
  out.sample_rate = mono.sample_rate;
  out.samples.assign(2, std::vector<double>(n, 0.0));
  const auto& x = mono.samples[0];
  for (int side = 0; side < 2; ++side) {
    const auto& h = side == 0 ? pair.left : pair.right;
    auto& y = out.samples[side];
    for (size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      const size_t kmax = std::min(taps, i + 1);
      for (size_t k = 0; k < kmax; ++k) acc += h[k] * x[i - k];
      y[i] = acc;
    }
  }
  return out;
}

// --- Dataset construction --------------------------------------------------

struct ManifestRecord {
  std::string source;       // source WAV, as given
  std::string event;        // label = immediate parent directory name
  int azimuth_class = 0;
  std::string output;       // spatialized stereo WAV path
  double duration = 0.0;    // seconds
  std::string split;        // "train" | "val"
  double gain_applied = 1.0;  // common rescale when convolution clipped
};

struct DatasetManifest {
  std::vector<ManifestRecord> records;
  std::vector<std::string> skipped;  // sources under the minimum length
  std::map<std::string, int> split_counts;
  std::vector<std::string> events;  // sorted unique labels
  int clipped_outputs = 0;          // outputs that needed rescaling

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["records"] = nlohmann::json::array();
    for (const auto& r : records) {
      j["records"].push_back({{"source", r.source},
                              {"event", r.event},
                              {"azimuth_class", r.azimuth_class},
                              {"output", r.output},
                              {"duration", r.duration},
                              {"split", r.split},
                              {"gain_applied", r.gain_applied}});
    }
    j["skipped"] = skipped;
    j["split_counts"] = split_counts;
    j["events"] = events;
    j["clipped_outputs"] = clipped_outputs;
    return j;
  }
  static DatasetManifest from_json(const nlohmann::json& j) {
    DatasetManifest m;
    for (const auto& r : j.at("records")) {
      ManifestRecord rec;
      rec.source = r.at("source");
      rec.event = r.at("event");
      rec.azimuth_class = r.at("azimuth_class");
      rec.output = r.at("output");
      rec.duration = r.at("duration");
      rec.split = r.at("split");
      rec.gain_applied = r.value("gain_applied", 1.0);
      m.records.push_back(rec);
    }
    for (const auto& s : j.at("skipped")) m.skipped.push_back(s);
    for (auto it = j.at("split_counts").begin(); it != j.at("split_counts").end();
         ++it)
      m.split_counts[it.key()] = it.value();
    for (const auto& e : j.at("events")) m.events.push_back(e);
    m.clipped_outputs = j.value("clipped_outputs", 0);
    return m;
  }
  void save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw RuntimeError("DatasetManifest: cannot write " + path);
    f << to_json().dump(1) << "\n";
  }
  static DatasetManifest load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw RuntimeError("DatasetManifest: cannot read " + path);
    nlohmann::json j;
    f >> j;
    return from_json(j);
  }
};

namespace spatial_detail {

inline uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace spatial_detail

// Builds the spatialized dataset: resample -> length filter -> crop/pad ->
// peak-normalize -> 12 spatialized stereo outputs per source clip.
// Deterministic ordering by (source path, azimuth); the val split is a
// stable hash of the source path (roughly 1 in 5).
inline DatasetManifest build_dataset(const std::string& src_dir,
                                     const HrirBank& bank, const ClipSpec& spec,
                                     const std::string& out_dir,
                                     double normalize_peak = 0.9) {
  namespace fs = std::filesystem;
  bank.validate();
  spec.validate();
  check(fs::is_directory(src_dir), "build_dataset: source dir not found: " + src_dir);

  std::vector<fs::path> sources;
  for (const auto& entry : fs::recursive_directory_iterator(src_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".wav")
      sources.push_back(entry.path());
  std::sort(sources.begin(), sources.end());
  check(!sources.empty(), "build_dataset: no WAV files under " + src_dir);

  fs::create_directories(out_dir);
  DatasetManifest manifest;
  std::vector<std::string> events;
  const size_t min_samples = static_cast<size_t>(
      std::llround(spec.min_length * spec.target_rate));
  for (const auto& src : sources) {
    AudioClip clip = read_wav(src.string());
    check(clip.channels() == 1,
          "build_dataset: expected mono source: " + src.string());
    if (clip.sample_rate != spec.target_rate)
      clip = resample(clip, spec.target_rate);
    if (clip.length() < min_samples) {
      manifest.skipped.push_back(src.string());
      continue;
    }
    clip = crop_or_pad(clip, spec);
    if (normalize_peak > 0.0) clip = peak_normalize(clip, normalize_peak);
    const std::string event = src.parent_path().filename().string();
    events.push_back(event);
    const std::string split =
        spatial_detail::fnv1a(src.string()) % 5 == 0 ? "val" : "train";
    fs::create_directories(fs::path(out_dir) / event);
    for (int k = 0; k < AzimuthGrid::kClasses; ++k) {
      AudioClip st = spatialize(clip, bank, k);
      double maxabs = 0.0;
      for (const auto& ch : st.samples)
        for (double s : ch) maxabs = std::max(maxabs, std::abs(s));
      double gain = 1.0;
      if (maxabs > 1.0) {
        gain = 1.0 / maxabs;  // common factor, ILD preserved
        for (auto& ch : st.samples)
          for (double& s : ch) s *= gain;
        ++manifest.clipped_outputs;
      }
      char suffix[24];
      std::snprintf(suffix, sizeof(suffix), "_az%03d.wav",
                    AzimuthGrid::to_degrees(k));
      const std::string rel =
          (fs::path(event) / (src.stem().string() + suffix)).string();
      const std::string out_path = (fs::path(out_dir) / rel).string();
      write_wav(st, out_path);
      ManifestRecord rec;
      rec.source = src.string();
      rec.event = event;
      rec.azimuth_class = k;
      rec.output = out_path;
      rec.duration = st.duration();
      rec.split = split;
      rec.gain_applied = gain;
      manifest.records.push_back(rec);
      ++manifest.split_counts[split];
    }
  }
  std::sort(events.begin(), events.end());
  events.erase(std::unique(events.begin(), events.end()), events.end());
  manifest.events = events;
  return manifest;
}

}  // namespace bf

#endif  // BINAURALFORGE_SPATIAL_HPP
