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

#ifndef BINAURALFORGE_TOYDATA_HPP
#define BINAURALFORGE_TOYDATA_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "binauralforge/audio_io.hpp"

namespace bf {

// Twelve synthetic mono event classes. Each clip is deterministic given
// (event, index): narrowband tones, chirps, band noise, impulsive trains, a
// siren — chosen so Mel inversion and localization both have usable energy.
inline const std::vector<std::string>& toy_event_labels() {
  static const std::vector<std::string> labels = {
      "tone_low",   "tone_high",  "chirp_up",    "chirp_down",
      "white_noise", "band_noise", "click_train", "harmonic_stack",
      "siren",      "tremolo",    "pulse_burst", "low_rumble"};
  return labels;
}

inline AudioClip make_toy_clip(const std::string& event, int index,
                               const ClipSpec& spec = {}) {
  const auto& labels = toy_event_labels();
  int id = -1;
  for (size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == event) id = static_cast<int>(i);
  check(id >= 0, "make_toy_clip: unknown event: " + event);

  const int sr = spec.target_rate;
  const size_t n = static_cast<size_t>(spec.target_length * sr);
  Rng rng(0x746f79ull ^ (static_cast<uint64_t>(id) << 16) ^
          static_cast<uint64_t>(index));
  // Per-clip jitter keeps instances of one class distinct but related.
  const double jitter = 1.0 + 0.08 * (rng.uniform() - 0.5);

  std::vector<double> x(n, 0.0);
  auto tone = [&](double f0, double amp) {
    for (size_t i = 0; i < n; ++i)
      x[i] += amp * std::sin(2.0 * kPi * f0 * i / sr);
  };
  switch (id) {
    case 0:  // tone_low
      tone(220.0 * jitter, 0.6);
      break;
    case 1:  // tone_high
      tone(2000.0 * jitter, 0.6);
      break;
    case 2:  // chirp_up: 200 Hz -> 4 kHz
      for (size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / sr;
        const double f0 = 200.0 * jitter, f1 = 4000.0 * jitter;
        const double k = (f1 - f0) / (2.0 * spec.target_length);
        x[i] = 0.6 * std::sin(2.0 * kPi * (f0 * t + k * t * t));
      }
      break;
    case 3:  // chirp_down: 4 kHz -> 200 Hz
      for (size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / sr;
        const double f0 = 4000.0 * jitter, f1 = 200.0 * jitter;
        const double k = (f1 - f0) / (2.0 * spec.target_length);
        x[i] = 0.6 * std::sin(2.0 * kPi * (f0 * t + k * t * t));
      }
      break;
    case 4:  // white_noise
      for (auto& v : x) v = 0.35 * (2.0 * rng.uniform() - 1.0);
      break;
    case 5: {  // band_noise: noise through a resonant two-pole
      const double fc = 1000.0 * jitter, q = 8.0;
      const double w0 = 2.0 * kPi * fc / sr, alpha = std::sin(w0) / (2 * q);
      const double b0 = alpha, a0 = 1 + alpha, a1 = -2 * std::cos(w0),
                   a2 = 1 - alpha;
      double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
      for (auto& v : x) {
        const double in = 2.0 * rng.uniform() - 1.0;
        const double out = (b0 * in - b0 * x2 - a1 * y1 - a2 * y2) / a0;
        x2 = x1;
        x1 = in;
        y2 = y1;
        y1 = out;
        v = 1.2 * out;
      }
      break;
    }
    case 6: {  // click_train: 8 Hz impulse train, lightly ringing
      const size_t period = static_cast<size_t>(sr / (8.0 * jitter));
      for (size_t i = 0; i < n; i += period)
        for (size_t j = 0; j < 64 && i + j < n; ++j)
          x[i + j] += 0.8 * std::exp(-0.15 * j) *
                      std::cos(2.0 * kPi * 1800.0 * j / sr);
      break;
    }
    case 7:  // harmonic_stack
      for (int h = 1; h <= 6; ++h) tone(180.0 * jitter * h, 0.22 / h);
      break;
    case 8:  // siren: slow FM sweep
      for (size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / sr;
        const double f0 = 900.0 * jitter + 500.0 * std::sin(2.0 * kPi * 0.6 * t);
        x[i] = 0.55 * std::sin(2.0 * kPi * f0 * t);
      }
      break;
    case 9:  // tremolo: AM tone
      for (size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / sr;
        x[i] = 0.6 * (0.5 + 0.5 * std::sin(2.0 * kPi * 5.0 * t)) *
               std::sin(2.0 * kPi * 600.0 * jitter * t);
      }
      break;
    case 10: {  // pulse_burst: gated band noise at 2 Hz
      const double gate_hz = 2.0;
      for (size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / sr;
        const bool on = std::fmod(t * gate_hz, 1.0) < 0.35;
        x[i] = on ? 0.45 * std::sin(2.0 * kPi * 1400.0 * jitter * t) *
                        (0.7 + 0.3 * rng.uniform())
                  : 0.0;
      }
      break;
    }
    case 11: {  // low_rumble: one-pole lowpassed noise
      double state = 0.0;
      const double a = 0.02;
      for (auto& v : x) {
        state += a * ((2.0 * rng.uniform() - 1.0) - state);
        v = 8.0 * state;
      }
      break;
    }
    default:
      break;
  }
  // Gentle fade at the edges avoids clicks in spatialized output.
  const size_t fade = sr / 100;
  for (size_t i = 0; i < fade && i < n; ++i) {
    const double g = static_cast<double>(i) / fade;
    x[i] *= g;
    x[n - 1 - i] *= g;
  }
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  if (peak > 0.95)
    for (auto& v : x) v *= 0.95 / peak;

  AudioClip clip;
  clip.sample_rate = sr;
  clip.samples = {std::move(x)};
  return clip;
}

// Writes clips_per_event mono WAVs per class under dir/<event>/.
inline std::vector<std::string> make_toy_corpus(const std::string& dir,
                                                int clips_per_event,
                                                const ClipSpec& spec = {}) {
  namespace fs = std::filesystem;
  check(clips_per_event >= 1, "make_toy_corpus: need at least one clip");
  for (const auto& event : toy_event_labels()) {
    fs::create_directories(fs::path(dir) / event);
    for (int i = 0; i < clips_per_event; ++i) {
      char name[64];
      std::snprintf(name, sizeof(name), "%s_%03d.wav", event.c_str(), i);
      write_wav(make_toy_clip(event, i, spec),
                (fs::path(dir) / event / name).string());
    }
  }
  return toy_event_labels();
}

}  // namespace bf

#endif  // BINAURALFORGE_TOYDATA_HPP
