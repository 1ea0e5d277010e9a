// Copyright 2026 The binauralforge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "binauralforge/dsp.hpp"
#include "binauralforge/fft.hpp"
#include "test_util.hpp"

using namespace bf;

TEST_CASE("fft matches the naive DFT oracle") {
  Rng rng(7);
  std::vector<cpx> x(256);
  for (auto& v : x) v = cpx(rng.normal(), rng.normal());
  auto fast = fft(x);
  auto slow = fft_detail::dft_naive(x, -1);
  double worst = 0;
  for (size_t i = 0; i < x.size(); ++i)
    worst = std::max(worst, std::abs(fast[i] - slow[i]));
  CHECK(worst < 1e-9);

  auto back = ifft(fast);
  worst = 0;
  for (size_t i = 0; i < x.size(); ++i)
    worst = std::max(worst, std::abs(back[i] - x[i]));
  CHECK(worst < 1e-12);
}

TEST_CASE("rfft/irfft invert each other") {
  Rng rng(11);
  std::vector<double> x(512);
  for (auto& v : x) v = rng.normal();
  auto bins = rfft(x);
  REQUIRE(bins.size() == 257);
  auto back = irfft(bins, x.size());
  double worst = 0;
  for (size_t i = 0; i < x.size(); ++i)
    worst = std::max(worst, std::abs(back[i] - x[i]));
  CHECK(worst < 1e-12);
}

TEST_CASE("istft inverts stft on random audio") {
  Rng rng(3);
  AudioClip clip;
  clip.samples.assign(2, std::vector<double>(16000));
  for (auto& ch : clip.samples)
    for (auto& v : ch) v = 0.4 * rng.normal();
  StftConfig cfg;
  auto grid = stft(clip, cfg);
  auto back = istft(grid, cfg, clip.length());
  double num = 0, den = 0;
  for (int c = 0; c < 2; ++c)
    for (size_t i = 0; i < clip.length(); ++i) {
      num += std::pow(back.samples[c][i] - clip.samples[c][i], 2);
      den += std::pow(clip.samples[c][i], 2);
    }
  CHECK(std::sqrt(num / den) < 1e-10);
}

TEST_CASE("mel filterbank geometry") {
  auto fb = mel_filterbank(64, 257, 16000);
  REQUIRE(fb.n_mels == 64);
  REQUIRE(fb.n_bins == 257);
  // Every filter has mass, centers increase.
  for (int m = 0; m < fb.n_mels; ++m) {
    double mass = 0;
    for (int f = 0; f < fb.n_bins; ++f) mass += fb.at(m, f);
    CHECK(mass > 0.0);
    if (m) CHECK(fb.center_freqs_hz[m] > fb.center_freqs_hz[m - 1]);
  }
}

TEST_CASE("invert_mel recovers a magnitude consistent with its projection") {
  auto clip = bft::sine_clip(440.0, 1.0);
  StftConfig cfg;
  auto grid = stft(clip, cfg);
  auto fb = mel_filterbank(64, cfg.bins(), clip.sample_rate);
  auto mel = mel_spectrogram(grid, fb);
  double residual = 0;
  auto mag = invert_mel(mel, fb, &residual);
  REQUIRE(mag.frames == mel.valid_frames);
  REQUIRE(mag.bins == fb.n_bins);
  CHECK(residual < 1e-3);
}

TEST_CASE("merge_phase restores the original grid exactly") {
  auto clip = bft::sine_clip(523.25, 0.5);
  StftConfig cfg;
  auto grid = stft(clip, cfg);
  MagnitudeSpectrogram mag;
  mag.channels = grid.channels;
  mag.frames = grid.frames;
  mag.bins = grid.bins;
  mag.data.resize(grid.data.size());
  for (size_t i = 0; i < grid.data.size(); ++i)
    mag.data[i] = std::abs(grid.data[i]);
  auto fused = merge_phase(mag, grid);
  double worst = 0;
  for (size_t i = 0; i < grid.data.size(); ++i)
    worst = std::max(worst, std::abs(fused.data[i] - grid.data[i]));
  CHECK(worst < 1e-12);
}

TEST_CASE("stft feature triplet converts to a grid and back") {
  Rng rng(5);
  AudioClip clip;
  clip.samples.assign(2, std::vector<double>(8000));
  for (auto& ch : clip.samples)
    for (auto& v : ch) v = 0.3 * rng.normal();
  StftConfig cfg;
  auto grid = stft(clip, cfg);
  auto ft = stft_feature(grid);
  REQUIRE(ft.channels == 6);
  auto back = stft_feature_to_grid(ft, grid.frames);
  // Nyquist is dropped by the triplet and restored as zero.
  double worst = 0;
  for (int c = 0; c < grid.channels; ++c)
    for (int t = 0; t < grid.frames; ++t) {
      for (int f = 0; f + 1 < grid.bins; ++f)
        worst = std::max(worst, std::abs(back.at(c, t, f) - grid.at(c, t, f)));
      CHECK(back.at(c, t, grid.bins - 1) == cpx(0, 0));
    }
  CHECK(worst < 1e-9);
}

TEST_CASE("griffin_lim reduces spectral convergence") {
  auto clip = bft::sine_clip(440.0, 0.5);
  StftConfig cfg;
  auto grid = stft(clip, cfg);
  MagnitudeSpectrogram mag;
  mag.channels = grid.channels;
  mag.frames = grid.frames;
  mag.bins = grid.bins;
  mag.data.resize(grid.data.size());
  for (size_t i = 0; i < grid.data.size(); ++i)
    mag.data[i] = std::abs(grid.data[i]);
  auto rough = griffin_lim(mag, cfg, 1, clip.length());
  auto fine = griffin_lim(mag, cfg, 20, clip.length());
  auto sc = [&](const AudioClip& c) {
    return spectral_convergence(c, mag, cfg);
  };
  CHECK(sc(fine) <= sc(rough));
  CHECK(sc(fine) < 0.2);
}

TEST_CASE("feature files roundtrip at float32 precision") {
  auto dir = bft::scratch_dir("dsp_feature_io");
  auto clip = bft::sine_clip(300.0, 0.5);
  StftConfig cfg;
  auto grid = stft(clip, cfg);
  auto fb = mel_filterbank(64, cfg.bins(), clip.sample_rate);
  auto mel = mel_spectrogram(grid, fb);
  write_feature(mel, dir + "/mel.bff");
  auto back = read_feature(dir + "/mel.bff");
  CHECK(back.kind == mel.kind);
  CHECK(back.channels == mel.channels);
  CHECK(back.frames == mel.frames);
  CHECK(back.bins == mel.bins);
  CHECK(back.valid_frames == mel.valid_frames);
  REQUIRE(back.data.size() == mel.data.size());
  double worst = 0;
  for (size_t i = 0; i < back.data.size(); ++i)
    worst = std::max(worst,
                     std::abs(back.data[i] - static_cast<float>(mel.data[i])));
  CHECK(worst == 0.0);  // payload is float32 on disk
}
