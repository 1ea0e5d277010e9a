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
#include <filesystem>
#include <fstream>

#include "binauralforge/audio_io.hpp"
#include "test_util.hpp"

using namespace bf;

TEST_CASE("wav roundtrip preserves samples to 16-bit precision") {
  auto dir = bft::scratch_dir("audio_roundtrip");
  auto clip = bft::sine_clip(440.0, 0.25);
  clip.samples.push_back(clip.samples[0]);  // stereo
  const std::string path = dir + "/tone.wav";
  write_wav(clip, path);
  auto back = read_wav(path);
  REQUIRE(back.channels() == 2);
  REQUIRE(back.sample_rate == clip.sample_rate);
  REQUIRE(back.length() == clip.length());
  double worst = 0;
  for (int c = 0; c < 2; ++c)
    for (size_t i = 0; i < back.samples[c].size(); ++i)
      worst = std::max(worst,
                       std::abs(back.samples[c][i] - clip.samples[c][i]));
  CHECK(worst <= 1.0 / 32767.0);
}

TEST_CASE("wav rejects out-of-range samples and missing files") {
  auto dir = bft::scratch_dir("audio_errors");
  AudioClip bad;
  bad.samples = {{0.0, 1.5}};
  CHECK_THROWS_AS(write_wav(bad, dir + "/bad.wav"), RuntimeError);
  CHECK_THROWS_AS(read_wav(dir + "/nope.wav"), RuntimeError);
  std::ofstream(dir + "/junk.wav") << "not a wav at all";
  CHECK_THROWS_AS(read_wav(dir + "/junk.wav"), RuntimeError);
}

TEST_CASE("resample preserves a tone's frequency") {
  auto clip = bft::sine_clip(440.0, 0.5, 0.5, 48000);
  auto down = resample(clip, 16000);
  REQUIRE(down.sample_rate == 16000);
  // Expected sample count scales by the rate ratio.
  CHECK(std::abs(static_cast<double>(down.length()) -
                 clip.length() * 16000.0 / 48000.0) <= 2.0);
  // Count zero crossings: 2 * freq * seconds, ignoring edge effects.
  int crossings = 0;
  const auto& s = down.samples[0];
  for (size_t i = 1; i < s.size(); ++i)
    if ((s[i - 1] < 0) != (s[i] < 0)) ++crossings;
  const double seconds = static_cast<double>(down.length()) / 16000.0;
  CHECK(std::abs(crossings - 2.0 * 440.0 * seconds) <= 4.0);
}

TEST_CASE("crop_or_pad hits the target length exactly") {
  ClipSpec spec;
  auto shorter = bft::sine_clip(100.0, 2.0);
  auto longer = bft::sine_clip(100.0, 7.0);
  auto a = crop_or_pad(shorter, spec);
  auto b = crop_or_pad(longer, spec);
  CHECK(a.length() == spec.target_samples());
  CHECK(b.length() == spec.target_samples());
  // Padding is exact zeros.
  for (size_t i = shorter.length(); i < a.length(); ++i)
    CHECK(a.samples[0][i] == 0.0);
}

TEST_CASE("peak_normalize scales to the requested peak") {
  auto clip = bft::sine_clip(100.0, 0.1, 0.2);
  auto out = peak_normalize(clip, 0.9);
  double peak = 0;
  for (double v : out.samples[0]) peak = std::max(peak, std::abs(v));
  CHECK(peak == doctest::Approx(0.9).epsilon(1e-9));
}
