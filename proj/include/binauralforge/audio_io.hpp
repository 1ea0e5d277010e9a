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

#ifndef BINAURALFORGE_AUDIO_IO_HPP
#define BINAURALFORGE_AUDIO_IO_HPP

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "binauralforge/common.hpp"

namespace bf {

inline constexpr int kCanonicalRate = 16000;

// Sampled waveform. Samples are per-channel, amplitudes nominally in [-1, 1].
struct AudioClip {
  std::vector<std::vector<double>> samples;  // [channel][frame]
  int sample_rate = kCanonicalRate;

  int channels() const { return static_cast<int>(samples.size()); }
  size_t length() const { return samples.empty() ? 0 : samples[0].size(); }
  double duration() const {
    return static_cast<double>(length()) / sample_rate;
  }

  void validate() const {
    check(sample_rate > 0, "AudioClip: sample_rate must be positive");
    check(channels() == 1 || channels() == 2,
          "AudioClip: expected 1 or 2 channels");
    for (const auto& ch : samples)
      check(ch.size() == samples[0].size(),
            "AudioClip: channels have unequal length");
  }
};

// Canonical clip geometry: 16 kHz, 5.0 s targets, clips under 1.0 s rejected.
struct ClipSpec {
  int target_rate = kCanonicalRate;
  double target_length = 5.0;  // seconds
  double min_length = 1.0;     // seconds

  void validate() const {
    check(target_rate > 0, "ClipSpec: target_rate must be positive");
    check(min_length > 0 && target_length >= min_length,
          "ClipSpec: need target_length >= min_length > 0");
  }
  size_t target_samples() const {
    return static_cast<size_t>(std::llround(target_length * target_rate));
  }
};

namespace wav_detail {

inline uint32_t rd_u32(const uint8_t* p) {
  return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 |
         uint32_t(p[3]) << 24;
}
inline uint16_t rd_u16(const uint8_t* p) {
  return uint16_t(p[0]) | uint16_t(p[1]) << 8;
}
inline void wr_u32(std::vector<uint8_t>& v, uint32_t x) {
  v.push_back(x & 0xff);
  v.push_back((x >> 8) & 0xff);
  v.push_back((x >> 16) & 0xff);
  v.push_back((x >> 24) & 0xff);
}
inline void wr_u16(std::vector<uint8_t>& v, uint16_t x) {
  v.push_back(x & 0xff);
  v.push_back((x >> 8) & 0xff);
}

}  // namespace wav_detail

// Reads a RIFF WAV file: 16-bit PCM or 32-bit IEEE float, 1 or 2 channels.
inline AudioClip read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw RuntimeError("read_wav: cannot open file: " + path);
  std::vector<uint8_t> buf((std::istreambuf_iterator<char>(f)),
                           std::istreambuf_iterator<char>());
  using namespace wav_detail;
  if (buf.size() < 44 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw RuntimeError("read_wav: unsupported encoding (not a RIFF/WAVE file): " +
                       path);

  size_t pos = 12;
  int channels = 0, bits = 0, rate = 0, format = 0;
  const uint8_t* data = nullptr;
  size_t data_len = 0;
  while (pos + 8 <= buf.size()) {
    uint32_t chunk_len = rd_u32(buf.data() + pos + 4);
    const uint8_t* chunk = buf.data() + pos + 8;
    if (pos + 8 + chunk_len > buf.size())
      throw RuntimeError("read_wav: unsupported encoding (truncated chunk): " +
                         path);
    if (std::memcmp(buf.data() + pos, "fmt ", 4) == 0) {
      if (chunk_len < 16)
        throw RuntimeError("read_wav: unsupported encoding (short fmt): " + path);
      format = rd_u16(chunk);
      channels = rd_u16(chunk + 2);
      rate = static_cast<int>(rd_u32(chunk + 4));
      bits = rd_u16(chunk + 14);
    } else if (std::memcmp(buf.data() + pos, "data", 4) == 0) {
      data = chunk;
      data_len = chunk_len;
    }
    pos += 8 + chunk_len + (chunk_len & 1);
  }
  if (format != 1 && format != 3)
    throw RuntimeError("read_wav: unsupported encoding (format tag " +
                       std::to_string(format) + "): " + path);
  if (!(format == 1 && bits == 16) && !(format == 3 && bits == 32))
    throw RuntimeError("read_wav: unsupported encoding (" +
                       std::to_string(bits) + "-bit): " + path);
  if (channels != 1 && channels != 2)
    throw RuntimeError("read_wav: expected 1 or 2 channels, got " +
                       std::to_string(channels) + ": " + path);
  if (rate <= 0) throw RuntimeError("read_wav: bad sample rate: " + path);
  size_t bytes_per_sample = bits / 8;
  size_t frames = data_len / (bytes_per_sample * channels);
  if (data == nullptr || frames == 0)
    throw RuntimeError("read_wav: zero-length payload: " + path);

  AudioClip clip;
  clip.sample_rate = rate;
  clip.samples.assign(channels, std::vector<double>(frames));
  for (size_t i = 0; i < frames; ++i) {
    for (int c = 0; c < channels; ++c) {
      const uint8_t* p = data + (i * channels + c) * bytes_per_sample;
      if (bits == 16) {
        int16_t s = static_cast<int16_t>(wav_detail::rd_u16(p));
        clip.samples[c][i] = s / 32768.0;
      } else {
        uint32_t u = wav_detail::rd_u32(p);
        float v;
        std::memcpy(&v, &u, 4);
        clip.samples[c][i] = static_cast<double>(v);
      }
    }
  }
  return clip;
}

// Writes 16-bit PCM. Rejects empty clips and samples outside [-1, 1].
inline void write_wav(const AudioClip& clip, const std::string& path) {
  clip.validate();
  check(clip.length() > 0, "write_wav: empty clip");
  for (const auto& ch : clip.samples)
    for (double s : ch)
      check(std::abs(s) <= 1.0 + 1e-12,
            "write_wav: sample magnitude exceeds 1; refusing to clip");

  using namespace wav_detail;
  const int channels = clip.channels();
  const uint32_t frames = static_cast<uint32_t>(clip.length());
  const uint32_t data_len = frames * channels * 2;
  std::vector<uint8_t> out;
  out.reserve(44 + data_len);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  wr_u32(out, 36 + data_len);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  wr_u32(out, 16);
  wr_u16(out, 1);  // PCM
  wr_u16(out, static_cast<uint16_t>(channels));
  wr_u32(out, static_cast<uint32_t>(clip.sample_rate));
  wr_u32(out, static_cast<uint32_t>(clip.sample_rate * channels * 2));
  wr_u16(out, static_cast<uint16_t>(channels * 2));
  wr_u16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  wr_u32(out, data_len);
  for (uint32_t i = 0; i < frames; ++i) {
    for (int c = 0; c < channels; ++c) {
      double s = clip.samples[c][i];
      long q = std::lround(s * 32768.0);
      q = std::clamp(q, -32768L, 32767L);
      wr_u16(out, static_cast<uint16_t>(static_cast<int16_t>(q)));
    }
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw RuntimeError("write_wav: cannot open for writing: " + path);
  f.write(reinterpret_cast<const char*>(out.data()),
          static_cast<std::streamsize>(out.size()));
  if (!f) throw RuntimeError("write_wav: write failed: " + path);
}

// Band-limited resampling with a windowed-sinc kernel (64 taps, Kaiser b=8).
inline AudioClip resample(const AudioClip& clip, int target_rate,
                          int taps = 64) {
  clip.validate();
  check(target_rate > 0, "resample: target_rate must be positive");
  if (target_rate == clip.sample_rate) return clip;

  const double ratio = static_cast<double>(target_rate) / clip.sample_rate;
  const size_t in_len = clip.length();
  const size_t out_len =
      static_cast<size_t>(std::llround(static_cast<double>(in_len) * ratio));
  // Anti-alias cutoff: min(1, ratio) in units of input Nyquist.
  const double cutoff = std::min(1.0, ratio) * 0.935;
  const double beta = 8.0;
  const int half = taps / 2;

  auto bessel_i0 = [](double x) {
    double sum = 1.0, term = 1.0;
    for (int k = 1; k < 32; ++k) {
      term *= (x / (2.0 * k)) * (x / (2.0 * k));
      sum += term;
      if (term < 1e-16 * sum) break;
    }
    return sum;
  };
  const double i0_beta = bessel_i0(beta);

  AudioClip out;
  out.sample_rate = target_rate;
  out.samples.assign(clip.channels(), std::vector<double>(out_len, 0.0));
  for (size_t i = 0; i < out_len; ++i) {
    const double t = static_cast<double>(i) / ratio;  // position in input
    const long center = std::lround(std::floor(t));
    double wsum = 0.0;
    std::vector<double> acc(clip.channels(), 0.0);
    for (long k = center - half + 1; k <= center + half; ++k) {
      const double x = (t - k) * cutoff;
      const double sinc = x == 0.0 ? 1.0 : std::sin(kPi * x) / (kPi * x);
      const double u = (t - k) / half;
      if (u <= -1.0 || u >= 1.0) continue;
      const double kaiser = bessel_i0(beta * std::sqrt(1.0 - u * u)) / i0_beta;
      const double w = sinc * kaiser;  // normalized below, so cutoff gain drops out
      wsum += w;
      if (k >= 0 && k < static_cast<long>(in_len))
        for (int c = 0; c < clip.channels(); ++c)
          acc[c] += w * clip.samples[c][k];
    }
    for (int c = 0; c < clip.channels(); ++c)
      out.samples[c][i] = wsum != 0.0 ? acc[c] / wsum : 0.0;
  }
  return out;
}

// Crops the leading segment or zero-pads to the spec's target length.
// Clips shorter than min_length are rejected.
inline AudioClip crop_or_pad(const AudioClip& clip, const ClipSpec& spec) {
  clip.validate();
  spec.validate();
  check(clip.sample_rate == spec.target_rate,
        "crop_or_pad: clip not at target rate; resample first");
  const size_t min_samples =
      static_cast<size_t>(std::llround(spec.min_length * spec.target_rate));
  if (clip.length() < min_samples)
    throw RuntimeError("crop_or_pad: clip shorter than minimum length (" +
                       std::to_string(clip.duration()) + " s < " +
                       std::to_string(spec.min_length) + " s)");
  const size_t target = spec.target_samples();
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.samples.assign(clip.channels(), std::vector<double>(target, 0.0));
  const size_t n = std::min(target, clip.length());
  for (int c = 0; c < clip.channels(); ++c)
    std::copy_n(clip.samples[c].begin(), n, out.samples[c].begin());
  return out;
}

// Scales all channels by one common factor so max |sample| = peak.
// The common factor preserves interaural level difference.
inline AudioClip peak_normalize(const AudioClip& clip, double peak = 0.9) {
  clip.validate();
  check(peak > 0.0 && peak <= 1.0, "peak_normalize: need 0 < peak <= 1");
  double maxabs = 0.0;
  for (const auto& ch : clip.samples)
    for (double s : ch) maxabs = std::max(maxabs, std::abs(s));
  if (maxabs == 0.0)
    throw RuntimeError("peak_normalize: all-zero clip");
  AudioClip out = clip;
  const double g = peak / maxabs;
  for (auto& ch : out.samples)
    for (double& s : ch) s *= g;
  return out;
}

}  // namespace bf

#endif  // BINAURALFORGE_AUDIO_IO_HPP
