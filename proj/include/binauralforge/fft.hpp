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

#ifndef BINAURALFORGE_FFT_HPP
#define BINAURALFORGE_FFT_HPP

#include <complex>
#include <vector>

#include "binauralforge/common.hpp"

namespace bf {

using cpx = std::complex<double>;

namespace fft_detail {

inline bool is_pow2(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 Cooley-Tukey. sign = -1 forward, +1 inverse
// (inverse leaves the 1/n scaling to the caller).
inline void fft_pow2(std::vector<cpx>& a, int sign) {
  const size_t n = a.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = sign * 2.0 * kPi / static_cast<double>(len);
    const cpx wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      cpx w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        cpx u = a[i + k];
        cpx v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

inline std::vector<cpx> dft_naive(const std::vector<cpx>& x, int sign) {
  const size_t n = x.size();
  std::vector<cpx> y(n, cpx(0, 0));
  for (size_t k = 0; k < n; ++k) {
    for (size_t t = 0; t < n; ++t) {
      const double ang = sign * 2.0 * kPi * static_cast<double>(k * t) / n;
      y[k] += x[t] * cpx(std::cos(ang), std::sin(ang));
    }
  }
  return y;
}

}  // namespace fft_detail

// Forward complex DFT (unscaled).
inline std::vector<cpx> fft(std::vector<cpx> x) {
  if (fft_detail::is_pow2(x.size())) {
    fft_detail::fft_pow2(x, -1);
    return x;
  }
  return fft_detail::dft_naive(x, -1);
}

// Inverse complex DFT with 1/n scaling.
inline std::vector<cpx> ifft(std::vector<cpx> x) {
  const size_t n = x.size();
  if (fft_detail::is_pow2(n)) {
    fft_detail::fft_pow2(x, +1);
  } else {
    x = fft_detail::dft_naive(x, +1);
  }
  for (auto& v : x) v /= static_cast<double>(n);
  return x;
}

// Real-input forward transform returning n/2+1 bins.
inline std::vector<cpx> rfft(const std::vector<double>& x) {
  std::vector<cpx> cx(x.size());
  for (size_t i = 0; i < x.size(); ++i) cx[i] = cpx(x[i], 0.0);
  auto y = fft(std::move(cx));
  y.resize(x.size() / 2 + 1);
  return y;
}

// Inverse of rfft; n is the original real length.
inline std::vector<double> irfft(const std::vector<cpx>& bins, size_t n) {
  check(bins.size() == n / 2 + 1, "irfft: bin count does not match length");
  std::vector<cpx> full(n);
  for (size_t i = 0; i < bins.size(); ++i) full[i] = bins[i];
  for (size_t i = bins.size(); i < n; ++i) full[i] = std::conj(full[n - i]);
  auto y = ifft(std::move(full));
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = y[i].real();
  return out;
}

}  // namespace bf

#endif  // BINAURALFORGE_FFT_HPP
