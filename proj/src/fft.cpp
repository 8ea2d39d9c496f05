/* Copyright 2026 The WavClass Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "wavclass/fft.hpp"

#include <cmath>

#include "wavclass/error.hpp"

namespace wvc {

Fft::Fft(int size) : size_(size) {
  if (size < 2 || (size & (size - 1)) != 0)
    throw_config("fft size must be a power of two >= 2");
  levels_ = 0;
  for (int s = size; s > 1; s >>= 1) ++levels_;

  twiddles_.resize(static_cast<size_t>(size / 2));
  const double step = -2.0 * M_PI / size;
  for (int i = 0; i < size / 2; ++i)
    twiddles_[static_cast<size_t>(i)] = std::polar(1.0, step * i);

  bit_reverse_.resize(static_cast<size_t>(size));
  for (int i = 0; i < size; ++i) {
    int rev = 0;
    for (int b = 0; b < levels_; ++b) rev |= ((i >> b) & 1) << (levels_ - 1 - b);
    bit_reverse_[static_cast<size_t>(i)] = rev;
  }
}

void Fft::forward(std::complex<double>* buf) const {
  for (int i = 0; i < size_; ++i) {
    const int j = bit_reverse_[static_cast<size_t>(i)];
    if (j > i) std::swap(buf[i], buf[j]);
  }
  for (int len = 2; len <= size_; len <<= 1) {
    const int half = len / 2;
    const int stride = size_ / len;
    for (int start = 0; start < size_; start += len) {
      for (int k = 0; k < half; ++k) {
        const std::complex<double> w = twiddles_[static_cast<size_t>(k * stride)];
        const std::complex<double> odd = buf[start + half + k] * w;
        const std::complex<double> even = buf[start + k];
        buf[start + k] = even + odd;
        buf[start + half + k] = even - odd;
      }
    }
  }
}

void Fft::real_magnitude(const double* frame, int frame_len,
                         double* mags) const {
  if (frame_len > size_) throw_config("frame longer than fft size");
  std::vector<std::complex<double>> buf(static_cast<size_t>(size_));
  for (int i = 0; i < frame_len; ++i) buf[static_cast<size_t>(i)] = frame[i];
  forward(buf.data());
  for (int i = 0; i <= size_ / 2; ++i)
    mags[i] = std::abs(buf[static_cast<size_t>(i)]);
}

}  // namespace wvc
