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

#ifndef WAVCLASS_FFT_HPP_
#define WAVCLASS_FFT_HPP_

#include <complex>
#include <vector>

namespace wvc {

// Iterative radix-2 FFT for a fixed power-of-two size, with precomputed
// twiddles and bit-reversal permutation. Re-used across every frame of a
// spectrogram, so setup cost is paid once.
class Fft {
 public:
  explicit Fft(int size);

  int size() const { return size_; }

  // In-place complex transform; buf.size() == size().
  void forward(std::complex<double>* buf) const;

  // Magnitude spectrum of a real frame zero-padded to the transform size.
  // Writes size()/2 + 1 bins (DC through Nyquist).
  void real_magnitude(const double* frame, int frame_len, double* mags) const;

 private:
  int size_;
  int levels_;
  std::vector<std::complex<double>> twiddles_;
  std::vector<int> bit_reverse_;
};

}  // namespace wvc

#endif  // WAVCLASS_FFT_HPP_
