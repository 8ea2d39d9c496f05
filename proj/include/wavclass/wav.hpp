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

#ifndef WAVCLASS_WAV_HPP_
#define WAVCLASS_WAV_HPP_

#include <cstdint>

#include "wavclass/error.hpp"
#include <string>
#include <vector>

namespace wvc {

// The only accepted audio container: RIFF WAV, PCM 16-bit signed
// little-endian, mono, 16 kHz. Everything else is rejected with a
// diagnostic naming the offending field.

struct WavData {
  int sample_rate_hz = 0;
  std::vector<float> samples;  // normalized to [-1, 1]
};

WavData read_wav(const std::string& path);

// Samples are clamped to [-1, 1] and quantized to int16.
void write_wav(const std::string& path, const std::vector<float>& samples,
               int sample_rate_hz);

}  // namespace wvc

#endif  // WAVCLASS_WAV_HPP_
