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

#ifndef WAVCLASS_FRONTEND_HPP_
#define WAVCLASS_FRONTEND_HPP_

#include <cmath>

#include "wavclass/error.hpp"
#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace wvc {

// Frontend geometry. 25 ms windows every 10 ms at 16 kHz mono, Hann window,
// 512-point transform, 64 triangular mel bands, natural log after adding a
// small offset, and 96-frame x 64-band patches cut from the whole-clip
// spectrogram.
struct FrontendConfig {
  int sample_rate_hz = 16000;
  int window_samples = 400;   // 25 ms
  int hop_samples = 160;      // 10 ms
  int fft_size = 512;         // next power of two >= window
  int mel_bands = 64;
  double mel_low_hz = 125.0;
  double mel_high_hz = 7500.0;
  double log_offset = 0.01;
  int patch_frames = 96;      // 960 ms per patch

  int fft_bins() const { return fft_size / 2 + 1; }
  double patch_seconds() const {
    return patch_frames * hop_samples / static_cast<double>(sample_rate_hz);
  }
};

// A labeled mono clip; the unit that carries weak (clip-level) labels.
struct WaveformClip {
  std::string clip_id;
  std::vector<float> samples;  // in [-1, 1]
  int sample_rate_hz = 16000;
  std::set<int> labels;
};

// Validates rate, finiteness and amplitude range; used at every ingest point.
void validate_clip(const WaveformClip& clip, bool require_labels);

struct MelFilterbank {
  int num_bands = 0;
  int fft_bins = 0;
  std::vector<double> weights;       // [num_bands x fft_bins], row-major
  std::vector<double> band_edges_hz; // num_bands + 2 ascending edges

  double weight(int band, int bin) const {
    return weights[static_cast<size_t>(band) * fft_bins + bin];
  }
  double center_hz(int band) const {
    return band_edges_hz[static_cast<size_t>(band) + 1];
  }
};

struct LogMelPatch {
  std::string clip_id;
  int patch_index = 0;
  double start_time_s = 0.0;
  std::vector<float> values;  // [96 frames x 64 bands], row-major
  std::set<int> labels;       // inherited from the clip
};

inline double hz_to_mel(double hz) { return 1127.0 * std::log(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::exp(mel / 1127.0) - 1.0); }

// Magnitude spectrogram: one row per 25 ms Hann-windowed frame, hopped 10 ms,
// zero-padded to the transform size. Returns [num_frames x fft_bins].
// num_frames = floor((num_samples - window) / hop) + 1.
std::vector<double> stft_magnitude(const WaveformClip& clip,
                                   const FrontendConfig& cfg, int* num_frames);

MelFilterbank build_mel_filterbank(const FrontendConfig& cfg);

// out[t][b] = ln(offset + sum_f weights[b][f] * spectrogram[t][f]).
std::vector<double> log_mel(const std::vector<double>& spectrogram,
                            int num_frames, const MelFilterbank& fb,
                            double offset);

// Whole-clip log-mel matrix sliced into consecutive non-overlapping
// 96-frame blocks; a clip shorter than one block yields no patches.
std::vector<LogMelPatch> extract_patches(const WaveformClip& clip,
                                         const FrontendConfig& cfg);

// Patch cache: header {magic "WVC1", version u32, frames u32, bands u32},
// then one record per patch: clip_id (u32 length + bytes), patch_index u32,
// label count u32, label ids u32 each, and frames*bands f32 little-endian.
void write_patch_cache(const std::string& path,
                       const std::vector<LogMelPatch>& patches,
                       const FrontendConfig& cfg);
std::vector<LogMelPatch> read_patch_cache(const std::string& path,
                                          const FrontendConfig& cfg);

}  // namespace wvc

#endif  // WAVCLASS_FRONTEND_HPP_
