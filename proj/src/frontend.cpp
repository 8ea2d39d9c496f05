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

#include "wavclass/frontend.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "wavclass/error.hpp"
#include "wavclass/fft.hpp"

namespace wvc {

void validate_clip(const WaveformClip& clip, bool require_labels) {
  if (clip.sample_rate_hz != 16000)
    throw_data("clip " + clip.clip_id + ": sample rate must be 16000");
  for (float s : clip.samples) {
    if (!std::isfinite(s) || s < -1.0f || s > 1.0f)
      throw_data("clip " + clip.clip_id + ": samples must be finite in [-1, 1]");
  }
  if (require_labels && clip.labels.empty())
    throw_data("clip " + clip.clip_id + ": training clips need at least one label");
}

std::vector<double> stft_magnitude(const WaveformClip& clip,
                                   const FrontendConfig& cfg,
                                   int* num_frames) {
  const int win = cfg.window_samples;
  const int hop = cfg.hop_samples;
  const int n = static_cast<int>(clip.samples.size());
  if (n < win) throw_data("clip " + clip.clip_id + ": clip too short");

  const int frames = (n - win) / hop + 1;
  const int bins = cfg.fft_bins();
  *num_frames = frames;

  // Periodic Hann.
  std::vector<double> window(static_cast<size_t>(win));
  for (int i = 0; i < win; ++i)
    window[static_cast<size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / win);

  Fft fft(cfg.fft_size);
  std::vector<double> out(static_cast<size_t>(frames) * bins);
  std::vector<double> frame(static_cast<size_t>(win));
  for (int t = 0; t < frames; ++t) {
    const float* src = clip.samples.data() + static_cast<size_t>(t) * hop;
    for (int i = 0; i < win; ++i)
      frame[static_cast<size_t>(i)] = src[i] * window[static_cast<size_t>(i)];
    fft.real_magnitude(frame.data(), win, out.data() + static_cast<size_t>(t) * bins);
  }
  return out;
}

MelFilterbank build_mel_filterbank(const FrontendConfig& cfg) {
  const double nyquist = cfg.sample_rate_hz / 2.0;
  if (cfg.mel_low_hz <= 0.0 || cfg.mel_high_hz > nyquist ||
      cfg.mel_low_hz >= cfg.mel_high_hz)
    throw_config("invalid band edges");

  MelFilterbank fb;
  fb.num_bands = cfg.mel_bands;
  fb.fft_bins = cfg.fft_bins();

  // num_bands + 2 edges equally spaced in mel; adjacent triangles share
  // edges, band b spans [edge b, edge b+2] and peaks at edge b+1.
  const double mel_lo = hz_to_mel(cfg.mel_low_hz);
  const double mel_hi = hz_to_mel(cfg.mel_high_hz);
  const int edges = cfg.mel_bands + 2;
  fb.band_edges_hz.resize(static_cast<size_t>(edges));
  for (int i = 0; i < edges; ++i)
    fb.band_edges_hz[static_cast<size_t>(i)] =
        mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (edges - 1));

  fb.weights.assign(static_cast<size_t>(fb.num_bands) * fb.fft_bins, 0.0);
  const double hz_per_bin = static_cast<double>(cfg.sample_rate_hz) / cfg.fft_size;
  for (int b = 0; b < fb.num_bands; ++b) {
    const double lo = fb.band_edges_hz[static_cast<size_t>(b)];
    const double mid = fb.band_edges_hz[static_cast<size_t>(b) + 1];
    const double hi = fb.band_edges_hz[static_cast<size_t>(b) + 2];
    for (int f = 0; f < fb.fft_bins; ++f) {
      const double hz = f * hz_per_bin;
      double w = 0.0;
      if (hz > lo && hz < hi)
        w = hz <= mid ? (hz - lo) / (mid - lo) : (hi - hz) / (hi - mid);
      fb.weights[static_cast<size_t>(b) * fb.fft_bins + f] = w;
    }
  }
  return fb;
}

std::vector<double> log_mel(const std::vector<double>& spectrogram,
                            int num_frames, const MelFilterbank& fb,
                            double offset) {
  if (offset <= 0.0) throw_config("offset must be positive");
  if (spectrogram.size() != static_cast<size_t>(num_frames) * fb.fft_bins)
    throw_config("spectrogram column count does not match filterbank bins");

  std::vector<double> out(static_cast<size_t>(num_frames) * fb.num_bands);
  for (int t = 0; t < num_frames; ++t) {
    const double* spec = spectrogram.data() + static_cast<size_t>(t) * fb.fft_bins;
    double* row = out.data() + static_cast<size_t>(t) * fb.num_bands;
    for (int b = 0; b < fb.num_bands; ++b) {
      const double* w = fb.weights.data() + static_cast<size_t>(b) * fb.fft_bins;
      double acc = 0.0;
      for (int f = 0; f < fb.fft_bins; ++f) acc += w[f] * spec[f];
      row[b] = std::log(offset + acc);
    }
  }
  return out;
}

std::vector<LogMelPatch> extract_patches(const WaveformClip& clip,
                                         const FrontendConfig& cfg) {
  validate_clip(clip, /*require_labels=*/false);

  int num_frames = 0;
  const std::vector<double> spec = stft_magnitude(clip, cfg, &num_frames);
  const MelFilterbank fb = build_mel_filterbank(cfg);
  const std::vector<double> mel = log_mel(spec, num_frames, fb, cfg.log_offset);

  const int per_patch = cfg.patch_frames;
  const int num_patches = num_frames / per_patch;
  std::vector<LogMelPatch> patches;
  patches.reserve(static_cast<size_t>(num_patches));
  for (int p = 0; p < num_patches; ++p) {
    LogMelPatch patch;
    patch.clip_id = clip.clip_id;
    patch.patch_index = p;
    patch.start_time_s = p * cfg.patch_seconds();
    patch.labels = clip.labels;
    patch.values.resize(static_cast<size_t>(per_patch) * cfg.mel_bands);
    const double* src = mel.data() +
        static_cast<size_t>(p) * per_patch * cfg.mel_bands;
    for (size_t i = 0; i < patch.values.size(); ++i) {
      const float v = static_cast<float>(src[i]);
      if (!std::isfinite(v))
        throw_numeric("clip " + clip.clip_id + ": non-finite log-mel value");
      patch.values[i] = v;
    }
    patches.push_back(std::move(patch));
  }
  return patches;
}

namespace {

void put_u32(std::ofstream& out, uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff),
               static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

uint32_t get_u32(std::ifstream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw_data("truncated patch cache: " + path);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

void write_patch_cache(const std::string& path,
                       const std::vector<LogMelPatch>& patches,
                       const FrontendConfig& cfg) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_data("cannot open patch cache for writing: " + path);
  out.write("WVC1", 4);
  put_u32(out, 1);  // version
  put_u32(out, static_cast<uint32_t>(cfg.patch_frames));
  put_u32(out, static_cast<uint32_t>(cfg.mel_bands));
  put_u32(out, static_cast<uint32_t>(patches.size()));
  for (const LogMelPatch& p : patches) {
    put_u32(out, static_cast<uint32_t>(p.clip_id.size()));
    out.write(p.clip_id.data(), static_cast<std::streamsize>(p.clip_id.size()));
    put_u32(out, static_cast<uint32_t>(p.patch_index));
    put_u32(out, static_cast<uint32_t>(p.labels.size()));
    for (int label : p.labels) put_u32(out, static_cast<uint32_t>(label));
    out.write(reinterpret_cast<const char*>(p.values.data()),
              static_cast<std::streamsize>(p.values.size() * sizeof(float)));
  }
  if (!out) throw_data("failed writing patch cache: " + path);
}

std::vector<LogMelPatch> read_patch_cache(const std::string& path,
                                          const FrontendConfig& cfg) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("cannot open patch cache: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "WVC1", 4) != 0)
    throw_data("bad patch cache magic: " + path);
  const uint32_t version = get_u32(in, path);
  if (version != 1) throw_data("unsupported patch cache version: " + path);
  const uint32_t frames = get_u32(in, path);
  const uint32_t bands = get_u32(in, path);
  if (frames != static_cast<uint32_t>(cfg.patch_frames) ||
      bands != static_cast<uint32_t>(cfg.mel_bands))
    throw_data("patch cache geometry mismatch: " + path);
  const uint32_t count = get_u32(in, path);

  std::vector<LogMelPatch> patches(count);
  const size_t cells = static_cast<size_t>(frames) * bands;
  for (uint32_t i = 0; i < count; ++i) {
    LogMelPatch& p = patches[i];
    const uint32_t id_len = get_u32(in, path);
    p.clip_id.resize(id_len);
    in.read(p.clip_id.data(), id_len);
    p.patch_index = static_cast<int>(get_u32(in, path));
    p.start_time_s = p.patch_index * cfg.patch_seconds();
    const uint32_t num_labels = get_u32(in, path);
    for (uint32_t l = 0; l < num_labels; ++l)
      p.labels.insert(static_cast<int>(get_u32(in, path)));
    p.values.resize(cells);
    in.read(reinterpret_cast<char*>(p.values.data()),
            static_cast<std::streamsize>(cells * sizeof(float)));
    if (!in) throw_data("truncated patch cache: " + path);
  }
  return patches;
}

}  // namespace wvc
