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

#include "wavclass/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "wavclass/error.hpp"

namespace wvc {
namespace {

uint32_t read_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}
uint16_t read_u16(const uint8_t* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& s, uint32_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
  s.push_back(static_cast<char>((v >> 16) & 0xff));
  s.push_back(static_cast<char>((v >> 24) & 0xff));
}
void put_u16(std::string& s, uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

WavData read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("cannot open wav file: " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  if (bytes.size() < 44) throw_data("wav file too short: " + path);
  if (std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw_data("not a RIFF/WAVE file: " + path);

  size_t pos = 12;
  bool have_fmt = false;
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  const uint8_t* data_ptr = nullptr;
  uint32_t data_len = 0;

  while (pos + 8 <= bytes.size()) {
    const uint8_t* hdr = bytes.data() + pos;
    const uint32_t chunk_len = read_u32(hdr + 4);
    const uint8_t* body = hdr + 8;
    if (pos + 8 + chunk_len > bytes.size())
      throw_data("truncated wav chunk in " + path);
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (chunk_len < 16) throw_data("malformed fmt chunk in " + path);
      format = read_u16(body);
      channels = read_u16(body + 2);
      rate = read_u32(body + 4);
      bits = read_u16(body + 14);
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data_ptr = body;
      data_len = chunk_len;
    }
    pos += 8 + chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }

  if (!have_fmt || data_ptr == nullptr)
    throw_data("wav missing fmt or data chunk: " + path);
  if (format != 1) throw_data("unsupported wav encoding (want PCM): " + path);
  if (bits != 16) throw_data("unsupported wav bit depth (want 16): " + path);
  if (channels != 1) throw_data("unsupported wav channel count (want mono): " + path);
  if (rate != 16000) throw_data("unsupported wav sample rate (want 16000): " + path);

  WavData out;
  out.sample_rate_hz = static_cast<int>(rate);
  const size_t n = data_len / 2;
  out.samples.resize(n);
  for (size_t i = 0; i < n; ++i) {
    const int16_t v = static_cast<int16_t>(read_u16(data_ptr + 2 * i));
    out.samples[i] = static_cast<float>(v) / 32768.0f;
  }
  return out;
}

void write_wav(const std::string& path, const std::vector<float>& samples,
               int sample_rate_hz) {
  std::string blob;
  const uint32_t data_len = static_cast<uint32_t>(samples.size() * 2);
  blob.reserve(44 + data_len);
  blob += "RIFF";
  put_u32(blob, 36 + data_len);
  blob += "WAVEfmt ";
  put_u32(blob, 16);
  put_u16(blob, 1);  // PCM
  put_u16(blob, 1);  // mono
  put_u32(blob, static_cast<uint32_t>(sample_rate_hz));
  put_u32(blob, static_cast<uint32_t>(sample_rate_hz * 2));  // byte rate
  put_u16(blob, 2);   // block align
  put_u16(blob, 16);  // bits
  blob += "data";
  put_u32(blob, data_len);
  for (float s : samples) {
    const float c = std::clamp(s, -1.0f, 1.0f);
    const int v = static_cast<int>(std::lrint(c * 32767.0f));
    put_u16(blob, static_cast<uint16_t>(static_cast<int16_t>(v)));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_data("cannot open output wav: " + path);
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw_data("failed writing wav: " + path);
}

}  // namespace wvc
