// Copyright 2026 The attnvad Authors
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

#include "attnvad/wav.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace attnvad {

namespace {

uint32_t read_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) |
         (static_cast<uint32_t>(p[3]) << 24);
}

uint16_t read_u16(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& out, uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_u16(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

WavData read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open wav file: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  const unsigned char* data =
      reinterpret_cast<const unsigned char*>(bytes.data());
  size_t size = bytes.size();
  if (size < 12 || std::memcmp(data, "RIFF", 4) != 0 ||
      std::memcmp(data + 8, "WAVE", 4) != 0) {
    throw DataError("not a RIFF/WAVE file: " + path);
  }

  bool have_fmt = false;
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  WavData out;
  size_t pos = 12;
  bool have_data = false;
  while (pos + 8 <= size) {
    const unsigned char* hdr = data + pos;
    uint32_t chunk_size = read_u32(hdr + 4);
    size_t body = pos + 8;
    if (body + chunk_size > size) {
      throw DataError("truncated wav chunk in " + path);
    }
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (chunk_size < 16) throw DataError("short fmt chunk in " + path);
      format = read_u16(data + body);
      channels = read_u16(data + body + 2);
      rate = read_u32(data + body + 4);
      bits = read_u16(data + body + 14);
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      if (!have_fmt) throw DataError("wav data before fmt in " + path);
      if (format != 1) {
        throw DataError("wav format tag " + std::to_string(format) +
                        " is not uncompressed PCM in " + path);
      }
      if (channels != 1) {
        throw DataError("wav has " + std::to_string(channels) +
                        " channels, expected mono in " + path);
      }
      if (bits != 16) {
        throw DataError("wav has " + std::to_string(bits) +
                        "-bit samples, expected 16 in " + path);
      }
      size_t n = chunk_size / 2;
      out.samples.resize(n);
      for (size_t i = 0; i < n; ++i) {
        int16_t s =
            static_cast<int16_t>(read_u16(data + body + 2 * i));
        out.samples[i] = static_cast<double>(s) / 32768.0;
      }
      out.sample_rate = static_cast<int>(rate);
      have_data = true;
    }
    // Chunks are word-aligned: odd sizes carry a pad byte.
    pos = body + chunk_size + (chunk_size % 2);
  }
  if (!have_data) throw DataError("wav file has no data chunk: " + path);
  return out;
}

void write_wav(const std::string& path, const std::vector<double>& samples,
               int sample_rate) {
  if (sample_rate <= 0) {
    throw UsageError("write_wav: sample rate must be positive");
  }
  uint32_t data_bytes = static_cast<uint32_t>(samples.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVE";
  out += "fmt ";
  put_u32(out, 16);
  put_u16(out, 1);  // uncompressed PCM
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<uint32_t>(sample_rate));
  put_u32(out, static_cast<uint32_t>(sample_rate) * 2);  // byte rate
  put_u16(out, 2);   // block align
  put_u16(out, 16);  // bits per sample
  out += "data";
  put_u32(out, data_bytes);
  for (double v : samples) {
    double scaled = std::nearbyint(v * 32768.0);
    scaled = std::clamp(scaled, -32768.0, 32767.0);
    put_u16(out, static_cast<uint16_t>(static_cast<int16_t>(scaled)));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write wav file: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("failed writing wav file: " + path);
}

}  // namespace attnvad
