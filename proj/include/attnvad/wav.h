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

#pragma once

#include <string>
#include <vector>

#include "attnvad/common.h"

namespace attnvad {

struct WavData {
  std::vector<double> samples;  // mono, int16 values scaled by 1/32768
  int sample_rate = 0;
};

// Reads a RIFF/WAVE file. Only uncompressed 16-bit PCM mono is accepted;
// anything else raises DataError. Chunks other than fmt/data are skipped.
WavData read_wav(const std::string& path);

// Writes 16-bit PCM mono. Samples are scaled by 32768, rounded to nearest,
// and clipped to the int16 range.
void write_wav(const std::string& path, const std::vector<double>& samples,
               int sample_rate);

}  // namespace attnvad
