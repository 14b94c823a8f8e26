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

#include "attnvad/tensor.h"

namespace attnvad {

// Log-mel filterbank front end: 25 ms Hamming-windowed frames every 10 ms
// at 16 kHz, 512-point FFT, 40 triangular mel filters spanning 0..8 kHz
// (no area normalization), natural log with a 1e-10 energy floor.
struct FeatureConfig {
  int sample_rate = 16000;
  int frame_len = 400;  // 25 ms
  int hop = 160;        // 10 ms
  int fft_size = 512;
  int n_mels = 40;
  double fmin_hz = 0.0;
  double fmax_hz = 8000.0;
};

// Frames fully contained in the signal: floor((n - frame_len)/hop) + 1,
// or 0 when the signal is shorter than one frame.
int64_t num_frames(int64_t n_samples, const FeatureConfig& cfg = {});

// In-place iterative radix-2 FFT. Sizes must be powers of two.
void fft_radix2(std::vector<double>& re, std::vector<double>& im);

// T x n_mels feature matrix. Throws DataError when the signal is too short
// for a single frame.
Tensor log_mel_features(const std::vector<double>& samples,
                        const FeatureConfig& cfg = {});

// Per-dimension normalization statistics (population std, floored at 1e-8).
struct NormStats {
  Tensor mean;  // {n_dims}
  Tensor std;   // {n_dims}
};

NormStats fit_norm(const std::vector<Tensor>& feature_mats);
Tensor apply_norm(const Tensor& feats, const NormStats& norm);

// On-disk cache for a feature matrix: a one-line text header followed by
// the raw row-major little-endian doubles.
void write_feature_cache(const std::string& path, const Tensor& feats);
Tensor read_feature_cache(const std::string& path);

}  // namespace attnvad
