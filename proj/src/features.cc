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

#include "attnvad/features.h"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

namespace attnvad {

namespace {

constexpr double kLogFloor = 1e-10;

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

// Triangular mel filter weights as (bin, weight) pairs per channel.
std::vector<std::vector<std::pair<int, double>>> mel_filters(
    const FeatureConfig& cfg) {
  int n_bins = cfg.fft_size / 2 + 1;
  double mel_lo = hz_to_mel(cfg.fmin_hz);
  double mel_hi = hz_to_mel(cfg.fmax_hz);
  std::vector<double> hz_points(cfg.n_mels + 2);
  for (int i = 0; i < cfg.n_mels + 2; ++i) {
    double mel = mel_lo + (mel_hi - mel_lo) * i / (cfg.n_mels + 1);
    hz_points[i] = mel_to_hz(mel);
  }
  std::vector<std::vector<std::pair<int, double>>> filters(cfg.n_mels);
  for (int m = 0; m < cfg.n_mels; ++m) {
    double left = hz_points[m], mid = hz_points[m + 1],
           right = hz_points[m + 2];
    for (int k = 0; k < n_bins; ++k) {
      double f = static_cast<double>(k) * cfg.sample_rate / cfg.fft_size;
      double w = 0.0;
      if (f > left && f < mid) {
        w = (f - left) / (mid - left);
      } else if (f == mid) {
        w = 1.0;
      } else if (f > mid && f < right) {
        w = (right - f) / (right - mid);
      }
      if (w > 0.0) filters[m].emplace_back(k, w);
    }
  }
  return filters;
}

}  // namespace

int64_t num_frames(int64_t n_samples, const FeatureConfig& cfg) {
  if (n_samples < cfg.frame_len) return 0;
  return (n_samples - cfg.frame_len) / cfg.hop + 1;
}

void fft_radix2(std::vector<double>& re, std::vector<double>& im) {
  size_t n = re.size();
  if (n == 0 || (n & (n - 1)) != 0 || im.size() != n) {
    throw Error("fft_radix2: length must be a power of two with matching "
                "real/imag parts");
  }
  // Bit-reversal permutation.
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    double wr = std::cos(ang), wi = std::sin(ang);
    for (size_t i = 0; i < n; i += len) {
      double cur_r = 1.0, cur_i = 0.0;
      for (size_t j = 0; j < len / 2; ++j) {
        size_t a = i + j, b = i + j + len / 2;
        double tr = re[b] * cur_r - im[b] * cur_i;
        double ti = re[b] * cur_i + im[b] * cur_r;
        re[b] = re[a] - tr;
        im[b] = im[a] - ti;
        re[a] += tr;
        im[a] += ti;
        double next_r = cur_r * wr - cur_i * wi;
        cur_i = cur_r * wi + cur_i * wr;
        cur_r = next_r;
      }
    }
  }
}

Tensor log_mel_features(const std::vector<double>& samples,
                        const FeatureConfig& cfg) {
  int64_t frames = num_frames(static_cast<int64_t>(samples.size()), cfg);
  if (frames == 0) {
    throw DataError("log_mel_features: signal of " +
                    std::to_string(samples.size()) +
                    " samples is shorter than one frame (" +
                    std::to_string(cfg.frame_len) + ")");
  }
  if (cfg.fft_size < cfg.frame_len) {
    throw UsageError("log_mel_features: fft_size must cover frame_len");
  }

  std::vector<double> window(cfg.frame_len);
  for (int n = 0; n < cfg.frame_len; ++n) {
    window[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n /
                                       (cfg.frame_len - 1));
  }
  auto filters = mel_filters(cfg);
  int n_bins = cfg.fft_size / 2 + 1;

  Tensor out({frames, cfg.n_mels});
  double* dst = out.mutable_data();
  std::vector<double> re(cfg.fft_size), im(cfg.fft_size);
  std::vector<double> power(n_bins);
  for (int64_t t = 0; t < frames; ++t) {
    const double* src = samples.data() + t * cfg.hop;
    for (int n = 0; n < cfg.frame_len; ++n) re[n] = src[n] * window[n];
    std::fill(re.begin() + cfg.frame_len, re.end(), 0.0);
    std::fill(im.begin(), im.end(), 0.0);
    fft_radix2(re, im);
    for (int k = 0; k < n_bins; ++k) {
      power[k] = re[k] * re[k] + im[k] * im[k];
    }
    for (int m = 0; m < cfg.n_mels; ++m) {
      double acc = 0.0;
      for (const auto& [k, w] : filters[m]) acc += power[k] * w;
      dst[t * cfg.n_mels + m] = std::log(std::max(acc, kLogFloor));
    }
  }
  return out;
}

NormStats fit_norm(const std::vector<Tensor>& feature_mats) {
  if (feature_mats.empty()) {
    throw DataError("fit_norm: no feature matrices given");
  }
  int64_t dims = feature_mats.front().dim(1);
  int64_t rows = 0;
  for (const Tensor& m : feature_mats) {
    if (m.ndim() != 2 || m.dim(1) != dims) {
      throw ShapeError("fit_norm: inconsistent feature shape " +
                       m.shape_str());
    }
    rows += m.dim(0);
  }

  Tensor mean({dims});
  double* mu = mean.mutable_data();
  for (const Tensor& m : feature_mats) {
    const double* p = m.data();
    for (int64_t t = 0; t < m.dim(0); ++t) {
      for (int64_t d = 0; d < dims; ++d) mu[d] += p[t * dims + d];
    }
  }
  for (int64_t d = 0; d < dims; ++d) mu[d] /= static_cast<double>(rows);

  Tensor stdev({dims});
  double* sd = stdev.mutable_data();
  for (const Tensor& m : feature_mats) {
    const double* p = m.data();
    for (int64_t t = 0; t < m.dim(0); ++t) {
      for (int64_t d = 0; d < dims; ++d) {
        double diff = p[t * dims + d] - mu[d];
        sd[d] += diff * diff;
      }
    }
  }
  for (int64_t d = 0; d < dims; ++d) {
    sd[d] = std::max(std::sqrt(sd[d] / static_cast<double>(rows)), 1e-8);
  }
  return {std::move(mean), std::move(stdev)};
}

Tensor apply_norm(const Tensor& feats, const NormStats& norm) {
  if (feats.ndim() != 2 || feats.dim(1) != norm.mean.numel() ||
      !norm.mean.same_shape(norm.std)) {
    throw ShapeError("apply_norm: features " + feats.shape_str() +
                     " do not match stats of " +
                     std::to_string(norm.mean.numel()) + " dims");
  }
  Tensor out(feats.shape());
  double* dst = out.mutable_data();
  const double* src = feats.data();
  const double* mu = norm.mean.data();
  const double* sd = norm.std.data();
  int64_t dims = feats.dim(1);
  for (int64_t t = 0; t < feats.dim(0); ++t) {
    for (int64_t d = 0; d < dims; ++d) {
      dst[t * dims + d] = (src[t * dims + d] - mu[d]) / sd[d];
    }
  }
  return out;
}

void write_feature_cache(const std::string& path, const Tensor& feats) {
  require_little_endian();
  if (feats.ndim() != 2) {
    throw ShapeError("write_feature_cache: expected a 2-d matrix, got " +
                     feats.shape_str());
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write feature cache: " + path);
  f << "AVADFEAT 1 " << feats.dim(0) << " " << feats.dim(1) << "\n";
  f.write(reinterpret_cast<const char*>(feats.data()),
          static_cast<std::streamsize>(feats.numel() * sizeof(double)));
  if (!f) throw DataError("failed writing feature cache: " + path);
}

Tensor read_feature_cache(const std::string& path) {
  require_little_endian();
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open feature cache: " + path);
  std::string header;
  if (!std::getline(f, header)) {
    throw DataError("feature cache missing header: " + path);
  }
  std::istringstream hs(header);
  std::string magic;
  int version = 0;
  int64_t rows = 0, cols = 0;
  hs >> magic >> version >> rows >> cols;
  if (magic != "AVADFEAT" || version != 1 || rows <= 0 || cols <= 0) {
    throw DataError("bad feature cache header in " + path + ": '" + header +
                    "'");
  }
  Tensor out({rows, cols});
  f.read(reinterpret_cast<char*>(out.mutable_data()),
         static_cast<std::streamsize>(rows * cols * sizeof(double)));
  if (f.gcount() !=
      static_cast<std::streamsize>(rows * cols * sizeof(double))) {
    throw DataError("feature cache payload truncated: " + path);
  }
  return out;
}

}  // namespace attnvad
