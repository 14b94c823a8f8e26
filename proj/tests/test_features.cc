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

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "attnvad/wav.h"
#include "doctest.h"

namespace attnvad {
namespace {

std::string temp_path(const std::string& name) {
  return "/tmp/attnvad_test_" + name;
}

TEST_CASE("wav files round-trip 16-bit sample values") {
  Rng rng(101);
  std::vector<double> samples(1000);
  for (double& s : samples) {
    // Exact int16 grid values survive the round trip bit for bit.
    int v = static_cast<int>(rng.uniform_int(65536)) - 32768;
    s = v / 32768.0;
  }
  std::string path = temp_path("roundtrip.wav");
  write_wav(path, samples, 16000);
  WavData back = read_wav(path);
  CHECK(back.sample_rate == 16000);
  REQUIRE(back.samples.size() == samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    CHECK(back.samples[i] == samples[i]);
  }

  // Arbitrary values land within half a quantization step.
  std::vector<double> arb(257);
  for (double& s : arb) s = rng.uniform(-0.99, 0.99);
  write_wav(path, arb, 8000);
  WavData back2 = read_wav(path);
  CHECK(back2.sample_rate == 8000);
  for (size_t i = 0; i < arb.size(); ++i) {
    CHECK(std::abs(back2.samples[i] - arb[i]) <= 0.5 / 32768.0 + 1e-12);
  }
  std::remove(path.c_str());
}

TEST_CASE("wav writer clips out-of-range samples") {
  std::string path = temp_path("clip.wav");
  write_wav(path, {2.0, -2.0, 0.0}, 16000);
  WavData back = read_wav(path);
  CHECK(back.samples[0] == doctest::Approx(32767.0 / 32768.0));
  CHECK(back.samples[1] == -1.0);
  CHECK(back.samples[2] == 0.0);
  std::remove(path.c_str());
}

TEST_CASE("wav reader skips foreign chunks and validates the format") {
  auto put_u32 = [](std::string& s, uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>(v >> (8 * i)));
  };
  auto put_u16 = [](std::string& s, uint16_t v) {
    s.push_back(static_cast<char>(v & 0xff));
    s.push_back(static_cast<char>(v >> 8));
  };
  auto make_wav = [&](uint16_t format, uint16_t channels, uint16_t bits,
                      bool leading_junk) {
    std::string fmt;
    put_u16(fmt, format);
    put_u16(fmt, channels);
    put_u32(fmt, 16000);
    put_u32(fmt, 32000);
    put_u16(fmt, 2);
    put_u16(fmt, bits);
    std::string data;
    put_u16(data, 100);
    put_u16(data, static_cast<uint16_t>(-100));
    std::string body;
    if (leading_junk) {
      body += "junk";
      put_u32(body, 3);
      body += "abc";
      body.push_back('\0');  // pad to even size
    }
    body += "fmt ";
    put_u32(body, static_cast<uint32_t>(fmt.size()));
    body += fmt;
    body += "data";
    put_u32(body, static_cast<uint32_t>(data.size()));
    body += data;
    std::string out = "RIFF";
    put_u32(out, static_cast<uint32_t>(4 + body.size()));
    out += "WAVE";
    out += body;
    return out;
  };
  auto write_raw = [](const std::string& path, const std::string& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  };

  std::string path = temp_path("crafted.wav");
  write_raw(path, make_wav(1, 1, 16, /*leading_junk=*/true));
  WavData ok = read_wav(path);
  REQUIRE(ok.samples.size() == 2);
  CHECK(ok.samples[0] == doctest::Approx(100.0 / 32768.0));
  CHECK(ok.samples[1] == doctest::Approx(-100.0 / 32768.0));

  write_raw(path, make_wav(3, 1, 16, false));  // non-PCM format tag
  CHECK_THROWS_AS(read_wav(path), DataError);
  write_raw(path, make_wav(1, 2, 16, false));  // stereo
  CHECK_THROWS_AS(read_wav(path), DataError);
  write_raw(path, make_wav(1, 1, 8, false));  // 8-bit
  CHECK_THROWS_AS(read_wav(path), DataError);
  write_raw(path, "not a wav at all");
  CHECK_THROWS_AS(read_wav(path), DataError);
  CHECK_THROWS_AS(read_wav(temp_path("missing.wav")), DataError);
  std::remove(path.c_str());
}

TEST_CASE("radix-2 fft matches a naive dft") {
  Rng rng(103);
  for (size_t n : {8UL, 64UL, 512UL}) {
    std::vector<double> re(n), im(n);
    for (size_t i = 0; i < n; ++i) {
      re[i] = rng.uniform(-1.0, 1.0);
      im[i] = rng.uniform(-1.0, 1.0);
    }
    std::vector<double> fr = re, fi = im;
    fft_radix2(fr, fi);
    for (size_t k = 0; k < n; ++k) {
      double sr = 0.0, si = 0.0;
      for (size_t t = 0; t < n; ++t) {
        double ang = -2.0 * std::numbers::pi * static_cast<double>(k * t) /
                     static_cast<double>(n);
        double c = std::cos(ang), s = std::sin(ang);
        sr += re[t] * c - im[t] * s;
        si += re[t] * s + im[t] * c;
      }
      CHECK(std::abs(fr[k] - sr) < 1e-9 * static_cast<double>(n));
      CHECK(std::abs(fi[k] - si) < 1e-9 * static_cast<double>(n));
    }
  }
}

TEST_CASE("fft of an impulse is flat and of a bin-aligned cosine is a "
          "two-bin line") {
  std::vector<double> re(64, 0.0), im(64, 0.0);
  re[0] = 1.0;
  fft_radix2(re, im);
  for (size_t k = 0; k < 64; ++k) {
    CHECK(re[k] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(im[k]) < 1e-12);
  }

  std::vector<double> cr(64), ci(64, 0.0);
  for (size_t n = 0; n < 64; ++n) {
    cr[n] = std::cos(2.0 * std::numbers::pi * 5.0 * static_cast<double>(n) /
                     64.0);
  }
  fft_radix2(cr, ci);
  for (size_t k = 0; k < 64; ++k) {
    double mag = std::hypot(cr[k], ci[k]);
    if (k == 5 || k == 59) {
      CHECK(mag == doctest::Approx(32.0).epsilon(1e-9));
    } else {
      CHECK(mag < 1e-9);
    }
  }

  std::vector<double> bad_re(12), bad_im(12);
  CHECK_THROWS_AS(fft_radix2(bad_re, bad_im), Error);
}

TEST_CASE("frame count arithmetic") {
  CHECK(num_frames(0) == 0);
  CHECK(num_frames(399) == 0);
  CHECK(num_frames(400) == 1);
  CHECK(num_frames(559) == 1);
  CHECK(num_frames(560) == 2);
  CHECK(num_frames(16000) == 98);  // one second of 16 kHz audio
  CHECK_THROWS_AS(log_mel_features(std::vector<double>(399, 0.1)),
                  DataError);
}

TEST_CASE("silence maps every output to the log floor") {
  std::vector<double> silence(1600, 0.0);
  Tensor feats = log_mel_features(silence);
  CHECK(feats.shape() == std::vector<int64_t>{8, 40});
  double floor_val = std::log(1e-10);
  for (int64_t i = 0; i < feats.numel(); ++i) {
    CHECK(feats.flat(i) == floor_val);
  }
}

TEST_CASE("a 1 kHz tone concentrates energy in the matching mel channel") {
  std::vector<double> tone(16000);
  for (size_t n = 0; n < tone.size(); ++n) {
    tone[n] = 0.5 * std::sin(2.0 * std::numbers::pi * 1000.0 *
                             static_cast<double>(n) / 16000.0);
  }
  Tensor feats = log_mel_features(tone);
  std::vector<double> mean_energy(40, 0.0);
  for (int64_t t = 0; t < feats.dim(0); ++t) {
    for (int64_t m = 0; m < 40; ++m) mean_energy[m] += feats.at(t, m);
  }
  int argmax = 0;
  for (int m = 1; m < 40; ++m) {
    if (mean_energy[m] > mean_energy[argmax]) argmax = m;
  }
  // 1 kHz sits between the peaks of triangular channels 13 and 14.
  CHECK(argmax >= 13);
  CHECK(argmax <= 14);
}

TEST_CASE("doubling the waveform shifts log features by log 4") {
  Rng rng(107);
  std::vector<double> noise(3200);
  for (double& s : noise) s = rng.uniform(-0.4, 0.4);
  std::vector<double> loud(noise.size());
  for (size_t i = 0; i < noise.size(); ++i) loud[i] = 2.0 * noise[i];
  Tensor a = log_mel_features(noise);
  Tensor b = log_mel_features(loud);
  for (int64_t i = 0; i < a.numel(); ++i) {
    CHECK(b.flat(i) - a.flat(i) ==
          doctest::Approx(std::log(4.0)).epsilon(1e-9));
  }
}

TEST_CASE("a hop-periodic signal yields identical frames") {
  Rng rng(109);
  std::vector<double> period(160);
  for (double& s : period) s = rng.uniform(-0.5, 0.5);
  std::vector<double> signal(160 * 12);
  for (size_t i = 0; i < signal.size(); ++i) signal[i] = period[i % 160];
  Tensor feats = log_mel_features(signal);
  REQUIRE(feats.dim(0) > 1);
  for (int64_t t = 1; t < feats.dim(0); ++t) {
    for (int64_t m = 0; m < feats.dim(1); ++m) {
      CHECK(feats.at(t, m) == feats.at(0, m));
    }
  }
}

TEST_CASE("normalization statistics and application") {
  Tensor m1({2, 2}, {1.0, 7.0, 3.0, 7.0});
  Tensor m2({2, 2}, {5.0, 7.0, 7.0, 7.0});
  NormStats norm = fit_norm({m1, m2});
  CHECK(norm.mean.flat(0) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(norm.mean.flat(1) == doctest::Approx(7.0).epsilon(1e-12));
  // Population std over {1,3,5,7} is sqrt(5).
  CHECK(norm.std.flat(0) == doctest::Approx(std::sqrt(5.0)).epsilon(1e-12));
  // A constant dimension hits the floor instead of zero.
  CHECK(norm.std.flat(1) == 1e-8);

  Tensor normed = apply_norm(m1, norm);
  CHECK(normed.at(0, 0) ==
        doctest::Approx(-3.0 / std::sqrt(5.0)).epsilon(1e-12));
  CHECK(normed.at(0, 1) == 0.0);

  // Normalizing the fitted corpus re-centers it.
  Tensor n1 = apply_norm(m1, norm);
  Tensor n2 = apply_norm(m2, norm);
  double sum0 = n1.at(0, 0) + n1.at(1, 0) + n2.at(0, 0) + n2.at(1, 0);
  CHECK(std::abs(sum0) < 1e-12);

  CHECK_THROWS_AS(fit_norm({}), DataError);
  CHECK_THROWS_AS(fit_norm({m1, Tensor({2, 3})}), ShapeError);
  CHECK_THROWS_AS(apply_norm(Tensor({2, 5}), norm), ShapeError);
}

TEST_CASE("feature cache round-trips bit-exactly and rejects corruption") {
  Rng rng(113);
  Tensor feats = random_uniform({17, 40}, -25.0, 5.0, rng);
  std::string path = temp_path("feats.cache");
  write_feature_cache(path, feats);
  Tensor back = read_feature_cache(path);
  CHECK(bit_equal(feats, back));

  std::ofstream bad(path, std::ios::binary | std::ios::trunc);
  bad << "NOTAFEAT 1 17 40\n";
  bad.close();
  CHECK_THROWS_AS(read_feature_cache(path), DataError);

  std::ofstream trunc(path, std::ios::binary | std::ios::trunc);
  trunc << "AVADFEAT 1 17 40\n";
  trunc << "short";
  trunc.close();
  CHECK_THROWS_AS(read_feature_cache(path), DataError);
  CHECK_THROWS_AS(read_feature_cache(temp_path("missing.cache")), DataError);
  std::remove(path.c_str());
}

TEST_CASE("feature extraction is deterministic") {
  Rng rng(127);
  std::vector<double> signal(4000);
  for (double& s : signal) s = rng.uniform(-0.8, 0.8);
  Tensor a = log_mel_features(signal);
  Tensor b = log_mel_features(signal);
  CHECK(bit_equal(a, b));
}

}  // namespace
}  // namespace attnvad
