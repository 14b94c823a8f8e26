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

#include "attnvad/dataprep.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "attnvad/wav.h"

namespace attnvad {
namespace {

constexpr double kPi = 3.14159265358979323846;

void require_aligned(const LabeledClip& clip, const FeatureConfig& cfg,
                     const char* op) {
  int64_t frames = num_frames(static_cast<int64_t>(clip.samples.size()), cfg);
  if (frames < 1) {
    throw DataError(std::string(op) + ": clip shorter than one frame");
  }
  if (frames != static_cast<int64_t>(clip.labels.size())) {
    throw DataError(std::string(op) + ": " +
                    std::to_string(clip.labels.size()) + " labels for " +
                    std::to_string(frames) + " frames");
  }
}

double mean_square(const std::vector<double>& x, size_t begin, size_t count) {
  double acc = 0.0;
  for (size_t i = 0; i < count; ++i) acc += x[begin + i] * x[begin + i];
  return count == 0 ? 0.0 : acc / static_cast<double>(count);
}

void scale_to_rms(std::vector<double>& x, double target_rms) {
  double rms = std::sqrt(mean_square(x, 0, x.size()));
  if (rms <= 0.0) throw Error("cannot normalize an all-zero signal");
  double s = target_rms / rms;
  for (double& v : x) v *= s;
}

// Two-pole resonator y[n] = x[n] + 2 r cos(theta) y[n-1] - r^2 y[n-2]:
// a narrow band-pass around fc used for formant-band noise.
std::vector<double> resonate(const std::vector<double>& x, double fc_hz,
                             double r, int sample_rate) {
  double c = 2.0 * r * std::cos(2.0 * kPi * fc_hz / sample_rate);
  double r2 = r * r;
  std::vector<double> y(x.size(), 0.0);
  double y1 = 0.0, y2 = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    double v = x[i] + c * y1 - r2 * y2;
    y2 = y1;
    y1 = v;
    y[i] = v;
  }
  return y;
}

std::vector<double> white_noise(int64_t n, Rng& rng) {
  std::vector<double> x(static_cast<size_t>(n));
  for (double& v : x) v = rng.uniform(-1.0, 1.0);
  return x;
}

// Paul Kellet's economy pink-noise filter over a white source.
std::vector<double> pink_noise(int64_t n, Rng& rng) {
  std::vector<double> x(static_cast<size_t>(n));
  double b0 = 0.0, b1 = 0.0, b2 = 0.0;
  for (double& v : x) {
    double w = rng.uniform(-1.0, 1.0);
    b0 = 0.99765 * b0 + w * 0.0990460;
    b1 = 0.96300 * b1 + w * 0.2965164;
    b2 = 0.57000 * b2 + w * 1.0526913;
    v = b0 + b1 + b2 + w * 0.1848;
  }
  return x;
}

// Several slowly amplitude-modulated formant-band streams summed together;
// crude but serviceable stand-in for a babble background.
std::vector<double> babble_noise(int64_t n, int sample_rate, Rng& rng) {
  std::vector<double> mix(static_cast<size_t>(n), 0.0);
  const int kStreams = 4;
  double env_coeff = 5.0 / sample_rate;  // ~0.2 s envelope time constant
  for (int s = 0; s < kStreams; ++s) {
    double fc = rng.uniform(300.0, 3000.0);
    std::vector<double> stream = resonate(white_noise(n, rng), fc, 0.95,
                                          sample_rate);
    double env = rng.uniform();
    for (size_t i = 0; i < stream.size(); ++i) {
      env += env_coeff * (rng.uniform() - env);
      mix[i] += stream[i] * env;
    }
  }
  return mix;
}

// One voiced, amplitude-modulated harmonic complex plus formant-band noise,
// written additively into x over [begin, end).
void add_speech_segment(std::vector<double>& x, int64_t begin, int64_t end,
                        int sample_rate, Rng& rng) {
  int64_t n = end - begin;
  double f0 = rng.uniform(90.0, 250.0);
  int n_harm = std::min<int>(12, static_cast<int>(4000.0 / f0));
  std::vector<double> phase(static_cast<size_t>(n_harm));
  for (double& p : phase) p = rng.uniform(0.0, 2.0 * kPi);
  double f_am = rng.uniform(2.0, 6.0);
  double am_phase = rng.uniform(0.0, 2.0 * kPi);

  std::vector<double> seg(static_cast<size_t>(n), 0.0);
  for (int64_t i = 0; i < n; ++i) {
    double t = static_cast<double>(i) / sample_rate;
    double v = 0.0;
    for (int k = 1; k <= n_harm; ++k) {
      v += std::sin(2.0 * kPi * k * f0 * t + phase[k - 1]) / k;
    }
    double env = 0.6 + 0.4 * std::sin(2.0 * kPi * f_am * t + am_phase);
    seg[static_cast<size_t>(i)] = v * env;
  }

  // Formant-band noise at one quarter of the voiced RMS.
  double voiced_rms = std::sqrt(mean_square(seg, 0, seg.size()));
  double fc = rng.uniform(400.0, 2800.0);
  std::vector<double> formant =
      resonate(white_noise(n, rng), fc, 0.97, sample_rate);
  double formant_rms = std::sqrt(mean_square(formant, 0, formant.size()));
  if (formant_rms > 0.0) {
    double fs = 0.25 * voiced_rms / formant_rms;
    for (int64_t i = 0; i < n; ++i) {
      seg[static_cast<size_t>(i)] += formant[static_cast<size_t>(i)] * fs;
    }
  }

  // 10 ms raised-cosine fades avoid clicks at the segment edges.
  int64_t ramp = std::min<int64_t>(n / 2, sample_rate / 100);
  for (int64_t i = 0; i < ramp; ++i) {
    double g = 0.5 - 0.5 * std::cos(kPi * (i + 1) / (ramp + 1));
    seg[static_cast<size_t>(i)] *= g;
    seg[static_cast<size_t>(n - 1 - i)] *= g;
  }

  double peak = 0.0;
  for (double v : seg) peak = std::max(peak, std::abs(v));
  double gain = peak > 0.0 ? 0.35 / peak : 0.0;
  for (int64_t i = 0; i < n; ++i) {
    x[static_cast<size_t>(begin + i)] += seg[static_cast<size_t>(i)] * gain;
  }
}

std::string sanitize_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  std::string s(buf);
  std::replace(s.begin(), s.end(), '.', 'p');
  return s;
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

// One source utterance headed into the conditioning/mixing pipeline.
struct BaseUtt {
  std::string id;
  std::string split;  // train | val | test
  LabeledClip clip;
};

// Applies the imbalance condition to train/val utterances, mixes with
// seeded noise (one draw for train/val, the full noise x SNR grid for
// test), and writes wav/, labels/ and the manifest under out_dir. Every
// random choice derives from mix(seed, utterance index), so the result is
// independent of processing order.
Manifest write_noisy_dataset(const std::vector<BaseUtt>& bases,
                             const std::string& out_dir,
                             const PrepConfig& cfg, uint64_t seed) {
  if (cfg.snr_set.empty()) throw UsageError("empty SNR set");
  if (cfg.noise_types.empty()) throw UsageError("empty noise type list");
  for (double snr : cfg.snr_set) {
    if (!std::isfinite(snr)) throw UsageError("SNR targets must be finite");
  }

  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "wav");
  fs::create_directories(fs::path(out_dir) / "labels");

  std::vector<ManifestEntry> entries;
  for (size_t idx = 0; idx < bases.size(); ++idx) {
    const BaseUtt& base = bases[idx];
    uint64_t useed = Rng::mix(seed, static_cast<uint64_t>(idx));
    bool is_test = base.split == "test";

    // Test utterances stay untransformed so test sets are comparable
    // across imbalance conditions; the condition shapes train/val only.
    LabeledClip cond =
        is_test ? base.clip : apply_condition(base.clip, cfg.condition);
    std::string condition_name =
        to_string(is_test ? ImbalanceCondition::kNoPad : cfg.condition);

    std::string label_rel = "labels/" + base.id + ".txt";
    write_labels(out_dir + "/" + label_rel, cond.labels);

    int64_t noise_len = static_cast<int64_t>(cond.samples.size()) + 16000;
    auto emit = [&](const std::string& entry_id, const std::string& noise_type,
                    double snr_db, Rng& rng) {
      std::vector<double> noise =
          synth_noise(noise_type, noise_len, 16000, rng);
      MixResult mixed = mix_at_snr(cond.samples, noise, snr_db, rng);
      std::string wav_rel = "wav/" + entry_id + ".wav";
      write_wav(out_dir + "/" + wav_rel, mixed.samples, 16000);
      entries.push_back(ManifestEntry{entry_id, wav_rel, label_rel,
                                      base.split, noise_type, snr_db,
                                      condition_name});
    };

    if (is_test) {
      uint64_t combo = 0;
      for (const std::string& noise_type : cfg.noise_types) {
        for (double snr : cfg.snr_set) {
          Rng rng(Rng::mix(useed, 1 + combo++));
          emit(base.id + "_" + noise_type + "_snr" + sanitize_number(snr),
               noise_type, snr, rng);
        }
      }
    } else {
      Rng rng(Rng::mix(useed, 0));
      const std::string& noise_type =
          cfg.noise_types[static_cast<size_t>(rng.uniform_int(
              static_cast<int64_t>(cfg.noise_types.size())))];
      double snr = cfg.snr_set[static_cast<size_t>(
          rng.uniform_int(static_cast<int64_t>(cfg.snr_set.size())))];
      emit(base.id, noise_type, snr, rng);
    }
  }

  std::string manifest_path = out_dir + "/manifest.csv";
  write_manifest(manifest_path, entries);
  return read_manifest(manifest_path);
}

}  // namespace

ImbalanceCondition parse_condition(const std::string& name) {
  if (name == "epd") return ImbalanceCondition::kEpd;
  if (name == "nopad") return ImbalanceCondition::kNoPad;
  if (name == "pad1") return ImbalanceCondition::kPad1s;
  if (name == "pad2") return ImbalanceCondition::kPad2s;
  if (name == "pad3") return ImbalanceCondition::kPad3s;
  throw UsageError("unknown condition '" + name +
                   "' (expected epd, nopad, pad1, pad2 or pad3)");
}

std::string to_string(ImbalanceCondition c) {
  switch (c) {
    case ImbalanceCondition::kEpd: return "epd";
    case ImbalanceCondition::kNoPad: return "nopad";
    case ImbalanceCondition::kPad1s: return "pad1";
    case ImbalanceCondition::kPad2s: return "pad2";
    case ImbalanceCondition::kPad3s: return "pad3";
  }
  throw Error("unreachable condition value");
}

double condition_pad_seconds(ImbalanceCondition c) {
  switch (c) {
    case ImbalanceCondition::kPad1s: return 1.0;
    case ImbalanceCondition::kPad2s: return 2.0;
    case ImbalanceCondition::kPad3s: return 3.0;
    default: return 0.0;
  }
}

LabeledClip pad_silence(const LabeledClip& clip, double seconds,
                        const FeatureConfig& cfg) {
  if (seconds < 0.0) throw UsageError("pad seconds must be >= 0");
  require_aligned(clip, cfg, "pad_silence");

  // Quantizing the pad to whole hops keeps the padded clip's frame grid an
  // exact extension of the original one.
  int64_t pad_samples =
      std::llround(seconds * cfg.sample_rate / cfg.hop) * cfg.hop;
  int64_t pad_frames = pad_samples / cfg.hop;

  LabeledClip out;
  out.samples.resize(clip.samples.size() + 2 * pad_samples, 0.0);
  std::copy(clip.samples.begin(), clip.samples.end(),
            out.samples.begin() + pad_samples);
  out.labels.resize(clip.labels.size() + 2 * pad_frames, 0);
  std::copy(clip.labels.begin(), clip.labels.end(),
            out.labels.begin() + pad_frames);
  return out;
}

LabeledClip epd_trim(const LabeledClip& clip, const FeatureConfig& cfg) {
  require_aligned(clip, cfg, "epd_trim");
  int64_t first = -1, last = -1;
  for (size_t f = 0; f < clip.labels.size(); ++f) {
    if (clip.labels[f] != 0) {
      if (first < 0) first = static_cast<int64_t>(f);
      last = static_cast<int64_t>(f);
    }
  }
  if (first < 0) {
    throw DataError("endpoint trim undefined: no speech frames");
  }

  int64_t begin_sample = first * cfg.hop;
  int64_t end_sample = last * cfg.hop + cfg.frame_len;
  LabeledClip out;
  out.samples.assign(clip.samples.begin() + begin_sample,
                     clip.samples.begin() + end_sample);
  out.labels.assign(clip.labels.begin() + first,
                    clip.labels.begin() + last + 1);
  return out;
}

LabeledClip apply_condition(const LabeledClip& clip, ImbalanceCondition c,
                            const FeatureConfig& cfg) {
  switch (c) {
    case ImbalanceCondition::kEpd: return epd_trim(clip, cfg);
    case ImbalanceCondition::kNoPad: return clip;
    default: return pad_silence(clip, condition_pad_seconds(c), cfg);
  }
}

ClassRatio class_ratio(const std::vector<std::vector<int>>& label_tracks) {
  int64_t total = 0, speech = 0;
  for (const auto& track : label_tracks) {
    for (int v : track) {
      if (v != 0 && v != 1) throw DataError("labels must be 0 or 1");
      total += 1;
      speech += v;
    }
  }
  if (total == 0) throw DataError("class_ratio needs at least one frame");
  ClassRatio r;
  r.speech_pct = 100.0 * static_cast<double>(speech) / total;
  r.nonspeech_pct = 100.0 - r.speech_pct;
  return r;
}

MixResult mix_at_snr(const std::vector<double>& speech,
                     const std::vector<double>& noise, double snr_db,
                     Rng& rng) {
  if (!std::isfinite(snr_db)) throw UsageError("SNR target must be finite");
  if (speech.empty()) throw DataError("mix_at_snr: empty speech clip");
  if (noise.size() < speech.size()) {
    throw DataError("mix_at_snr: noise (" + std::to_string(noise.size()) +
                    " samples) shorter than speech (" +
                    std::to_string(speech.size()) + ")");
  }

  double p_speech = mean_square(speech, 0, speech.size());
  if (p_speech <= 0.0) {
    throw DataError("mix_at_snr: digitally silent speech, SNR undefined");
  }

  size_t offset = static_cast<size_t>(
      rng.uniform_int(static_cast<int64_t>(noise.size() - speech.size()) + 1));
  double p_noise = mean_square(noise, offset, speech.size());
  if (p_noise <= 0.0) {
    throw DataError("mix_at_snr: silent noise segment, SNR undefined");
  }

  double alpha =
      std::sqrt(p_speech / (p_noise * std::pow(10.0, snr_db / 10.0)));

  MixResult out;
  out.samples.resize(speech.size());
  double p_scaled = 0.0;
  int64_t clipped = 0;
  for (size_t i = 0; i < speech.size(); ++i) {
    double n = alpha * noise[offset + i];
    p_scaled += n * n;
    double v = speech[i] + n;
    if (v > 1.0) {
      v = 1.0;
      ++clipped;
    } else if (v < -1.0) {
      v = -1.0;
      ++clipped;
    }
    out.samples[i] = v;
  }
  p_scaled /= static_cast<double>(speech.size());
  out.achieved_snr_db = 10.0 * std::log10(p_speech / p_scaled);
  out.clipped_fraction =
      static_cast<double>(clipped) / static_cast<double>(speech.size());
  return out;
}

std::vector<int> energy_label(const std::vector<double>& samples,
                              const FeatureConfig& cfg) {
  int64_t frames = num_frames(static_cast<int64_t>(samples.size()), cfg);
  if (frames < 1) throw DataError("energy_label: clip shorter than one frame");

  std::vector<double> energy_db(static_cast<size_t>(frames));
  for (int64_t f = 0; f < frames; ++f) {
    double e = mean_square(samples, static_cast<size_t>(f * cfg.hop),
                           static_cast<size_t>(cfg.frame_len));
    energy_db[static_cast<size_t>(f)] = 10.0 * std::log10(e + 1e-12);
  }

  // Noise floor: the 10th percentile of the frame energies.
  std::vector<double> sorted = energy_db;
  std::sort(sorted.begin(), sorted.end());
  size_t idx = static_cast<size_t>(
      std::floor(0.1 * static_cast<double>(frames - 1)));
  double threshold = sorted[idx] + 6.0;

  std::vector<int> labels(static_cast<size_t>(frames), 0);
  for (int64_t f = 0; f < frames; ++f) {
    labels[static_cast<size_t>(f)] =
        energy_db[static_cast<size_t>(f)] > threshold ? 1 : 0;
  }

  // Hangover smoothing: drop speech runs shorter than 3 frames, then fill
  // interior non-speech gaps shorter than 5 frames.
  auto for_each_run = [&labels](int value, auto&& fn) {
    size_t i = 0;
    while (i < labels.size()) {
      if (labels[i] != value) {
        ++i;
        continue;
      }
      size_t j = i;
      while (j < labels.size() && labels[j] == value) ++j;
      fn(i, j);
      i = j;
    }
  };
  for_each_run(1, [&labels](size_t b, size_t e) {
    if (e - b < 3) std::fill(labels.begin() + b, labels.begin() + e, 0);
  });
  for_each_run(0, [&labels](size_t b, size_t e) {
    bool interior = b > 0 && e < labels.size();
    if (interior && e - b < 5) {
      std::fill(labels.begin() + b, labels.begin() + e, 1);
    }
  });
  return labels;
}

void write_labels(const std::string& path, const std::vector<int>& labels) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open label file for writing: " + path);
  std::string line;
  line.reserve(labels.size() + 1);
  for (int v : labels) {
    if (v != 0 && v != 1) throw DataError("labels must be 0 or 1");
    line.push_back(v ? '1' : '0');
  }
  line.push_back('\n');
  f.write(line.data(), static_cast<std::streamsize>(line.size()));
  if (!f) throw DataError("failed writing label file: " + path);
}

std::vector<int> read_labels(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open label file: " + path);
  std::string text((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) {
    text.pop_back();
  }
  if (text.empty()) throw DataError("empty label file: " + path);
  std::vector<int> labels;
  labels.reserve(text.size());
  for (char c : text) {
    if (c != '0' && c != '1') {
      throw DataError("label file has a character other than 0/1: " + path);
    }
    labels.push_back(c - '0');
  }
  return labels;
}

void write_manifest(const std::string& path,
                    const std::vector<ManifestEntry>& entries) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open manifest for writing: " + path);
  f << "utt_id,wav_path,label_path,split,noise_type,snr_db,condition\n";
  for (const ManifestEntry& e : entries) {
    for (const std::string* s :
         {&e.utt_id, &e.wav_path, &e.label_path, &e.split, &e.noise_type,
          &e.condition}) {
      if (s->find(',') != std::string::npos || s->find('\n') != std::string::npos) {
        throw DataError("manifest fields may not contain commas or newlines");
      }
    }
    f << e.utt_id << ',' << e.wav_path << ',' << e.label_path << ','
      << e.split << ',' << e.noise_type << ',' << format_number(e.snr_db)
      << ',' << e.condition << '\n';
  }
  if (!f) throw DataError("failed writing manifest: " + path);
}

Manifest read_manifest(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open manifest: " + path);

  Manifest m;
  size_t slash = path.find_last_of('/');
  m.dir = slash == std::string::npos ? "." : path.substr(0, slash);

  std::string line;
  if (!std::getline(f, line)) throw DataError("empty manifest: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::string kHeader =
      "utt_id,wav_path,label_path,split,noise_type,snr_db,condition";
  if (line != kHeader) {
    throw DataError("manifest header mismatch in " + path + ": got '" +
                    line + "'");
  }

  int lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 7) {
      throw DataError("manifest line " + std::to_string(lineno) + " in " +
                      path + " has " + std::to_string(fields.size()) +
                      " fields, expected 7");
    }
    ManifestEntry e;
    e.utt_id = fields[0];
    e.wav_path = fields[1];
    e.label_path = fields[2];
    e.split = fields[3];
    e.noise_type = fields[4];
    try {
      size_t used = 0;
      e.snr_db = std::stod(fields[5], &used);
      if (used != fields[5].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw DataError("manifest line " + std::to_string(lineno) + " in " +
                      path + " has a non-numeric snr_db '" + fields[5] + "'");
    }
    e.condition = fields[6];
    m.entries.push_back(std::move(e));
  }
  return m;
}

std::string resolve_path(const Manifest& m, const std::string& rel) {
  if (!rel.empty() && rel.front() == '/') return rel;
  return m.dir + "/" + rel;
}

std::string feature_cache_path(const std::string& wav_path) {
  if (wav_path.size() >= 4 &&
      wav_path.compare(wav_path.size() - 4, 4, ".wav") == 0) {
    return wav_path.substr(0, wav_path.size() - 4) + ".feat";
  }
  return wav_path + ".feat";
}

Tensor load_features(const Manifest& m, const ManifestEntry& e) {
  std::string wav_path = resolve_path(m, e.wav_path);
  std::string cache = feature_cache_path(wav_path);
  if (std::filesystem::exists(cache)) return read_feature_cache(cache);
  WavData wav = read_wav(wav_path);
  FeatureConfig cfg;
  if (wav.sample_rate != cfg.sample_rate) {
    throw DataError("expected " + std::to_string(cfg.sample_rate) +
                    " Hz audio, got " + std::to_string(wav.sample_rate) +
                    " Hz: " + wav_path);
  }
  return log_mel_features(wav.samples, cfg);
}

std::vector<int> load_labels(const Manifest& m, const ManifestEntry& e) {
  return read_labels(resolve_path(m, e.label_path));
}

void featurize_manifest(const Manifest& m) {
  for (const ManifestEntry& e : m.entries) {
    std::string wav_path = resolve_path(m, e.wav_path);
    WavData wav = read_wav(wav_path);
    FeatureConfig cfg;
    if (wav.sample_rate != cfg.sample_rate) {
      throw DataError("expected " + std::to_string(cfg.sample_rate) +
                      " Hz audio, got " + std::to_string(wav.sample_rate) +
                      " Hz: " + wav_path);
    }
    write_feature_cache(feature_cache_path(wav_path),
                        log_mel_features(wav.samples, cfg));
  }
}

std::vector<int> labels_from_spans(const std::vector<SpeechSpan>& spans,
                                   int64_t n_samples,
                                   const FeatureConfig& cfg) {
  int64_t frames = num_frames(n_samples, cfg);
  std::vector<int> labels(static_cast<size_t>(std::max<int64_t>(frames, 0)),
                          0);
  for (int64_t f = 0; f < frames; ++f) {
    int64_t center = f * cfg.hop + cfg.frame_len / 2;
    for (const SpeechSpan& s : spans) {
      if (center >= s.begin && center < s.end) {
        labels[static_cast<size_t>(f)] = 1;
        break;
      }
    }
  }
  return labels;
}

CleanUtterance synth_utterance(double seconds, int sample_rate, Rng& rng) {
  int64_t n = std::llround(seconds * sample_rate);
  if (n < sample_rate) {
    throw UsageError("synth_utterance needs at least one second");
  }
  CleanUtterance utt;
  utt.samples.assign(static_cast<size_t>(n), 0.0);

  int64_t guard = sample_rate / 10;  // keep 100 ms of trailing silence
  int64_t min_speech = std::llround(0.30 * sample_rate);
  int64_t t = std::llround(rng.uniform(0.10, 0.30) * sample_rate);
  while (t + min_speech + guard <= n) {
    int64_t sp = std::llround(rng.uniform(0.30, 0.80) * sample_rate);
    sp = std::min(sp, n - guard - t);
    add_speech_segment(utt.samples, t, t + sp, sample_rate, rng);
    utt.spans.push_back(SpeechSpan{t, t + sp});
    t += sp + std::llround(rng.uniform(0.15, 0.45) * sample_rate);
  }

  utt.labels = labels_from_spans(utt.spans, n);
  return utt;
}

std::vector<double> synth_noise(const std::string& type, int64_t n_samples,
                                int sample_rate, Rng& rng) {
  if (n_samples <= 0) throw UsageError("noise length must be positive");
  std::vector<double> x;
  if (type == "white") {
    x = white_noise(n_samples, rng);
  } else if (type == "pink") {
    x = pink_noise(n_samples, rng);
  } else if (type == "babble") {
    x = babble_noise(n_samples, sample_rate, rng);
  } else {
    throw UsageError("unknown noise type '" + type +
                     "' (expected white, pink or babble)");
  }
  scale_to_rms(x, 0.1);
  return x;
}

Manifest synth_corpus(const std::string& out_dir, const SynthConfig& cfg,
                      uint64_t seed) {
  if (cfg.n_train < 0 || cfg.n_val < 0 || cfg.n_test < 0) {
    throw UsageError("utterance counts must be >= 0");
  }
  if (cfg.min_seconds < 1.0 || cfg.max_seconds < cfg.min_seconds) {
    throw UsageError("need 1.0 <= min_seconds <= max_seconds");
  }

  std::vector<BaseUtt> bases;
  uint64_t idx = 0;
  auto generate = [&](const std::string& split, int count) {
    for (int i = 0; i < count; ++i, ++idx) {
      Rng rng(Rng::mix(Rng::mix(seed, 0xc1ea9), idx));
      double seconds = rng.uniform(cfg.min_seconds, cfg.max_seconds);
      CleanUtterance utt = synth_utterance(seconds, cfg.sample_rate, rng);
      char id[64];
      std::snprintf(id, sizeof(id), "%s_%04d", split.c_str(), i);
      bases.push_back(
          BaseUtt{id, split, LabeledClip{std::move(utt.samples),
                                         std::move(utt.labels)}});
    }
  };
  generate("train", cfg.n_train);
  generate("val", cfg.n_val);
  generate("test", cfg.n_test);

  if (cfg.clean_only) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(out_dir) / "wav");
    fs::create_directories(fs::path(out_dir) / "labels");
    std::vector<ManifestEntry> entries;
    for (const BaseUtt& b : bases) {
      std::string wav_rel = "wav/" + b.id + ".wav";
      std::string label_rel = "labels/" + b.id + ".txt";
      write_wav(out_dir + "/" + wav_rel, b.clip.samples, cfg.sample_rate);
      write_labels(out_dir + "/" + label_rel, b.clip.labels);
      entries.push_back(ManifestEntry{b.id, wav_rel, label_rel, b.split,
                                      "none", 0.0, "nopad"});
    }
    std::string manifest_path = out_dir + "/manifest.csv";
    write_manifest(manifest_path, entries);
    return read_manifest(manifest_path);
  }

  PrepConfig prep;
  prep.snr_set = cfg.snr_set;
  prep.noise_types = cfg.noise_types;
  prep.condition = cfg.condition;
  return write_noisy_dataset(bases, out_dir, prep, Rng::mix(seed, 0x90153));
}

Manifest prep_dataset(const Manifest& clean, const std::string& out_dir,
                      const PrepConfig& cfg, uint64_t seed) {
  std::vector<BaseUtt> bases;
  for (const ManifestEntry& e : clean.entries) {
    WavData wav = read_wav(resolve_path(clean, e.wav_path));
    FeatureConfig fcfg;
    if (wav.sample_rate != fcfg.sample_rate) {
      throw DataError("expected " + std::to_string(fcfg.sample_rate) +
                      " Hz audio, got " + std::to_string(wav.sample_rate) +
                      " Hz: " + e.wav_path);
    }
    bases.push_back(BaseUtt{
        e.utt_id, e.split,
        LabeledClip{std::move(wav.samples), load_labels(clean, e)}});
  }
  return write_noisy_dataset(bases, out_dir, cfg, Rng::mix(seed, 0x90153));
}

}  // namespace attnvad
