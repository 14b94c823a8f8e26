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

#include <cstdint>
#include <string>
#include <vector>

#include "attnvad/common.h"
#include "attnvad/features.h"
#include "attnvad/tensor.h"

namespace attnvad {

// ---------------------------------------------------------------------------
// Class-imbalance dataset conditions.
//
// A condition transforms a clean utterance (and its frame labels) before
// noise mixing, shifting the speech / non-speech frame ratio:
//   kEpd    endpoint trim: drop audio before the first / after the last
//           speech frame (raises the speech ratio),
//   kNoPad  leave the utterance as generated,
//   kPad1s..kPad3s  insert that many seconds of digital silence at both
//           ends (lowers the speech ratio; the silence is added before
//           mixing so it picks up noise like everything else).
// ---------------------------------------------------------------------------
enum class ImbalanceCondition { kEpd, kNoPad, kPad1s, kPad2s, kPad3s };

ImbalanceCondition parse_condition(const std::string& name);
std::string to_string(ImbalanceCondition c);
double condition_pad_seconds(ImbalanceCondition c);  // 0 except kPad*

// An audio clip paired with its per-frame 0/1 speech labels on the 10 ms
// feature grid; labels.size() always equals num_frames(samples.size()).
struct LabeledClip {
  std::vector<double> samples;
  std::vector<int> labels;
};

// Zero samples prepended and appended, with matching all-zero label frames.
// The pad length is rounded to a whole number of hops so the frame grid of
// the padded clip extends the original exactly. seconds < 0 is an error.
LabeledClip pad_silence(const LabeledClip& clip, double seconds,
                        const FeatureConfig& cfg = {});

// Crops to the sample span of [first speech frame, last speech frame] and
// slices the labels to match. All-non-speech input is an error.
LabeledClip epd_trim(const LabeledClip& clip, const FeatureConfig& cfg = {});

// Applies the condition's transform (identity for kNoPad).
LabeledClip apply_condition(const LabeledClip& clip, ImbalanceCondition c,
                            const FeatureConfig& cfg = {});

// Speech / non-speech percentages over a set of label tracks; sums to 100.
struct ClassRatio {
  double speech_pct;
  double nonspeech_pct;
};
ClassRatio class_ratio(const std::vector<std::vector<int>>& label_tracks);

// ---------------------------------------------------------------------------
// SNR-controlled noise mixing.
//
// The noise is cropped to the speech length at an offset drawn from `rng`,
// scaled by alpha = sqrt(P_s / (P_n * 10^(snr_db/10))) with P the mean
// squared amplitude of the whole clip / segment, and added. The sum is
// clipped to [-1, 1]; `clipped_fraction` reports how many samples were
// affected. Silent speech or a silent noise segment make the SNR
// undefined and raise DataError.
// ---------------------------------------------------------------------------
struct MixResult {
  std::vector<double> samples;
  double achieved_snr_db;   // 10*log10(P_speech / P_scaled_noise), pre-clip
  double clipped_fraction;  // in [0, 1]
};
MixResult mix_at_snr(const std::vector<double>& speech,
                     const std::vector<double>& noise, double snr_db,
                     Rng& rng);

// ---------------------------------------------------------------------------
// Energy-based frame labeling for clean (high-SNR) audio.
//
// Per-frame log energies are thresholded at (noise floor + 6 dB) where the
// noise floor is the 10th percentile of the frame energies. Smoothing then
// erases speech runs shorter than 3 frames and fills non-speech gaps
// shorter than 5 frames. Deterministic; silence maps to all zeros.
// ---------------------------------------------------------------------------
std::vector<int> energy_label(const std::vector<double>& samples,
                              const FeatureConfig& cfg = {});

// ---------------------------------------------------------------------------
// Label files: a single line of '0'/'1' characters, one per frame,
// newline-terminated.
// ---------------------------------------------------------------------------
void write_labels(const std::string& path, const std::vector<int>& labels);
std::vector<int> read_labels(const std::string& path);

// ---------------------------------------------------------------------------
// Dataset manifests: CSV with one record per utterance variant. Paths are
// stored relative to the manifest's directory.
// ---------------------------------------------------------------------------
struct ManifestEntry {
  std::string utt_id;
  std::string wav_path;
  std::string label_path;
  std::string split;       // train | val | test
  std::string noise_type;  // white | pink | babble | none
  double snr_db = 0.0;
  std::string condition;   // to_string(ImbalanceCondition)
};

struct Manifest {
  std::string dir;  // directory the manifest file lives in
  std::vector<ManifestEntry> entries;
};

void write_manifest(const std::string& path,
                    const std::vector<ManifestEntry>& entries);
Manifest read_manifest(const std::string& path);

// Absolute-ish path of an entry field (dir + "/" + relative path).
std::string resolve_path(const Manifest& m, const std::string& rel);

// Feature matrix for an entry: the sibling ".feat" cache when present,
// otherwise computed from the WAV. Labels come from the entry's label file
// and must match the feature frame count.
Tensor load_features(const Manifest& m, const ManifestEntry& e);
std::vector<int> load_labels(const Manifest& m, const ManifestEntry& e);

// Path of the feature cache that featurize_manifest writes for an entry.
std::string feature_cache_path(const std::string& wav_path);

// Writes a ".feat" cache next to every WAV in the manifest.
void featurize_manifest(const Manifest& m);

// ---------------------------------------------------------------------------
// Synthetic corpus generation.
//
// Utterances are speech-like segments (amplitude-modulated harmonic
// complexes with a formant-band noise component, randomized f0) separated
// by silences; ground-truth labels follow from the synthesizer's segment
// bookkeeping, so they are exact by construction. Everything derives from
// a per-utterance seed mix(master_seed, utterance_index), making corpus
// generation order-independent and reproducible.
// ---------------------------------------------------------------------------
struct SpeechSpan {
  int64_t begin;  // sample index, inclusive
  int64_t end;    // sample index, exclusive
};

struct CleanUtterance {
  std::vector<double> samples;
  std::vector<SpeechSpan> spans;
  std::vector<int> labels;
};

// A frame is speech iff its center sample (frame*hop + frame_len/2) lies
// inside one of the spans.
std::vector<int> labels_from_spans(const std::vector<SpeechSpan>& spans,
                                   int64_t n_samples,
                                   const FeatureConfig& cfg = {});

CleanUtterance synth_utterance(double seconds, int sample_rate, Rng& rng);

// Noise generators; each output is RMS-normalized to 0.1.
std::vector<double> synth_noise(const std::string& type, int64_t n_samples,
                                int sample_rate, Rng& rng);

struct SynthConfig {
  int n_train = 20;
  int n_val = 5;
  int n_test = 10;
  double min_seconds = 1.0;
  double max_seconds = 3.0;
  std::vector<double> snr_set = {-5.0, 0.0, 5.0};
  std::vector<std::string> noise_types = {"white", "pink", "babble"};
  ImbalanceCondition condition = ImbalanceCondition::kNoPad;
  int sample_rate = 16000;
  bool clean_only = false;  // skip conditioning/mixing; emit clean audio
};

// Generates the corpus under out_dir (wav/, labels/, manifest.csv) and
// returns the manifest. Train/val utterances receive the imbalance
// condition and one (noise type, SNR) draw each; every test utterance is
// mixed over the full noise x SNR grid and is never conditioned, so test
// sets are comparable across conditions.
Manifest synth_corpus(const std::string& out_dir, const SynthConfig& cfg,
                      uint64_t seed);

struct PrepConfig {
  std::vector<double> snr_set = {-5.0, 0.0, 5.0};
  std::vector<std::string> noise_types = {"white", "pink", "babble"};
  ImbalanceCondition condition = ImbalanceCondition::kNoPad;
};

// Same conditioning/mixing pipeline as synth_corpus, applied to an
// existing manifest of clean utterances.
Manifest prep_dataset(const Manifest& clean, const std::string& out_dir,
                      const PrepConfig& cfg, uint64_t seed);

}  // namespace attnvad
