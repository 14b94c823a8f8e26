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
#include <utility>
#include <vector>

#include "attnvad/dataprep.h"
#include "attnvad/model.h"

namespace attnvad {

// ---------------------------------------------------------------------------
// ROC / AUC.
//
// The curve sweeps a threshold over the distinct score values (scores tied
// at a threshold move together); the area is the trapezoidal integral,
// which equals the Mann-Whitney statistic P(score+ > score-) plus half the
// tie probability. Inputs need at least one frame of each class.
// ---------------------------------------------------------------------------
struct RocPoint {
  double fpr;
  double tpr;
};

// Points from (0,0) to (1,1), one per distinct threshold; both coordinates
// are non-decreasing along the curve.
std::vector<RocPoint> roc_curve(const std::vector<double>& scores,
                                const std::vector<int>& labels);

double roc_auc(const std::vector<double>& scores,
               const std::vector<int>& labels);

// (auc - baseline) / (1 - baseline): the fraction of the remaining
// headroom that an improvement captures. AUCs as fractions in [0, 1].
double relative_improvement(double auc, double baseline);

// ---------------------------------------------------------------------------
// Corpus evaluation: frames are pooled per (noise type, SNR) cell across
// utterances, each cell gets one AUC, rows are averaged per SNR, and the
// overall number is the mean of the per-SNR averages.
// ---------------------------------------------------------------------------
struct EvalCell {
  std::string noise;
  double snr_db;
  double auc;
  int64_t n_frames;
};

struct EvalReport {
  std::vector<EvalCell> cells;                   // sorted by (noise, snr)
  std::vector<std::pair<double, double>> per_snr;  // (snr, mean over noises)
  double overall = 0.0;
  int64_t total_frames = 0;
  int64_t param_count = 0;
  std::vector<std::string> missing_cells;  // observed-grid combos w/o data
};

EvalReport evaluate(VadModel& model, const Manifest& manifest,
                    const std::string& split = "test");

// CSV with one row per cell: noise,snr_db,auc,n_frames.
void write_eval_report(const std::string& csv_path, const EvalReport& report);

// Human-readable block: per-SNR averages, overall AUC, parameter count and
// any missing grid cells.
std::string report_summary(const EvalReport& report);

// Mean and population standard deviation of overall AUCs across imbalance
// conditions. Needs at least two values.
struct ImbalanceSummary {
  double mean;
  double stddev;
};
ImbalanceSummary summarize_imbalance(const std::vector<double>& overall_aucs);

// ---------------------------------------------------------------------------
// Hidden-map dumps: the last LSTM layer's feature map before (H) and after
// (H') attention refinement over [frame_begin, frame_end), plus per-frame
// ground truth and predictions. Writes hidden_pre.csv, hidden_post.csv and
// frames.csv under out_dir.
// ---------------------------------------------------------------------------
void dump_hidden_maps(VadModel& model, const Tensor& raw_feats,
                      const std::vector<int>& labels, int64_t frame_begin,
                      int64_t frame_end, const std::string& out_dir);

}  // namespace attnvad
