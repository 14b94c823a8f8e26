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

#include "attnvad/eval.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace attnvad {
namespace {

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

void check_scores(const std::vector<double>& scores,
                  const std::vector<int>& labels) {
  if (scores.size() != labels.size()) {
    throw DataError("roc: " + std::to_string(scores.size()) + " scores vs " +
                    std::to_string(labels.size()) + " labels");
  }
  int64_t pos = 0, neg = 0;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (!std::isfinite(scores[i])) throw DataError("roc: non-finite score");
    if (labels[i] == 1) {
      ++pos;
    } else if (labels[i] == 0) {
      ++neg;
    } else {
      throw DataError("roc: labels must be 0 or 1");
    }
  }
  if (pos == 0) throw DataError("roc undefined: all labels are non-speech (0)");
  if (neg == 0) throw DataError("roc undefined: all labels are speech (1)");
}

void write_matrix_csv(const std::string& path, const Tensor& m) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot open for writing: " + path);
  for (int64_t r = 0; r < m.dim(0); ++r) {
    for (int64_t c = 0; c < m.dim(1); ++c) {
      if (c) f << ',';
      f << format_number(m.at(r, c));
    }
    f << '\n';
  }
  if (!f) throw DataError("failed writing: " + path);
}

}  // namespace

std::vector<RocPoint> roc_curve(const std::vector<double>& scores,
                                const std::vector<int>& labels) {
  check_scores(scores, labels);
  double pos = 0, neg = 0;
  for (int v : labels) (v ? pos : neg) += 1.0;

  // Descending by score; a whole tie group enters the positive side of the
  // threshold at once.
  std::vector<size_t> order(scores.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&scores](size_t a, size_t b) {
    return scores[a] > scores[b];
  });

  std::vector<RocPoint> curve;
  curve.push_back(RocPoint{0.0, 0.0});
  double tp = 0, fp = 0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]] == 1) {
        tp += 1.0;
      } else {
        fp += 1.0;
      }
      ++j;
    }
    curve.push_back(RocPoint{fp / neg, tp / pos});
    i = j;
  }
  return curve;
}

double roc_auc(const std::vector<double>& scores,
               const std::vector<int>& labels) {
  std::vector<RocPoint> curve = roc_curve(scores, labels);
  double area = 0.0;
  for (size_t i = 1; i < curve.size(); ++i) {
    area += (curve[i].fpr - curve[i - 1].fpr) *
            (curve[i].tpr + curve[i - 1].tpr) * 0.5;
  }
  return area;
}

double relative_improvement(double auc, double baseline) {
  if (baseline >= 1.0) throw UsageError("baseline AUC must be < 1");
  return (auc - baseline) / (1.0 - baseline);
}

EvalReport evaluate(VadModel& model, const Manifest& manifest,
                    const std::string& split) {
  struct CellAcc {
    std::vector<double> scores;
    std::vector<int> labels;
  };
  std::map<std::pair<std::string, double>, CellAcc> cells;
  std::set<std::string> noises;
  std::set<double> snrs;

  int64_t n_entries = 0;
  for (const ManifestEntry& e : manifest.entries) {
    if (e.split != split) continue;
    ++n_entries;
    Tensor feats = load_features(manifest, e);
    std::vector<int> labels = load_labels(manifest, e);
    if (feats.dim(0) != static_cast<int64_t>(labels.size())) {
      throw DataError("utterance " + e.utt_id + ": " +
                      std::to_string(labels.size()) + " labels for " +
                      std::to_string(feats.dim(0)) + " feature frames");
    }
    Tensor probs = infer_probs(model, feats);
    CellAcc& acc = cells[{e.noise_type, e.snr_db}];
    for (int64_t f = 0; f < probs.numel(); ++f) {
      acc.scores.push_back(probs.flat(f));
      acc.labels.push_back(labels[static_cast<size_t>(f)]);
    }
    noises.insert(e.noise_type);
    snrs.insert(e.snr_db);
  }
  if (n_entries == 0) {
    throw DataError("no '" + split + "' entries in the manifest");
  }

  EvalReport report;
  report.param_count = learnable_count(model);
  std::map<double, std::vector<double>> per_snr_aucs;
  for (auto& [key, acc] : cells) {
    EvalCell cell;
    cell.noise = key.first;
    cell.snr_db = key.second;
    cell.auc = roc_auc(acc.scores, acc.labels);
    cell.n_frames = static_cast<int64_t>(acc.scores.size());
    report.total_frames += cell.n_frames;
    per_snr_aucs[cell.snr_db].push_back(cell.auc);
    report.cells.push_back(cell);
  }

  for (const std::string& noise : noises) {
    for (double snr : snrs) {
      if (!cells.count({noise, snr})) {
        report.missing_cells.push_back(noise + "@" + format_number(snr) +
                                       "dB");
      }
    }
  }

  double overall = 0.0;
  for (auto& [snr, aucs] : per_snr_aucs) {
    double mean = 0.0;
    for (double a : aucs) mean += a;
    mean /= static_cast<double>(aucs.size());
    report.per_snr.emplace_back(snr, mean);
    overall += mean;
  }
  report.overall = overall / static_cast<double>(report.per_snr.size());
  return report;
}

void write_eval_report(const std::string& csv_path, const EvalReport& report) {
  std::ofstream f(csv_path, std::ios::trunc);
  if (!f) throw DataError("cannot open for writing: " + csv_path);
  f << "noise,snr_db,auc,n_frames\n";
  for (const EvalCell& c : report.cells) {
    f << c.noise << ',' << format_number(c.snr_db) << ','
      << format_number(c.auc) << ',' << c.n_frames << '\n';
  }
  if (!f) throw DataError("failed writing: " + csv_path);
}

std::string report_summary(const EvalReport& report) {
  std::ostringstream out;
  out << "frames scored: " << report.total_frames << "\n";
  out << "model parameters: " << report.param_count << "\n";
  for (const auto& [snr, auc] : report.per_snr) {
    out << "snr " << format_number(snr) << " dB: mean auc "
        << format_number(auc) << "\n";
  }
  out << "overall auc (mean of per-SNR means): "
      << format_number(report.overall) << "\n";
  if (!report.missing_cells.empty()) {
    out << "missing cells:";
    for (const std::string& c : report.missing_cells) out << ' ' << c;
    out << "\n";
  }
  return out.str();
}

ImbalanceSummary summarize_imbalance(const std::vector<double>& overall_aucs) {
  if (overall_aucs.size() < 2) {
    throw UsageError("imbalance summary needs at least two condition AUCs");
  }
  double mean = 0.0;
  for (double a : overall_aucs) mean += a;
  mean /= static_cast<double>(overall_aucs.size());
  double var = 0.0;
  for (double a : overall_aucs) var += (a - mean) * (a - mean);
  var /= static_cast<double>(overall_aucs.size());
  return ImbalanceSummary{mean, std::sqrt(var)};
}

void dump_hidden_maps(VadModel& model, const Tensor& raw_feats,
                      const std::vector<int>& labels, int64_t frame_begin,
                      int64_t frame_end, const std::string& out_dir) {
  int64_t frames = raw_feats.dim(0);
  if (static_cast<int64_t>(labels.size()) != frames) {
    throw DataError("dump_hidden_maps: " + std::to_string(labels.size()) +
                    " labels for " + std::to_string(frames) + " frames");
  }
  if (frame_begin < 0 || frame_end <= frame_begin || frame_end > frames) {
    throw UsageError("frame range [" + std::to_string(frame_begin) + ", " +
                     std::to_string(frame_end) + ") outside utterance of " +
                     std::to_string(frames) + " frames");
  }

  ForwardMaps maps = forward_maps(model, raw_feats);
  auto slice_rows = [&](const Tensor& t) {
    Tensor out({frame_end - frame_begin, t.dim(1)});
    double* dst = out.mutable_data();
    for (int64_t r = frame_begin; r < frame_end; ++r) {
      for (int64_t c = 0; c < t.dim(1); ++c) *dst++ = t.at(r, c);
    }
    return out;
  };

  std::filesystem::create_directories(out_dir);
  write_matrix_csv(out_dir + "/hidden_pre.csv", slice_rows(maps.hidden_pre));
  write_matrix_csv(out_dir + "/hidden_post.csv",
                   slice_rows(maps.hidden_post));

  std::ofstream f(out_dir + "/frames.csv", std::ios::trunc);
  if (!f) throw DataError("cannot open for writing: " + out_dir +
                          "/frames.csv");
  f << "frame,label,prob\n";
  for (int64_t r = frame_begin; r < frame_end; ++r) {
    f << r << ',' << labels[static_cast<size_t>(r)] << ','
      << format_number(maps.probs.at(r, 0)) << '\n';
  }
  if (!f) throw DataError("failed writing: " + out_dir + "/frames.csv");
}

}  // namespace attnvad
