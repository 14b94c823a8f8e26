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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"

namespace attnvad {
namespace {

// Independent oracle: Mann-Whitney pair counting with half credit on ties.
double pair_count_auc(const std::vector<double>& scores,
                      const std::vector<int>& labels) {
  double wins = 0.0;
  int64_t pairs = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j]) {
        wins += 1.0;
      } else if (scores[i] == scores[j]) {
        wins += 0.5;
      }
    }
  }
  return wins / static_cast<double>(pairs);
}

TEST_CASE("AUC spot values") {
  CHECK(roc_auc({0.0, 0.0, 1.0, 1.0}, {0, 0, 1, 1}) == 1.0);
  CHECK(roc_auc({0.7, 0.7, 0.7, 0.7}, {0, 1, 0, 1}) == 0.5);
  // Three of the four speech/non-speech pairs are ordered correctly
  // (0.35 < 0.4 is the one inversion), so the AUC is 3/4.
  CHECK(roc_auc({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}) ==
        doctest::Approx(0.75).epsilon(1e-15));
  CHECK(roc_auc({0.5, 0.5}, {0, 1}) == 0.5);  // single tie, half credit
  CHECK(roc_auc({0.9, 0.1}, {0, 1}) == 0.0);  // perfectly inverted
}

TEST_CASE("AUC rejects degenerate input") {
  CHECK_THROWS_WITH_AS(roc_auc({0.1, 0.2}, {1, 1}), doctest::Contains("speech"),
                       DataError);
  CHECK_THROWS_WITH_AS(roc_auc({0.1, 0.2}, {0, 0}),
                       doctest::Contains("non-speech"), DataError);
  CHECK_THROWS_AS(roc_auc({0.1}, {0, 1}), DataError);
  CHECK_THROWS_AS(roc_auc({0.1, std::nan("")}, {0, 1}), DataError);
  CHECK_THROWS_AS(roc_auc({0.1, 0.2}, {0, 2}), DataError);
}

TEST_CASE("trapezoidal AUC equals brute-force pair counting") {
  Rng rng(71);
  for (int trial = 0; trial < 200; ++trial) {
    int64_t n = 2 + rng.uniform_int(999);
    std::vector<double> scores(static_cast<size_t>(n));
    std::vector<int> labels(static_cast<size_t>(n));
    // Coarse score grids in some trials force plenty of ties.
    bool coarse = trial % 3 == 0;
    for (size_t i = 0; i < scores.size(); ++i) {
      scores[i] = coarse ? static_cast<double>(rng.uniform_int(5)) / 4.0
                         : rng.uniform();
      labels[i] = rng.uniform_int(2) == 0 ? 0 : 1;
    }
    labels[0] = 0;  // guarantee both classes
    labels[1] = 1;
    double fast = roc_auc(scores, labels);
    double slow = pair_count_auc(scores, labels);
    CHECK(std::abs(fast - slow) < 1e-12);
  }
}

TEST_CASE("AUC is invariant under strictly increasing transforms") {
  Rng rng(73);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> scores(50);
    std::vector<int> labels(50);
    for (size_t i = 0; i < scores.size(); ++i) {
      scores[i] = rng.uniform(-3.0, 3.0);
      labels[i] = rng.uniform_int(2) == 0 ? 0 : 1;
    }
    labels[0] = 0;
    labels[1] = 1;
    std::vector<double> warped(scores.size());
    for (size_t i = 0; i < scores.size(); ++i) {
      warped[i] = std::exp(scores[i]) + 2.0;
    }
    CHECK(roc_auc(scores, labels) == roc_auc(warped, labels));
  }
}

TEST_CASE("negating tie-free scores mirrors the AUC") {
  Rng rng(74);
  std::vector<double> scores(101);
  std::vector<int> labels(101);
  for (size_t i = 0; i < scores.size(); ++i) {
    scores[i] = rng.uniform();  // distinct with probability 1
    labels[i] = rng.uniform_int(2) == 0 ? 0 : 1;
  }
  labels[0] = 0;
  labels[1] = 1;
  std::vector<double> neg(scores.size());
  for (size_t i = 0; i < scores.size(); ++i) neg[i] = -scores[i];
  CHECK(roc_auc(scores, labels) + roc_auc(neg, labels) ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ROC curves are monotone from (0,0) to (1,1)") {
  Rng rng(75);
  std::vector<double> scores(200);
  std::vector<int> labels(200);
  for (size_t i = 0; i < scores.size(); ++i) {
    scores[i] = static_cast<double>(rng.uniform_int(20));
    labels[i] = rng.uniform_int(2) == 0 ? 0 : 1;
  }
  labels[0] = 0;
  labels[1] = 1;
  std::vector<RocPoint> curve = roc_curve(scores, labels);
  REQUIRE(curve.size() >= 2);
  CHECK(curve.front().fpr == 0.0);
  CHECK(curve.front().tpr == 0.0);
  CHECK(curve.back().fpr == 1.0);
  CHECK(curve.back().tpr == 1.0);
  for (size_t i = 1; i < curve.size(); ++i) {
    CHECK(curve[i].fpr >= curve[i - 1].fpr);
    CHECK(curve[i].tpr >= curve[i - 1].tpr);
  }
}

TEST_CASE("relative improvement measures captured headroom") {
  CHECK(relative_improvement(0.95, 0.9) == doctest::Approx(0.5));
  CHECK(relative_improvement(0.9, 0.9) == 0.0);
  CHECK(relative_improvement(0.85, 0.9) < 0.0);
  CHECK_THROWS_AS(relative_improvement(0.99, 1.0), UsageError);
}

TEST_CASE("imbalance summary: mean and population standard deviation") {
  ImbalanceSummary s = summarize_imbalance({93.0, 95.0});
  CHECK(s.mean == 94.0);
  CHECK(s.stddev == 1.0);
  ImbalanceSummary same = summarize_imbalance({0.9, 0.9, 0.9});
  CHECK(same.mean == doctest::Approx(0.9));
  CHECK(same.stddev == 0.0);
  CHECK_THROWS_AS(summarize_imbalance({0.9}), UsageError);
}

TEST_CASE("corpus evaluation pools frames per cell and averages per SNR") {
  std::string dir = "/tmp/attnvad_test_eval_corpus";
  std::filesystem::remove_all(dir);
  SynthConfig scfg;
  scfg.n_train = 1;
  scfg.n_val = 1;
  scfg.n_test = 2;
  scfg.max_seconds = 1.3;
  scfg.snr_set = {0.0, 10.0};
  scfg.noise_types = {"white", "babble"};
  Manifest m = synth_corpus(dir, scfg, 17);

  ModelConfig mcfg;
  mcfg.input_dim = 40;
  mcfg.hidden_dim = 8;
  mcfg.t_train = 50;
  Rng rng(18);
  VadModel model = make_model(mcfg, rng);

  EvalReport report = evaluate(model, m, "test");
  REQUIRE(report.cells.size() == 4);
  REQUIRE(report.per_snr.size() == 2);
  CHECK(report.missing_cells.empty());
  CHECK(report.param_count == learnable_count(model));

  // Per-SNR averages recomputed from the cells by hand.
  for (const auto& [snr, mean] : report.per_snr) {
    double acc = 0.0;
    int count = 0;
    for (const EvalCell& c : report.cells) {
      if (c.snr_db == snr) {
        acc += c.auc;
        ++count;
      }
    }
    REQUIRE(count == 2);
    CHECK(mean == doctest::Approx(acc / 2).epsilon(1e-15));
  }
  double overall =
      (report.per_snr[0].second + report.per_snr[1].second) / 2.0;
  CHECK(report.overall == doctest::Approx(overall).epsilon(1e-15));

  int64_t frames = 0;
  for (const EvalCell& c : report.cells) frames += c.n_frames;
  CHECK(report.total_frames == frames);

  // Deterministic across repeat runs.
  EvalReport again = evaluate(model, m, "test");
  CHECK(again.overall == report.overall);
  for (size_t i = 0; i < report.cells.size(); ++i) {
    CHECK(again.cells[i].auc == report.cells[i].auc);
  }

  // Dropping one cell's rows gets it reported as missing.
  Manifest partial = m;
  partial.entries.erase(
      std::remove_if(partial.entries.begin(), partial.entries.end(),
                     [](const ManifestEntry& e) {
                       return e.split == "test" && e.noise_type == "white" &&
                              e.snr_db == 10.0;
                     }),
      partial.entries.end());
  EvalReport sparse = evaluate(model, partial, "test");
  REQUIRE(sparse.missing_cells.size() == 1);
  CHECK(sparse.missing_cells[0] == "white@10dB");

  CHECK_THROWS_AS(evaluate(model, m, "bogus"), DataError);

  // CSV emission round-trip sanity.
  write_eval_report(dir + "/report.csv", report);
  std::ifstream f(dir + "/report.csv");
  std::string header;
  std::getline(f, header);
  CHECK(header == "noise,snr_db,auc,n_frames");
  int rows = 0;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == 4);
  CHECK(report_summary(report).find("overall auc") != std::string::npos);

  std::filesystem::remove_all(dir);
}

TEST_CASE("hidden-map dumps slice the last layer around a frame range") {
  ModelConfig cfg;
  cfg.input_dim = 6;
  cfg.hidden_dim = 5;
  cfg.num_layers = 2;
  cfg.t_train = 8;
  cfg.attention = AttentionKind::kDa2;
  Rng rng(81);
  VadModel model = make_model(cfg, rng);
  Tensor feats = random_uniform({20, 6}, -1.0, 1.0, rng);
  std::vector<int> labels(20, 0);
  for (size_t i = 5; i < 15; ++i) labels[i] = 1;

  std::string dir = "/tmp/attnvad_test_dump";
  std::filesystem::remove_all(dir);
  dump_hidden_maps(model, feats, labels, 4, 12, dir);

  auto read_matrix = [](const std::string& path) {
    std::ifstream f(path);
    REQUIRE(f.good());
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      std::vector<double> row;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
      rows.push_back(row);
    }
    return rows;
  };

  auto pre = read_matrix(dir + "/hidden_pre.csv");
  auto post = read_matrix(dir + "/hidden_post.csv");
  REQUIRE(pre.size() == 8);
  REQUIRE(post.size() == 8);
  for (size_t r = 0; r < pre.size(); ++r) {
    REQUIRE(pre[r].size() == 5);
    REQUIRE(post[r].size() == 5);
    for (size_t c = 0; c < pre[r].size(); ++c) {
      double delta = post[r][c] - pre[r][c];
      CHECK(delta > 0.0);  // sigmoid gate lives in (0,1)
      CHECK(delta < 1.0);
    }
  }

  std::ifstream ff(dir + "/frames.csv");
  std::string line;
  std::getline(ff, line);
  CHECK(line == "frame,label,prob");
  int rows = 0;
  while (std::getline(ff, line)) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == 8);

  // Without attention the pre and post maps coincide exactly.
  ModelConfig plain_cfg = cfg;
  plain_cfg.attention = AttentionKind::kNone;
  Rng rng2(82);
  VadModel plain = make_model(plain_cfg, rng2);
  std::string dir2 = "/tmp/attnvad_test_dump_plain";
  std::filesystem::remove_all(dir2);
  dump_hidden_maps(plain, feats, labels, 0, 20, dir2);
  auto pre2 = read_matrix(dir2 + "/hidden_pre.csv");
  auto post2 = read_matrix(dir2 + "/hidden_post.csv");
  CHECK(pre2 == post2);

  CHECK_THROWS_AS(dump_hidden_maps(model, feats, labels, 12, 25, dir),
                  UsageError);
  CHECK_THROWS_AS(dump_hidden_maps(model, feats, labels, -1, 5, dir),
                  UsageError);
  CHECK_THROWS_AS(dump_hidden_maps(model, feats, labels, 5, 5, dir),
                  UsageError);

  std::filesystem::remove_all(dir);
  std::filesystem::remove_all(dir2);
}

}  // namespace
}  // namespace attnvad
