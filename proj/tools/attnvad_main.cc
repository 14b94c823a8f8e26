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
//
// attnvad: voice activity detection with attention-augmented LSTMs.
//
// Subcommands cover the full experiment cycle: corpus synthesis (synth),
// dataset conditioning and noise mixing (prep), feature caching
// (featurize), energy-based labeling of clean audio (label), training
// (train), corpus evaluation (eval), per-frame scoring (infer), hidden-map
// dumps (dump-attn), parameter accounting (param-count) and the gamma x
// condition x attention study grid (sweep).
//
// Exit codes: 0 success, 1 usage (bad flags, bad config keys), 2 data or
// shape problems, 3 numeric failures (divergence, non-finite values).

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "attnvad/checkpoint.h"
#include "attnvad/dataprep.h"
#include "attnvad/eval.h"
#include "attnvad/model.h"
#include "attnvad/trainer.h"
#include "attnvad/wav.h"

namespace {

using namespace attnvad;

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory '" + dir + "': " + ec.message());
}

// Echoes every effective option value of the subcommand (defaults included)
// so a run can be reproduced with `attnvad <sub> --config <out>/config.txt`.
// Keys carry the subcommand prefix ("train.epochs=20") because the config
// file is read by the top-level parser.
void write_config_echo(CLI::App* sub, const std::string& out_dir) {
  ensure_dir(out_dir);
  std::string path = out_dir + "/config.txt";
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  std::istringstream lines(
      sub->config_to_str(/*default_also=*/true, /*write_description=*/false));
  std::string line;
  while (std::getline(lines, line)) {
    if (!line.empty()) out << sub->get_name() << "." << line << "\n";
  }
  if (!out) throw DataError("failed writing '" + path + "'");
}

void check_sample_rate(const WavData& wav, const std::string& path) {
  FeatureConfig cfg;
  if (wav.sample_rate != cfg.sample_rate) {
    throw DataError("'" + path + "' is sampled at " +
                    std::to_string(wav.sample_rate) + " Hz; expected " +
                    std::to_string(cfg.sample_rate));
  }
}

// ---------------------------------------------------------------------------
// Shared flag groups.
// ---------------------------------------------------------------------------

struct ModelFlags {
  std::string attention = "none";
  int hidden = 64;
  int layers = 3;
  int input_dim = 40;
  int bptt = 50;
};

void add_model_flags(CLI::App* sub, ModelFlags* mf) {
  sub->add_option("--attention", mf->attention,
                  "Attention block: none|ta|fa|da1|da2")
      ->capture_default_str();
  sub->add_option("--hidden", mf->hidden, "LSTM units per layer")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--layers", mf->layers, "Number of stacked LSTM layers")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--input-dim", mf->input_dim, "Feature dimensions per frame")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--bptt", mf->bptt,
                  "Frames per training chunk (also the frequency-attention "
                  "window at evaluation time)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

ModelConfig to_model_config(const ModelFlags& mf) {
  ModelConfig cfg;
  cfg.input_dim = mf.input_dim;
  cfg.hidden_dim = mf.hidden;
  cfg.num_layers = mf.layers;
  cfg.attention = parse_attention_kind(mf.attention);
  cfg.t_train = mf.bptt;
  return cfg;
}

struct TrainFlags {
  double lr = 0.1;
  double lr_decay = 0.1;
  double lr_floor = 1e-5;
  int epochs = 20;
  int batch = 128;
  int patience = 1;
  std::string loss = "ce";
  double gamma = 0.0;
  uint64_t seed = 1;
};

void add_train_flags(CLI::App* sub, TrainFlags* tf) {
  sub->add_option("--epochs", tf->epochs, "Training epochs")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  sub->add_option("--lr", tf->lr, "Initial learning rate")
      ->capture_default_str();
  sub->add_option("--lr-decay", tf->lr_decay,
                  "Learning-rate multiplier applied after `patience` epochs "
                  "without a validation-AUC improvement")
      ->capture_default_str();
  sub->add_option("--lr-floor", tf->lr_floor, "Smallest learning rate")
      ->capture_default_str();
  sub->add_option("--batch", tf->batch, "Chunks per parameter update")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--patience", tf->patience,
                  "Non-improving epochs before a learning-rate decay")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--loss", tf->loss, "Loss: ce|fl")->capture_default_str();
  sub->add_option("--gamma", tf->gamma, "Focal-loss focusing exponent")
      ->capture_default_str();
  sub->add_option("--seed", tf->seed,
                  "Seed for model init and epoch shuffling")
      ->capture_default_str();
}

TrainConfig to_train_config(const TrainFlags& tf, int bptt) {
  TrainConfig cfg;
  cfg.initial_lr = tf.lr;
  cfg.lr_decay = tf.lr_decay;
  cfg.lr_floor = tf.lr_floor;
  cfg.epochs = tf.epochs;
  cfg.batch_size = tf.batch;
  cfg.bptt_t = bptt;
  cfg.loss = parse_loss_spec(tf.loss, tf.gamma);
  cfg.seed = tf.seed;
  cfg.patience = tf.patience;
  return cfg;
}

// "0.8" -> "0p8", "-5" -> "m5": keeps run directory names shell-friendly.
std::string slug(double v) {
  std::string s = fmt_double(v);
  for (char& c : s) {
    if (c == '.') c = 'p';
    if (c == '-') c = 'm';
  }
  return s;
}

// ---------------------------------------------------------------------------
// Subcommand bodies. Each returns nothing and throws on failure; main maps
// exception categories to exit codes.
// ---------------------------------------------------------------------------

struct SynthFlags {
  std::string out;
  uint64_t seed = 1;
  int n_train = 20;
  int n_val = 5;
  int n_test = 10;
  double min_sec = 1.0;
  double max_sec = 3.0;
  std::vector<double> snr_set = {-5.0, 0.0, 5.0};
  std::vector<std::string> noise_types = {"white", "pink", "babble"};
  std::string condition = "nopad";
  bool clean_only = false;
};

void run_synth(const SynthFlags& f) {
  SynthConfig cfg;
  cfg.n_train = f.n_train;
  cfg.n_val = f.n_val;
  cfg.n_test = f.n_test;
  cfg.min_seconds = f.min_sec;
  cfg.max_seconds = f.max_sec;
  cfg.snr_set = f.snr_set;
  cfg.noise_types = f.noise_types;
  cfg.condition = parse_condition(f.condition);
  cfg.clean_only = f.clean_only;
  Manifest m = synth_corpus(f.out, cfg, f.seed);
  std::cout << "wrote " << m.entries.size() << " manifest rows to " << f.out
            << "/manifest.csv\n";
}

void run_prep(const std::string& manifest_path, const std::string& out,
              uint64_t seed, const std::vector<double>& snr_set,
              const std::vector<std::string>& noise_types,
              const std::string& condition) {
  Manifest clean = read_manifest(manifest_path);
  PrepConfig cfg;
  cfg.snr_set = snr_set;
  cfg.noise_types = noise_types;
  cfg.condition = parse_condition(condition);
  Manifest noisy = prep_dataset(clean, out, cfg, seed);
  std::cout << "wrote " << noisy.entries.size() << " manifest rows to " << out
            << "/manifest.csv\n";
}

void run_featurize(const std::string& manifest_path) {
  Manifest m = read_manifest(manifest_path);
  featurize_manifest(m);
  std::cout << "cached features for " << m.entries.size() << " entries\n";
}

void run_label(const std::string& wav_path, const std::string& out_path) {
  WavData wav = read_wav(wav_path);
  check_sample_rate(wav, wav_path);
  std::vector<int> labels = energy_label(wav.samples);
  write_labels(out_path, labels);
  int64_t speech = std::count(labels.begin(), labels.end(), 1);
  std::cout << "wrote " << labels.size() << " frame labels (" << speech
            << " speech) to " << out_path << "\n";
}

void run_train(CLI::App* sub, const std::string& manifest_path,
               const std::string& out, const ModelFlags& mf,
               const TrainFlags& tf) {
  ensure_dir(out);
  Manifest manifest = read_manifest(manifest_path);
  ModelConfig mcfg = to_model_config(mf);
  TrainConfig tcfg = to_train_config(tf, mf.bptt);
  std::string ckpt_path = out + "/checkpoint.ckpt";
  TrainResult result = train(mcfg, tcfg, manifest, ckpt_path);
  write_train_log(out + "/train_log.csv", result.log);
  write_config_echo(sub, out);
  if (result.log.empty()) {
    std::cout << "no epochs run; wrote the initialized model\n";
  } else {
    std::cout << "best val auc " << fmt_double(result.best_val_auc) << "\n";
  }
  std::cout << "checkpoint " << ckpt_path << "\n";
}

void run_eval(CLI::App* sub, const std::string& manifest_path,
              const std::string& ckpt_path, const std::string& split,
              const std::string& out, double baseline) {
  VadModel model = load_checkpoint(ckpt_path);
  Manifest manifest = read_manifest(manifest_path);
  EvalReport report = evaluate(model, manifest, split);
  ensure_dir(out);
  write_eval_report(out + "/report.csv", report);
  std::string summary = report_summary(report);
  if (baseline >= 0.0) {
    summary += "relative improvement over baseline auc " +
               fmt_double(baseline) + ": " +
               fmt_double(relative_improvement(report.overall, baseline)) +
               "\n";
  }
  std::ofstream sf(out + "/summary.txt");
  if (!sf) throw DataError("cannot write '" + out + "/summary.txt'");
  sf << summary;
  write_config_echo(sub, out);
  std::cout << summary;
}

void run_infer(const std::string& ckpt_path, const std::string& wav_path,
               const std::string& out_path) {
  VadModel model = load_checkpoint(ckpt_path);
  WavData wav = read_wav(wav_path);
  check_sample_rate(wav, wav_path);
  Tensor feats = log_mel_features(wav.samples);
  Tensor probs = infer_probs(model, feats);
  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw DataError("cannot write '" + out_path + "'");
    out = &file;
  }
  for (int64_t t = 0; t < probs.shape()[0]; ++t) {
    *out << fmt_double(probs.at(t, 0)) << "\n";
  }
  if (!out_path.empty()) {
    std::cout << "wrote " << probs.shape()[0] << " frame probabilities to "
              << out_path << "\n";
  }
}

void run_dump_attn(const std::string& ckpt_path, const std::string& wav_path,
                   const std::string& labels_path, int64_t from, int64_t to,
                   const std::string& out) {
  VadModel model = load_checkpoint(ckpt_path);
  WavData wav = read_wav(wav_path);
  check_sample_rate(wav, wav_path);
  Tensor feats = log_mel_features(wav.samples);
  std::vector<int> labels = read_labels(labels_path);
  dump_hidden_maps(model, feats, labels, from, to, out);
  std::cout << "wrote hidden_pre.csv, hidden_post.csv and frames.csv to "
            << out << "\n";
}

void run_param_count(const ModelFlags& mf) {
  ModelConfig cfg = to_model_config(mf);
  Rng rng(0);
  VadModel model = make_model(cfg, rng);
  // Group learnables by their name prefix (lstm0, attn, head, ...),
  // preserving visitation order.
  std::vector<std::pair<std::string, int64_t>> groups;
  visit_learnables(model, [&](const std::string& name, Tensor& t) {
    std::string group = name.substr(0, name.find('.'));
    if (groups.empty() || groups.back().first != group) {
      groups.emplace_back(group, 0);
    }
    groups.back().second += t.numel();
  });
  for (const auto& [group, count] : groups) {
    std::cout << group << " " << count << "\n";
  }
  std::cout << "total " << learnable_count(model) << "\n";
}

struct SweepFlags {
  std::string manifest;
  std::string out;
  std::vector<double> gammas = {0.2, 0.4, 0.6, 0.8, 1.0, 2.0, 3.0};
  std::vector<std::string> conditions = {"epd", "nopad", "pad1", "pad2",
                                         "pad3"};
  std::vector<std::string> attentions = {"none"};
  std::vector<double> snr_set = {-5.0, 0.0, 5.0};
  std::vector<std::string> noise_types = {"white", "pink", "babble"};
  int jobs = 1;
};

// One row of the study grid: a (condition, attention, loss) training run
// evaluated on that condition's test set.
struct SweepRow {
  std::string condition;
  std::string attention;
  double gamma = 0.0;
  double overall_auc = 0.0;
  double best_val_auc = 0.0;
  int64_t param_count = 0;
};

void run_sweep(CLI::App* sub, const SweepFlags& f, const ModelFlags& mf,
               const TrainFlags& tf) {
  ensure_dir(f.out);
  Manifest clean = read_manifest(f.manifest);

  // The gamma = 0 run doubles as the cross-entropy baseline, so it is
  // always part of the grid.
  std::set<double> gamma_set(f.gammas.begin(), f.gammas.end());
  gamma_set.insert(0.0);
  std::vector<double> gammas(gamma_set.begin(), gamma_set.end());

  // Stage 1 (sequential): one conditioned noisy dataset per condition, all
  // from the same clean corpus and seed so test sets stay comparable.
  std::vector<Manifest> datasets;
  for (const std::string& cond : f.conditions) {
    PrepConfig pcfg;
    pcfg.snr_set = f.snr_set;
    pcfg.noise_types = f.noise_types;
    pcfg.condition = parse_condition(cond);
    Manifest noisy =
        prep_dataset(clean, f.out + "/data_" + cond, pcfg, tf.seed);
    featurize_manifest(noisy);
    datasets.push_back(std::move(noisy));
  }

  // Stage 2 (parallel): the training/evaluation grid.
  struct RunSpec {
    size_t cond_idx;
    std::string attention;
    double gamma;
    std::string dir;
  };
  std::vector<RunSpec> specs;
  for (size_t c = 0; c < f.conditions.size(); ++c) {
    for (const std::string& att : f.attentions) {
      for (double gamma : gammas) {
        std::string name =
            f.conditions[c] + "_" + att + "_g" + slug(gamma);
        specs.push_back({c, att, gamma, f.out + "/runs/" + name});
      }
    }
  }
  ensure_dir(f.out + "/runs");
  std::vector<SweepRow> rows(specs.size());
  std::vector<std::function<void()>> tasks;
  tasks.reserve(specs.size());
  for (size_t i = 0; i < specs.size(); ++i) {
    tasks.push_back([&, i] {
      const RunSpec& spec = specs[i];
      ModelConfig mcfg = to_model_config(mf);
      mcfg.attention = parse_attention_kind(spec.attention);
      TrainConfig tcfg = to_train_config(tf, mf.bptt);
      tcfg.loss = spec.gamma == 0.0 ? LossSpec{false, 0.0}
                                    : LossSpec{true, spec.gamma};
      ensure_dir(spec.dir);
      TrainResult result = train(mcfg, tcfg, datasets[spec.cond_idx],
                                 spec.dir + "/checkpoint.ckpt");
      write_train_log(spec.dir + "/train_log.csv", result.log);
      EvalReport report =
          evaluate(result.model, datasets[spec.cond_idx], "test");
      write_eval_report(spec.dir + "/report.csv", report);
      std::ofstream sf(spec.dir + "/summary.txt");
      if (!sf) throw DataError("cannot write '" + spec.dir + "/summary.txt'");
      sf << report_summary(report);
      rows[i] = SweepRow{f.conditions[spec.cond_idx], spec.attention,
                         spec.gamma,  report.overall,
                         result.best_val_auc, report.param_count};
    });
  }
  run_parallel(tasks, f.jobs);

  std::string results_path = f.out + "/results.csv";
  std::ofstream rf(results_path);
  if (!rf) throw DataError("cannot write '" + results_path + "'");
  rf << "condition,attention,loss,gamma,overall_auc,best_val_auc,"
        "param_count\n";
  for (const SweepRow& row : rows) {
    rf << row.condition << "," << row.attention << ","
       << (row.gamma == 0.0 ? "ce" : "fl") << "," << fmt_double(row.gamma)
       << "," << fmt_double(row.overall_auc) << ","
       << fmt_double(row.best_val_auc) << "," << row.param_count << "\n";
  }
  if (!rf) throw DataError("failed writing '" + results_path + "'");
  rf.close();

  // Cross-condition digest: mean / population-std of the overall AUC per
  // (attention, loss) pair, mirroring how imbalance robustness is compared.
  std::string digest;
  if (f.conditions.size() >= 2) {
    for (const std::string& att : f.attentions) {
      for (double gamma : gammas) {
        std::vector<double> aucs;
        for (const SweepRow& row : rows) {
          if (row.attention == att && row.gamma == gamma) {
            aucs.push_back(row.overall_auc);
          }
        }
        ImbalanceSummary s = summarize_imbalance(aucs);
        digest += "attention=" + att + " loss=" +
                  (gamma == 0.0 ? std::string("ce")
                                : "fl(gamma=" + fmt_double(gamma) + ")") +
                  ": mean auc " + fmt_double(s.mean) + ", std " +
                  fmt_double(s.stddev) + " across " +
                  std::to_string(aucs.size()) + " conditions\n";
      }
    }
    std::ofstream df(f.out + "/summary.txt");
    if (!df) throw DataError("cannot write '" + f.out + "/summary.txt'");
    df << digest;
  }
  write_config_echo(sub, f.out);
  std::cout << "wrote " << rows.size() << " sweep rows to " << results_path
            << "\n"
            << digest;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Frame-level voice activity detection with "
               "attention-augmented LSTMs"};
  app.require_subcommand(1);
  // The config file is parsed by the top-level app, so its keys carry the
  // subcommand name: train.epochs=20. `config.txt` echoed into every run
  // directory uses exactly this form. Unknown keys are rejected.
  app.set_config("--config", "",
                 "Read options from a key=value file (keys are "
                 "subcommand-prefixed, e.g. train.epochs); command-line "
                 "flags override it");
  app.allow_config_extras(false);

  auto configure = [](CLI::App* sub) {
    // Lets a trailing --config (a top-level option) appear after the
    // subcommand name.
    sub->fallthrough();
    return sub;
  };

  // --- synth -----------------------------------------------------------
  auto synth_flags = std::make_shared<SynthFlags>();
  {
    CLI::App* sub = configure(app.add_subcommand(
        "synth", "Generate a synthetic labeled corpus"));
    sub->add_option("--out", synth_flags->out, "Corpus output directory")
        ->required();
    sub->add_option("--seed", synth_flags->seed, "Master corpus seed")
        ->capture_default_str();
    sub->add_option("--train", synth_flags->n_train, "Training utterances")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    sub->add_option("--val", synth_flags->n_val, "Validation utterances")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    sub->add_option("--test", synth_flags->n_test, "Test utterances")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    sub->add_option("--min-sec", synth_flags->min_sec,
                    "Shortest utterance in seconds")
        ->capture_default_str();
    sub->add_option("--max-sec", synth_flags->max_sec,
                    "Longest utterance in seconds")
        ->capture_default_str();
    sub->add_option("--snr-set", synth_flags->snr_set,
                    "SNRs in dB for noise mixing")
        ->delimiter(',')
        ->capture_default_str();
    sub->add_option("--noise-types", synth_flags->noise_types,
                    "Noise generators: white|pink|babble")
        ->delimiter(',')
        ->capture_default_str();
    sub->add_option("--condition", synth_flags->condition,
                    "Imbalance condition for train/val: "
                    "epd|nopad|pad1|pad2|pad3")
        ->capture_default_str();
    sub->add_flag("--clean-only", synth_flags->clean_only,
                  "Skip conditioning and noise mixing; emit clean audio "
                  "suitable for `prep`");
    sub->callback([synth_flags] { run_synth(*synth_flags); });
  }

  // --- prep ------------------------------------------------------------
  auto prep_manifest = std::make_shared<std::string>();
  auto prep_out = std::make_shared<std::string>();
  auto prep_seed = std::make_shared<uint64_t>(1);
  auto prep_snrs = std::make_shared<std::vector<double>>(
      std::vector<double>{-5.0, 0.0, 5.0});
  auto prep_noises = std::make_shared<std::vector<std::string>>(
      std::vector<std::string>{"white", "pink", "babble"});
  auto prep_condition = std::make_shared<std::string>("nopad");
  {
    CLI::App* sub = configure(app.add_subcommand(
        "prep", "Condition a clean corpus and mix in noise"));
    sub->add_option("--manifest", *prep_manifest, "Clean corpus manifest")
        ->required();
    sub->add_option("--out", *prep_out, "Output dataset directory")
        ->required();
    sub->add_option("--seed", *prep_seed, "Mixing seed")
        ->capture_default_str();
    sub->add_option("--snr-set", *prep_snrs, "SNRs in dB")
        ->delimiter(',')
        ->capture_default_str();
    sub->add_option("--noise-types", *prep_noises,
                    "Noise generators: white|pink|babble")
        ->delimiter(',')
        ->capture_default_str();
    sub->add_option("--condition", *prep_condition,
                    "Imbalance condition for train/val: "
                    "epd|nopad|pad1|pad2|pad3")
        ->capture_default_str();
    sub->callback([=] {
      run_prep(*prep_manifest, *prep_out, *prep_seed, *prep_snrs,
               *prep_noises, *prep_condition);
    });
  }

  // --- featurize ---------------------------------------------------------
  auto feat_manifest = std::make_shared<std::string>();
  {
    CLI::App* sub = configure(app.add_subcommand(
        "featurize", "Cache log-mel features next to every WAV"));
    sub->add_option("--manifest", *feat_manifest, "Dataset manifest")
        ->required();
    sub->callback([=] { run_featurize(*feat_manifest); });
  }

  // --- label -------------------------------------------------------------
  auto label_wav = std::make_shared<std::string>();
  auto label_out = std::make_shared<std::string>();
  {
    CLI::App* sub = configure(app.add_subcommand(
        "label", "Energy-label a clean WAV on the 10 ms frame grid"));
    sub->add_option("--wav", *label_wav, "Input WAV (16 kHz mono)")
        ->required();
    sub->add_option("--out", *label_out, "Output label file")->required();
    sub->callback([=] { run_label(*label_wav, *label_out); });
  }

  // --- train -------------------------------------------------------------
  auto train_manifest = std::make_shared<std::string>();
  auto train_out = std::make_shared<std::string>();
  auto train_mf = std::make_shared<ModelFlags>();
  auto train_tf = std::make_shared<TrainFlags>();
  {
    CLI::App* sub =
        configure(app.add_subcommand("train", "Train a model on a dataset"));
    sub->add_option("--manifest", *train_manifest, "Dataset manifest")
        ->required();
    sub->add_option("--out", *train_out,
                    "Run directory (checkpoint.ckpt, train_log.csv, "
                    "config.txt)")
        ->required();
    add_model_flags(sub, train_mf.get());
    add_train_flags(sub, train_tf.get());
    sub->callback([=] {
      run_train(sub, *train_manifest, *train_out, *train_mf, *train_tf);
    });
  }

  // --- eval --------------------------------------------------------------
  auto eval_manifest = std::make_shared<std::string>();
  auto eval_ckpt = std::make_shared<std::string>();
  auto eval_split = std::make_shared<std::string>("test");
  auto eval_out = std::make_shared<std::string>();
  auto eval_baseline = std::make_shared<double>(-1.0);
  {
    CLI::App* sub = configure(app.add_subcommand(
        "eval", "Evaluate a checkpoint over the noise x SNR grid"));
    sub->add_option("--manifest", *eval_manifest, "Dataset manifest")
        ->required();
    sub->add_option("--checkpoint", *eval_ckpt, "Model checkpoint")
        ->required();
    sub->add_option("--split", *eval_split, "Manifest split to score")
        ->capture_default_str();
    sub->add_option("--out", *eval_out,
                    "Report directory (report.csv, summary.txt)")
        ->required();
    sub->add_option("--baseline", *eval_baseline,
                    "Baseline AUC; adds a relative-improvement line");
    sub->callback([=] {
      run_eval(sub, *eval_manifest, *eval_ckpt, *eval_split, *eval_out,
               *eval_baseline);
    });
  }

  // --- infer -------------------------------------------------------------
  auto infer_ckpt = std::make_shared<std::string>();
  auto infer_wav = std::make_shared<std::string>();
  auto infer_out = std::make_shared<std::string>();
  {
    CLI::App* sub = configure(app.add_subcommand(
        "infer", "Print per-frame speech probabilities for a WAV"));
    sub->add_option("--checkpoint", *infer_ckpt, "Model checkpoint")
        ->required();
    sub->add_option("--wav", *infer_wav, "Input WAV (16 kHz mono)")
        ->required();
    sub->add_option("--out", *infer_out,
                    "Output file (default: standard output)");
    sub->callback([=] { run_infer(*infer_ckpt, *infer_wav, *infer_out); });
  }

  // --- dump-attn -----------------------------------------------------------
  auto dump_ckpt = std::make_shared<std::string>();
  auto dump_wav = std::make_shared<std::string>();
  auto dump_labels = std::make_shared<std::string>();
  auto dump_from = std::make_shared<int64_t>(0);
  auto dump_to = std::make_shared<int64_t>(20);
  auto dump_out = std::make_shared<std::string>();
  {
    CLI::App* sub = configure(app.add_subcommand(
        "dump-attn",
        "Dump the last layer's hidden maps before/after attention"));
    sub->add_option("--checkpoint", *dump_ckpt, "Model checkpoint")
        ->required();
    sub->add_option("--wav", *dump_wav, "Input WAV (16 kHz mono)")
        ->required();
    sub->add_option("--labels", *dump_labels, "Frame label file")->required();
    sub->add_option("--from", *dump_from, "First frame (inclusive)")
        ->capture_default_str();
    sub->add_option("--to", *dump_to, "Last frame (exclusive)")
        ->capture_default_str();
    sub->add_option("--out", *dump_out, "Output directory")->required();
    sub->callback([=] {
      run_dump_attn(*dump_ckpt, *dump_wav, *dump_labels, *dump_from,
                    *dump_to, *dump_out);
    });
  }

  // --- param-count -----------------------------------------------------
  auto pc_mf = std::make_shared<ModelFlags>();
  {
    CLI::App* sub = configure(app.add_subcommand(
        "param-count", "Print learnable parameter counts per block"));
    add_model_flags(sub, pc_mf.get());
    sub->callback([=] { run_param_count(*pc_mf); });
  }

  // --- sweep -------------------------------------------------------------
  auto sweep_flags = std::make_shared<SweepFlags>();
  auto sweep_mf = std::make_shared<ModelFlags>();
  auto sweep_tf = std::make_shared<TrainFlags>();
  {
    CLI::App* sub = configure(app.add_subcommand(
        "sweep",
        "Run the loss x condition x attention study grid from one clean "
        "corpus"));
    sub->add_option("--manifest", sweep_flags->manifest,
                    "Clean corpus manifest (from synth --clean-only)")
        ->required();
    sub->add_option("--out", sweep_flags->out, "Sweep output directory")
        ->required();
    sub->add_option("--gammas", sweep_flags->gammas,
                    "Focal-loss gammas; 0 (cross-entropy) is always included")
        ->delimiter(',')
        ->capture_default_str();
    sub->add_option("--conditions", sweep_flags->conditions,
                    "Imbalance conditions to prepare and train on")
        ->delimiter(',')
        ->capture_default_str();
    sub->add_option("--attentions", sweep_flags->attentions,
                    "Attention blocks to train")
        ->delimiter(',')
        ->capture_default_str();
    sub->add_option("--snr-set", sweep_flags->snr_set, "SNRs in dB")
        ->delimiter(',')
        ->capture_default_str();
    sub->add_option("--noise-types", sweep_flags->noise_types,
                    "Noise generators: white|pink|babble")
        ->delimiter(',')
        ->capture_default_str();
    sub->add_option("--jobs", sweep_flags->jobs,
                    "Concurrent training runs")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    add_model_flags(sub, sweep_mf.get());
    add_train_flags(sub, sweep_tf.get());
    // --attention/--loss/--gamma single-run flags are superseded by the
    // grid axes here; hide them so the echoed config stays truthful.
    sub->get_option("--attention")->group("");
    sub->get_option("--loss")->group("");
    sub->get_option("--gamma")->group("");
    sub->callback(
        [=] { run_sweep(sub, *sweep_flags, *sweep_mf, *sweep_tf); });
  }

  try {
    app.parse(argc, argv);
    return 0;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
