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

#include "attnvad/dataprep.h"
#include "attnvad/loss.h"
#include "attnvad/model.h"

namespace attnvad {

// Plain SGD over fixed-length truncated-BPTT chunks with validation-driven
// learning-rate decay and best-checkpoint selection.
struct TrainConfig {
  double initial_lr = 0.1;
  double lr_decay = 0.1;
  double lr_floor = 1e-5;
  int epochs = 20;
  int batch_size = 128;  // chunks per parameter update
  int bptt_t = 50;       // frames per chunk; must equal ModelConfig::t_train
  LossSpec loss;
  uint64_t seed = 1;
  int patience = 1;  // non-improving epochs before an lr decay
};

// One utterance's full-length features and frame labels, loaded and
// alignment-checked.
struct LoadedUtt {
  std::string utt_id;
  Tensor feats;  // {T, input_dim}, unnormalized
  std::vector<int> labels;
};

std::vector<LoadedUtt> load_split(const Manifest& manifest,
                                  const std::string& split);

// A fixed-length training chunk. Labels are {T, 1} to match the model's
// per-frame output.
struct Chunk {
  Tensor feats;   // {bptt_t, input_dim}
  Tensor labels;  // {bptt_t, 1}
};

// Non-overlapping bptt_t-frame chunks per utterance; a final fragment
// shorter than bptt_t is dropped.
std::vector<Chunk> make_chunks(const std::vector<LoadedUtt>& utts,
                               int bptt_t);
std::vector<Chunk> make_chunks(const Manifest& manifest,
                               const std::string& split, int bptt_t);

// Fisher-Yates permutation of [0, n) drawn from Rng(seed).
std::vector<size_t> shuffled_indices(size_t n, uint64_t seed);

// w <- w - lr * g for every paired tensor. Non-finite gradients abort with
// a NumericError naming the offending tensor.
void sgd_update(const std::vector<Tensor*>& params,
                const std::vector<Tensor>& grads, double lr);
void sgd_update(VadModel& model, const std::vector<Tensor>& grads, double lr);

struct TrainLogRow {
  int epoch;          // 1-based
  double train_loss;  // mean chunk loss over the epoch
  double val_auc;
  double lr;      // rate used during this epoch
  double seconds;  // wall time; excluded from determinism guarantees
};

// CSV: epoch,train_loss,val_auc,lr,seconds.
void write_train_log(const std::string& path,
                     const std::vector<TrainLogRow>& rows);

struct TrainResult {
  VadModel model;  // best validation-AUC parameters
  std::vector<TrainLogRow> log;
  double best_val_auc = 0.0;
};

// Fits feature normalization on the train split, runs `epochs` epochs of
// shuffled fixed-length chunks (zero initial LSTM state per chunk), scores
// the val split after each epoch, decays the learning rate by lr_decay
// (never below lr_floor) after `patience` epochs without an AUC
// improvement, and keeps the checkpoint file at checkpoint_path updated
// with the best model seen so far. Fully deterministic given the seed.
TrainResult train(const ModelConfig& mcfg, const TrainConfig& tcfg,
                  const Manifest& manifest,
                  const std::string& checkpoint_path);

}  // namespace attnvad
