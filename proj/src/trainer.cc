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

#include "attnvad/trainer.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "attnvad/checkpoint.h"
#include "attnvad/eval.h"

namespace attnvad {
namespace {

// Distinct sub-stream tags under the training seed.
constexpr uint64_t kStreamModelInit = 1;
constexpr uint64_t kStreamShuffle = 2;

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch())
      .count();
}

// Pooled validation AUC over full-length utterances in eval mode.
double validation_auc(VadModel& model, const std::vector<LoadedUtt>& val) {
  std::vector<double> scores;
  std::vector<int> labels;
  for (const LoadedUtt& utt : val) {
    Tensor probs = infer_probs(model, utt.feats);
    for (int64_t f = 0; f < probs.numel(); ++f) {
      scores.push_back(probs.flat(f));
      labels.push_back(utt.labels[static_cast<size_t>(f)]);
    }
  }
  return roc_auc(scores, labels);
}

}  // namespace

std::vector<LoadedUtt> load_split(const Manifest& manifest,
                                  const std::string& split) {
  std::vector<LoadedUtt> utts;
  for (const ManifestEntry& e : manifest.entries) {
    if (e.split != split) continue;
    LoadedUtt utt;
    utt.utt_id = e.utt_id;
    utt.feats = load_features(manifest, e);
    utt.labels = load_labels(manifest, e);
    if (utt.feats.dim(0) != static_cast<int64_t>(utt.labels.size())) {
      throw DataError("utterance " + e.utt_id + ": " +
                      std::to_string(utt.labels.size()) + " labels for " +
                      std::to_string(utt.feats.dim(0)) + " feature frames");
    }
    utts.push_back(std::move(utt));
  }
  if (utts.empty()) {
    throw DataError("no '" + split + "' entries in the manifest");
  }
  return utts;
}

std::vector<Chunk> make_chunks(const std::vector<LoadedUtt>& utts,
                               int bptt_t) {
  if (bptt_t < 1) throw UsageError("bptt_t must be >= 1");
  std::vector<Chunk> chunks;
  for (const LoadedUtt& utt : utts) {
    int64_t frames = utt.feats.dim(0);
    int64_t dims = utt.feats.dim(1);
    int64_t n_chunks = frames / bptt_t;
    for (int64_t c = 0; c < n_chunks; ++c) {
      Chunk chunk;
      chunk.feats = Tensor({bptt_t, dims});
      chunk.labels = Tensor({bptt_t, 1});
      double* fd = chunk.feats.mutable_data();
      double* ld = chunk.labels.mutable_data();
      for (int64_t r = 0; r < bptt_t; ++r) {
        int64_t src = c * bptt_t + r;
        for (int64_t d = 0; d < dims; ++d) *fd++ = utt.feats.at(src, d);
        ld[r] = utt.labels[static_cast<size_t>(src)];
      }
      chunks.push_back(std::move(chunk));
    }
  }
  return chunks;
}

std::vector<Chunk> make_chunks(const Manifest& manifest,
                               const std::string& split, int bptt_t) {
  return make_chunks(load_split(manifest, split), bptt_t);
}

std::vector<size_t> shuffled_indices(size_t n, uint64_t seed) {
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  for (size_t i = n; i > 1; --i) {
    size_t j = static_cast<size_t>(rng.uniform_int(static_cast<int64_t>(i)));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

void sgd_update(const std::vector<Tensor*>& params,
                const std::vector<Tensor>& grads, double lr) {
  if (params.size() != grads.size()) {
    throw ShapeError("sgd_update: " + std::to_string(params.size()) +
                     " parameters vs " + std::to_string(grads.size()) +
                     " gradients");
  }
  for (size_t k = 0; k < params.size(); ++k) {
    if (!params[k]->same_shape(grads[k])) {
      throw ShapeError("sgd_update: parameter " + std::to_string(k) +
                       " shape " + params[k]->shape_str() +
                       " vs gradient " + grads[k].shape_str());
    }
    if (!grads[k].all_finite()) {
      throw NumericError("non-finite gradient for parameter " +
                         std::to_string(k) + " of shape " +
                         grads[k].shape_str());
    }
    Tensor updated = params[k]->clone();
    double* w = updated.mutable_data();
    for (int64_t i = 0; i < updated.numel(); ++i) {
      w[i] -= lr * grads[k].flat(i);
    }
    *params[k] = std::move(updated);
  }
}

void sgd_update(VadModel& model, const std::vector<Tensor>& grads,
                double lr) {
  std::vector<Tensor*> params;
  std::vector<std::string> names;
  visit_learnables(model, [&](const std::string& name, Tensor& t) {
    params.push_back(&t);
    names.push_back(name);
  });
  if (params.size() != grads.size()) {
    throw ShapeError("sgd_update: model has " +
                     std::to_string(params.size()) + " learnables but got " +
                     std::to_string(grads.size()) + " gradients");
  }
  for (size_t k = 0; k < grads.size(); ++k) {
    if (!grads[k].all_finite()) {
      throw NumericError("non-finite gradient for '" + names[k] + "'");
    }
  }
  sgd_update(params, grads, lr);
}

void write_train_log(const std::string& path,
                     const std::vector<TrainLogRow>& rows) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot open for writing: " + path);
  f << "epoch,train_loss,val_auc,lr,seconds\n";
  char buf[160];
  for (const TrainLogRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g,%.10g,%.3f\n", r.epoch,
                  r.train_loss, r.val_auc, r.lr, r.seconds);
    f << buf;
  }
  if (!f) throw DataError("failed writing: " + path);
}

TrainResult train(const ModelConfig& mcfg, const TrainConfig& tcfg,
                  const Manifest& manifest,
                  const std::string& checkpoint_path) {
  if (!(tcfg.lr_floor > 0.0) || tcfg.lr_floor > tcfg.initial_lr) {
    throw UsageError("need 0 < lr_floor <= initial_lr");
  }
  if (tcfg.bptt_t < 1) throw UsageError("bptt_t must be >= 1");
  if (tcfg.bptt_t != mcfg.t_train) {
    throw UsageError("bptt_t (" + std::to_string(tcfg.bptt_t) +
                     ") must equal the model's t_train (" +
                     std::to_string(mcfg.t_train) + ")");
  }
  if (tcfg.epochs < 0) throw UsageError("epochs must be >= 0");
  if (tcfg.batch_size < 1) throw UsageError("batch_size must be >= 1");
  if (tcfg.patience < 1) throw UsageError("patience must be >= 1");

  std::vector<LoadedUtt> train_utts = load_split(manifest, "train");
  std::vector<LoadedUtt> val_utts = load_split(manifest, "val");

  Rng model_rng(Rng::mix(tcfg.seed, kStreamModelInit));
  VadModel model = make_model(mcfg, model_rng);
  {
    std::vector<Tensor> mats;
    for (const LoadedUtt& u : train_utts) mats.push_back(u.feats);
    model.norm = fit_norm(mats);
  }

  std::vector<Chunk> chunks = make_chunks(train_utts, tcfg.bptt_t);
  if (chunks.empty()) {
    throw DataError("no training chunks: every train utterance is shorter "
                    "than " +
                    std::to_string(tcfg.bptt_t) + " frames");
  }
  for (Chunk& c : chunks) c.feats = apply_norm(c.feats, model.norm);

  // The checkpoint always holds the best (or, before any epoch, the
  // initial) model, so an abort mid-training leaves a usable file behind.
  save_checkpoint(checkpoint_path, model);

  TrainResult result;
  result.model = model;
  result.best_val_auc = -1.0;
  double lr = tcfg.initial_lr;
  int stale_epochs = 0;

  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    double t0 = now_seconds();
    std::vector<size_t> order = shuffled_indices(
        chunks.size(),
        Rng::mix(Rng::mix(tcfg.seed, kStreamShuffle),
                 static_cast<uint64_t>(epoch)));

    double loss_sum = 0.0;
    size_t cursor = 0;
    while (cursor < order.size()) {
      size_t batch_n = std::min<size_t>(
          static_cast<size_t>(tcfg.batch_size), order.size() - cursor);
      std::vector<Tensor> grad_sum;
      for (size_t b = 0; b < batch_n; ++b) {
        const Chunk& chunk = chunks[order[cursor + b]];
        Tape tape;
        std::vector<Value> leaves;
        TapedModel taped = bind_model(&tape, model, &leaves);
        Value probs = model_forward(taped, constant(chunk.feats),
                                    Mode::kTrain, /*update_running=*/true);
        Value loss = loss_value(tcfg.loss, probs, chunk.labels);
        double loss_scalar = loss.tensor.flat(0);
        if (!std::isfinite(loss_scalar)) {
          throw NumericError(
              "training loss diverged (non-finite); last good checkpoint "
              "kept at " +
              checkpoint_path);
        }
        loss_sum += loss_scalar;
        Gradients grads = tape.backward(loss);
        if (grad_sum.empty()) {
          grad_sum.reserve(leaves.size());
          for (const Value& leaf : leaves) {
            grad_sum.push_back(grads.wrt(leaf));
          }
        } else {
          for (size_t k = 0; k < leaves.size(); ++k) {
            accumulate(grad_sum[k], grads.wrt(leaves[k]));
          }
        }
      }
      for (Tensor& g : grad_sum) {
        double* d = g.mutable_data();
        for (int64_t i = 0; i < g.numel(); ++i) {
          d[i] /= static_cast<double>(batch_n);
        }
      }
      sgd_update(model, grad_sum, lr);
      cursor += batch_n;
    }

    double val_auc = validation_auc(model, val_utts);
    TrainLogRow row;
    row.epoch = epoch + 1;
    row.train_loss = loss_sum / static_cast<double>(chunks.size());
    row.val_auc = val_auc;
    row.lr = lr;
    row.seconds = now_seconds() - t0;
    result.log.push_back(row);

    if (val_auc > result.best_val_auc) {
      result.best_val_auc = val_auc;
      result.model = model;  // tensors are replaced, never mutated in place
      save_checkpoint(checkpoint_path, model);
      stale_epochs = 0;
    } else {
      ++stale_epochs;
      if (stale_epochs >= tcfg.patience) {
        lr = std::max(lr * tcfg.lr_decay, tcfg.lr_floor);
        stale_epochs = 0;
      }
    }
  }
  return result;
}

}  // namespace attnvad
