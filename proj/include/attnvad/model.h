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

#include "attnvad/attention.h"
#include "attnvad/features.h"

namespace attnvad {

struct ModelConfig {
  int input_dim = 40;   // feature dimensions per frame
  int hidden_dim = 64;  // LSTM units per layer
  int num_layers = 3;
  AttentionKind attention = AttentionKind::kNone;
  // Training chunk length in frames. Evaluation of longer inputs feeds the
  // frequency-attention branch in chunks of this length.
  int t_train = 50;
};

// A stack of LSTM layers with one shared attention block applied to every
// layer's hidden map, followed by a per-frame sigmoid scoring head. Feature
// normalization statistics travel with the model.
struct VadModel {
  ModelConfig config;
  std::vector<LstmLayerParams> lstm;  // config.num_layers entries
  AttentionParams attention;          // single parameter set, reused per layer
  DenseParams head;
  NormStats norm;  // per-dimension feature mean/std
};

// Fresh model; norm starts as identity (mean 0, std 1).
VadModel make_model(const ModelConfig& cfg, Rng& rng);

// Named traversal in a fixed order shared by binding, checkpoints, and
// updates. Buffers are batchnorm running stats plus the norm stats.
void visit_learnables(VadModel& m, const TensorVisitor& fn);
void visit_buffers(VadModel& m, const TensorVisitor& fn);
int64_t learnable_count(VadModel& m);

struct TapedModel {
  const ModelConfig* config = nullptr;
  std::vector<TapedLstmLayer> lstm;
  TapedAttention attention;
  TapedDense head;
};

// Binds every learnable in visit_learnables order.
TapedModel bind_model(Tape* tape, VadModel& m, std::vector<Value>* leaves);

// Normalized features (T x input_dim) -> speech probabilities (T x 1).
Value model_forward(const TapedModel& m, const Value& feats, Mode mode,
                    bool update_running);

// Untraced eval-mode convenience: applies the stored feature normalization,
// then the model. Accepts any number of frames.
Tensor infer_probs(VadModel& m, const Tensor& raw_feats);

// Like infer_probs, but also returns the last LSTM layer's hidden map
// before and after attention refinement (identical when attention is off).
struct ForwardMaps {
  Tensor hidden_pre;   // {T, hidden_dim}
  Tensor hidden_post;  // {T, hidden_dim}
  Tensor probs;        // {T, 1}
};
ForwardMaps forward_maps(VadModel& m, const Tensor& raw_feats);

}  // namespace attnvad
