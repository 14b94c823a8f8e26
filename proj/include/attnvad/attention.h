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

#include <functional>
#include <string>

#include "attnvad/layers.h"

namespace attnvad {

// Residual sigmoid-gated attention over an LSTM hidden map H (T x D):
//   kTa   time attention: pools H across hidden units into per-step
//         (max, avg, std) rows, runs a 1-d conv trunk along time, and gates
//         every hidden unit of a step identically.
//   kFa   frequency attention: pools H across steps into per-unit statistics,
//         runs a 1-d conv trunk along the hidden axis, and gates every step
//         of a hidden unit identically.
//   kDa1  2-d attention: a small conv2d trunk over the full T x D map.
//   kDa2  combined: the TA and FA trunk outputs are summed before the
//         sigmoid.
// All kinds produce H' = H + sigmoid(gate).
enum class AttentionKind { kNone, kTa, kFa, kDa1, kDa2 };

AttentionKind parse_attention_kind(const std::string& name);
const char* to_string(AttentionKind kind);

// Trunk layouts. Conv layers 1..3 are each followed by batchnorm + relu; the
// final conv is linear.
struct TaParams {  // kernels of width 11 along the time axis
  Conv1dParams conv1, conv2, conv3, conv4;  // channels 3 -> 3 -> 5 -> 5 -> 1
  BatchNormParams bn1, bn2, bn3;
};

struct FaParams {  // kernels of width 21 along the hidden axis
  Conv1dParams conv1, conv2, conv3, conv4;  // channels 3 -> 3 -> 5 -> 5 -> 1
  BatchNormParams bn1, bn2, bn3;
};

struct Da1Params {  // 7x7 kernels over the T x D map; convs 1..2 get bn+relu
  Conv2dParams conv1, conv2, conv3;  // channels 1 -> 1 -> 3 -> 1
  BatchNormParams bn1, bn2;
};

struct AttentionParams {
  AttentionKind kind = AttentionKind::kNone;
  TaParams ta;    // used by kTa and kDa2
  FaParams fa;    // used by kFa and kDa2
  Da1Params da1;  // used by kDa1
};

TaParams make_ta(Rng& rng);
FaParams make_fa(Rng& rng);
Da1Params make_da1(Rng& rng);
AttentionParams make_attention(AttentionKind kind, Rng& rng);

// Named traversal of the tensors in a parameter set, in a fixed order that
// binding, checkpointing, and updates all share. Learnables are weights,
// biases, and batchnorm gamma/beta; buffers are the batchnorm running stats.
using TensorVisitor = std::function<void(const std::string&, Tensor&)>;
void visit_learnables(TaParams& p, const TensorVisitor& fn);
void visit_learnables(FaParams& p, const TensorVisitor& fn);
void visit_learnables(Da1Params& p, const TensorVisitor& fn);
void visit_learnables(AttentionParams& p, const TensorVisitor& fn);
void visit_buffers(TaParams& p, const TensorVisitor& fn);
void visit_buffers(FaParams& p, const TensorVisitor& fn);
void visit_buffers(Da1Params& p, const TensorVisitor& fn);
void visit_buffers(AttentionParams& p, const TensorVisitor& fn);

struct TapedTa {
  TapedConv1d conv1, conv2, conv3, conv4;
  TapedBatchNorm bn1, bn2, bn3;
};

struct TapedFa {
  TapedConv1d conv1, conv2, conv3, conv4;
  TapedBatchNorm bn1, bn2, bn3;
};

struct TapedDa1 {
  TapedConv2d conv1, conv2, conv3;
  TapedBatchNorm bn1, bn2;
};

struct TapedAttention {
  AttentionKind kind = AttentionKind::kNone;
  TapedTa ta;
  TapedFa fa;
  TapedDa1 da1;
};

// Binds in the same order as visit_learnables. Only the branches the kind
// uses are bound.
TapedTa bind_attention(Tape* tape, TaParams& p, std::vector<Value>* leaves);
TapedFa bind_attention(Tape* tape, FaParams& p, std::vector<Value>* leaves);
TapedDa1 bind_attention(Tape* tape, Da1Params& p, std::vector<Value>* leaves);
TapedAttention bind_attention(Tape* tape, AttentionParams& p,
                              std::vector<Value>* leaves);

// Pre-sigmoid gates, each broadcast to the full T x D shape. TA gates are
// constant across the hidden axis, FA gates constant across the time axis.
Value ta_gate(const TapedTa& p, const Value& h, Mode mode,
              bool update_running);
Value fa_gate(const TapedFa& p, const Value& h, Mode mode,
              bool update_running);
Value da1_gate(const TapedDa1& p, const Value& h, Mode mode,
               bool update_running);

// FA gate computed independently on consecutive row chunks of length
// chunk_len (the final chunk may be shorter) and re-joined. With a single
// chunk this is exactly fa_gate.
Value fa_gate_chunked(const TapedFa& p, const Value& h, Mode mode,
                      bool update_running, int64_t chunk_len);

// [start, stop) row ranges covering `total` rows in chunks of `chunk`.
std::vector<std::pair<int64_t, int64_t>> chunk_ranges(int64_t total,
                                                      int64_t chunk);

// H' = H + sigmoid(gate). kNone returns h unchanged. In eval mode,
// FA-containing kinds compute their FA branch on eval_chunk_len-sized row
// chunks so arbitrarily long inputs see the trunk at its training width.
Value apply_attention(const TapedAttention& a, const Value& h, Mode mode,
                      bool update_running, int64_t eval_chunk_len);

}  // namespace attnvad
