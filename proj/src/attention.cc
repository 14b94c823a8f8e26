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

#include "attnvad/attention.h"

#include <algorithm>
#include <utility>

namespace attnvad {

namespace {

constexpr int kTaKernel = 11;
constexpr int kFaKernel = 21;
constexpr int kDaKernel = 7;

// Shared 1-d trunk used by both TA and FA: 3 -> 3 -> 5 -> 5 -> 1 channels,
// bn + relu after the first three convs.
template <typename Trunk>
Value conv1d_trunk(const Trunk& t, const Value& stack, Mode mode,
                   bool update_running) {
  Value x = relu(batchnorm(t.bn1, conv1d_same(t.conv1, stack), mode,
                           update_running));
  x = relu(batchnorm(t.bn2, conv1d_same(t.conv2, x), mode, update_running));
  x = relu(batchnorm(t.bn3, conv1d_same(t.conv3, x), mode, update_running));
  return conv1d_same(t.conv4, x);  // 1 x L
}

void require_map(const Value& h, const char* who) {
  if (h.tensor.ndim() != 2) {
    throw ShapeError(std::string(who) + ": expected a 2-d T x D map, got " +
                     h.tensor.shape_str());
  }
}

}  // namespace

AttentionKind parse_attention_kind(const std::string& name) {
  if (name == "none") return AttentionKind::kNone;
  if (name == "ta") return AttentionKind::kTa;
  if (name == "fa") return AttentionKind::kFa;
  if (name == "da1") return AttentionKind::kDa1;
  if (name == "da2") return AttentionKind::kDa2;
  throw UsageError("unknown attention kind '" + name +
                   "' (expected none|ta|fa|da1|da2)");
}

const char* to_string(AttentionKind kind) {
  switch (kind) {
    case AttentionKind::kNone:
      return "none";
    case AttentionKind::kTa:
      return "ta";
    case AttentionKind::kFa:
      return "fa";
    case AttentionKind::kDa1:
      return "da1";
    case AttentionKind::kDa2:
      return "da2";
  }
  throw Error("invalid attention kind");
}

TaParams make_ta(Rng& rng) {
  TaParams p;
  p.conv1 = make_conv1d(3, 3, kTaKernel, rng);
  p.bn1 = make_batchnorm(3);
  p.conv2 = make_conv1d(3, 5, kTaKernel, rng);
  p.bn2 = make_batchnorm(5);
  p.conv3 = make_conv1d(5, 5, kTaKernel, rng);
  p.bn3 = make_batchnorm(5);
  p.conv4 = make_conv1d(5, 1, kTaKernel, rng);
  return p;
}

FaParams make_fa(Rng& rng) {
  FaParams p;
  p.conv1 = make_conv1d(3, 3, kFaKernel, rng);
  p.bn1 = make_batchnorm(3);
  p.conv2 = make_conv1d(3, 5, kFaKernel, rng);
  p.bn2 = make_batchnorm(5);
  p.conv3 = make_conv1d(5, 5, kFaKernel, rng);
  p.bn3 = make_batchnorm(5);
  p.conv4 = make_conv1d(5, 1, kFaKernel, rng);
  return p;
}

Da1Params make_da1(Rng& rng) {
  Da1Params p;
  p.conv1 = make_conv2d(1, 1, kDaKernel, rng);
  p.bn1 = make_batchnorm(1);
  p.conv2 = make_conv2d(1, 3, kDaKernel, rng);
  p.bn2 = make_batchnorm(3);
  p.conv3 = make_conv2d(3, 1, kDaKernel, rng);
  return p;
}

AttentionParams make_attention(AttentionKind kind, Rng& rng) {
  AttentionParams p;
  p.kind = kind;
  switch (kind) {
    case AttentionKind::kNone:
      break;
    case AttentionKind::kTa:
      p.ta = make_ta(rng);
      break;
    case AttentionKind::kFa:
      p.fa = make_fa(rng);
      break;
    case AttentionKind::kDa1:
      p.da1 = make_da1(rng);
      break;
    case AttentionKind::kDa2:
      p.ta = make_ta(rng);
      p.fa = make_fa(rng);
      break;
  }
  return p;
}

namespace {

void visit_conv(const std::string& prefix, Conv1dParams& c,
                const TensorVisitor& fn) {
  fn(prefix + ".w", c.w);
  fn(prefix + ".b", c.b);
}

void visit_conv(const std::string& prefix, Conv2dParams& c,
                const TensorVisitor& fn) {
  fn(prefix + ".w", c.w);
  fn(prefix + ".b", c.b);
}

void visit_bn_learnables(const std::string& prefix, BatchNormParams& bn,
                         const TensorVisitor& fn) {
  fn(prefix + ".gamma", bn.gamma);
  fn(prefix + ".beta", bn.beta);
}

void visit_bn_buffers(const std::string& prefix, BatchNormParams& bn,
                      const TensorVisitor& fn) {
  fn(prefix + ".run_mean", bn.run_mean);
  fn(prefix + ".run_var", bn.run_var);
}

template <typename Trunk1d>
void visit_trunk_learnables(Trunk1d& p, const TensorVisitor& fn) {
  visit_conv("conv1", p.conv1, fn);
  visit_bn_learnables("bn1", p.bn1, fn);
  visit_conv("conv2", p.conv2, fn);
  visit_bn_learnables("bn2", p.bn2, fn);
  visit_conv("conv3", p.conv3, fn);
  visit_bn_learnables("bn3", p.bn3, fn);
  visit_conv("conv4", p.conv4, fn);
}

template <typename Trunk1d>
void visit_trunk_buffers(Trunk1d& p, const TensorVisitor& fn) {
  visit_bn_buffers("bn1", p.bn1, fn);
  visit_bn_buffers("bn2", p.bn2, fn);
  visit_bn_buffers("bn3", p.bn3, fn);
}

TensorVisitor prefixed(std::string prefix, const TensorVisitor& fn) {
  return [prefix = std::move(prefix), &fn](const std::string& name,
                                           Tensor& t) {
    fn(prefix + name, t);
  };
}

}  // namespace

void visit_learnables(TaParams& p, const TensorVisitor& fn) {
  visit_trunk_learnables(p, fn);
}

void visit_learnables(FaParams& p, const TensorVisitor& fn) {
  visit_trunk_learnables(p, fn);
}

void visit_learnables(Da1Params& p, const TensorVisitor& fn) {
  visit_conv("conv1", p.conv1, fn);
  visit_bn_learnables("bn1", p.bn1, fn);
  visit_conv("conv2", p.conv2, fn);
  visit_bn_learnables("bn2", p.bn2, fn);
  visit_conv("conv3", p.conv3, fn);
}

void visit_learnables(AttentionParams& p, const TensorVisitor& fn) {
  switch (p.kind) {
    case AttentionKind::kNone:
      break;
    case AttentionKind::kTa:
      visit_learnables(p.ta, prefixed("ta.", fn));
      break;
    case AttentionKind::kFa:
      visit_learnables(p.fa, prefixed("fa.", fn));
      break;
    case AttentionKind::kDa1:
      visit_learnables(p.da1, prefixed("da1.", fn));
      break;
    case AttentionKind::kDa2:
      visit_learnables(p.ta, prefixed("ta.", fn));
      visit_learnables(p.fa, prefixed("fa.", fn));
      break;
  }
}

void visit_buffers(TaParams& p, const TensorVisitor& fn) {
  visit_trunk_buffers(p, fn);
}

void visit_buffers(FaParams& p, const TensorVisitor& fn) {
  visit_trunk_buffers(p, fn);
}

void visit_buffers(Da1Params& p, const TensorVisitor& fn) {
  visit_bn_buffers("bn1", p.bn1, fn);
  visit_bn_buffers("bn2", p.bn2, fn);
}

void visit_buffers(AttentionParams& p, const TensorVisitor& fn) {
  switch (p.kind) {
    case AttentionKind::kNone:
      break;
    case AttentionKind::kTa:
      visit_buffers(p.ta, prefixed("ta.", fn));
      break;
    case AttentionKind::kFa:
      visit_buffers(p.fa, prefixed("fa.", fn));
      break;
    case AttentionKind::kDa1:
      visit_buffers(p.da1, prefixed("da1.", fn));
      break;
    case AttentionKind::kDa2:
      visit_buffers(p.ta, prefixed("ta.", fn));
      visit_buffers(p.fa, prefixed("fa.", fn));
      break;
  }
}

namespace {

template <typename Trunk1dParams, typename TapedTrunk>
TapedTrunk bind_trunk(Tape* tape, Trunk1dParams& p,
                      std::vector<Value>* leaves) {
  TapedTrunk t;
  t.conv1 = bind_layer(tape, p.conv1, leaves);
  t.bn1 = bind_layer(tape, p.bn1, leaves);
  t.conv2 = bind_layer(tape, p.conv2, leaves);
  t.bn2 = bind_layer(tape, p.bn2, leaves);
  t.conv3 = bind_layer(tape, p.conv3, leaves);
  t.bn3 = bind_layer(tape, p.bn3, leaves);
  t.conv4 = bind_layer(tape, p.conv4, leaves);
  return t;
}

}  // namespace

TapedTa bind_attention(Tape* tape, TaParams& p, std::vector<Value>* leaves) {
  return bind_trunk<TaParams, TapedTa>(tape, p, leaves);
}

TapedFa bind_attention(Tape* tape, FaParams& p, std::vector<Value>* leaves) {
  return bind_trunk<FaParams, TapedFa>(tape, p, leaves);
}

TapedDa1 bind_attention(Tape* tape, Da1Params& p, std::vector<Value>* leaves) {
  TapedDa1 t;
  t.conv1 = bind_layer(tape, p.conv1, leaves);
  t.bn1 = bind_layer(tape, p.bn1, leaves);
  t.conv2 = bind_layer(tape, p.conv2, leaves);
  t.bn2 = bind_layer(tape, p.bn2, leaves);
  t.conv3 = bind_layer(tape, p.conv3, leaves);
  return t;
}

TapedAttention bind_attention(Tape* tape, AttentionParams& p,
                              std::vector<Value>* leaves) {
  TapedAttention t;
  t.kind = p.kind;
  switch (p.kind) {
    case AttentionKind::kNone:
      break;
    case AttentionKind::kTa:
      t.ta = bind_attention(tape, p.ta, leaves);
      break;
    case AttentionKind::kFa:
      t.fa = bind_attention(tape, p.fa, leaves);
      break;
    case AttentionKind::kDa1:
      t.da1 = bind_attention(tape, p.da1, leaves);
      break;
    case AttentionKind::kDa2:
      t.ta = bind_attention(tape, p.ta, leaves);
      t.fa = bind_attention(tape, p.fa, leaves);
      break;
  }
  return t;
}

Value ta_gate(const TapedTa& p, const Value& h, Mode mode,
              bool update_running) {
  require_map(h, "ta_gate");
  Pooled pooled = pool_stats(h, PoolAxis::kFrequency);  // each T x 1
  Value stack = transpose(
      concat({pooled.max, pooled.avg, pooled.std}, /*axis=*/1));  // 3 x T
  Value out = conv1d_trunk(p, stack, mode, update_running);       // 1 x T
  return expand(transpose(out), /*axis=*/1, h.dim(1));            // T x D
}

Value fa_gate(const TapedFa& p, const Value& h, Mode mode,
              bool update_running) {
  require_map(h, "fa_gate");
  Pooled pooled = pool_stats(h, PoolAxis::kTime);  // each 1 x D
  Value stack =
      concat({pooled.max, pooled.avg, pooled.std}, /*axis=*/0);  // 3 x D
  Value out = conv1d_trunk(p, stack, mode, update_running);      // 1 x D
  return expand(out, /*axis=*/0, h.dim(0));                      // T x D
}

Value da1_gate(const TapedDa1& p, const Value& h, Mode mode,
               bool update_running) {
  require_map(h, "da1_gate");
  Value x = reshape(h, {1, h.dim(0), h.dim(1)});
  x = relu(batchnorm(p.bn1, conv2d_same(p.conv1, x), mode, update_running));
  x = relu(batchnorm(p.bn2, conv2d_same(p.conv2, x), mode, update_running));
  x = conv2d_same(p.conv3, x);  // 1 x T x D
  return reshape(x, {h.dim(0), h.dim(1)});
}

std::vector<std::pair<int64_t, int64_t>> chunk_ranges(int64_t total,
                                                      int64_t chunk) {
  if (total <= 0 || chunk <= 0) {
    throw Error("chunk_ranges: total and chunk must be positive");
  }
  std::vector<std::pair<int64_t, int64_t>> out;
  for (int64_t start = 0; start < total; start += chunk) {
    out.emplace_back(start, std::min(total, start + chunk));
  }
  return out;
}

Value fa_gate_chunked(const TapedFa& p, const Value& h, Mode mode,
                      bool update_running, int64_t chunk_len) {
  require_map(h, "fa_gate_chunked");
  auto ranges = chunk_ranges(h.dim(0), chunk_len);
  if (ranges.size() == 1) return fa_gate(p, h, mode, update_running);
  std::vector<Value> parts;
  parts.reserve(ranges.size());
  for (const auto& [start, stop] : ranges) {
    Value part = slice(h, /*axis=*/0, start, stop);
    parts.push_back(fa_gate(p, part, mode, update_running));
  }
  return concat(parts, /*axis=*/0);
}

Value apply_attention(const TapedAttention& a, const Value& h, Mode mode,
                      bool update_running, int64_t eval_chunk_len) {
  if (a.kind == AttentionKind::kNone) return h;
  require_map(h, "apply_attention");
  auto fa_branch = [&](const TapedFa& p) {
    return mode == Mode::kEval
               ? fa_gate_chunked(p, h, mode, update_running, eval_chunk_len)
               : fa_gate(p, h, mode, update_running);
  };
  Value gate;
  switch (a.kind) {
    case AttentionKind::kTa:
      gate = ta_gate(a.ta, h, mode, update_running);
      break;
    case AttentionKind::kFa:
      gate = fa_branch(a.fa);
      break;
    case AttentionKind::kDa1:
      gate = da1_gate(a.da1, h, mode, update_running);
      break;
    case AttentionKind::kDa2:
      gate = add(ta_gate(a.ta, h, mode, update_running), fa_branch(a.fa));
      break;
    case AttentionKind::kNone:
      throw Error("unreachable");
  }
  return add(h, sigmoid(gate));
}

}  // namespace attnvad
