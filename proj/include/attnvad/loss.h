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

#include "attnvad/autodiff.h"

namespace attnvad {

// Frame-level classification losses over per-frame speech probabilities.
// `probs` holds values in [0, 1] (clamped internally to [1e-7, 1 - 1e-7])
// and `labels` holds hard 0/1 targets of the same shape. With the
// true-class probability y_t = y*p + (1-y)*(1-p):
//
//   cross_entropy = mean(-log y_t)
//   focal_loss    = mean((1 - y_t)^gamma * -log y_t)
//
// The focal weight (1 - y_t)^gamma down-weights already-confident frames;
// gamma = 0 reproduces cross_entropy exactly (the weight is the constant
// 1.0, and multiplying by 1.0 is exact), so the two agree bit for bit.
Value cross_entropy(const Value& probs, const Tensor& labels);
Value focal_loss(const Value& probs, const Tensor& labels, double gamma);

constexpr double kProbClampLo = 1e-7;
constexpr double kProbClampHi = 1.0 - 1e-7;

// A selectable training loss. focal=false ignores gamma and uses plain
// cross-entropy; focal=true uses focal_loss(gamma).
struct LossSpec {
  bool focal = false;
  double gamma = 0.0;
};

Value loss_value(const LossSpec& spec, const Value& probs,
                 const Tensor& labels);

// "ce" or "fl"; anything else is a usage error.
LossSpec parse_loss_spec(const std::string& name, double gamma);
std::string to_string(const LossSpec& spec);

}  // namespace attnvad
