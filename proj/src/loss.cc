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

#include "attnvad/loss.h"

#include <cstdio>
#include <string>

namespace attnvad {

namespace {

// Validates inputs and returns the clamped true-class probability
// y_t = y*p + (1-y)*(1-p), elementwise over the frames.
Value true_class_prob(const Value& probs, const Tensor& labels) {
  if (!probs.tensor.same_shape(labels)) {
    throw ShapeError("loss: probs " + probs.tensor.shape_str() +
                     " and labels " + labels.shape_str() + " differ");
  }
  for (int64_t i = 0; i < labels.numel(); ++i) {
    double y = labels.flat(i);
    if (y != 0.0 && y != 1.0) {
      throw DataError("loss: label at index " + std::to_string(i) + " is " +
                      std::to_string(y) + ", expected 0 or 1");
    }
  }
  Value p = clamp(probs, kProbClampLo, kProbClampHi);
  Value y = constant(labels);
  return add(mul(y, p), mul(rsub_scalar(1.0, y), rsub_scalar(1.0, p)));
}

}  // namespace

Value cross_entropy(const Value& probs, const Tensor& labels) {
  Value y_t = true_class_prob(probs, labels);
  return mean_all(scale(log(y_t), -1.0));
}

Value focal_loss(const Value& probs, const Tensor& labels, double gamma) {
  if (gamma < 0.0) {
    throw UsageError("focal_loss: gamma must be >= 0, got " +
                     std::to_string(gamma));
  }
  Value y_t = true_class_prob(probs, labels);
  Value weight = power(rsub_scalar(1.0, y_t), gamma);
  return mean_all(mul(weight, scale(log(y_t), -1.0)));
}

Value loss_value(const LossSpec& spec, const Value& probs,
                 const Tensor& labels) {
  if (spec.focal) return focal_loss(probs, labels, spec.gamma);
  return cross_entropy(probs, labels);
}

LossSpec parse_loss_spec(const std::string& name, double gamma) {
  if (name == "ce") return LossSpec{false, 0.0};
  if (name == "fl") {
    if (gamma < 0.0) throw UsageError("focal loss gamma must be >= 0");
    return LossSpec{true, gamma};
  }
  throw UsageError("unknown loss '" + name + "' (expected ce or fl)");
}

std::string to_string(const LossSpec& spec) {
  if (!spec.focal) return "ce";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "fl(gamma=%g)", spec.gamma);
  return buf;
}

}  // namespace attnvad
