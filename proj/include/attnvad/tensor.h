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
#include <memory>
#include <string>
#include <vector>

#include "attnvad/common.h"

namespace attnvad {

// Dense row-major array of doubles. All dimensions must be positive.
// Copies are cheap (storage is shared); a tensor handed to another
// component is treated as immutable. mutable_data() is only legal while the
// tensor still has sole ownership of its storage, which is the case during
// construction and for freshly cloned tensors.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int64_t> shape);  // zero-filled
  Tensor(std::vector<int64_t> shape, std::vector<double> data);

  static Tensor full(std::vector<int64_t> shape, double value);
  static Tensor scalar(double value);  // shape {1}

  bool defined() const { return storage_ != nullptr; }
  const std::vector<int64_t>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int64_t dim(int axis) const;
  int64_t numel() const { return numel_; }

  const double* data() const;
  double* mutable_data();  // requires sole ownership of the storage

  Tensor clone() const;
  // Same storage under a new shape; element count must match.
  Tensor reshaped(std::vector<int64_t> new_shape) const;

  double flat(int64_t i) const { return data()[i]; }
  double at(int64_t i, int64_t j) const;
  double at(int64_t i, int64_t j, int64_t k) const;

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool unique_storage() const {
    return storage_ != nullptr && storage_.use_count() == 1;
  }
  bool all_finite() const;
  std::string shape_str() const;  // e.g. "3x4"

 private:
  std::shared_ptr<std::vector<double>> storage_;
  std::vector<int64_t> shape_;
  int64_t numel_ = 0;
};

// Uniform fill in [lo, hi), row-major draw order.
Tensor random_uniform(std::vector<int64_t> shape, double lo, double hi,
                      Rng& rng);
Tensor random_normal(std::vector<int64_t> shape, Rng& rng);

// dst += src, adopting src when dst is still undefined. Copy-on-write: if
// dst shares storage it is cloned before the in-place add.
void accumulate(Tensor& dst, const Tensor& src);

// True when both tensors are elementwise bit-identical.
bool bit_equal(const Tensor& a, const Tensor& b);

}  // namespace attnvad
