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

#include "attnvad/tensor.h"

#include <cmath>
#include <cstring>
#include <sstream>

namespace attnvad {

namespace {

int64_t checked_numel(const std::vector<int64_t>& shape) {
  if (shape.empty()) throw ShapeError("tensor: shape must have >= 1 axis");
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d <= 0) throw ShapeError("tensor: all dimensions must be positive");
    n *= d;
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<int64_t> shape) {
  numel_ = checked_numel(shape);
  shape_ = std::move(shape);
  storage_ = std::make_shared<std::vector<double>>(numel_, 0.0);
}

Tensor::Tensor(std::vector<int64_t> shape, std::vector<double> data) {
  numel_ = checked_numel(shape);
  if (static_cast<int64_t>(data.size()) != numel_) {
    throw ShapeError("tensor: data length " + std::to_string(data.size()) +
                     " does not match shape element count " +
                     std::to_string(numel_));
  }
  shape_ = std::move(shape);
  storage_ = std::make_shared<std::vector<double>>(std::move(data));
}

Tensor Tensor::full(std::vector<int64_t> shape, double value) {
  Tensor t(std::move(shape));
  double* p = t.mutable_data();
  for (int64_t i = 0; i < t.numel_; ++i) p[i] = value;
  return t;
}

Tensor Tensor::scalar(double value) { return full({1}, value); }

int64_t Tensor::dim(int axis) const {
  if (axis < 0 || axis >= ndim()) {
    throw ShapeError("tensor: axis " + std::to_string(axis) +
                     " out of range for shape " + shape_str());
  }
  return shape_[axis];
}

const double* Tensor::data() const {
  if (!storage_) throw Error("tensor: access to undefined tensor");
  return storage_->data();
}

double* Tensor::mutable_data() {
  if (!storage_) throw Error("tensor: access to undefined tensor");
  if (storage_.use_count() > 1) {
    throw Error("tensor: mutable access to shared storage");
  }
  return storage_->data();
}

Tensor Tensor::clone() const {
  if (!storage_) return Tensor();
  Tensor t;
  t.storage_ = std::make_shared<std::vector<double>>(*storage_);
  t.shape_ = shape_;
  t.numel_ = numel_;
  return t;
}

Tensor Tensor::reshaped(std::vector<int64_t> new_shape) const {
  int64_t n = checked_numel(new_shape);
  if (n != numel_) {
    throw ShapeError("reshape: cannot view " + shape_str() + " as " +
                     Tensor(std::move(new_shape)).shape_str());
  }
  Tensor t;
  t.storage_ = storage_;
  t.shape_ = std::move(new_shape);
  t.numel_ = n;
  return t;
}

double Tensor::at(int64_t i, int64_t j) const {
  return data()[i * shape_[1] + j];
}

double Tensor::at(int64_t i, int64_t j, int64_t k) const {
  return data()[(i * shape_[1] + j) * shape_[2] + k];
}

bool Tensor::all_finite() const {
  const double* p = data();
  for (int64_t i = 0; i < numel_; ++i) {
    if (!std::isfinite(p[i])) return false;
  }
  return true;
}

std::string Tensor::shape_str() const {
  if (!defined()) return "<undefined>";
  std::ostringstream os;
  for (size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << "x";
    os << shape_[i];
  }
  return os.str();
}

Tensor random_uniform(std::vector<int64_t> shape, double lo, double hi,
                      Rng& rng) {
  Tensor t(std::move(shape));
  double* p = t.mutable_data();
  for (int64_t i = 0; i < t.numel(); ++i) p[i] = rng.uniform(lo, hi);
  return t;
}

Tensor random_normal(std::vector<int64_t> shape, Rng& rng) {
  Tensor t(std::move(shape));
  double* p = t.mutable_data();
  for (int64_t i = 0; i < t.numel(); ++i) p[i] = rng.normal();
  return t;
}

void accumulate(Tensor& dst, const Tensor& src) {
  if (!src.defined()) return;
  if (!dst.defined()) {
    dst = src;
    return;
  }
  if (!dst.same_shape(src)) {
    throw ShapeError("accumulate: shape mismatch " + dst.shape_str() +
                     " vs " + src.shape_str());
  }
  if (!dst.unique_storage()) dst = dst.clone();  // may alias other gradients
  double* d = dst.mutable_data();
  const double* s = src.data();
  for (int64_t i = 0; i < dst.numel(); ++i) d[i] += s[i];
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) return false;
  return std::memcmp(a.data(), b.data(), sizeof(double) * a.numel()) == 0;
}

}  // namespace attnvad
