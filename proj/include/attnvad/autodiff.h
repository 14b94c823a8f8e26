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
#include <vector>

#include "attnvad/tensor.h"

namespace attnvad {

class Tape;

// A tensor plus the tape node that produced it. Values without a node are
// constants: ops evaluate through them but propagate no gradient into them.
// Running a forward pass purely on constants therefore records nothing and
// costs nothing beyond the arithmetic itself.
struct Value {
  Tensor tensor;
  Tape* tape = nullptr;
  int node = -1;

  bool traced() const { return tape != nullptr; }
  const std::vector<int64_t>& shape() const { return tensor.shape(); }
  int64_t dim(int axis) const { return tensor.dim(axis); }
};

Value constant(Tensor t);
Value constant(double v);  // scalar, shape {1}

// Receives the gradient flowing into a node's output and adds each input's
// contribution into node_grads (indexed by tape node id).
using BackwardFn =
    std::function<void(const Tensor& grad_out, std::vector<Tensor>& node_grads)>;

struct TapeNode {
  const char* op;           // operation kind, for diagnostics
  std::vector<int> inputs;  // producing node ids; -1 marks a constant input
  Tensor value;             // saved forward value
  BackwardFn backward;      // empty for leaves
};

class Gradients {
 public:
  explicit Gradients(std::vector<Tensor> by_node)
      : by_node_(std::move(by_node)) {}

  // Gradient of the loss w.r.t. a traced value. Values that never
  // influenced the loss get an all-zero gradient of the right shape.
  Tensor wrt(const Value& v) const;

 private:
  std::vector<Tensor> by_node_;
};

// Append-only record of one forward pass (define-by-run). Node ids are
// topologically ordered by construction; backward() replays the record in
// reverse, summing gradient contributions across every use site of a node.
// A tape is single-threaded; independent tapes may run on distinct threads.
class Tape {
 public:
  Value leaf(Tensor t);
  int record(const char* op, std::vector<int> inputs, Tensor value,
             BackwardFn backward);

  // Reverse pass from a scalar loss recorded on this tape.
  Gradients backward(const Value& loss);

  int size() const { return static_cast<int>(nodes_.size()); }
  const TapeNode& node(int i) const { return nodes_[i]; }

 private:
  std::vector<TapeNode> nodes_;
};

// ---------------------------------------------------------------------------
// Differentiable operations. Every op validates shapes up front and throws
// ShapeError naming the op and the offending shapes. Elementwise binary ops
// require exactly matching shapes; broadcasting is always an explicit
// expand() of a size-1 axis.
// ---------------------------------------------------------------------------

Value matmul(const Value& a, const Value& b);        // (m,k)x(k,n) -> (m,n)
Value add(const Value& a, const Value& b);           // same shape
Value mul(const Value& a, const Value& b);           // elementwise, same shape
Value concat(const std::vector<Value>& vs, int axis);
Value slice(const Value& v, int axis, int64_t start, int64_t stop);
Value expand(const Value& v, int axis, int64_t n);   // size-1 axis -> n copies
Value reshape(const Value& v, std::vector<int64_t> shape);
Value sigmoid(const Value& v);
Value tanh(const Value& v);
Value relu(const Value& v);
Value log(const Value& v);                  // errors on non-positive input
Value power(const Value& v, double exponent);
Value clamp(const Value& v, double lo, double hi);
Value sum_all(const Value& v);              // scalar, shape {1}
Value mean_all(const Value& v);
Value sum_axis(const Value& v, int axis);   // reduced axis kept with size 1
Value mean_axis(const Value& v, int axis);
Value max_axis(const Value& v, int axis);   // ties route to the lowest index
Value transpose(const Value& v);            // 2-D only

// 1-D / 2-D cross-correlation with zero "same" padding and odd kernels.
// conv1d: x (C_in,L), w (C_out,C_in,K) -> (C_out,L)
// conv2d: x (C_in,A,B), w (C_out,C_in,K,K) -> (C_out,A,B)
Value conv1d(const Value& x, const Value& w);
Value conv2d(const Value& x, const Value& w);

// Scalar conveniences built from the ops above plus constants.
Value scale(const Value& v, double c);             // c * v
Value add_scalar(const Value& v, double c);        // v + c
Value rsub_scalar(double c, const Value& v);       // c - v
Value sub(const Value& a, const Value& b);         // a - b

// ---------------------------------------------------------------------------
// Finite-difference gradient checking. f must map its argument(s) to a
// scalar Value using taped ops. Returns the maximum elementwise relative
// error between the reverse-mode gradient and central differences, with
// relative error |a - b| / max(|a|, |b|, 1e-8).
// ---------------------------------------------------------------------------

double grad_check(const std::function<Value(Tape&, const Value&)>& f,
                  const Tensor& point, double eps);
double grad_check_multi(
    const std::function<Value(Tape&, std::vector<Value>&)>& f,
    const std::vector<Tensor>& points, double eps);

}  // namespace attnvad
