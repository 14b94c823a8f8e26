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

#include "attnvad/layers.h"

#include <cmath>
#include <string>
#include <vector>

namespace attnvad {

namespace {

Tensor uniform_fan_in(std::vector<int64_t> shape, int64_t fan_in, Rng& rng) {
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  return random_uniform(std::move(shape), -bound, bound, rng);
}

// Expands a column {C,1,...} (as produced by kept-axis reductions over a
// {C,...}-shaped input) back to the full shape.
Value spread_column(const Value& col, const std::vector<int64_t>& shape) {
  Value out = col;
  for (int axis = 1; axis < static_cast<int>(shape.size()); ++axis) {
    if (out.dim(axis) != shape[axis]) out = expand(out, axis, shape[axis]);
  }
  return out;
}

// Broadcasts a flat {C} vector across the trailing axes of a {C,...} shape.
Value spread_channels(const Value& v, const std::vector<int64_t>& shape) {
  std::vector<int64_t> col_shape(shape.size(), 1);
  col_shape[0] = shape[0];
  return spread_column(reshape(v, col_shape), shape);
}

}  // namespace

LstmLayerParams make_lstm_layer(int input_dim, int hidden_dim, Rng& rng) {
  if (input_dim <= 0 || hidden_dim <= 0) {
    throw ShapeError("make_lstm_layer: dims must be positive");
  }
  LstmLayerParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  p.w_x = uniform_fan_in({input_dim, 4 * hidden_dim}, input_dim, rng);
  p.w_h = uniform_fan_in({hidden_dim, 4 * hidden_dim}, hidden_dim, rng);
  p.b = Tensor({1, 4 * hidden_dim});
  // Forget-gate block (second of four) starts open.
  for (int j = 0; j < hidden_dim; ++j) {
    p.b.mutable_data()[hidden_dim + j] = 1.0;
  }
  return p;
}

Conv1dParams make_conv1d(int in_ch, int out_ch, int kernel, Rng& rng) {
  if (in_ch <= 0 || out_ch <= 0 || kernel <= 0 || kernel % 2 == 0) {
    throw ShapeError("make_conv1d: channels must be positive and kernel odd");
  }
  Conv1dParams p;
  p.in_ch = in_ch;
  p.out_ch = out_ch;
  p.kernel = kernel;
  p.w = uniform_fan_in({out_ch, in_ch, kernel},
                       static_cast<int64_t>(in_ch) * kernel, rng);
  p.b = Tensor({out_ch});
  return p;
}

Conv2dParams make_conv2d(int in_ch, int out_ch, int kernel, Rng& rng) {
  if (in_ch <= 0 || out_ch <= 0 || kernel <= 0 || kernel % 2 == 0) {
    throw ShapeError("make_conv2d: channels must be positive and kernel odd");
  }
  Conv2dParams p;
  p.in_ch = in_ch;
  p.out_ch = out_ch;
  p.kernel = kernel;
  p.w = uniform_fan_in({out_ch, in_ch, kernel, kernel},
                       static_cast<int64_t>(in_ch) * kernel * kernel, rng);
  p.b = Tensor({out_ch});
  return p;
}

BatchNormParams make_batchnorm(int channels) {
  if (channels <= 0) {
    throw ShapeError("make_batchnorm: channels must be positive");
  }
  BatchNormParams p;
  p.channels = channels;
  p.gamma = Tensor::full({channels}, 1.0);
  p.beta = Tensor({channels});
  p.run_mean = Tensor({channels});
  p.run_var = Tensor::full({channels}, 1.0);
  return p;
}

DenseParams make_dense(int in_dim, Rng& rng) {
  if (in_dim <= 0) {
    throw ShapeError("make_dense: in_dim must be positive");
  }
  DenseParams p;
  p.in_dim = in_dim;
  p.w = uniform_fan_in({in_dim, 1}, in_dim, rng);
  p.b = Tensor({1});
  return p;
}

Value bind_tensor(Tape* tape, const Tensor& t, std::vector<Value>* leaves) {
  Value v = tape != nullptr ? tape->leaf(t) : constant(t);
  if (leaves != nullptr) leaves->push_back(v);
  return v;
}

TapedLstmLayer bind_layer(Tape* tape, const LstmLayerParams& p,
                    std::vector<Value>* leaves) {
  TapedLstmLayer t;
  t.p = &p;
  t.w_x = bind_tensor(tape, p.w_x, leaves);
  t.w_h = bind_tensor(tape, p.w_h, leaves);
  t.b = bind_tensor(tape, p.b, leaves);
  return t;
}

TapedConv1d bind_layer(Tape* tape, const Conv1dParams& p,
                 std::vector<Value>* leaves) {
  TapedConv1d t;
  t.p = &p;
  t.w = bind_tensor(tape, p.w, leaves);
  t.b = bind_tensor(tape, p.b, leaves);
  return t;
}

TapedConv2d bind_layer(Tape* tape, const Conv2dParams& p,
                 std::vector<Value>* leaves) {
  TapedConv2d t;
  t.p = &p;
  t.w = bind_tensor(tape, p.w, leaves);
  t.b = bind_tensor(tape, p.b, leaves);
  return t;
}

TapedBatchNorm bind_layer(Tape* tape, BatchNormParams& p,
                    std::vector<Value>* leaves) {
  TapedBatchNorm t;
  t.p = &p;
  t.gamma = bind_tensor(tape, p.gamma, leaves);
  t.beta = bind_tensor(tape, p.beta, leaves);
  return t;
}

TapedDense bind_layer(Tape* tape, const DenseParams& p, std::vector<Value>* leaves) {
  TapedDense t;
  t.p = &p;
  t.w = bind_tensor(tape, p.w, leaves);
  t.b = bind_tensor(tape, p.b, leaves);
  return t;
}

LstmOut lstm_forward(const TapedLstmLayer& p, const Value& x, const Value* h0,
                     const Value* c0) {
  const int in_dim = p.p->input_dim;
  const int d = p.p->hidden_dim;
  if (x.tensor.ndim() != 2 || x.dim(1) != in_dim) {
    throw ShapeError("lstm_forward: input " + x.tensor.shape_str() +
                     " does not match input_dim " + std::to_string(in_dim));
  }
  const int64_t steps = x.dim(0);
  Value h = h0 != nullptr ? *h0 : constant(Tensor({1, d}));
  Value c = c0 != nullptr ? *c0 : constant(Tensor({1, d}));
  if (h.tensor.ndim() != 2 || h.dim(0) != 1 || h.dim(1) != d ||
      c.tensor.ndim() != 2 || c.dim(0) != 1 || c.dim(1) != d) {
    throw ShapeError("lstm_forward: state must be 1x" + std::to_string(d));
  }

  std::vector<Value> rows;
  rows.reserve(steps);
  for (int64_t t = 0; t < steps; ++t) {
    Value x_t = slice(x, /*axis=*/0, t, t + 1);  // 1 x in_dim
    Value gates = add(add(matmul(x_t, p.w_x), matmul(h, p.w_h)), p.b);
    Value i = sigmoid(slice(gates, 1, 0, d));
    Value f = sigmoid(slice(gates, 1, d, 2 * d));
    Value g = tanh(slice(gates, 1, 2 * d, 3 * d));
    Value o = sigmoid(slice(gates, 1, 3 * d, 4 * d));
    c = add(mul(f, c), mul(i, g));
    h = mul(o, tanh(c));
    rows.push_back(h);
  }

  LstmOut out;
  out.hidden = concat(rows, /*axis=*/0);
  out.h_final = h;
  out.c_final = c;
  return out;
}

Value conv1d_same(const TapedConv1d& p, const Value& x) {
  Value y = conv1d(x, p.w);  // out_ch x L
  Value b_col = reshape(p.b, {p.p->out_ch, 1});
  return add(y, spread_column(b_col, y.shape()));
}

Value conv2d_same(const TapedConv2d& p, const Value& x) {
  Value y = conv2d(x, p.w);  // out_ch x A x B
  Value b_col = reshape(p.b, {p.p->out_ch, 1, 1});
  return add(y, spread_column(b_col, y.shape()));
}

Value batchnorm(const TapedBatchNorm& bn, const Value& x, Mode mode,
                bool update_running) {
  BatchNormParams& p = *bn.p;
  if (x.tensor.ndim() < 2 || x.dim(0) != p.channels) {
    throw ShapeError("batchnorm: input " + x.tensor.shape_str() +
                     " does not have " + std::to_string(p.channels) +
                     " leading channels");
  }
  const std::vector<int64_t>& shape = x.shape();

  Value mean_c, var_c;  // {C,1,...} columns of the statistics in use
  if (mode == Mode::kTrain) {
    // Batch statistics stay on the tape so gradients flow through them.
    Value m = x;
    for (int axis = x.tensor.ndim() - 1; axis >= 1; --axis) {
      m = mean_axis(m, axis);
    }
    mean_c = m;
    Value centered = sub(x, spread_column(mean_c, shape));
    Value v = mul(centered, centered);
    for (int axis = x.tensor.ndim() - 1; axis >= 1; --axis) {
      v = mean_axis(v, axis);
    }
    var_c = v;

    if (update_running) {
      const double* bm = mean_c.tensor.data();
      const double* bv = var_c.tensor.data();
      Tensor new_mean = p.run_mean.clone();
      Tensor new_var = p.run_var.clone();
      double* rm = new_mean.mutable_data();
      double* rv = new_var.mutable_data();
      for (int ch = 0; ch < p.channels; ++ch) {
        rm[ch] = (1.0 - p.momentum) * rm[ch] + p.momentum * bm[ch];
        rv[ch] = (1.0 - p.momentum) * rv[ch] + p.momentum * bv[ch];
      }
      p.run_mean = std::move(new_mean);
      p.run_var = std::move(new_var);
    }
  } else {
    std::vector<int64_t> col_shape(shape.size(), 1);
    col_shape[0] = p.channels;
    mean_c = constant(p.run_mean.reshaped(col_shape));
    var_c = constant(p.run_var.reshaped(col_shape));
  }

  Value centered = sub(x, spread_column(mean_c, shape));
  Value inv_std = power(add_scalar(var_c, p.eps), -0.5);
  Value normed = mul(centered, spread_column(inv_std, shape));
  Value g = spread_channels(bn.gamma, shape);
  Value b = spread_channels(bn.beta, shape);
  return add(mul(normed, g), b);
}

Pooled pool_stats(const Value& h, PoolAxis axis) {
  if (h.tensor.ndim() != 2) {
    throw ShapeError("pool_stats: expected 2-D input, got " +
                     h.tensor.shape_str());
  }
  const int ax = axis == PoolAxis::kFrequency ? 1 : 0;
  Pooled out;
  out.max = max_axis(h, ax);
  out.avg = mean_axis(h, ax);
  Value centered = sub(h, expand(out.avg, ax, h.dim(ax)));
  Value var = mean_axis(mul(centered, centered), ax);
  out.std = power(var, 0.5);
  return out;
}

Value dense(const TapedDense& p, const Value& x) {
  if (x.tensor.ndim() != 2 || x.dim(1) != p.p->in_dim) {
    throw ShapeError("dense: input " + x.tensor.shape_str() +
                     " does not match in_dim " + std::to_string(p.p->in_dim));
  }
  Value y = matmul(x, p.w);  // T x 1
  Value b_row = reshape(p.b, {1, 1});
  return add(y, expand(b_row, /*axis=*/0, y.dim(0)));
}

}  // namespace attnvad
