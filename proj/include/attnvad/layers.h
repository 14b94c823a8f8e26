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

enum class Mode { kTrain, kEval };

// ---------------------------------------------------------------------------
// Parameter holders. Weights are initialized uniform(-1/sqrt(fan_in),
// +1/sqrt(fan_in)); biases start at zero except the LSTM forget-gate block,
// which starts at 1 to keep early memory open.
// ---------------------------------------------------------------------------

struct LstmLayerParams {
  int input_dim = 0;
  int hidden_dim = 0;
  // Gate blocks along the 4D axis are ordered (input, forget, cell
  // candidate, output).
  Tensor w_x;  // input_dim x 4*hidden_dim
  Tensor w_h;  // hidden_dim x 4*hidden_dim
  Tensor b;    // 1 x 4*hidden_dim
};

struct Conv1dParams {
  int in_ch = 0, out_ch = 0, kernel = 0;  // kernel must be odd
  Tensor w;  // out_ch x in_ch x kernel
  Tensor b;  // {out_ch}
};

struct Conv2dParams {
  int in_ch = 0, out_ch = 0, kernel = 0;  // square odd kernel
  Tensor w;  // out_ch x in_ch x kernel x kernel
  Tensor b;  // {out_ch}
};

struct BatchNormParams {
  int channels = 0;
  double eps = 1e-5;
  double momentum = 0.1;
  Tensor gamma, beta;        // learnable, shape {channels}
  Tensor run_mean, run_var;  // running stats (buffers, not parameters)
};

struct DenseParams {
  int in_dim = 0;
  Tensor w;  // in_dim x 1
  Tensor b;  // {1}
};

LstmLayerParams make_lstm_layer(int input_dim, int hidden_dim, Rng& rng);
Conv1dParams make_conv1d(int in_ch, int out_ch, int kernel, Rng& rng);
Conv2dParams make_conv2d(int in_ch, int out_ch, int kernel, Rng& rng);
BatchNormParams make_batchnorm(int channels);
DenseParams make_dense(int in_dim, Rng& rng);

// ---------------------------------------------------------------------------
// Taped views: the same parameters bound either to a tape (training) or to
// nothing (pure evaluation). BatchNorm keeps a pointer to its parameter
// struct so training can update the running statistics in place.
// ---------------------------------------------------------------------------

struct TapedLstmLayer {
  const LstmLayerParams* p = nullptr;
  Value w_x, w_h, b;
};

struct TapedConv1d {
  const Conv1dParams* p = nullptr;
  Value w, b;
};

struct TapedConv2d {
  const Conv2dParams* p = nullptr;
  Value w, b;
};

struct TapedBatchNorm {
  BatchNormParams* p = nullptr;
  Value gamma, beta;
};

struct TapedDense {
  const DenseParams* p = nullptr;
  Value w, b;
};

// Binds a tensor as a tape leaf (tape != nullptr) or a constant. `leaves`,
// when given, collects the bound values in creation order so callers can
// extract gradients / apply updates in a stable order.
Value bind_tensor(Tape* tape, const Tensor& t, std::vector<Value>* leaves);

TapedLstmLayer bind_layer(Tape* tape, const LstmLayerParams& p,
                    std::vector<Value>* leaves);
TapedConv1d bind_layer(Tape* tape, const Conv1dParams& p,
                 std::vector<Value>* leaves);
TapedConv2d bind_layer(Tape* tape, const Conv2dParams& p,
                 std::vector<Value>* leaves);
TapedBatchNorm bind_layer(Tape* tape, BatchNormParams& p,
                    std::vector<Value>* leaves);
TapedDense bind_layer(Tape* tape, const DenseParams& p, std::vector<Value>* leaves);

// ---------------------------------------------------------------------------
// Layer operations
// ---------------------------------------------------------------------------

struct LstmOut {
  Value hidden;   // T x D, one row per step
  Value h_final;  // 1 x D
  Value c_final;  // 1 x D
};

// Standard LSTM (no peepholes) unrolled over the rows of x (T x input_dim).
// Initial state defaults to zeros.
LstmOut lstm_forward(const TapedLstmLayer& p, const Value& x,
                     const Value* h0 = nullptr, const Value* c0 = nullptr);

// Zero-padded "same" convolutions with per-output-channel bias.
Value conv1d_same(const TapedConv1d& p, const Value& x);  // (C,L) -> (O,L)
Value conv2d_same(const TapedConv2d& p,
                  const Value& x);  // (C,A,B) -> (O,A,B)

// Per-channel batch normalization over the non-channel axes (axis 0 is the
// channel axis). Train mode normalizes by batch statistics (population
// variance) and, when update_running is set, folds them into the running
// stats with the configured momentum. Eval mode normalizes by the running
// stats held as constants; gamma / beta stay traced in both modes.
Value batchnorm(const TapedBatchNorm& bn, const Value& x, Mode mode,
                bool update_running);

enum class PoolAxis { kFrequency, kTime };

struct Pooled {
  Value max, avg, std;  // T x 1 (kFrequency) or 1 x D (kTime)
};

// Max / mean / population-std statistics of a T x D map along one axis.
// kFrequency pools across hidden units per step; kTime pools across steps
// per unit. Max-pool gradients follow the lowest tied index; std of a
// constant slice is 0 with a 0 subgradient.
Pooled pool_stats(const Value& h, PoolAxis axis);

// Affine map (T x in_dim) -> (T x 1).
Value dense(const TapedDense& p, const Value& x);

}  // namespace attnvad
