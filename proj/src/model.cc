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

#include "attnvad/model.h"

#include <string>

namespace attnvad {

namespace {

void check_config(const ModelConfig& cfg) {
  if (cfg.input_dim <= 0 || cfg.hidden_dim <= 0 || cfg.num_layers <= 0 ||
      cfg.t_train <= 0) {
    throw UsageError("model config dims, layers, and t_train must be "
                     "positive");
  }
}

}  // namespace

VadModel make_model(const ModelConfig& cfg, Rng& rng) {
  check_config(cfg);
  VadModel m;
  m.config = cfg;
  for (int l = 0; l < cfg.num_layers; ++l) {
    int in = l == 0 ? cfg.input_dim : cfg.hidden_dim;
    m.lstm.push_back(make_lstm_layer(in, cfg.hidden_dim, rng));
  }
  m.attention = make_attention(cfg.attention, rng);
  m.head = make_dense(cfg.hidden_dim, rng);
  m.norm.mean = Tensor({cfg.input_dim});
  m.norm.std = Tensor::full({cfg.input_dim}, 1.0);
  return m;
}

void visit_learnables(VadModel& m, const TensorVisitor& fn) {
  for (size_t l = 0; l < m.lstm.size(); ++l) {
    std::string prefix = "lstm" + std::to_string(l) + ".";
    fn(prefix + "w_x", m.lstm[l].w_x);
    fn(prefix + "w_h", m.lstm[l].w_h);
    fn(prefix + "b", m.lstm[l].b);
  }
  visit_learnables(m.attention, [&fn](const std::string& name, Tensor& t) {
    fn("attn." + name, t);
  });
  fn("head.w", m.head.w);
  fn("head.b", m.head.b);
}

void visit_buffers(VadModel& m, const TensorVisitor& fn) {
  visit_buffers(m.attention, [&fn](const std::string& name, Tensor& t) {
    fn("attn." + name, t);
  });
  fn("norm.mean", m.norm.mean);
  fn("norm.std", m.norm.std);
}

int64_t learnable_count(VadModel& m) {
  int64_t n = 0;
  visit_learnables(m, [&n](const std::string&, Tensor& t) { n += t.numel(); });
  return n;
}

TapedModel bind_model(Tape* tape, VadModel& m, std::vector<Value>* leaves) {
  TapedModel t;
  t.config = &m.config;
  t.lstm.reserve(m.lstm.size());
  for (LstmLayerParams& layer : m.lstm) {
    t.lstm.push_back(bind_layer(tape, layer, leaves));
  }
  t.attention = bind_attention(tape, m.attention, leaves);
  t.head = bind_layer(tape, m.head, leaves);
  return t;
}

Value model_forward(const TapedModel& m, const Value& feats, Mode mode,
                    bool update_running) {
  const ModelConfig& cfg = *m.config;
  if (feats.tensor.ndim() != 2 || feats.dim(1) != cfg.input_dim) {
    throw ShapeError("model_forward: features " + feats.tensor.shape_str() +
                     " do not match input_dim " +
                     std::to_string(cfg.input_dim));
  }
  Value h = feats;
  for (const TapedLstmLayer& layer : m.lstm) {
    h = lstm_forward(layer, h).hidden;
    h = apply_attention(m.attention, h, mode, update_running, cfg.t_train);
  }
  return sigmoid(dense(m.head, h));
}

Tensor infer_probs(VadModel& m, const Tensor& raw_feats) {
  Tensor normed = apply_norm(raw_feats, m.norm);
  TapedModel taped = bind_model(nullptr, m, nullptr);
  return model_forward(taped, constant(normed), Mode::kEval,
                       /*update_running=*/false)
      .tensor;
}

ForwardMaps forward_maps(VadModel& m, const Tensor& raw_feats) {
  Tensor normed = apply_norm(raw_feats, m.norm);
  TapedModel taped = bind_model(nullptr, m, nullptr);
  Value h = constant(normed);
  ForwardMaps maps;
  for (size_t l = 0; l < taped.lstm.size(); ++l) {
    h = lstm_forward(taped.lstm[l], h).hidden;
    if (l + 1 == taped.lstm.size()) maps.hidden_pre = h.tensor;
    h = apply_attention(taped.attention, h, Mode::kEval,
                        /*update_running=*/false, m.config.t_train);
    if (l + 1 == taped.lstm.size()) maps.hidden_post = h.tensor;
  }
  maps.probs = sigmoid(dense(taped.head, h)).tensor;
  return maps;
}

}  // namespace attnvad
