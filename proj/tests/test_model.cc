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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "attnvad/checkpoint.h"
#include "doctest.h"

namespace attnvad {
namespace {

ModelConfig standard_config(AttentionKind kind) {
  ModelConfig cfg;
  cfg.attention = kind;
  return cfg;
}

ModelConfig tiny_config(AttentionKind kind) {
  ModelConfig cfg;
  cfg.input_dim = 4;
  cfg.hidden_dim = 6;
  cfg.num_layers = 3;
  cfg.attention = kind;
  cfg.t_train = 5;
  return cfg;
}

TEST_CASE("learnable counts for the standard stack and each attention") {
  Rng rng(201);
  auto count = [&rng](AttentionKind kind) {
    VadModel m = make_model(standard_config(kind), rng);
    return learnable_count(m);
  };
  const int64_t base = count(AttentionKind::kNone);
  CHECK(base == 92993);
  CHECK(count(AttentionKind::kTa) == base + 634);
  CHECK(count(AttentionKind::kFa) == base + 1174);
  CHECK(count(AttentionKind::kDa1) == base + 356);
  CHECK(count(AttentionKind::kDa2) == base + 1808);

  // Attention overhead ordering and budget.
  CHECK(356 < 634);
  CHECK(634 < 1174);
  CHECK(1174 < 1808);
  CHECK(1808.0 / static_cast<double>(base) < 0.025);
}

TEST_CASE("model construction is seed-deterministic") {
  auto fingerprint = [](uint64_t seed) {
    Rng rng(seed);
    VadModel m = make_model(tiny_config(AttentionKind::kDa2), rng);
    std::vector<Tensor> all;
    visit_learnables(m, [&all](const std::string&, Tensor& t) {
      all.push_back(t);
    });
    return all;
  };
  auto a = fingerprint(5);
  auto b = fingerprint(5);
  auto c = fingerprint(6);
  REQUIRE(a.size() == b.size());
  bool any_diff = false;
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(bit_equal(a[i], b[i]));
    if (!bit_equal(a[i], c[i])) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("model names are unique and binding matches visitation order") {
  Rng rng(203);
  for (AttentionKind kind : {AttentionKind::kNone, AttentionKind::kDa2}) {
    VadModel m = make_model(tiny_config(kind), rng);
    std::set<std::string> names;
    std::vector<Tensor*> visited;
    visit_learnables(m, [&](const std::string& n, Tensor& t) {
      CHECK(names.insert(n).second);
      visited.push_back(&t);
    });
    visit_buffers(m, [&](const std::string& n, Tensor&) {
      CHECK(names.insert(n).second);
    });
    std::vector<Value> leaves;
    bind_model(nullptr, m, &leaves);
    REQUIRE(leaves.size() == visited.size());
    for (size_t i = 0; i < leaves.size(); ++i) {
      CHECK(leaves[i].tensor.shape() == visited[i]->shape());
    }
  }
}

TEST_CASE("shared attention parameters are bound exactly once") {
  Rng rng(207);
  VadModel m = make_model(tiny_config(AttentionKind::kTa), rng);
  // 3 LSTM layers x 3 tensors + one TA set (14 tensors) + head (2).
  std::vector<Value> leaves;
  bind_model(nullptr, m, &leaves);
  CHECK(leaves.size() == 9 + 14 + 2);
}

TEST_CASE("forward emits probabilities in the open unit interval") {
  Rng rng(211);
  for (AttentionKind kind :
       {AttentionKind::kNone, AttentionKind::kTa, AttentionKind::kFa,
        AttentionKind::kDa1, AttentionKind::kDa2}) {
    VadModel m = make_model(tiny_config(kind), rng);
    Tensor feats = random_uniform({5, 4}, -2.0, 2.0, rng);
    TapedModel taped = bind_model(nullptr, m, nullptr);
    Value probs =
        model_forward(taped, constant(feats), Mode::kTrain, false);
    REQUIRE(probs.shape() == std::vector<int64_t>{5, 1});
    for (int64_t i = 0; i < 5; ++i) {
      CHECK(probs.tensor.flat(i) > 0.0);
      CHECK(probs.tensor.flat(i) < 1.0);
    }
  }
}

TEST_CASE("evaluation accepts inputs longer than the training chunk") {
  Rng rng(213);
  VadModel m = make_model(tiny_config(AttentionKind::kDa2), rng);
  Tensor feats = random_uniform({23, 4}, -1.0, 1.0, rng);  // t_train = 5
  Tensor probs = infer_probs(m, feats);
  REQUIRE(probs.shape() == std::vector<int64_t>{23, 1});
  for (int64_t i = 0; i < probs.numel(); ++i) {
    CHECK(probs.flat(i) > 0.0);
    CHECK(probs.flat(i) < 1.0);
  }
}

TEST_CASE("inference applies the stored feature normalization") {
  Rng rng(217);
  VadModel m = make_model(tiny_config(AttentionKind::kNone), rng);
  Tensor feats = random_uniform({6, 4}, 5.0, 9.0, rng);

  Tensor probs_identity = infer_probs(m, feats);

  // Setting the normalizer to the features' own stats must change the
  // scores (the normalized input differs).
  m.norm = fit_norm({feats});
  Tensor probs_fitted = infer_probs(m, feats);
  CHECK_FALSE(bit_equal(probs_identity, probs_fitted));

  // And must agree with manually normalizing first.
  Tensor manual = apply_norm(feats, m.norm);
  NormStats identity{Tensor({4}), Tensor::full({4}, 1.0)};
  std::swap(m.norm, identity);
  Tensor probs_manual = infer_probs(m, manual);
  CHECK(bit_equal(probs_fitted, probs_manual));
}

TEST_CASE("full model gradients agree with finite differences") {
  Rng rng(219);
  VadModel m = make_model(tiny_config(AttentionKind::kDa2), rng);
  Tensor feats = random_uniform({5, 4}, -1.0, 1.0, rng);
  Tensor probe;
  {
    Rng prng(55);
    probe = random_uniform({5, 1}, 0.25, 1.75, prng);
  }

  auto loss_of = [&]() {
    TapedModel taped = bind_model(nullptr, m, nullptr);
    Value out = model_forward(taped, constant(feats), Mode::kTrain, false);
    double s = 0.0;
    for (int64_t i = 0; i < out.tensor.numel(); ++i) {
      s += out.tensor.flat(i) * probe.flat(i);
    }
    return s;
  };

  Tape tape;
  std::vector<Value> leaves;
  TapedModel taped = bind_model(&tape, m, &leaves);
  Value out = model_forward(taped, tape.leaf(feats), Mode::kTrain, false);
  Gradients grads = tape.backward(sum_all(mul(out, constant(probe))));

  std::vector<Tensor*> tensors;
  visit_learnables(m, [&](const std::string&, Tensor& t) {
    tensors.push_back(&t);
  });
  REQUIRE(tensors.size() == leaves.size());

  const double eps = 1e-5;
  double max_err = 0.0;
  for (size_t k = 0; k < tensors.size(); ++k) {
    Tensor g = grads.wrt(leaves[k]);
    Tensor base = *tensors[k];
    for (int64_t i = 0; i < g.numel(); ++i) {
      Tensor plus = base.clone();
      plus.mutable_data()[i] += eps;
      Tensor minus = base.clone();
      minus.mutable_data()[i] -= eps;
      *tensors[k] = plus;
      double lp = loss_of();
      *tensors[k] = minus;
      double lm = loss_of();
      *tensors[k] = base;
      double fd = (lp - lm) / (2.0 * eps);
      double an = g.flat(i);
      max_err = std::max(max_err,
                         std::abs(an - fd) /
                             std::max({std::abs(an), std::abs(fd), 1e-6}));
    }
  }
  CHECK(max_err < 1e-4);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  Rng rng(223);
  VadModel m = make_model(tiny_config(AttentionKind::kDa2), rng);
  // Give buffers non-default content so the round trip covers them.
  visit_buffers(m, [&rng](const std::string&, Tensor& t) {
    t = random_uniform(t.shape(), 0.25, 1.75, rng);
  });

  std::string path = "/tmp/attnvad_test_model.ckpt";
  save_checkpoint(path, m);
  VadModel back = load_checkpoint(path);

  CHECK(back.config.input_dim == m.config.input_dim);
  CHECK(back.config.hidden_dim == m.config.hidden_dim);
  CHECK(back.config.num_layers == m.config.num_layers);
  CHECK(back.config.attention == m.config.attention);
  CHECK(back.config.t_train == m.config.t_train);

  std::vector<Tensor*> orig, loaded;
  auto collect = [](std::vector<Tensor*>& into) {
    return [&into](const std::string&, Tensor& t) { into.push_back(&t); };
  };
  visit_learnables(m, collect(orig));
  visit_buffers(m, collect(orig));
  visit_learnables(back, collect(loaded));
  visit_buffers(back, collect(loaded));
  REQUIRE(orig.size() == loaded.size());
  for (size_t i = 0; i < orig.size(); ++i) {
    CHECK(bit_equal(*orig[i], *loaded[i]));
  }

  // Identical inference behavior, and a re-save produces identical bytes.
  Tensor feats = random_uniform({8, 4}, -1.0, 1.0, rng);
  CHECK(bit_equal(infer_probs(m, feats), infer_probs(back, feats)));

  std::string path2 = "/tmp/attnvad_test_model2.ckpt";
  save_checkpoint(path2, back);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string bytes1((std::istreambuf_iterator<char>(f1)),
                     std::istreambuf_iterator<char>());
  std::string bytes2((std::istreambuf_iterator<char>(f2)),
                     std::istreambuf_iterator<char>());
  CHECK(bytes1 == bytes2);
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("checkpoint loader rejects malformed files") {
  Rng rng(227);
  VadModel m = make_model(tiny_config(AttentionKind::kTa), rng);
  std::string path = "/tmp/attnvad_test_bad.ckpt";
  save_checkpoint(path, m);

  auto read_all = [&path]() {
    std::ifstream f(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)),
                       std::istreambuf_iterator<char>());
  };
  auto write_all = [&path](const std::string& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  };
  std::string good = read_all();

  // Wrong magic.
  std::string bad = good;
  bad[0] = 'X';
  write_all(bad);
  CHECK_THROWS_AS(load_checkpoint(path), DataError);

  // Renamed tensor.
  bad = good;
  size_t at = bad.find("head.w");
  REQUIRE(at != std::string::npos);
  bad.replace(at, 6, "head.q");
  write_all(bad);
  CHECK_THROWS_AS(load_checkpoint(path), DataError);

  // Truncated payload.
  bad = good.substr(0, good.size() - 16);
  write_all(bad);
  CHECK_THROWS_AS(load_checkpoint(path), DataError);

  CHECK_THROWS_AS(load_checkpoint("/tmp/attnvad_no_such.ckpt"), DataError);
  std::remove(path.c_str());
}

}  // namespace
}  // namespace attnvad
