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
#include <array>
#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"

namespace attnvad {
namespace {

int64_t learnable_count(AttentionParams& p) {
  int64_t n = 0;
  visit_learnables(p, [&n](const std::string&, Tensor& t) { n += t.numel(); });
  return n;
}

void zero_all(AttentionParams& p) {
  visit_learnables(p, [](const std::string&, Tensor& t) {
    t = Tensor(t.shape());
  });
}

Tensor apply_all(AttentionParams& p, const Tensor& h, Mode mode,
                 bool update_running, int64_t chunk) {
  TapedAttention taped = bind_attention(nullptr, p, nullptr);
  return apply_attention(taped, constant(h), mode, update_running, chunk)
      .tensor;
}

TEST_CASE("attention parameter counts match the documented trunk layouts") {
  Rng rng(3);
  auto count = [&rng](AttentionKind kind) {
    AttentionParams p = make_attention(kind, rng);
    return learnable_count(p);
  };
  CHECK(count(AttentionKind::kNone) == 0);
  CHECK(count(AttentionKind::kTa) == 634);
  CHECK(count(AttentionKind::kFa) == 1174);
  CHECK(count(AttentionKind::kDa1) == 356);
  CHECK(count(AttentionKind::kDa2) == 1808);
}

TEST_CASE("attention parameter names are unique and binding matches "
          "visitation order") {
  Rng rng(5);
  for (AttentionKind kind : {AttentionKind::kTa, AttentionKind::kFa,
                             AttentionKind::kDa1, AttentionKind::kDa2}) {
    AttentionParams p = make_attention(kind, rng);
    std::set<std::string> names;
    std::vector<Tensor*> visited;
    visit_learnables(p, [&](const std::string& n, Tensor& t) {
      CHECK(names.insert(n).second);
      visited.push_back(&t);
    });
    visit_buffers(p, [&](const std::string& n, Tensor& t) {
      CHECK(names.insert(n).second);
      (void)t;
    });

    std::vector<Value> leaves;
    bind_attention(nullptr, p, &leaves);
    REQUIRE(leaves.size() == visited.size());
    for (size_t i = 0; i < leaves.size(); ++i) {
      CHECK(leaves[i].tensor.shape() == visited[i]->shape());
    }
  }
}

TEST_CASE("zeroed attention adds exactly one half in both normalizer modes") {
  Rng rng(7);
  Tensor h = random_uniform({9, 6}, -2.0, 2.0, rng);
  for (AttentionKind kind : {AttentionKind::kTa, AttentionKind::kFa,
                             AttentionKind::kDa1, AttentionKind::kDa2}) {
    AttentionParams p = make_attention(kind, rng);
    zero_all(p);
    for (Mode mode : {Mode::kTrain, Mode::kEval}) {
      Tensor out = apply_all(p, h, mode, /*update_running=*/false, 9);
      REQUIRE(out.shape() == h.shape());
      for (int64_t i = 0; i < out.numel(); ++i) {
        CHECK(out.flat(i) == h.flat(i) + 0.5);
      }
    }
  }
}

TEST_CASE("attention residual always lies strictly inside (0, 1)") {
  Rng rng(11);
  Tensor h = random_uniform({12, 6}, -3.0, 3.0, rng);
  for (AttentionKind kind : {AttentionKind::kTa, AttentionKind::kFa,
                             AttentionKind::kDa1, AttentionKind::kDa2}) {
    AttentionParams p = make_attention(kind, rng);
    for (Mode mode : {Mode::kTrain, Mode::kEval}) {
      Tensor out = apply_all(p, h, mode, false, 12);
      for (int64_t i = 0; i < out.numel(); ++i) {
        double residual = out.flat(i) - h.flat(i);
        CHECK(residual > 0.0);
        CHECK(residual < 1.0);
      }
    }
  }
}

TEST_CASE("time attention gates whole steps; frequency attention gates "
          "whole units") {
  Rng rng(13);
  Tensor h = random_uniform({8, 5}, -1.0, 1.0, rng);

  AttentionParams ta = make_attention(AttentionKind::kTa, rng);
  TapedAttention taped_ta = bind_attention(nullptr, ta, nullptr);
  Tensor gate_ta =
      ta_gate(taped_ta.ta, constant(h), Mode::kTrain, false).tensor;
  for (int64_t t = 0; t < 8; ++t) {
    for (int64_t d = 1; d < 5; ++d) {
      CHECK(gate_ta.at(t, d) == gate_ta.at(t, 0));
    }
  }

  AttentionParams fa = make_attention(AttentionKind::kFa, rng);
  TapedAttention taped_fa = bind_attention(nullptr, fa, nullptr);
  Tensor gate_fa =
      fa_gate(taped_fa.fa, constant(h), Mode::kTrain, false).tensor;
  for (int64_t d = 0; d < 5; ++d) {
    for (int64_t t = 1; t < 8; ++t) {
      CHECK(gate_fa.at(t, d) == gate_fa.at(0, d));
    }
  }
}

TEST_CASE("chunk ranges cover the rows in order with a short tail") {
  auto r = chunk_ranges(125, 50);
  REQUIRE(r.size() == 3);
  CHECK(r[0] == std::pair<int64_t, int64_t>{0, 50});
  CHECK(r[1] == std::pair<int64_t, int64_t>{50, 100});
  CHECK(r[2] == std::pair<int64_t, int64_t>{100, 125});
  CHECK(chunk_ranges(50, 50).size() == 1);
  CHECK(chunk_ranges(3, 50).size() == 1);
  CHECK_THROWS_AS(chunk_ranges(0, 50), Error);
  CHECK_THROWS_AS(chunk_ranges(10, 0), Error);
}

TEST_CASE("single-chunk frequency gating is bit-identical to the plain gate") {
  Rng rng(17);
  AttentionParams p = make_attention(AttentionKind::kFa, rng);
  Tensor h = random_uniform({10, 7}, -1.0, 1.0, rng);
  TapedAttention taped = bind_attention(nullptr, p, nullptr);
  Value plain = fa_gate(taped.fa, constant(h), Mode::kEval, false);
  Value chunked =
      fa_gate_chunked(taped.fa, constant(h), Mode::kEval, false, 10);
  CHECK(bit_equal(plain.tensor, chunked.tensor));
  Value chunked_wide =
      fa_gate_chunked(taped.fa, constant(h), Mode::kEval, false, 64);
  CHECK(bit_equal(plain.tensor, chunked_wide.tensor));
}

TEST_CASE("chunked frequency gating equals per-chunk plain gates") {
  Rng rng(19);
  AttentionParams p = make_attention(AttentionKind::kFa, rng);
  Tensor h = random_uniform({12, 6}, -1.0, 1.0, rng);
  TapedAttention taped = bind_attention(nullptr, p, nullptr);
  Value chunked =
      fa_gate_chunked(taped.fa, constant(h), Mode::kEval, false, 5);
  REQUIRE(chunked.shape() == std::vector<int64_t>{12, 6});
  int64_t row = 0;
  for (auto [start, stop] : chunk_ranges(12, 5)) {
    Tensor part({stop - start, 6},
                std::vector<double>(h.data() + start * 6,
                                    h.data() + stop * 6));
    Value g = fa_gate(taped.fa, constant(part), Mode::kEval, false);
    for (int64_t t = 0; t < stop - start; ++t, ++row) {
      for (int64_t d = 0; d < 6; ++d) {
        CHECK(chunked.tensor.at(row, d) == g.tensor.at(t, d));
      }
    }
  }
}

TEST_CASE("combined attention with a silenced frequency branch reduces to "
          "time attention") {
  Rng rng(23);
  AttentionParams da2 = make_attention(AttentionKind::kDa2, rng);
  da2.fa.conv4.w = Tensor(da2.fa.conv4.w.shape());
  da2.fa.conv4.b = Tensor(da2.fa.conv4.b.shape());

  AttentionParams ta;
  ta.kind = AttentionKind::kTa;
  ta.ta = da2.ta;

  Tensor h = random_uniform({11, 6}, -1.5, 1.5, rng);
  for (Mode mode : {Mode::kTrain, Mode::kEval}) {
    Tensor out_da2 = apply_all(da2, h, mode, false, 11);
    Tensor out_ta = apply_all(ta, h, mode, false, 11);
    CHECK(bit_equal(out_da2, out_ta));
  }
}

// ---------------------------------------------------------------------------
// Straight-line reference for the conv trunk, written with plain loops and
// compared in eval mode (running statistics as the normalizer).
// ---------------------------------------------------------------------------

using Map = std::vector<std::vector<double>>;  // [channel][position]

Map conv1d_ref(const Map& x, const Conv1dParams& p) {
  int c_in = static_cast<int>(x.size());
  int len = static_cast<int>(x[0].size());
  int pad = p.kernel / 2;
  Map y(p.out_ch, std::vector<double>(len, 0.0));
  for (int o = 0; o < p.out_ch; ++o) {
    for (int l = 0; l < len; ++l) {
      double acc = p.b.flat(o);
      for (int c = 0; c < c_in; ++c) {
        for (int k = 0; k < p.kernel; ++k) {
          int src = l + k - pad;
          if (src < 0 || src >= len) continue;
          acc += x[c][src] * p.w.at(o, c, k);
        }
      }
      y[o][l] = acc;
    }
  }
  return y;
}

Map bn_relu_eval_ref(const Map& x, const BatchNormParams& bn) {
  Map y = x;
  for (size_t c = 0; c < x.size(); ++c) {
    double m = bn.run_mean.flat(c);
    double inv = 1.0 / std::sqrt(bn.run_var.flat(c) + bn.eps);
    for (double& v : y[c]) {
      v = bn.gamma.flat(c) * (v - m) * inv + bn.beta.flat(c);
      v = std::max(v, 0.0);
    }
  }
  return y;
}

template <typename Trunk>
std::vector<double> trunk_ref(const Map& stack, const Trunk& p) {
  Map x = bn_relu_eval_ref(conv1d_ref(stack, p.conv1), p.bn1);
  x = bn_relu_eval_ref(conv1d_ref(x, p.conv2), p.bn2);
  x = bn_relu_eval_ref(conv1d_ref(x, p.conv3), p.bn3);
  return conv1d_ref(x, p.conv4)[0];
}

void randomize_buffers(AttentionParams& p, Rng& rng) {
  visit_buffers(p, [&rng](const std::string& name, Tensor& t) {
    bool is_var = name.find("run_var") != std::string::npos;
    t = is_var ? random_uniform(t.shape(), 0.5, 2.0, rng)
               : random_uniform(t.shape(), -0.5, 0.5, rng);
  });
}

TEST_CASE("pooled-trunk attention matches a straight-line reference") {
  Rng rng(29);
  const int64_t steps = 13, dims = 6;
  Tensor h = random_uniform({steps, dims}, -2.0, 2.0, rng);

  // Hand-computed pooled statistics.
  auto pool_time = [&](int64_t d) {
    double mx = h.at(0, d), sum = 0.0;
    for (int64_t t = 0; t < steps; ++t) {
      mx = std::max(mx, h.at(t, d));
      sum += h.at(t, d);
    }
    double avg = sum / steps, var = 0.0;
    for (int64_t t = 0; t < steps; ++t) {
      var += (h.at(t, d) - avg) * (h.at(t, d) - avg);
    }
    return std::array<double, 3>{mx, avg, std::sqrt(var / steps)};
  };
  auto pool_freq = [&](int64_t t) {
    double mx = h.at(t, 0), sum = 0.0;
    for (int64_t d = 0; d < dims; ++d) {
      mx = std::max(mx, h.at(t, d));
      sum += h.at(t, d);
    }
    double avg = sum / dims, var = 0.0;
    for (int64_t d = 0; d < dims; ++d) {
      var += (h.at(t, d) - avg) * (h.at(t, d) - avg);
    }
    return std::array<double, 3>{mx, avg, std::sqrt(var / dims)};
  };

  SUBCASE("frequency branch") {
    AttentionParams p = make_attention(AttentionKind::kFa, rng);
    randomize_buffers(p, rng);
    Map stack(3, std::vector<double>(dims));
    for (int64_t d = 0; d < dims; ++d) {
      auto s = pool_time(d);
      for (int c = 0; c < 3; ++c) stack[c][d] = s[c];
    }
    std::vector<double> gate = trunk_ref(stack, p.fa);
    Tensor out = apply_all(p, h, Mode::kEval, false, steps);
    for (int64_t t = 0; t < steps; ++t) {
      for (int64_t d = 0; d < dims; ++d) {
        double want = h.at(t, d) + 1.0 / (1.0 + std::exp(-gate[d]));
        CHECK(out.at(t, d) == doctest::Approx(want).epsilon(1e-12));
      }
    }
  }

  SUBCASE("time branch") {
    AttentionParams p = make_attention(AttentionKind::kTa, rng);
    randomize_buffers(p, rng);
    Map stack(3, std::vector<double>(steps));
    for (int64_t t = 0; t < steps; ++t) {
      auto s = pool_freq(t);
      for (int c = 0; c < 3; ++c) stack[c][t] = s[c];
    }
    std::vector<double> gate = trunk_ref(stack, p.ta);
    Tensor out = apply_all(p, h, Mode::kEval, false, steps);
    for (int64_t t = 0; t < steps; ++t) {
      for (int64_t d = 0; d < dims; ++d) {
        double want = h.at(t, d) + 1.0 / (1.0 + std::exp(-gate[t]));
        CHECK(out.at(t, d) == doctest::Approx(want).epsilon(1e-12));
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Gradient checks across every learnable tensor plus the hidden map.
// ---------------------------------------------------------------------------

double attention_fd_error(AttentionParams& params, const Tensor& h, Mode mode,
                          uint64_t probe_seed) {
  std::vector<Tensor*> tensors;
  visit_learnables(params,
                   [&](const std::string&, Tensor& t) { tensors.push_back(&t); });

  auto loss_of = [&](const Tensor& hv) {
    TapedAttention taped = bind_attention(nullptr, params, nullptr);
    Value out =
        apply_attention(taped, constant(hv), mode, false, hv.dim(0));
    Rng prng(probe_seed);
    Tensor probe = random_uniform(out.shape(), 0.25, 1.75, prng);
    double s = 0.0;
    for (int64_t i = 0; i < out.tensor.numel(); ++i) {
      s += out.tensor.flat(i) * probe.flat(i);
    }
    return s;
  };

  Tape tape;
  std::vector<Value> leaves;
  TapedAttention taped = bind_attention(&tape, params, &leaves);
  Value hv = tape.leaf(h);
  Value out = apply_attention(taped, hv, mode, false, h.dim(0));
  Rng prng(probe_seed);
  Tensor probe = random_uniform(out.shape(), 0.25, 1.75, prng);
  Gradients grads = tape.backward(sum_all(mul(out, constant(probe))));
  REQUIRE(leaves.size() == tensors.size());

  const double eps = 1e-5;
  double max_err = 0.0;
  auto check_tensor = [&](Tensor* t, const Tensor& g, const Tensor* h_sub) {
    for (int64_t i = 0; i < g.numel(); ++i) {
      Tensor base = h_sub != nullptr ? *h_sub : *t;
      Tensor plus = base.clone();
      plus.mutable_data()[i] += eps;
      Tensor minus = base.clone();
      minus.mutable_data()[i] -= eps;
      double lp, lm;
      if (h_sub != nullptr) {
        lp = loss_of(plus);
        lm = loss_of(minus);
      } else {
        *t = plus;
        lp = loss_of(h);
        *t = minus;
        lm = loss_of(h);
        *t = base;
      }
      double fd = (lp - lm) / (2.0 * eps);
      double an = g.flat(i);
      // Floor the denominator at 1e-6: biases feeding a train-mode
      // normalizer have exactly-zero true gradients, and central
      // differences only resolve them up to cancellation noise (~1e-10).
      double err = std::abs(an - fd) /
                   std::max({std::abs(an), std::abs(fd), 1e-6});
      max_err = std::max(max_err, err);
    }
  };
  for (size_t k = 0; k < tensors.size(); ++k) {
    check_tensor(tensors[k], grads.wrt(leaves[k]), nullptr);
  }
  check_tensor(nullptr, grads.wrt(hv), &h);
  return max_err;
}

TEST_CASE("attention gradients agree with finite differences") {
  Rng rng(31);
  Tensor h = random_uniform({6, 5}, -1.0, 1.0, rng);
  for (AttentionKind kind : {AttentionKind::kTa, AttentionKind::kFa,
                             AttentionKind::kDa1, AttentionKind::kDa2}) {
    AttentionParams p = make_attention(kind, rng);
    CHECK(attention_fd_error(p, h, Mode::kTrain, 77) < 1e-4);
  }
  // Eval mode differentiates through constants-as-normalizer instead.
  AttentionParams p = make_attention(AttentionKind::kTa, rng);
  randomize_buffers(p, rng);
  CHECK(attention_fd_error(p, h, Mode::kEval, 78) < 1e-4);
}

TEST_CASE("attention kind names round-trip and reject unknowns") {
  for (AttentionKind kind : {AttentionKind::kNone, AttentionKind::kTa,
                             AttentionKind::kFa, AttentionKind::kDa1,
                             AttentionKind::kDa2}) {
    CHECK(parse_attention_kind(to_string(kind)) == kind);
  }
  CHECK_THROWS_AS(parse_attention_kind("umbrella"), UsageError);
}

}  // namespace
}  // namespace attnvad
