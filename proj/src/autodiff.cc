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

#include "attnvad/autodiff.h"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <string>
#include <utility>

namespace attnvad {

namespace {

int node_of(const Value& v) { return v.traced() ? v.node : -1; }

Tape* common_tape(std::initializer_list<const Value*> vs) {
  Tape* t = nullptr;
  for (const Value* v : vs) {
    if (!v->traced()) continue;
    if (t != nullptr && t != v->tape) {
      throw Error("autodiff: op inputs belong to different tapes");
    }
    t = v->tape;
  }
  return t;
}

void accum(std::vector<Tensor>& grads, int idx, const Tensor& g) {
  if (idx < 0) return;
  accumulate(grads[idx], g);
}

[[noreturn]] void shape_fail(const char* op, const std::string& detail) {
  throw ShapeError(std::string(op) + ": " + detail);
}

void require(bool ok, const char* op, const std::string& detail) {
  if (!ok) shape_fail(op, detail);
}

// Product of dims before / after an axis, for block-wise axis operations.
int64_t outer_count(const std::vector<int64_t>& shape, int axis) {
  int64_t n = 1;
  for (int i = 0; i < axis; ++i) n *= shape[i];
  return n;
}

int64_t inner_count(const std::vector<int64_t>& shape, int axis) {
  int64_t n = 1;
  for (int i = axis + 1; i < static_cast<int>(shape.size()); ++i) n *= shape[i];
  return n;
}

void check_axis(const char* op, const Value& v, int axis) {
  if (axis < 0 || axis >= v.tensor.ndim()) {
    shape_fail(op, "axis " + std::to_string(axis) + " out of range for shape " +
                       v.tensor.shape_str());
  }
}

Value emit(Tape* tape, const char* op, std::vector<int> inputs, Tensor out,
           BackwardFn backward) {
  if (tape == nullptr) return Value{std::move(out)};
  Value v;
  v.tensor = out;
  v.tape = tape;
  v.node = tape->record(op, std::move(inputs), std::move(out),
                        std::move(backward));
  return v;
}

// Shared implementation for elementwise unary ops.
template <typename Fwd, typename Bwd>
Value unary_op(const char* op, const Value& v, Fwd fwd, Bwd bwd_factory) {
  Tensor out(v.tensor.shape());
  const double* x = v.tensor.data();
  double* y = out.mutable_data();
  int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) y[i] = fwd(x[i]);
  Tape* tape = common_tape({&v});
  if (tape == nullptr) return Value{std::move(out)};
  BackwardFn bw = bwd_factory(v, out);  // before out is moved from
  return emit(tape, op, {v.node}, std::move(out), std::move(bw));
}

}  // namespace

Value constant(Tensor t) { return Value{std::move(t)}; }

Value constant(double v) { return Value{Tensor::scalar(v)}; }

Tensor Gradients::wrt(const Value& v) const {
  if (!v.traced()) {
    throw Error("gradients: value is a constant, not a traced value");
  }
  if (v.node < 0 || v.node >= static_cast<int>(by_node_.size())) {
    throw Error("gradients: value does not belong to this tape");
  }
  const Tensor& g = by_node_[v.node];
  if (!g.defined()) return Tensor(v.tensor.shape());  // unused -> zeros
  return g;
}

Value Tape::leaf(Tensor t) {
  if (!t.defined()) throw Error("tape: leaf requires a defined tensor");
  Value v;
  v.tensor = t;
  v.tape = this;
  v.node = record("leaf", {}, std::move(t), BackwardFn());
  return v;
}

int Tape::record(const char* op, std::vector<int> inputs, Tensor value,
                 BackwardFn backward) {
  nodes_.push_back(
      TapeNode{op, std::move(inputs), std::move(value), std::move(backward)});
  return static_cast<int>(nodes_.size()) - 1;
}

Gradients Tape::backward(const Value& loss) {
  if (!loss.traced() || loss.tape != this) {
    throw Error("backward: loss is not recorded on this tape");
  }
  if (loss.tensor.numel() != 1) {
    throw ShapeError("backward: loss must be a scalar, got shape " +
                     loss.tensor.shape_str());
  }
  std::vector<Tensor> grads(nodes_.size());
  grads[loss.node] = Tensor::full(loss.tensor.shape(), 1.0);
  for (int i = loss.node; i >= 0; --i) {
    if (!grads[i].defined()) continue;  // node never influenced the loss
    const TapeNode& n = nodes_[i];
    if (n.backward) n.backward(grads[i], grads);
  }
  return Gradients(std::move(grads));
}

// ---------------------------------------------------------------------------
// Ops
// ---------------------------------------------------------------------------

namespace {

// C (m,n) += A (m,k) * B (k,n)
void mm_nn(const double* a, const double* b, double* c, int64_t m, int64_t k,
           int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t p = 0; p < k; ++p) {
      double av = a[i * k + p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      double* crow = c + i * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C (m,k) += G (m,n) * B^T, i.e. C[i,p] += sum_j G[i,j] B[p,j]
void mm_nt(const double* g, const double* b, double* c, int64_t m, int64_t k,
           int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t p = 0; p < k; ++p) {
      const double* grow = g + i * n;
      const double* brow = b + p * n;
      double s = 0.0;
      for (int64_t j = 0; j < n; ++j) s += grow[j] * brow[j];
      c[i * k + p] += s;
    }
  }
}

// C (k,n) += A^T * G, i.e. C[p,j] += sum_i A[i,p] G[i,j]
void mm_tn(const double* a, const double* g, double* c, int64_t m, int64_t k,
           int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t p = 0; p < k; ++p) {
      double av = a[i * k + p];
      if (av == 0.0) continue;
      const double* grow = g + i * n;
      double* crow = c + p * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * grow[j];
    }
  }
}

}  // namespace

Value matmul(const Value& a, const Value& b) {
  require(a.tensor.ndim() == 2 && b.tensor.ndim() == 2, "matmul",
          "expects 2-D inputs, got " + a.tensor.shape_str() + " and " +
              b.tensor.shape_str());
  int64_t m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  require(k == k2, "matmul",
          "inner dimensions disagree: " + a.tensor.shape_str() + " vs " +
              b.tensor.shape_str());
  Tensor out({m, n});
  mm_nn(a.tensor.data(), b.tensor.data(), out.mutable_data(), m, k, n);
  Tape* tape = common_tape({&a, &b});
  if (tape == nullptr) return Value{std::move(out)};
  Tensor ta = a.tensor, tb = b.tensor;
  int ia = node_of(a), ib = node_of(b);
  return emit(tape, "matmul", {ia, ib}, std::move(out),
              [ta, tb, ia, ib, m, k, n](const Tensor& g,
                                        std::vector<Tensor>& grads) {
                if (ia >= 0) {
                  Tensor ga({m, k});
                  mm_nt(g.data(), tb.data(), ga.mutable_data(), m, k, n);
                  accum(grads, ia, ga);
                }
                if (ib >= 0) {
                  Tensor gb({k, n});
                  mm_tn(ta.data(), g.data(), gb.mutable_data(), m, k, n);
                  accum(grads, ib, gb);
                }
              });
}

Value add(const Value& a, const Value& b) {
  require(a.tensor.same_shape(b.tensor), "add",
          "shape mismatch " + a.tensor.shape_str() + " vs " +
              b.tensor.shape_str());
  Tensor out(a.tensor.shape());
  const double* pa = a.tensor.data();
  const double* pb = b.tensor.data();
  double* po = out.mutable_data();
  for (int64_t i = 0; i < out.numel(); ++i) po[i] = pa[i] + pb[i];
  Tape* tape = common_tape({&a, &b});
  if (tape == nullptr) return Value{std::move(out)};
  int ia = node_of(a), ib = node_of(b);
  return emit(tape, "add", {ia, ib}, std::move(out),
              [ia, ib](const Tensor& g, std::vector<Tensor>& grads) {
                accum(grads, ia, g);
                accum(grads, ib, g);
              });
}

Value mul(const Value& a, const Value& b) {
  require(a.tensor.same_shape(b.tensor), "mul",
          "shape mismatch " + a.tensor.shape_str() + " vs " +
              b.tensor.shape_str());
  Tensor out(a.tensor.shape());
  const double* pa = a.tensor.data();
  const double* pb = b.tensor.data();
  double* po = out.mutable_data();
  for (int64_t i = 0; i < out.numel(); ++i) po[i] = pa[i] * pb[i];
  Tape* tape = common_tape({&a, &b});
  if (tape == nullptr) return Value{std::move(out)};
  Tensor ta = a.tensor, tb = b.tensor;
  int ia = node_of(a), ib = node_of(b);
  return emit(tape, "mul", {ia, ib}, std::move(out),
              [ta, tb, ia, ib](const Tensor& g, std::vector<Tensor>& grads) {
                int64_t n = g.numel();
                if (ia >= 0) {
                  Tensor ga(ta.shape());
                  double* p = ga.mutable_data();
                  const double* pg = g.data();
                  const double* pb2 = tb.data();
                  for (int64_t i = 0; i < n; ++i) p[i] = pg[i] * pb2[i];
                  accum(grads, ia, ga);
                }
                if (ib >= 0) {
                  Tensor gb(tb.shape());
                  double* p = gb.mutable_data();
                  const double* pg = g.data();
                  const double* pa2 = ta.data();
                  for (int64_t i = 0; i < n; ++i) p[i] = pg[i] * pa2[i];
                  accum(grads, ib, gb);
                }
              });
}

Value concat(const std::vector<Value>& vs, int axis) {
  require(!vs.empty(), "concat", "requires at least one input");
  check_axis("concat", vs[0], axis);
  const std::vector<int64_t>& base = vs[0].tensor.shape();
  int64_t axis_total = 0;
  for (const Value& v : vs) {
    require(v.tensor.ndim() == static_cast<int>(base.size()), "concat",
            "rank mismatch " + v.tensor.shape_str() + " vs " +
                vs[0].tensor.shape_str());
    for (int d = 0; d < static_cast<int>(base.size()); ++d) {
      if (d == axis) continue;
      require(v.tensor.shape()[d] == base[d], "concat",
              "shape mismatch off the concat axis: " + v.tensor.shape_str() +
                  " vs " + vs[0].tensor.shape_str());
    }
    axis_total += v.tensor.shape()[axis];
  }
  std::vector<int64_t> out_shape = base;
  out_shape[axis] = axis_total;
  Tensor out(out_shape);
  int64_t outer = outer_count(out_shape, axis);
  int64_t inner = inner_count(out_shape, axis);
  int64_t out_span = axis_total * inner;
  double* po = out.mutable_data();
  int64_t offset = 0;
  for (const Value& v : vs) {
    int64_t span = v.tensor.shape()[axis] * inner;
    const double* pv = v.tensor.data();
    for (int64_t o = 0; o < outer; ++o) {
      std::copy(pv + o * span, pv + (o + 1) * span,
                po + o * out_span + offset);
    }
    offset += span;
  }
  Tape* tape = nullptr;
  for (const Value& v : vs) {
    if (!v.traced()) continue;
    if (tape != nullptr && tape != v.tape) {
      throw Error("autodiff: op inputs belong to different tapes");
    }
    tape = v.tape;
  }
  if (tape == nullptr) return Value{std::move(out)};
  std::vector<int> ids;
  std::vector<int64_t> spans;
  for (const Value& v : vs) {
    ids.push_back(node_of(v));
    spans.push_back(v.tensor.shape()[axis] * inner);
  }
  std::vector<std::vector<int64_t>> in_shapes;
  for (const Value& v : vs) in_shapes.push_back(v.tensor.shape());
  return emit(tape, "concat", ids, std::move(out),
              [ids, spans, in_shapes, outer, out_span](
                  const Tensor& g, std::vector<Tensor>& grads) {
                const double* pg = g.data();
                int64_t offset2 = 0;
                for (size_t j = 0; j < ids.size(); ++j) {
                  int64_t span = spans[j];
                  if (ids[j] >= 0) {
                    Tensor gi(in_shapes[j]);
                    double* pi = gi.mutable_data();
                    for (int64_t o = 0; o < outer; ++o) {
                      std::copy(pg + o * out_span + offset2,
                                pg + o * out_span + offset2 + span,
                                pi + o * span);
                    }
                    accum(grads, ids[j], gi);
                  }
                  offset2 += span;
                }
              });
}

Value slice(const Value& v, int axis, int64_t start, int64_t stop) {
  check_axis("slice", v, axis);
  int64_t d = v.tensor.shape()[axis];
  require(0 <= start && start < stop && stop <= d, "slice",
          "range [" + std::to_string(start) + ", " + std::to_string(stop) +
              ") invalid for axis of size " + std::to_string(d));
  std::vector<int64_t> out_shape = v.tensor.shape();
  out_shape[axis] = stop - start;
  Tensor out(out_shape);
  int64_t outer = outer_count(out_shape, axis);
  int64_t inner = inner_count(out_shape, axis);
  int64_t in_span = d * inner;
  int64_t out_span = (stop - start) * inner;
  const double* pv = v.tensor.data();
  double* po = out.mutable_data();
  for (int64_t o = 0; o < outer; ++o) {
    std::copy(pv + o * in_span + start * inner,
              pv + o * in_span + start * inner + out_span, po + o * out_span);
  }
  Tape* tape = common_tape({&v});
  if (tape == nullptr) return Value{std::move(out)};
  std::vector<int64_t> in_shape = v.tensor.shape();
  int iv = node_of(v);
  return emit(tape, "slice", {iv}, std::move(out),
              [iv, in_shape, outer, inner, in_span, out_span, start](
                  const Tensor& g, std::vector<Tensor>& grads) {
                Tensor gi(in_shape);
                double* pi = gi.mutable_data();
                const double* pg = g.data();
                for (int64_t o = 0; o < outer; ++o) {
                  std::copy(pg + o * out_span, pg + (o + 1) * out_span,
                            pi + o * in_span + start * inner);
                }
                accum(grads, iv, gi);
              });
}

Value expand(const Value& v, int axis, int64_t n) {
  check_axis("expand", v, axis);
  require(v.tensor.shape()[axis] == 1, "expand",
          "axis " + std::to_string(axis) + " of " + v.tensor.shape_str() +
              " must have size 1");
  require(n >= 1, "expand", "target size must be >= 1");
  std::vector<int64_t> out_shape = v.tensor.shape();
  out_shape[axis] = n;
  Tensor out(out_shape);
  int64_t outer = outer_count(out_shape, axis);
  int64_t inner = inner_count(out_shape, axis);
  const double* pv = v.tensor.data();
  double* po = out.mutable_data();
  for (int64_t o = 0; o < outer; ++o) {
    const double* src = pv + o * inner;
    double* dst = po + o * n * inner;
    for (int64_t r = 0; r < n; ++r) {
      std::copy(src, src + inner, dst + r * inner);
    }
  }
  Tape* tape = common_tape({&v});
  if (tape == nullptr) return Value{std::move(out)};
  std::vector<int64_t> in_shape = v.tensor.shape();
  int iv = node_of(v);
  return emit(tape, "expand", {iv}, std::move(out),
              [iv, in_shape, outer, inner, n](const Tensor& g,
                                              std::vector<Tensor>& grads) {
                Tensor gi(in_shape);  // zero-filled
                double* pi = gi.mutable_data();
                const double* pg = g.data();
                for (int64_t o = 0; o < outer; ++o) {
                  double* dst = pi + o * inner;
                  for (int64_t r = 0; r < n; ++r) {
                    const double* src = pg + (o * n + r) * inner;
                    for (int64_t i = 0; i < inner; ++i) dst[i] += src[i];
                  }
                }
                accum(grads, iv, gi);
              });
}

Value reshape(const Value& v, std::vector<int64_t> shape) {
  Tensor out = v.tensor.reshaped(shape);
  Tape* tape = common_tape({&v});
  if (tape == nullptr) return Value{std::move(out)};
  std::vector<int64_t> in_shape = v.tensor.shape();
  int iv = node_of(v);
  return emit(tape, "reshape", {iv}, std::move(out),
              [iv, in_shape](const Tensor& g, std::vector<Tensor>& grads) {
                accum(grads, iv, g.reshaped(in_shape));
              });
}

Value sigmoid(const Value& v) {
  return unary_op(
      "sigmoid", v,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](const Value& in, const Tensor& out) {
        int iv = node_of(in);
        Tensor y = out;
        return BackwardFn([iv, y](const Tensor& g,
                                  std::vector<Tensor>& grads) {
          Tensor gi(y.shape());
          double* p = gi.mutable_data();
          const double* pg = g.data();
          const double* py = y.data();
          for (int64_t i = 0; i < y.numel(); ++i) {
            p[i] = pg[i] * py[i] * (1.0 - py[i]);
          }
          accum(grads, iv, gi);
        });
      });
}

Value tanh(const Value& v) {
  return unary_op(
      "tanh", v, [](double x) { return std::tanh(x); },
      [](const Value& in, const Tensor& out) {
        int iv = node_of(in);
        Tensor y = out;
        return BackwardFn([iv, y](const Tensor& g,
                                  std::vector<Tensor>& grads) {
          Tensor gi(y.shape());
          double* p = gi.mutable_data();
          const double* pg = g.data();
          const double* py = y.data();
          for (int64_t i = 0; i < y.numel(); ++i) {
            p[i] = pg[i] * (1.0 - py[i] * py[i]);
          }
          accum(grads, iv, gi);
        });
      });
}

Value relu(const Value& v) {
  return unary_op(
      "relu", v, [](double x) { return x > 0.0 ? x : 0.0; },
      [](const Value& in, const Tensor&) {
        int iv = node_of(in);
        Tensor x = in.tensor;
        return BackwardFn([iv, x](const Tensor& g,
                                  std::vector<Tensor>& grads) {
          Tensor gi(x.shape());
          double* p = gi.mutable_data();
          const double* pg = g.data();
          const double* px = x.data();
          for (int64_t i = 0; i < x.numel(); ++i) {
            p[i] = px[i] > 0.0 ? pg[i] : 0.0;
          }
          accum(grads, iv, gi);
        });
      });
}

Value log(const Value& v) {
  const double* px = v.tensor.data();
  for (int64_t i = 0; i < v.tensor.numel(); ++i) {
    if (!(px[i] > 0.0)) {
      throw NumericError("log: non-positive input " + std::to_string(px[i]) +
                         " at flat index " + std::to_string(i));
    }
  }
  return unary_op(
      "log", v, [](double x) { return std::log(x); },
      [](const Value& in, const Tensor&) {
        int iv = node_of(in);
        Tensor x = in.tensor;
        return BackwardFn([iv, x](const Tensor& g,
                                  std::vector<Tensor>& grads) {
          Tensor gi(x.shape());
          double* p = gi.mutable_data();
          const double* pg = g.data();
          const double* px2 = x.data();
          for (int64_t i = 0; i < x.numel(); ++i) p[i] = pg[i] / px2[i];
          accum(grads, iv, gi);
        });
      });
}

Value power(const Value& v, double exponent) {
  Tensor out(v.tensor.shape());
  const double* px = v.tensor.data();
  double* py = out.mutable_data();
  for (int64_t i = 0; i < out.numel(); ++i) {
    double y = std::pow(px[i], exponent);
    if (!std::isfinite(y)) {
      throw NumericError("power: base " + std::to_string(px[i]) +
                         " with exponent " + std::to_string(exponent) +
                         " gives a non-finite result");
    }
    py[i] = y;
  }
  Tape* tape = common_tape({&v});
  if (tape == nullptr) return Value{std::move(out)};
  Tensor x = v.tensor;
  int iv = node_of(v);
  return emit(tape, "power", {iv}, std::move(out),
              [iv, x, exponent](const Tensor& g, std::vector<Tensor>& grads) {
                Tensor gi(x.shape());
                double* p = gi.mutable_data();
                const double* pg = g.data();
                const double* px2 = x.data();
                for (int64_t i = 0; i < x.numel(); ++i) {
                  // Subgradient convention: d(x^p)/dx at x == 0 with p < 1
                  // (e.g. sqrt at the origin) is taken as 0 instead of +inf.
                  if (px2[i] == 0.0 && exponent < 1.0) {
                    p[i] = 0.0;
                  } else {
                    p[i] = pg[i] * exponent * std::pow(px2[i], exponent - 1.0);
                  }
                }
                accum(grads, iv, gi);
              });
}

Value clamp(const Value& v, double lo, double hi) {
  if (!(lo <= hi)) throw Error("clamp: lo must be <= hi");
  return unary_op(
      "clamp", v,
      [lo, hi](double x) { return std::min(std::max(x, lo), hi); },
      [lo, hi](const Value& in, const Tensor&) {
        int iv = node_of(in);
        Tensor x = in.tensor;
        return BackwardFn([iv, x, lo, hi](const Tensor& g,
                                          std::vector<Tensor>& grads) {
          Tensor gi(x.shape());
          double* p = gi.mutable_data();
          const double* pg = g.data();
          const double* px = x.data();
          for (int64_t i = 0; i < x.numel(); ++i) {
            p[i] = (px[i] >= lo && px[i] <= hi) ? pg[i] : 0.0;
          }
          accum(grads, iv, gi);
        });
      });
}

namespace {

Value reduce_all(const char* op, const Value& v, bool mean) {
  const double* px = v.tensor.data();
  int64_t n = v.tensor.numel();
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) s += px[i];
  if (mean) s /= static_cast<double>(n);
  Tensor out = Tensor::scalar(s);
  Tape* tape = common_tape({&v});
  if (tape == nullptr) return Value{std::move(out)};
  std::vector<int64_t> in_shape = v.tensor.shape();
  int iv = node_of(v);
  double w = mean ? 1.0 / static_cast<double>(n) : 1.0;
  return emit(tape, op, {iv}, std::move(out),
              [iv, in_shape, w](const Tensor& g, std::vector<Tensor>& grads) {
                double gv = g.flat(0) * w;
                accum(grads, iv, Tensor::full(in_shape, gv));
              });
}

Value reduce_axis(const char* op, const Value& v, int axis, bool mean) {
  check_axis(op, v, axis);
  std::vector<int64_t> out_shape = v.tensor.shape();
  int64_t d = out_shape[axis];
  out_shape[axis] = 1;
  Tensor out(out_shape);
  int64_t outer = outer_count(v.tensor.shape(), axis);
  int64_t inner = inner_count(v.tensor.shape(), axis);
  const double* px = v.tensor.data();
  double* po = out.mutable_data();
  double w = mean ? 1.0 / static_cast<double>(d) : 1.0;
  for (int64_t o = 0; o < outer; ++o) {
    double* dst = po + o * inner;
    for (int64_t r = 0; r < d; ++r) {
      const double* src = px + (o * d + r) * inner;
      for (int64_t i = 0; i < inner; ++i) dst[i] += src[i];
    }
    if (mean) {
      for (int64_t i = 0; i < inner; ++i) dst[i] *= w;
    }
  }
  Tape* tape = common_tape({&v});
  if (tape == nullptr) return Value{std::move(out)};
  std::vector<int64_t> in_shape = v.tensor.shape();
  int iv = node_of(v);
  return emit(tape, op, {iv}, std::move(out),
              [iv, in_shape, outer, inner, d, w](const Tensor& g,
                                                 std::vector<Tensor>& grads) {
                Tensor gi(in_shape);
                double* pi = gi.mutable_data();
                const double* pg = g.data();
                for (int64_t o = 0; o < outer; ++o) {
                  const double* src = pg + o * inner;
                  for (int64_t r = 0; r < d; ++r) {
                    double* dst = pi + (o * d + r) * inner;
                    for (int64_t i = 0; i < inner; ++i) dst[i] = src[i] * w;
                  }
                }
                accum(grads, iv, gi);
              });
}

}  // namespace

Value sum_all(const Value& v) { return reduce_all("sum", v, false); }
Value mean_all(const Value& v) { return reduce_all("mean", v, true); }
Value sum_axis(const Value& v, int axis) {
  return reduce_axis("sum_axis", v, axis, false);
}
Value mean_axis(const Value& v, int axis) {
  return reduce_axis("mean_axis", v, axis, true);
}

Value max_axis(const Value& v, int axis) {
  check_axis("max_axis", v, axis);
  std::vector<int64_t> out_shape = v.tensor.shape();
  int64_t d = out_shape[axis];
  out_shape[axis] = 1;
  Tensor out(out_shape);
  int64_t outer = outer_count(v.tensor.shape(), axis);
  int64_t inner = inner_count(v.tensor.shape(), axis);
  // argmax per output element; ties keep the lowest index.
  std::vector<int64_t> argmax(static_cast<size_t>(outer * inner), 0);
  const double* px = v.tensor.data();
  double* po = out.mutable_data();
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t i = 0; i < inner; ++i) {
      double best = px[(o * d) * inner + i];
      int64_t best_r = 0;
      for (int64_t r = 1; r < d; ++r) {
        double x = px[(o * d + r) * inner + i];
        if (x > best) {
          best = x;
          best_r = r;
        }
      }
      po[o * inner + i] = best;
      argmax[o * inner + i] = best_r;
    }
  }
  Tape* tape = common_tape({&v});
  if (tape == nullptr) return Value{std::move(out)};
  std::vector<int64_t> in_shape = v.tensor.shape();
  int iv = node_of(v);
  return emit(tape, "max_axis", {iv}, std::move(out),
              [iv, in_shape, outer, inner, d, argmax](
                  const Tensor& g, std::vector<Tensor>& grads) {
                Tensor gi(in_shape);  // zeros
                double* pi = gi.mutable_data();
                const double* pg = g.data();
                for (int64_t o = 0; o < outer; ++o) {
                  for (int64_t i = 0; i < inner; ++i) {
                    int64_t r = argmax[o * inner + i];
                    pi[(o * d + r) * inner + i] = pg[o * inner + i];
                  }
                }
                accum(grads, iv, gi);
              });
}

Value transpose(const Value& v) {
  require(v.tensor.ndim() == 2, "transpose",
          "expects a 2-D input, got " + v.tensor.shape_str());
  int64_t m = v.dim(0), n = v.dim(1);
  Tensor out({n, m});
  const double* px = v.tensor.data();
  double* po = out.mutable_data();
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) po[j * m + i] = px[i * n + j];
  }
  Tape* tape = common_tape({&v});
  if (tape == nullptr) return Value{std::move(out)};
  int iv = node_of(v);
  return emit(tape, "transpose", {iv}, std::move(out),
              [iv, m, n](const Tensor& g, std::vector<Tensor>& grads) {
                Tensor gi({m, n});
                double* pi = gi.mutable_data();
                const double* pg = g.data();
                for (int64_t j = 0; j < n; ++j) {
                  for (int64_t i = 0; i < m; ++i) pi[i * n + j] = pg[j * m + i];
                }
                accum(grads, iv, gi);
              });
}

// ---------------------------------------------------------------------------
// Convolutions (zero-padded "same" cross-correlation, odd kernels)
// ---------------------------------------------------------------------------

namespace {

void conv1d_checks(const Value& x, const Value& w) {
  require(x.tensor.ndim() == 2, "conv1d",
          "input must be (channels, length), got " + x.tensor.shape_str());
  require(w.tensor.ndim() == 3, "conv1d",
          "weights must be (out, in, k), got " + w.tensor.shape_str());
  require(w.dim(1) == x.dim(0), "conv1d",
          "input channels disagree: x " + x.tensor.shape_str() + " vs w " +
              w.tensor.shape_str());
  require(w.dim(2) % 2 == 1, "conv1d",
          "kernel size must be odd, got " + std::to_string(w.dim(2)));
}

// out (O,L) += correlate(x (C,L), w (O,C,K)), zero padding (K-1)/2.
void conv1d_fwd(const double* x, const double* w, double* out, int64_t C,
                int64_t L, int64_t O, int64_t K) {
  int64_t P = (K - 1) / 2;
  for (int64_t o = 0; o < O; ++o) {
    for (int64_t c = 0; c < C; ++c) {
      for (int64_t k = 0; k < K; ++k) {
        double wv = w[(o * C + c) * K + k];
        if (wv == 0.0) continue;
        int64_t shift = k - P;  // x index = l + shift
        int64_t lo = std::max<int64_t>(0, -shift);
        int64_t hi = std::min<int64_t>(L, L - shift);
        const double* xrow = x + c * L + shift;
        double* orow = out + o * L;
        for (int64_t l = lo; l < hi; ++l) orow[l] += wv * xrow[l];
      }
    }
  }
}

// gx (C,L) += correlate-adjoint of g (O,L) with w.
void conv1d_bwd_x(const double* g, const double* w, double* gx, int64_t C,
                  int64_t L, int64_t O, int64_t K) {
  int64_t P = (K - 1) / 2;
  for (int64_t o = 0; o < O; ++o) {
    for (int64_t c = 0; c < C; ++c) {
      for (int64_t k = 0; k < K; ++k) {
        double wv = w[(o * C + c) * K + k];
        if (wv == 0.0) continue;
        int64_t shift = k - P;
        int64_t lo = std::max<int64_t>(0, -shift);
        int64_t hi = std::min<int64_t>(L, L - shift);
        const double* grow = g + o * L;
        double* xrow = gx + c * L + shift;
        for (int64_t l = lo; l < hi; ++l) xrow[l] += wv * grow[l];
      }
    }
  }
}

// gw (O,C,K) += sum_l g[o,l] * x[c, l+k-P]
void conv1d_bwd_w(const double* g, const double* x, double* gw, int64_t C,
                  int64_t L, int64_t O, int64_t K) {
  int64_t P = (K - 1) / 2;
  for (int64_t o = 0; o < O; ++o) {
    for (int64_t c = 0; c < C; ++c) {
      for (int64_t k = 0; k < K; ++k) {
        int64_t shift = k - P;
        int64_t lo = std::max<int64_t>(0, -shift);
        int64_t hi = std::min<int64_t>(L, L - shift);
        const double* grow = g + o * L;
        const double* xrow = x + c * L + shift;
        double s = 0.0;
        for (int64_t l = lo; l < hi; ++l) s += grow[l] * xrow[l];
        gw[(o * C + c) * K + k] += s;
      }
    }
  }
}

}  // namespace

Value conv1d(const Value& x, const Value& w) {
  conv1d_checks(x, w);
  int64_t C = x.dim(0), L = x.dim(1), O = w.dim(0), K = w.dim(2);
  Tensor out({O, L});
  conv1d_fwd(x.tensor.data(), w.tensor.data(), out.mutable_data(), C, L, O, K);
  Tape* tape = common_tape({&x, &w});
  if (tape == nullptr) return Value{std::move(out)};
  Tensor tx = x.tensor, tw = w.tensor;
  int ix = node_of(x), iw = node_of(w);
  return emit(tape, "conv1d", {ix, iw}, std::move(out),
              [tx, tw, ix, iw, C, L, O, K](const Tensor& g,
                                           std::vector<Tensor>& grads) {
                if (ix >= 0) {
                  Tensor gx({C, L});
                  conv1d_bwd_x(g.data(), tw.data(), gx.mutable_data(), C, L, O,
                               K);
                  accum(grads, ix, gx);
                }
                if (iw >= 0) {
                  Tensor gw({O, C, K});
                  conv1d_bwd_w(g.data(), tx.data(), gw.mutable_data(), C, L, O,
                               K);
                  accum(grads, iw, gw);
                }
              });
}

namespace {

void conv2d_checks(const Value& x, const Value& w) {
  require(x.tensor.ndim() == 3, "conv2d",
          "input must be (channels, rows, cols), got " +
              x.tensor.shape_str());
  require(w.tensor.ndim() == 4, "conv2d",
          "weights must be (out, in, k, k), got " + w.tensor.shape_str());
  require(w.dim(1) == x.dim(0), "conv2d",
          "input channels disagree: x " + x.tensor.shape_str() + " vs w " +
              w.tensor.shape_str());
  require(w.dim(2) == w.dim(3), "conv2d",
          "kernel must be square, got " + w.tensor.shape_str());
  require(w.dim(2) % 2 == 1, "conv2d",
          "kernel size must be odd, got " + std::to_string(w.dim(2)));
}

enum class Conv2dPass { kForward, kGradInput, kGradWeight };

// One loop nest drives all three conv2d computations over the same stencil.
void conv2d_kernel(Conv2dPass pass, const double* x, const double* w,
                   const double* g, double* out, int64_t C, int64_t A,
                   int64_t B, int64_t O, int64_t K) {
  int64_t P = (K - 1) / 2;
  for (int64_t o = 0; o < O; ++o) {
    for (int64_t c = 0; c < C; ++c) {
      for (int64_t ki = 0; ki < K; ++ki) {
        for (int64_t kj = 0; kj < K; ++kj) {
          int64_t si = ki - P, sj = kj - P;
          int64_t alo = std::max<int64_t>(0, -si);
          int64_t ahi = std::min<int64_t>(A, A - si);
          int64_t blo = std::max<int64_t>(0, -sj);
          int64_t bhi = std::min<int64_t>(B, B - sj);
          int64_t widx = ((o * C + c) * K + ki) * K + kj;
          if (pass == Conv2dPass::kForward ||
              pass == Conv2dPass::kGradInput) {
            double wv = w[widx];
            if (wv == 0.0) continue;
            for (int64_t a = alo; a < ahi; ++a) {
              for (int64_t b = blo; b < bhi; ++b) {
                if (pass == Conv2dPass::kForward) {
                  out[(o * A + a) * B + b] +=
                      wv * x[(c * A + a + si) * B + b + sj];
                } else {
                  out[(c * A + a + si) * B + b + sj] +=
                      wv * g[(o * A + a) * B + b];
                }
              }
            }
          } else {
            double s = 0.0;
            for (int64_t a = alo; a < ahi; ++a) {
              for (int64_t b = blo; b < bhi; ++b) {
                s += g[(o * A + a) * B + b] * x[(c * A + a + si) * B + b + sj];
              }
            }
            out[widx] += s;
          }
        }
      }
    }
  }
}

}  // namespace

Value conv2d(const Value& x, const Value& w) {
  conv2d_checks(x, w);
  int64_t C = x.dim(0), A = x.dim(1), B = x.dim(2);
  int64_t O = w.dim(0), K = w.dim(2);
  Tensor out({O, A, B});
  conv2d_kernel(Conv2dPass::kForward, x.tensor.data(), w.tensor.data(),
                nullptr, out.mutable_data(), C, A, B, O, K);
  Tape* tape = common_tape({&x, &w});
  if (tape == nullptr) return Value{std::move(out)};
  Tensor tx = x.tensor, tw = w.tensor;
  int ix = node_of(x), iw = node_of(w);
  return emit(tape, "conv2d", {ix, iw}, std::move(out),
              [tx, tw, ix, iw, C, A, B, O, K](const Tensor& g,
                                              std::vector<Tensor>& grads) {
                if (ix >= 0) {
                  Tensor gx({C, A, B});
                  conv2d_kernel(Conv2dPass::kGradInput, nullptr, tw.data(),
                                g.data(), gx.mutable_data(), C, A, B, O, K);
                  accum(grads, ix, gx);
                }
                if (iw >= 0) {
                  Tensor gw({O, C, K, K});
                  conv2d_kernel(Conv2dPass::kGradWeight, tx.data(), nullptr,
                                g.data(), gw.mutable_data(), C, A, B, O, K);
                  accum(grads, iw, gw);
                }
              });
}

// ---------------------------------------------------------------------------
// Scalar conveniences
// ---------------------------------------------------------------------------

Value scale(const Value& v, double c) {
  return mul(v, constant(Tensor::full(v.tensor.shape(), c)));
}

Value add_scalar(const Value& v, double c) {
  return add(v, constant(Tensor::full(v.tensor.shape(), c)));
}

Value rsub_scalar(double c, const Value& v) {
  return add(scale(v, -1.0), constant(Tensor::full(v.tensor.shape(), c)));
}

Value sub(const Value& a, const Value& b) { return add(a, scale(b, -1.0)); }

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

double grad_check(const std::function<Value(Tape&, const Value&)>& f,
                  const Tensor& point, double eps) {
  auto multi = [&f](Tape& tape, std::vector<Value>& xs) {
    return f(tape, xs[0]);
  };
  return grad_check_multi(multi, {point}, eps);
}

double grad_check_multi(
    const std::function<Value(Tape&, std::vector<Value>&)>& f,
    const std::vector<Tensor>& points, double eps) {
  Tape tape;
  std::vector<Value> xs;
  xs.reserve(points.size());
  for (const Tensor& p : points) xs.push_back(tape.leaf(p));
  Value loss = f(tape, xs);
  if (loss.tensor.numel() != 1) {
    throw ShapeError("grad_check: function must return a scalar, got " +
                     loss.tensor.shape_str());
  }
  Gradients grads = tape.backward(loss);
  std::vector<Tensor> analytic;
  analytic.reserve(xs.size());
  for (const Value& x : xs) analytic.push_back(grads.wrt(x));

  auto eval_at = [&f](const std::vector<Tensor>& pts) {
    Tape scratch;  // ops on constants record nothing
    std::vector<Value> cs;
    cs.reserve(pts.size());
    for (const Tensor& p : pts) cs.push_back(constant(p));
    return f(scratch, cs).tensor.flat(0);
  };

  double max_rel = 0.0;
  for (size_t ti = 0; ti < points.size(); ++ti) {
    for (int64_t j = 0; j < points[ti].numel(); ++j) {
      std::vector<Tensor> pts = points;
      Tensor plus = points[ti].clone();
      plus.mutable_data()[j] += eps;
      pts[ti] = plus;
      double fp = eval_at(pts);
      Tensor minus = points[ti].clone();
      minus.mutable_data()[j] -= eps;
      pts[ti] = minus;
      double fm = eval_at(pts);
      double fd = (fp - fm) / (2.0 * eps);
      double an = analytic[ti].flat(j);
      double denom = std::max({std::fabs(an), std::fabs(fd), 1e-8});
      max_rel = std::max(max_rel, std::fabs(an - fd) / denom);
    }
  }
  return max_rel;
}

}  // namespace attnvad
