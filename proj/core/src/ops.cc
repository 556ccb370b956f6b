// Copyright 2026 The narp Authors.
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

#include "narp/ops.h"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

#include "eigen_view.h"

namespace narp {
namespace {

using internal::Block;
using internal::RowMat;
using internal::View;

void RequireMatrix(const Tensor& t, const char* op) {
  if (t.rank() > 2) {
    throw std::invalid_argument(std::string(op) + ": expected rank <= 2, got " +
                                t.ShapeString());
  }
}

void Accumulate(Tensor& dst, const Tensor& src) {
  auto d = dst.values();
  auto s = src.values();
  for (size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

// Products on inference tapes run over a zero-padded copy whose row count is a
// multiple of kRowPanel, so every row goes through the same kernel path and a
// row's result does not depend on the other rows in the batch.
constexpr int kRowPanel = 48;

template <typename Rhs>
void RowInvariantProduct(const Tensor& a, const Rhs& rhs, Tensor& out) {
  const int rows = a.rows();
  const int padded = (rows + kRowPanel - 1) / kRowPanel * kRowPanel;
  RowMat lhs = RowMat::Zero(padded, a.cols());
  lhs.topRows(rows) = View(a);
  RowMat result(padded, out.cols());
  result.noalias() = lhs * rhs;
  View(out) = result.topRows(rows);
}

}  // namespace

Var MatMul(Var a, Var b) {
  Tape& tape = *a.tape;
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  RequireMatrix(av, "MatMul");
  RequireMatrix(bv, "MatMul");
  if (av.cols() != bv.rows()) {
    throw std::invalid_argument("MatMul shape mismatch " + av.ShapeString() +
                                " x " + bv.ShapeString());
  }
  Tensor out = Tensor::Matrix(av.rows(), bv.cols());
  if (tape.recording()) {
    View(out).noalias() = View(av) * View(bv);
  } else {
    RowInvariantProduct(av, View(bv), out);
  }
  return tape.Push(std::move(out), {a, b}, [a, b](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(a)) View(t.grad(a.id)).noalias() += View(g) * View(t.value(b)).transpose();
    if (t.needs_grad(b)) View(t.grad(b.id)).noalias() += View(t.value(a)).transpose() * View(g);
  });
}

Var MatMulTransposed(Var a, Var b) {
  Tape& tape = *a.tape;
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  RequireMatrix(av, "MatMulTransposed");
  RequireMatrix(bv, "MatMulTransposed");
  if (av.cols() != bv.cols()) {
    throw std::invalid_argument("MatMulTransposed shape mismatch " +
                                av.ShapeString() + " x " + bv.ShapeString() + "^T");
  }
  Tensor out = Tensor::Matrix(av.rows(), bv.rows());
  if (tape.recording()) {
    View(out).noalias() = View(av) * View(bv).transpose();
  } else {
    RowInvariantProduct(av, View(bv).transpose(), out);
  }
  return tape.Push(std::move(out), {a, b}, [a, b](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(a)) View(t.grad(a.id)).noalias() += View(g) * View(t.value(b));
    if (t.needs_grad(b)) View(t.grad(b.id)).noalias() += View(g).transpose() * View(t.value(a));
  });
}

Var Add(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (!av.SameShape(bv)) {
    throw std::invalid_argument("Add shape mismatch " + av.ShapeString() + " vs " +
                                bv.ShapeString());
  }
  Tensor out = av;
  Accumulate(out, bv);
  return a.tape->Push(std::move(out), {a, b}, [a, b](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(a)) Accumulate(t.grad(a.id), g);
    if (t.needs_grad(b)) Accumulate(t.grad(b.id), g);
  });
}

Var AddBias(Var x, Var bias) {
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  RequireMatrix(xv, "AddBias");
  if (static_cast<int>(bv.size()) != xv.cols()) {
    throw std::invalid_argument("AddBias: bias " + bv.ShapeString() +
                                " does not match " + xv.ShapeString());
  }
  Tensor out = xv;
  for (int r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (int c = 0; c < out.cols(); ++c) row[c] += bv[c];
  }
  return x.tape->Push(std::move(out), {x, bias}, [x, bias](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    if (t.needs_grad(x)) Accumulate(t.grad(x.id), g);
    if (t.needs_grad(bias)) {
      Tensor& gb = t.grad(bias.id);
      for (int r = 0; r < g.rows(); ++r) {
        auto row = g.row(r);
        for (int c = 0; c < g.cols(); ++c) gb[c] += row[c];
      }
    }
  });
}

Var Scale(Var x, float factor) {
  Tensor out = x.value();
  for (float& v : out.values()) v *= factor;
  return x.tape->Push(std::move(out), {x}, [x, factor](Tape& t, int self) {
    auto g = t.grad(self).values();
    auto gx = t.grad(x.id).values();
    for (size_t i = 0; i < g.size(); ++i) gx[i] += factor * g[i];
  });
}

Var Relu(Var x) {
  Tensor out = x.value();
  for (float& v : out.values()) v = v > 0.0f ? v : 0.0f;
  return x.tape->Push(std::move(out), {x}, [x](Tape& t, int self) {
    auto g = t.grad(self).values();
    auto xv = t.value(x).values();
    auto gx = t.grad(x.id).values();
    for (size_t i = 0; i < g.size(); ++i) {
      if (xv[i] > 0.0f) gx[i] += g[i];
    }
  });
}

Var LayerNorm(Var x, Var gamma, Var beta, float eps) {
  const Tensor& xv = x.value();
  RequireMatrix(xv, "LayerNorm");
  const int n = xv.rows(), m = xv.cols();
  if (static_cast<int>(gamma.value().size()) != m ||
      static_cast<int>(beta.value().size()) != m) {
    throw std::invalid_argument("LayerNorm: gain/bias width mismatch");
  }
  auto normalized = std::make_shared<Tensor>(xv.shape());
  auto inv_std = std::make_shared<std::vector<float>>(n);
  Tensor out(xv.shape());
  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();
  for (int r = 0; r < n; ++r) {
    auto in = xv.row(r);
    double mean = 0.0;
    for (int c = 0; c < m; ++c) mean += in[c];
    mean /= m;
    double var = 0.0;
    for (int c = 0; c < m; ++c) {
      double d = in[c] - mean;
      var += d * d;
    }
    var /= m;
    const double rstd = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = static_cast<float>(rstd);
    auto xh = normalized->row(r);
    auto y = out.row(r);
    for (int c = 0; c < m; ++c) {
      xh[c] = static_cast<float>((in[c] - mean) * rstd);
      y[c] = xh[c] * gv[c] + bv[c];
    }
  }
  return x.tape->Push(
      std::move(out), {x, gamma, beta},
      [x, gamma, beta, normalized, inv_std](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        const Tensor& gv = t.value(gamma);
        const int n = g.rows(), m = g.cols();
        if (t.needs_grad(gamma) || t.needs_grad(beta)) {
          Tensor& dg = t.grad(gamma.id);
          Tensor& db = t.grad(beta.id);
          for (int r = 0; r < n; ++r) {
            auto gr = g.row(r);
            auto xh = normalized->row(r);
            for (int c = 0; c < m; ++c) {
              dg[c] += gr[c] * xh[c];
              db[c] += gr[c];
            }
          }
        }
        if (!t.needs_grad(x)) return;
        Tensor& dx = t.grad(x.id);
        std::vector<double> dxh(m);
        for (int r = 0; r < n; ++r) {
          auto gr = g.row(r);
          auto xh = normalized->row(r);
          double mean_d = 0.0, mean_dx = 0.0;
          for (int c = 0; c < m; ++c) {
            dxh[c] = static_cast<double>(gr[c]) * gv[c];
            mean_d += dxh[c];
            mean_dx += dxh[c] * xh[c];
          }
          mean_d /= m;
          mean_dx /= m;
          auto out = dx.row(r);
          const double rstd = (*inv_std)[r];
          for (int c = 0; c < m; ++c) {
            out[c] += static_cast<float>(rstd * (dxh[c] - mean_d - xh[c] * mean_dx));
          }
        }
      });
}

Var Dropout(Var x, float rate) {
  Tape& tape = *x.tape;
  if (!tape.training() || rate <= 0.0f) return x;
  if (rate >= 1.0f) throw std::invalid_argument("dropout rate must be < 1");
  Rng& rng = tape.rng();
  const float keep_scale = 1.0f / (1.0f - rate);
  auto mask = std::make_shared<std::vector<float>>(x.value().size());
  Tensor out = x.value();
  for (size_t i = 0; i < out.size(); ++i) {
    (*mask)[i] = rng.Uniform() < rate ? 0.0f : keep_scale;
    out[i] *= (*mask)[i];
  }
  return tape.Push(std::move(out), {x}, [x, mask](Tape& t, int self) {
    auto g = t.grad(self).values();
    auto gx = t.grad(x.id).values();
    for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (*mask)[i];
  });
}

Var Sum(Var x) {
  double total = 0.0;
  for (float v : x.value().values()) total += v;
  return x.tape->Push(Tensor::Scalar(static_cast<float>(total)), {x},
                      [x](Tape& t, int self) {
                        const float g = t.grad(self)[0];
                        for (float& v : t.grad(x.id).values()) v += g;
                      });
}

Var GatherRows(Var table, std::vector<int> rows) {
  const Tensor& tv = table.value();
  RequireMatrix(tv, "GatherRows");
  const int m = tv.cols();
  if (rows.empty()) throw std::invalid_argument("GatherRows: empty index list");
  Tensor out = Tensor::Matrix(static_cast<int>(rows.size()), m);
  for (size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= tv.rows()) {
      throw std::out_of_range("GatherRows: row " + std::to_string(rows[r]) +
                              " outside " + tv.ShapeString());
    }
    std::copy_n(tv.row(rows[r]).data(), m, out.row(static_cast<int>(r)).data());
  }
  auto index = std::make_shared<std::vector<int>>(std::move(rows));
  return table.tape->Push(std::move(out), {table}, [table, index](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    Tensor& gt = t.grad(table.id);
    const int m = g.cols();
    for (size_t r = 0; r < index->size(); ++r) {
      auto src = g.row(static_cast<int>(r));
      auto dst = gt.row((*index)[r]);
      for (int c = 0; c < m; ++c) dst[c] += src[c];
    }
  });
}

Var ConcatRows(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("ConcatRows: no inputs");
  const int m = parts[0].value().cols();
  int total = 0;
  for (const Var& p : parts) {
    RequireMatrix(p.value(), "ConcatRows");
    if (p.value().cols() != m) throw std::invalid_argument("ConcatRows: width mismatch");
    total += p.value().rows();
  }
  Tensor out = Tensor::Matrix(total, m);
  int offset = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    std::copy(v.data(), v.data() + v.size(), out.row(offset).data());
    offset += v.rows();
  }
  return parts[0].tape->Push(std::move(out), parts, [parts](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    int offset = 0;
    for (const Var& p : parts) {
      const int rows = t.value(p).rows();
      if (t.needs_grad(p)) {
        auto gp = t.grad(p.id).values();
        const float* src = g.row(offset).data();
        for (size_t i = 0; i < gp.size(); ++i) gp[i] += src[i];
      }
      offset += rows;
    }
  });
}

Var ConcatCols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("ConcatCols: no inputs");
  const int n = parts[0].value().rows();
  int total = 0;
  for (const Var& p : parts) {
    RequireMatrix(p.value(), "ConcatCols");
    if (p.value().rows() != n) throw std::invalid_argument("ConcatCols: height mismatch");
    total += p.value().cols();
  }
  Tensor out = Tensor::Matrix(n, total);
  int offset = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    Block(out, 0, n, offset, v.cols()) = View(v);
    offset += v.cols();
  }
  return parts[0].tape->Push(std::move(out), parts, [parts](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    int offset = 0;
    for (const Var& p : parts) {
      const int cols = t.value(p).cols();
      if (t.needs_grad(p)) {
        View(t.grad(p.id)) += Block(g, 0, g.rows(), offset, cols);
      }
      offset += cols;
    }
  });
}

Var LogSoftmax(Var x) {
  Tensor out = LogSoftmaxRows(x.value());
  return x.tape->Push(std::move(out), {x}, [x](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& gx = t.grad(x.id);
    for (int r = 0; r < g.rows(); ++r) {
      auto gr = g.row(r);
      auto yr = y.row(r);
      auto out = gx.row(r);
      double total = 0.0;
      for (float v : gr) total += v;
      for (size_t c = 0; c < gr.size(); ++c) {
        out[c] += static_cast<float>(gr[c] - std::exp(static_cast<double>(yr[c])) * total);
      }
    }
  });
}

namespace {

void CheckLayout(const AttentionLayout& layout, int query_rows, int key_rows) {
  for (const auto& s : layout.segments) {
    if (s.query_begin < 0 || s.query_count < 0 ||
        s.query_begin + s.query_count > query_rows || s.key_begin < 0 ||
        s.key_count <= 0 || s.key_begin + s.key_count > key_rows) {
      throw std::out_of_range("attention segment outside its operands");
    }
  }
}

}  // namespace

Var Attention(Var q, Var k, Var v, int heads, const AttentionLayout& layout) {
  const Tensor& qv = q.value();
  const Tensor& kv = k.value();
  const Tensor& vv = v.value();
  const int d = qv.cols();
  if (kv.cols() != d || vv.cols() != d || kv.rows() != vv.rows() || heads <= 0 ||
      d % heads != 0) {
    throw std::invalid_argument("Attention: incompatible shapes or head count");
  }
  CheckLayout(layout, qv.rows(), kv.rows());
  const int dh = d / heads;
  const float scale = 1.0f / std::sqrt(static_cast<float>(dh));
  // Softmax weights per (segment, head), kept for the backward pass.
  auto probs = std::make_shared<std::vector<RowMat>>();
  probs->reserve(layout.segments.size() * heads);
  Tensor out = Tensor::Matrix(qv.rows(), d);
  for (const auto& s : layout.segments) {
    for (int h = 0; h < heads; ++h) {
      RowMat p(s.query_count, s.key_count);
      if (s.query_count > 0) {
        p.noalias() = Block(qv, s.query_begin, s.query_count, h * dh, dh) *
                      Block(kv, s.key_begin, s.key_count, h * dh, dh).transpose();
        p *= scale;
        for (int i = 0; i < s.query_count; ++i) {
          const int visible = layout.causal ? std::min(i + 1, s.key_count) : s.key_count;
          float mx = p(i, 0);
          for (int j = 1; j < visible; ++j) mx = std::max(mx, p(i, j));
          double total = 0.0;
          for (int j = 0; j < visible; ++j) total += std::exp(static_cast<double>(p(i, j) - mx));
          for (int j = 0; j < visible; ++j) {
            p(i, j) = static_cast<float>(std::exp(static_cast<double>(p(i, j) - mx)) / total);
          }
          for (int j = visible; j < s.key_count; ++j) p(i, j) = 0.0f;
        }
        Block(out, s.query_begin, s.query_count, h * dh, dh).noalias() =
            p * Block(vv, s.key_begin, s.key_count, h * dh, dh);
      }
      probs->push_back(std::move(p));
    }
  }
  return q.tape->Push(
      std::move(out), {q, k, v},
      [q, k, v, heads, layout, probs, scale](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        const Tensor& qv = t.value(q);
        const Tensor& kv = t.value(k);
        const Tensor& vv = t.value(v);
        const int dh = qv.cols() / heads;
        Tensor* gq = t.needs_grad(q) ? &t.grad(q.id) : nullptr;
        Tensor* gk = t.needs_grad(k) ? &t.grad(k.id) : nullptr;
        Tensor* gv = t.needs_grad(v) ? &t.grad(v.id) : nullptr;
        size_t index = 0;
        for (const auto& s : layout.segments) {
          for (int h = 0; h < heads; ++h, ++index) {
            if (s.query_count == 0) continue;
            const RowMat& p = (*probs)[index];
            auto go = Block(g, s.query_begin, s.query_count, h * dh, dh);
            if (gv) {
              Block(*gv, s.key_begin, s.key_count, h * dh, dh).noalias() +=
                  p.transpose() * go;
            }
            if (!gq && !gk) continue;
            RowMat dp = go * Block(vv, s.key_begin, s.key_count, h * dh, dh).transpose();
            RowMat ds(p.rows(), p.cols());
            for (int i = 0; i < p.rows(); ++i) {
              double dot = 0.0;
              for (int j = 0; j < p.cols(); ++j) dot += static_cast<double>(dp(i, j)) * p(i, j);
              for (int j = 0; j < p.cols(); ++j) {
                ds(i, j) = static_cast<float>(p(i, j) * (dp(i, j) - dot)) * scale;
              }
            }
            if (gq) {
              Block(*gq, s.query_begin, s.query_count, h * dh, dh).noalias() +=
                  ds * Block(kv, s.key_begin, s.key_count, h * dh, dh);
            }
            if (gk) {
              Block(*gk, s.key_begin, s.key_count, h * dh, dh).noalias() +=
                  ds.transpose() * Block(qv, s.query_begin, s.query_count, h * dh, dh);
            }
          }
        }
      });
}

Var SegmentScores(Var q, Var keys, const AttentionLayout& layout, float scale,
                  int width) {
  const Tensor& qv = q.value();
  const Tensor& kv = keys.value();
  if (qv.cols() != kv.cols()) throw std::invalid_argument("SegmentScores: width mismatch");
  CheckLayout(layout, qv.rows(), kv.rows());
  Tensor out = Tensor::Matrix(qv.rows(), width, kMaskedLogit);
  for (const auto& s : layout.segments) {
    if (s.key_count > width) throw std::invalid_argument("SegmentScores: width too small");
    if (s.query_count == 0) continue;
    Block(out, s.query_begin, s.query_count, 0, s.key_count).noalias() =
        scale * (Block(qv, s.query_begin, s.query_count, 0, qv.cols()) *
                 Block(kv, s.key_begin, s.key_count, 0, kv.cols()).transpose());
  }
  return q.tape->Push(std::move(out), {q, keys}, [q, keys, layout, scale](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    const Tensor& qv = t.value(q);
    const Tensor& kv = t.value(keys);
    const int d = qv.cols();
    for (const auto& s : layout.segments) {
      if (s.query_count == 0) continue;
      auto gs = Block(g, s.query_begin, s.query_count, 0, s.key_count);
      if (t.needs_grad(q)) {
        Block(t.grad(q.id), s.query_begin, s.query_count, 0, d).noalias() +=
            scale * (gs * Block(kv, s.key_begin, s.key_count, 0, d));
      }
      if (t.needs_grad(keys)) {
        Block(t.grad(keys.id), s.key_begin, s.key_count, 0, d).noalias() +=
            scale * (gs.transpose() * Block(qv, s.query_begin, s.query_count, 0, d));
      }
    }
  });
}

Var SmoothedNllRows(Var logits, std::span<const int> targets,
                    std::span<const int> widths, float epsilon) {
  const Tensor& x = logits.value();
  RequireMatrix(x, "SmoothedNllRows");
  const int n = x.rows();
  if (static_cast<int>(targets.size()) != n || static_cast<int>(widths.size()) != n) {
    throw std::invalid_argument("SmoothedNllRows: one target and width per row");
  }
  if (!(epsilon >= 0.0f && epsilon < 1.0f)) {
    throw std::domain_error("label smoothing epsilon must lie in [0, 1)");
  }
  double total = 0.0;
  for (int r = 0; r < n; ++r) {
    const int w = widths[r];
    if (w < 2 || w > x.cols()) throw std::domain_error("NLL needs at least 2 classes");
    if (targets[r] < 0 || targets[r] >= w) {
      throw std::domain_error("label " + std::to_string(targets[r]) +
                              " out of range for " + std::to_string(w) + " classes");
    }
    auto row = x.row(r);
    float mx = row[0];
    for (int c = 1; c < w; ++c) mx = std::max(mx, row[c]);
    double z = 0.0;
    for (int c = 0; c < w; ++c) z += std::exp(static_cast<double>(row[c] - mx));
    const double lse = mx + std::log(z);
    const double on = 1.0 - epsilon;
    const double off = static_cast<double>(epsilon) / (w - 1);
    double loss = 0.0;
    for (int c = 0; c < w; ++c) {
      const double logp = row[c] - lse;
      loss -= (c == targets[r] ? on : off) * logp;
    }
    total += loss;
  }
  auto tgt = std::make_shared<std::vector<int>>(targets.begin(), targets.end());
  auto wid = std::make_shared<std::vector<int>>(widths.begin(), widths.end());
  return logits.tape->Push(
      Tensor::Scalar(static_cast<float>(total)), {logits},
      [logits, tgt, wid, epsilon](Tape& t, int self) {
        const float g = t.grad(self)[0];
        const Tensor& x = t.value(logits);
        Tensor& gx = t.grad(logits.id);
        for (int r = 0; r < x.rows(); ++r) {
          const int w = (*wid)[r];
          auto row = x.row(r);
          auto out = gx.row(r);
          float mx = row[0];
          for (int c = 1; c < w; ++c) mx = std::max(mx, row[c]);
          double z = 0.0;
          for (int c = 0; c < w; ++c) z += std::exp(static_cast<double>(row[c] - mx));
          const double on = 1.0 - epsilon;
          const double off = static_cast<double>(epsilon) / (w - 1);
          for (int c = 0; c < w; ++c) {
            const double p = std::exp(static_cast<double>(row[c] - mx)) / z;
            const double q = c == (*tgt)[r] ? on : off;
            out[c] += static_cast<float>(g * (p - q));
          }
        }
      });
}

Var LabelSmoothedNll(Var logits, int label, float epsilon) {
  const Tensor& x = logits.value();
  if (x.rows() != 1) throw std::invalid_argument("LabelSmoothedNll expects one row");
  const int classes = x.cols();
  if (classes < 2) throw std::domain_error("NLL needs at least 2 classes");
  if (label < 0 || label >= classes) {
    throw std::domain_error("label " + std::to_string(label) + " out of range");
  }
  const int target[1] = {label};
  const int width[1] = {classes};
  return SmoothedNllRows(logits, target, width, epsilon);
}

}  // namespace narp
