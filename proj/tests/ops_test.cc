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

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "narp/autodiff.h"
#include "narp/gradcheck.h"
#include "narp/ops.h"
#include "narp/rng.h"
#include "narp/tensor.h"

namespace narp {
namespace {

Tensor RandomTensor(std::vector<int> shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (float& v : t.values()) v = static_cast<float>(rng.Normal());
  return t;
}

GradCheckOptions Tight() {
  GradCheckOptions o;
  o.step = 1e-2f;
  o.tolerance = 2e-2;
  return o;
}

TEST(TensorTest, ShapesAndViews) {
  Tensor m = Tensor::Matrix(2, 3, 1.5f);
  EXPECT_EQ(m.rows(), 2);
  EXPECT_EQ(m.cols(), 3);
  EXPECT_EQ(m.size(), 6u);
  m.at(1, 2) = 4.0f;
  EXPECT_EQ(m.row(1)[2], 4.0f);
  EXPECT_EQ(m.ShapeString(), "[2,3]");
  Tensor v({4});
  EXPECT_EQ(v.rows(), 1);
  EXPECT_EQ(v.cols(), 4);
  EXPECT_EQ(Tensor::Scalar(2.0f).item(), 2.0f);
}

TEST(TensorTest, RejectsMismatchedValues) {
  EXPECT_THROW(Tensor({2, 2}, std::vector<float>{1.0f, 2.0f}), std::invalid_argument);
}

TEST(TensorTest, LogSoftmaxRowsNormalizes) {
  Tensor x({2, 3}, {1.0f, 2.0f, 3.0f, -1.0f, 0.0f, 50.0f});
  Tensor y = LogSoftmaxRows(x);
  for (int r = 0; r < 2; ++r) {
    double total = 0.0;
    for (float v : y.row(r)) total += std::exp(v);
    EXPECT_NEAR(total, 1.0, 1e-6);
  }
  EXPECT_NEAR(y.at(0, 2), 3.0 - std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0)), 1e-6);
}

TEST(TensorTest, AllFiniteDetectsNan) {
  Tensor t({2});
  EXPECT_TRUE(t.AllFinite());
  t[1] = std::nanf("");
  EXPECT_FALSE(t.AllFinite());
}

TEST(OpsTest, MatMulForward) {
  Tape tape;
  Var a = tape.Constant(Tensor({2, 2}, {1, 2, 3, 4}));
  Var b = tape.Constant(Tensor({2, 1}, {5, 6}));
  Tensor c = MatMul(a, b).value();
  EXPECT_EQ(c, Tensor({2, 1}, {17, 39}));
  Tensor d = MatMulTransposed(a, a).value();
  EXPECT_EQ(d, Tensor({2, 2}, {5, 11, 11, 25}));
}

TEST(OpsTest, ShapeMismatchThrows) {
  Tape tape;
  Var a = tape.Constant(Tensor({2, 3}));
  Var b = tape.Constant(Tensor({2, 3}));
  EXPECT_THROW(MatMul(a, b), std::invalid_argument);
}

// Label-smoothed NLL for logits [1, 0, 0], label 0, epsilon 0.1: the target
// distribution is [0.9, 0.05, 0.05], giving 0.9 (ln(e+2) - 1) + 0.1 ln(e+2).
TEST(OpsTest, LabelSmoothedNllMatchesHandValue) {
  Tape tape;
  Var logits = tape.Constant(Tensor({3}, {1.0f, 0.0f, 0.0f}));
  EXPECT_NEAR(LabelSmoothedNll(logits, 0, 0.1f).value().item(), 0.6514447, 1e-6);
  EXPECT_NEAR(LabelSmoothedNll(logits, 0, 0.0f).value().item(), 0.5514447, 1e-6);
}

TEST(OpsTest, SmoothedNllRowsIgnoresPaddedColumns) {
  Tape tape;
  Var logits = tape.Constant(Tensor({2, 4}, {1, 0, 0, 0, 1, 0, 0, kMaskedLogit}));
  const std::vector<int> targets = {0, 0};
  const std::vector<int> widths = {4, 3};
  Var loss = SmoothedNllRows(logits, targets, widths, 0.1f);
  // Row 1 is the three-way case above; row 0 spreads epsilon over 3 others.
  const double z = std::log(std::exp(1.0) + 3.0);
  const double row0 = 0.9 * (z - 1.0) + 0.1 * z;
  EXPECT_NEAR(loss.value().item(), row0 + 0.6514447, 1e-5);
}

TEST(OpsTest, DropoutIsIdentityOutsideTraining) {
  Tape tape;
  Var x = tape.Constant(Tensor({3}, {1, 2, 3}));
  EXPECT_EQ(Dropout(x, 0.5f).value(), x.value());
}

TEST(OpsTest, DropoutScalesKeptUnits) {
  Rng rng(3);
  Tape tape(Tape::Options{.record = true, .training = true, .rng = &rng});
  Var x = tape.Constant(Tensor({1000}, 1.0f));
  const Tensor y = Dropout(x, 0.25f).value();
  int kept = 0;
  for (float v : y.values()) {
    if (v != 0.0f) {
      EXPECT_NEAR(v, 1.0f / 0.75f, 1e-6);
      ++kept;
    }
  }
  EXPECT_GT(kept, 650);
  EXPECT_LT(kept, 850);
}

TEST(OpsTest, CausalAttentionIgnoresFutureKeys) {
  Rng rng(5);
  Tape tape;
  Tensor q = RandomTensor({3, 4}, rng), k = RandomTensor({3, 4}, rng), v = RandomTensor({3, 4}, rng);
  AttentionLayout layout{{{0, 3, 0, 3}}, true};
  const Tensor full = Attention(tape.Constant(q), tape.Constant(k), tape.Constant(v), 2, layout).value();
  // Changing the last key and value leaves the first two outputs untouched.
  for (int c = 0; c < 4; ++c) {
    k.at(2, c) += 10.0f;
    v.at(2, c) -= 3.0f;
  }
  const Tensor changed =
      Attention(tape.Constant(q), tape.Constant(k), tape.Constant(v), 2, layout).value();
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 4; ++c) EXPECT_FLOAT_EQ(full.at(r, c), changed.at(r, c));
  }
}

TEST(OpsTest, SegmentScoresPadsWithMaskedLogit) {
  Tape tape;
  Var q = tape.Constant(Tensor({2, 2}, {1, 0, 0, 1}));
  Var keys = tape.Constant(Tensor({3, 2}, {1, 2, 3, 4, 5, 6}));
  AttentionLayout layout{{{0, 1, 0, 1}, {1, 1, 1, 2}}, false};
  const Tensor s = SegmentScores(q, keys, layout, 1.0f, 2).value();
  EXPECT_EQ(s.at(0, 0), 1.0f);
  EXPECT_EQ(s.at(0, 1), kMaskedLogit);
  EXPECT_EQ(s.at(1, 0), 4.0f);
  EXPECT_EQ(s.at(1, 1), 6.0f);
}

class OpGradientTest : public ::testing::Test {
 protected:
  Parameter& Add(const std::string& name, std::vector<int> shape) {
    return store_.Add(name, RandomTensor(std::move(shape), rng_));
  }
  void ExpectGradientsMatch(const ScalarFunction& f) {
    const GradCheckReport report = FiniteDiffCheck(f, store_.all(), Tight());
    EXPECT_GT(report.checked, 0);
    EXPECT_TRUE(report.passed()) << "max relative error " << report.max_relative_error << " at "
                                 << (report.failures.empty() ? "" : report.failures[0].param);
  }
  Rng rng_{11};
  ParameterStore store_;
};

TEST_F(OpGradientTest, DenseChain) {
  Parameter& a = Add("a", {3, 4});
  Parameter& b = Add("b", {4, 5});
  Parameter& bias = Add("bias", {5});
  Parameter& g = Add("g", {5});
  Parameter& beta = Add("beta", {5});
  ExpectGradientsMatch([&](Tape& t) {
    Var h = AddBias(MatMul(t.Param(a), t.Param(b)), t.Param(bias));
    h = Relu(LayerNorm(h, t.Param(g), t.Param(beta)));
    return Sum(Scale(MatMulTransposed(h, h), 0.5f));
  });
}

TEST_F(OpGradientTest, AttentionAndGather) {
  Parameter& x = Add("x", {5, 4});
  Parameter& y = Add("y", {2, 4});
  AttentionLayout self{{{0, 3, 0, 3}, {3, 2, 3, 2}}, false};
  AttentionLayout causal{{{0, 3, 0, 3}, {3, 2, 3, 2}}, true};
  ExpectGradientsMatch([&](Tape& t) {
    Var h = ConcatRows({t.Param(x), GatherRows(t.Param(y), {1, 0})});
    Var s = Attention(GatherRows(h, {0, 1, 2, 3, 4}), h, h, 2, self);
    Var c = Attention(s, s, GatherRows(h, {2, 3, 4, 5, 6}), 1, causal);
    return Sum(LogSoftmax(ConcatCols({c, s})));
  });
}

TEST_F(OpGradientTest, SmoothedLossAndSegmentScores) {
  Parameter& q = Add("q", {3, 4});
  Parameter& keys = Add("keys", {5, 4});
  Parameter& table = Add("table", {2, 3});
  AttentionLayout layout{{{0, 2, 0, 3}, {2, 1, 3, 2}}, false};
  const std::vector<int> targets = {1, 4, 0};
  const std::vector<int> widths = {5, 5, 4};
  ExpectGradientsMatch([&](Tape& t) {
    Var scores = SegmentScores(t.Param(q), t.Param(keys), layout, 0.5f, 3);
    Var logits = ConcatCols({GatherRows(t.Param(table), {0, 1, 0}), scores});
    return narp::Add(SmoothedNllRows(logits, targets, widths, 0.1f),
               LabelSmoothedNll(GatherRows(t.Param(table), {1}), 2, 0.2f));
  });
}

TEST(GradCheckTest, DetectsWrongGradient) {
  ParameterStore store;
  Parameter& p = store.Add("p", Tensor({2}, {0.5f, -1.0f}));
  // A node whose backward pass is deliberately off by a factor of two.
  ScalarFunction f = [&](Tape& t) {
    Var x = t.Param(p);
    Tensor v = Tensor::Scalar(x.value()[0] * 3.0f);
    return t.Push(v, {x}, [x](Tape& tape, int self) {
      tape.grad(x.id)[0] += 6.0f * tape.grad(self).item();
    });
  };
  const GradCheckReport report = FiniteDiffCheck(f, store.all(), GradCheckOptions{});
  EXPECT_FALSE(report.passed());
  EXPECT_EQ(report.failures.front().param, "p");
}

TEST(ParameterStoreTest, RejectsDuplicateNames) {
  ParameterStore store;
  store.Add("w", Tensor({2}));
  EXPECT_THROW(store.Add("w", Tensor({2})), std::invalid_argument);
  EXPECT_EQ(store.ElementCount(), 2u);
  EXPECT_EQ(store.WithPrefix("w").size(), 1u);
  EXPECT_EQ(store.Find("missing"), nullptr);
}

TEST(TapeTest, GradientsAccumulateAcrossReuse) {
  ParameterStore store;
  Parameter& p = store.Add("p", Tensor({2}, {1.0f, 2.0f}));
  Tape tape;
  Var x = tape.Param(p);
  tape.Backward(Sum(Add(x, x)));
  ASSERT_TRUE(p.grad.has_value());
  EXPECT_EQ(*p.grad, Tensor({2}, {2.0f, 2.0f}));
}

}  // namespace
}  // namespace narp
