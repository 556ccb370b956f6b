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
#include <limits>
#include <sstream>

#include <gtest/gtest.h>

#include "narp/checkpoint.h"
#include "narp/optimizer.h"

namespace narp {
namespace {

AdamConfig Constant(float lr) {
  AdamConfig c;
  c.base_lr = lr;
  c.warmup_steps = 0;
  c.decay_rate = 1.0f;
  return c;
}

TEST(LearningRateTest, WarmupThenDecay) {
  AdamConfig c;  // 4e-5, warmup 1000, 0.98 per 1000 steps
  EXPECT_DOUBLE_EQ(LearningRate(c, 0), 0.0);
  EXPECT_NEAR(LearningRate(c, 500), 2e-5, 1e-10);
  EXPECT_NEAR(LearningRate(c, 1000), 4e-5, 1e-10);
  EXPECT_NEAR(LearningRate(c, 2000), 4e-5 * 0.98, 1e-11);
  EXPECT_NEAR(LearningRate(c, 3000), 4e-5 * 0.98 * 0.98, 1e-11);
  EXPECT_THROW(LearningRate(c, -1), std::invalid_argument);
}

// Hand trace for a single weight with gradient 0.5 twice: the bias-corrected
// moments are m = 0.5 and v = 0.25 after both steps, so each update is lr.
TEST(AdamTest, TwoStepHandTrace) {
  ParameterStore store;
  Parameter& w = store.Add("w", Tensor({1}, {1.0f}));
  AdamOptimizer adam(store.all(), Constant(0.1f));
  w.grad = Tensor({1}, {0.5f});
  adam.Step();
  EXPECT_NEAR(w.value[0], 0.9f, 1e-6);
  EXPECT_FALSE(w.grad.has_value());
  w.grad = Tensor({1}, {0.5f});
  adam.Step();
  EXPECT_NEAR(w.value[0], 0.8f, 1e-6);
  EXPECT_EQ(adam.step(), 2);
}

TEST(AdamTest, ChangingGradientHandTrace) {
  ParameterStore store;
  Parameter& w = store.Add("w", Tensor({1}, {0.0f}));
  AdamOptimizer adam(store.all(), Constant(0.01f));
  w.grad = Tensor({1}, {1.0f});
  adam.Step();
  w.grad = Tensor({1}, {-1.0f});
  adam.Step();
  // m = 0.09 - 0.1 = -0.01, m_hat = -0.01 / 0.19; v = 0.002, v_hat = 1.
  EXPECT_NEAR(w.value[0], -0.01 + 0.01 * (0.01 / 0.19), 1e-7);
}

TEST(AdamTest, MissingGradientIsAnError) {
  ParameterStore store;
  Parameter& a = store.Add("a", Tensor({1}, {1.0f}));
  store.Add("b", Tensor({1}, {1.0f}));
  AdamOptimizer adam(store.all(), Constant(0.1f));
  a.grad = Tensor({1}, {1.0f});
  EXPECT_THROW(adam.Step(), std::logic_error);
  adam.FillMissingGrads();
  adam.Step();
  EXPECT_FLOAT_EQ(store.Find("b")->value[0], 1.0f);
}

TEST(AdamTest, NonFiniteGradientIsAnError) {
  ParameterStore store;
  Parameter& a = store.Add("a", Tensor({1}, {1.0f}));
  AdamOptimizer adam(store.all(), Constant(0.1f));
  a.grad = Tensor({1}, {std::numeric_limits<float>::infinity()});
  EXPECT_THROW(adam.Step(), std::domain_error);
}

TEST(AdamTest, ClipGradNorm) {
  ParameterStore store;
  Parameter& a = store.Add("a", Tensor({2}));
  Parameter& b = store.Add("b", Tensor({1}));
  a.grad = Tensor({2}, {3.0f, 0.0f});
  b.grad = Tensor({1}, {4.0f});
  AdamOptimizer adam(store.all(), Constant(0.1f));
  EXPECT_NEAR(adam.ClipGradNorm(1.0), 5.0, 1e-9);
  EXPECT_NEAR((*a.grad)[0], 0.6f, 1e-6);
  EXPECT_NEAR((*b.grad)[0], 0.8f, 1e-6);
}

TEST(CheckpointTest, RoundTrip) {
  ParameterStore a;
  a.Add("enc/w", Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
  a.Add("bias", Tensor({3}, {-1.5f, 0.25f, 1e-7f}));
  std::stringstream buffer;
  WriteCheckpoint(buffer, a);
  ParameterStore b;
  b.Add("bias", Tensor({3}));
  b.Add("enc/w", Tensor({2, 3}));
  ReadCheckpoint(buffer, b);
  EXPECT_EQ(b.Find("enc/w")->value, a.Find("enc/w")->value);
  EXPECT_EQ(b.Find("bias")->value, a.Find("bias")->value);
}

TEST(CheckpointTest, RejectsShapeMismatchAndMissingParameters) {
  ParameterStore a;
  a.Add("w", Tensor({2, 3}));
  std::stringstream buffer;
  WriteCheckpoint(buffer, a);
  const std::string bytes = buffer.str();

  ParameterStore wrong_shape;
  wrong_shape.Add("w", Tensor({3, 2}));
  std::stringstream in1(bytes);
  EXPECT_THROW(ReadCheckpoint(in1, wrong_shape), std::runtime_error);

  ParameterStore extra;
  extra.Add("w", Tensor({2, 3}));
  extra.Add("v", Tensor({1}));
  std::stringstream in2(bytes);
  EXPECT_THROW(ReadCheckpoint(in2, extra), std::runtime_error);

  std::stringstream truncated(bytes.substr(0, bytes.size() - 4));
  ParameterStore same;
  same.Add("w", Tensor({2, 3}));
  EXPECT_THROW(ReadCheckpoint(truncated, same), std::runtime_error);
}

}  // namespace
}  // namespace narp
