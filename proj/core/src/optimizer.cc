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

#include "narp/optimizer.h"

#include <cmath>
#include <stdexcept>

namespace narp {

double LearningRate(const AdamConfig& config, int64_t step) {
  if (step < 0) throw std::invalid_argument("negative optimizer step");
  if (config.warmup_steps > 0 && step <= config.warmup_steps) {
    return config.base_lr * static_cast<double>(step) / config.warmup_steps;
  }
  const double intervals =
      static_cast<double>(step - config.warmup_steps) / config.decay_interval;
  return config.base_lr * std::pow(static_cast<double>(config.decay_rate), intervals);
}

AdamOptimizer::AdamOptimizer(std::vector<Parameter*> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  first_moment_.reserve(params_.size());
  second_moment_.reserve(params_.size());
  for (Parameter* p : params_) {
    first_moment_.emplace_back(p->value.shape());
    second_moment_.emplace_back(p->value.shape());
  }
}

void AdamOptimizer::FillMissingGrads() {
  for (Parameter* p : params_) {
    if (!p->grad) p->grad = Tensor(p->value.shape());
  }
}

double AdamOptimizer::ClipGradNorm(double max_norm) {
  double total = 0.0;
  for (Parameter* p : params_) {
    if (!p->grad) continue;
    for (float g : p->grad->values()) total += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(total);
  if (norm > max_norm && norm > 0.0) {
    const float factor = static_cast<float>(max_norm / norm);
    for (Parameter* p : params_) {
      if (!p->grad) continue;
      for (float& g : p->grad->values()) g *= factor;
    }
  }
  return norm;
}

void AdamOptimizer::Step() {
  for (Parameter* p : params_) {
    if (!p->grad) {
      throw std::logic_error("adam update without a gradient for " + p->name);
    }
    if (!p->grad->AllFinite()) {
      throw std::domain_error("non-finite gradient for " + p->name);
    }
  }
  ++step_;
  const double lr = LearningRate(config_, step_);
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    auto value = p.value.values();
    auto grad = p.grad->values();
    auto m = first_moment_[i].values();
    auto v = second_moment_[i].values();
    for (size_t j = 0; j < value.size(); ++j) {
      const double g = grad[j];
      m[j] = static_cast<float>(b1 * m[j] + (1.0 - b1) * g);
      v[j] = static_cast<float>(b2 * v[j] + (1.0 - b2) * g * g);
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      value[j] = static_cast<float>(value[j] - lr * m_hat / (std::sqrt(v_hat) + config_.epsilon));
    }
    p.grad.reset();
  }
}

}  // namespace narp
