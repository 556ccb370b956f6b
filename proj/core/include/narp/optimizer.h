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

#ifndef NARP_OPTIMIZER_H_
#define NARP_OPTIMIZER_H_

#include <cstdint>
#include <vector>

#include "narp/autodiff.h"

namespace narp {

struct AdamConfig {
  float base_lr = 4e-5f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float epsilon = 1e-8f;
  int64_t warmup_steps = 1000;
  // Multiplicative decay applied once per `decay_interval` steps after warmup
  // (continuously interpolated).
  float decay_rate = 0.98f;
  int64_t decay_interval = 1000;
};

// Linear warmup from 0 to base_lr, then exponential decay.
double LearningRate(const AdamConfig& config, int64_t step);

// First/second moment state for one parameter list. The parameter list is
// fixed at construction; moments share each parameter's shape.
class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<Parameter*> params, AdamConfig config);

  // Applies one update to every parameter and consumes (resets) its
  // gradient. Throws std::logic_error if any gradient is missing and
  // std::domain_error if one is non-finite. Parameters left out of the last
  // backward pass must carry an explicit zero gradient; see FillMissingGrads.
  void Step();

  // Gives every parameter without a gradient an all-zero gradient.
  void FillMissingGrads();

  // Scales all gradients so their global L2 norm is at most `max_norm`.
  // Returns the norm before clipping.
  double ClipGradNorm(double max_norm);

  int64_t step() const { return step_; }
  const AdamConfig& config() const { return config_; }
  double current_lr() const { return LearningRate(config_, step_); }

 private:
  std::vector<Parameter*> params_;
  AdamConfig config_;
  std::vector<Tensor> first_moment_;
  std::vector<Tensor> second_moment_;
  int64_t step_ = 0;
};

}  // namespace narp

#endif  // NARP_OPTIMIZER_H_
