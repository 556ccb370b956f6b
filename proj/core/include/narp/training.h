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

#ifndef NARP_TRAINING_H_
#define NARP_TRAINING_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "narp/autodiff.h"
#include "narp/model.h"
#include "narp/optimizer.h"
#include "narp/rng.h"
#include "narp/synth_data.h"

namespace narp {

struct TrainConfig {
  float lambda_len = 10.0f;
  float lambda_int = 100.0f;
  float epsilon = 0.1f;  // label smoothing of all three losses
  float p_tf = 0.5f;     // probability of feeding teacher intent scores
  int batch_size = 32;
  int epochs = 20;
  int64_t max_steps = 0;  // 0 means no limit
  uint64_t seed = 1;
  double clip_norm = 0.0;  // 0 disables clipping
  int dev_limit = 0;       // 0 evaluates the full dev set
  // Stop once dev exact match reaches this value (0 disables).
  double target_dev_em = 0.0;
  AdamConfig adam;

  // Settings that fit a desk-scale run into minutes.
  static TrainConfig Desk();

  void Validate() const;  // throws ConfigError
  std::string ToJson() const;
  static TrainConfig FromJson(std::string_view text);
};

// Per-example choice between the model's intent logits and the teacher
// logits of the gold intent (taken with probability p_tf). The teacher
// logits are the log of the epsilon-smoothed one-hot.
Tensor HybridTeacherLogits(const Tensor& model_logits, int gold_intent, float p_tf,
                           float epsilon, Rng& rng, bool* used_teacher = nullptr);

struct LossValues {
  double total = 0.0;
  double out = 0.0;
  double len = 0.0;
  double intent = 0.0;
};

struct LossResult {
  Var total;
  LossValues values;
  int teacher_draws = 0;
};

// Eq. L = L_out + lambda_len * L_len + lambda_int * L_int on one batch.
// Token losses are averaged over frame positions; the length and intent
// losses over examples. Throws std::out_of_range for frames longer than
// the model supports and std::invalid_argument for unknown symbols.
LossResult ComputeLoss(const Model& model, const std::vector<const Example*>& batch,
                       const TrainConfig& config, Tape& tape, Rng& rng);

struct EpochMetrics {
  int epoch = 0;
  int64_t step = 0;
  LossValues loss;
  double dev_em = 0.0;
  double lr = 0.0;
  std::string ToJson() const;
};

struct TrainResult {
  std::vector<EpochMetrics> history;
  double best_dev_em = -1.0;
  int best_epoch = 0;
  int64_t steps = 0;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainOutputs {
  std::optional<std::filesystem::path> checkpoint;  // best-dev parameters
  std::optional<std::filesystem::path> metrics;     // one JSON object per epoch
  std::function<void(const EpochMetrics&)> on_epoch;
};

// Trains in place and leaves the best-dev parameters in the model.
TrainResult Train(Model& model, const std::vector<Example>& train,
                  const std::vector<Example>& dev, const TrainConfig& config,
                  const TrainOutputs& outputs = {});

// Greedy top-1 exact match in span form.
double GreedyExactMatch(const Model& model, const std::vector<Example>& examples, int limit = 0);

}  // namespace narp

#endif  // NARP_TRAINING_H_
