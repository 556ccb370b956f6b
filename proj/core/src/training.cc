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

#include "narp/training.h"

#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "narp/beam.h"
#include "narp/checkpoint.h"
#include "narp/ops.h"

namespace narp {
namespace {

using nlohmann::json;

bool Finite(const LossValues& v) {
  return std::isfinite(v.total) && std::isfinite(v.out) && std::isfinite(v.len) &&
         std::isfinite(v.intent);
}

std::string Describe(const LossValues& v) {
  return "loss=" + std::to_string(v.total) + " out=" + std::to_string(v.out) +
         " len=" + std::to_string(v.len) + " int=" + std::to_string(v.intent);
}

}  // namespace

TrainConfig TrainConfig::Desk() {
  TrainConfig c;
  c.lambda_int = 10.0f;
  c.adam.base_lr = 1e-3f;
  c.adam.warmup_steps = 200;
  c.adam.decay_rate = 0.5f;
  c.adam.decay_interval = 12000;
  return c;
}

void TrainConfig::Validate() const {
  if (lambda_len < 0.0f || lambda_int < 0.0f) throw ConfigError("loss weights must be >= 0");
  if (!(p_tf >= 0.0f && p_tf <= 1.0f)) throw ConfigError("p_tf must lie in [0, 1]");
  if (!(epsilon >= 0.0f && epsilon < 1.0f)) throw ConfigError("epsilon must lie in [0, 1)");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (epochs < 1) throw ConfigError("epochs must be positive");
  if (max_steps < 0 || dev_limit < 0) throw ConfigError("limits must be non-negative");
  if (clip_norm < 0.0) throw ConfigError("clip_norm must be non-negative");
  if (!(adam.base_lr > 0.0f)) throw ConfigError("learning rate must be positive");
  if (adam.warmup_steps < 0 || adam.decay_interval < 1) {
    throw ConfigError("invalid learning-rate schedule");
  }
}

std::string TrainConfig::ToJson() const {
  json j{{"lambda_len", lambda_len},
         {"lambda_int", lambda_int},
         {"epsilon", epsilon},
         {"p_tf", p_tf},
         {"batch_size", batch_size},
         {"epochs", epochs},
         {"max_steps", max_steps},
         {"seed", seed},
         {"clip_norm", clip_norm},
         {"dev_limit", dev_limit},
         {"target_dev_em", target_dev_em},
         {"lr", adam.base_lr},
         {"beta1", adam.beta1},
         {"beta2", adam.beta2},
         {"adam_epsilon", adam.epsilon},
         {"warmup_steps", adam.warmup_steps},
         {"decay_rate", adam.decay_rate},
         {"decay_interval", adam.decay_interval}};
  return j.dump(2);
}

TrainConfig TrainConfig::FromJson(std::string_view text) {
  TrainConfig c = Desk();
  try {
    json j = json::parse(text);
    c.lambda_len = j.value("lambda_len", c.lambda_len);
    c.lambda_int = j.value("lambda_int", c.lambda_int);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.p_tf = j.value("p_tf", c.p_tf);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.max_steps = j.value("max_steps", c.max_steps);
    c.seed = j.value("seed", c.seed);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    c.dev_limit = j.value("dev_limit", c.dev_limit);
    c.target_dev_em = j.value("target_dev_em", c.target_dev_em);
    c.adam.base_lr = j.value("lr", c.adam.base_lr);
    c.adam.beta1 = j.value("beta1", c.adam.beta1);
    c.adam.beta2 = j.value("beta2", c.adam.beta2);
    c.adam.epsilon = j.value("adam_epsilon", c.adam.epsilon);
    c.adam.warmup_steps = j.value("warmup_steps", c.adam.warmup_steps);
    c.adam.decay_rate = j.value("decay_rate", c.adam.decay_rate);
    c.adam.decay_interval = j.value("decay_interval", c.adam.decay_interval);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed training config: ") + e.what());
  }
  c.Validate();
  return c;
}

Tensor HybridTeacherLogits(const Tensor& model_logits, int gold_intent, float p_tf,
                           float epsilon, Rng& rng, bool* used_teacher) {
  const int classes = static_cast<int>(model_logits.size());
  if (gold_intent < 0 || gold_intent >= classes) {
    throw std::domain_error("gold intent out of range");
  }
  const bool teacher = rng.Bernoulli(p_tf);
  if (used_teacher) *used_teacher = teacher;
  if (!teacher) return model_logits;
  Tensor t = IntentTeacherLogits(classes, gold_intent, epsilon);
  return Tensor(model_logits.shape(), std::vector<float>(t.values().begin(), t.values().end()));
}

LossResult ComputeLoss(const Model& model, const std::vector<const Example*>& batch,
                       const TrainConfig& config, Tape& tape, Rng& rng) {
  if (batch.empty()) throw std::invalid_argument("empty training batch");
  const int b = static_cast<int>(batch.size());
  const FrameForm form = model.autoregressive() ? model.config().frame_form : FrameForm::kSpan;

  std::vector<std::vector<int>> sources, targets;
  for (const Example* ex : batch) {
    sources.push_back(model.SourceIds(ex->query));
    const FrameSeq frame = TreeToFrame(ex->tree, form);
    const int n = FrameLength(frame);
    if (n > model.config().max_frame_len) {
      throw std::out_of_range("frame of length " + std::to_string(n) +
                              " exceeds max_frame_len");
    }
    targets.push_back(model.FrameTokenIds(frame));
  }
  SourceBatch enc = model.EncodeBatch(tape, sources);
  LossResult result;

  if (model.autoregressive()) {
    std::vector<ArPrefix> prefixes;
    std::vector<int> labels;
    for (int i = 0; i < b; ++i) {
      prefixes.push_back({i, targets[i]});
      labels.insert(labels.end(), targets[i].begin(), targets[i].end());
      labels.push_back(model.end_token());
    }
    PackedLogits logits = model.ArLogits(tape, enc, prefixes);
    Var out = Scale(SmoothedNllRows(logits.logits, labels, logits.widths, config.epsilon),
                    1.0f / static_cast<float>(labels.size()));
    result.total = out;
    result.values.out = result.values.total = out.value().item();
    return result;
  }

  const bool conditioned = model.conditioned();
  std::optional<Var> conditioning;
  Var intent_loss;
  if (conditioned) {
    Var intent_logits = model.IntentLogits(tape, enc);
    std::vector<int> gold(b);
    for (int i = 0; i < b; ++i) {
      gold[i] = model.vocab().IntentId("[" + batch[i]->tree.root.label);
      if (gold[i] < 0) {
        throw std::invalid_argument("intent " + batch[i]->tree.root.label +
                                    " is not in the vocabulary");
      }
    }
    intent_loss = Scale(SmoothedNllRows(intent_logits, gold,
                                        std::vector<int>(b, model.num_intents()), config.epsilon),
                        1.0f / b);
    // Row i of the hybrid scores is either model row i or a teacher row.
    std::vector<int> index(b);
    std::vector<float> teacher_values;
    int teacher_rows = 0;
    for (int i = 0; i < b; ++i) {
      if (rng.Bernoulli(config.p_tf)) {
        const Tensor t = model.TeacherScores(gold[i]);
        teacher_values.insert(teacher_values.end(), t.values().begin(), t.values().end());
        index[i] = b + teacher_rows++;
      } else {
        index[i] = i;
      }
    }
    result.teacher_draws = teacher_rows;
    Var hybrid = intent_logits;
    if (teacher_rows > 0) {
      Var teacher = tape.Constant(Tensor({teacher_rows, model.num_intents()}, teacher_values));
      hybrid = GatherRows(ConcatRows({intent_logits, teacher}), index);
    }
    conditioning = model.Conditioning(tape, hybrid);
  }

  Var length_logits = model.LengthLogits(tape, enc, conditioning);
  std::vector<int> length_labels(b);
  std::vector<FrameSlot> slots;
  std::vector<int> labels;
  for (int i = 0; i < b; ++i) {
    const int n = static_cast<int>(targets[i].size());
    length_labels[i] = model.LengthClass(n);
    if (conditioned) {
      slots.push_back({i, n - 1, 1, i});
      labels.insert(labels.end(), targets[i].begin() + 1, targets[i].end());
    } else {
      slots.push_back({i, n, 0, -1});
      labels.insert(labels.end(), targets[i].begin(), targets[i].end());
    }
  }
  Var length_loss =
      Scale(SmoothedNllRows(length_logits, length_labels,
                            std::vector<int>(b, model.num_length_classes()), config.epsilon),
            1.0f / b);
  PackedLogits logits = model.DecodeFrames(tape, enc, conditioning, slots);
  Var out = Scale(SmoothedNllRows(logits.logits, labels, logits.widths, config.epsilon),
                  1.0f / static_cast<float>(labels.size()));

  Var total = Add(out, Scale(length_loss, config.lambda_len));
  result.values.out = out.value().item();
  result.values.len = length_loss.value().item();
  if (conditioned) {
    total = Add(total, Scale(intent_loss, config.lambda_int));
    result.values.intent = intent_loss.value().item();
  }
  result.total = total;
  result.values.total = total.value().item();
  return result;
}

std::string EpochMetrics::ToJson() const {
  json j{{"epoch", epoch},         {"step", step},         {"loss", loss.total},
         {"loss_out", loss.out},   {"loss_len", loss.len}, {"loss_int", loss.intent},
         {"dev_em", dev_em},       {"lr", lr}};
  return j.dump();
}

double GreedyExactMatch(const Model& model, const std::vector<Example>& examples, int limit) {
  const int count = limit > 0 ? std::min<int>(limit, examples.size()) : examples.size();
  if (count == 0) return 0.0;
  DecodeSettings settings;
  settings.mode = DecodeMode::kGreedy;
  int hits = 0;
  for (int i = 0; i < count; ++i) {
    const Example& ex = examples[i];
    const auto hyps = DecodeQuery(model, model.Encode(ex.query), settings);
    if (hyps.empty() || !hyps[0].valid) continue;
    const std::string gold = TreeToFrame(ex.tree, FrameForm::kSpan).ToString();
    if (ToSpanForm(hyps[0].frame).ToString() == gold) ++hits;
  }
  return static_cast<double>(hits) / count;
}

TrainResult Train(Model& model, const std::vector<Example>& train,
                  const std::vector<Example>& dev, const TrainConfig& config,
                  const TrainOutputs& outputs) {
  config.Validate();
  if (train.empty()) throw std::invalid_argument("no training examples");
  std::vector<Parameter*> params = model.params().all();
  AdamOptimizer optimizer(params, config.adam);
  Rng rng(config.seed);
  std::ofstream metrics;
  if (outputs.metrics) {
    metrics.open(*outputs.metrics);
    if (!metrics) throw std::runtime_error("cannot write " + outputs.metrics->string());
  }

  TrainResult result;
  std::vector<Tensor> best;
  std::vector<int> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  bool done = false;
  for (int epoch = 1; epoch <= config.epochs && !done; ++epoch) {
    rng.Shuffle(order);
    LossValues sum;
    int batches = 0;
    for (size_t start = 0; start < order.size(); start += config.batch_size) {
      if (config.max_steps > 0 && optimizer.step() >= config.max_steps) {
        done = true;
        break;
      }
      std::vector<const Example*> batch;
      for (size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i) {
        batch.push_back(&train[order[i]]);
      }
      Tape tape(Tape::Options{.record = true, .training = true, .rng = &rng});
      LossResult loss = ComputeLoss(model, batch, config, tape, rng);
      if (!Finite(loss.values)) {
        throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch) + " step " +
                               std::to_string(optimizer.step() + 1) + ": " +
                               Describe(loss.values));
      }
      tape.Backward(loss.total);
      optimizer.FillMissingGrads();
      if (config.clip_norm > 0.0) optimizer.ClipGradNorm(config.clip_norm);
      optimizer.Step();
      sum.total += loss.values.total;
      sum.out += loss.values.out;
      sum.len += loss.values.len;
      sum.intent += loss.values.intent;
      ++batches;
    }
    if (batches == 0) break;
    EpochMetrics m;
    m.epoch = epoch;
    m.step = optimizer.step();
    m.loss = {sum.total / batches, sum.out / batches, sum.len / batches, sum.intent / batches};
    m.lr = optimizer.current_lr();
    m.dev_em = dev.empty() ? 0.0 : GreedyExactMatch(model, dev, config.dev_limit);
    result.history.push_back(m);
    if (metrics.is_open()) metrics << m.ToJson() << '\n' << std::flush;
    if (outputs.on_epoch) outputs.on_epoch(m);
    if (m.dev_em >= result.best_dev_em) {
      result.best_dev_em = m.dev_em;
      result.best_epoch = epoch;
      best.clear();
      for (const Parameter* p : params) best.push_back(p->value);
      if (outputs.checkpoint) SaveCheckpoint(*outputs.checkpoint, model.params());
    }
    if (config.target_dev_em > 0.0 && m.dev_em >= config.target_dev_em) done = true;
  }
  if (!best.empty()) {
    for (size_t i = 0; i < params.size(); ++i) params[i]->value = best[i];
  }
  result.steps = optimizer.step();
  return result;
}

}  // namespace narp
