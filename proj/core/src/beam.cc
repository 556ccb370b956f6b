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

#include "narp/beam.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace narp {
namespace {

using nlohmann::json;

std::vector<double> LogSoftmaxVector(const Tensor& logits) {
  const Tensor lp = LogSoftmaxRows(logits);
  return std::vector<double>(lp.values().begin(), lp.values().end());
}

// Indices of the k largest values; ties go to the lower index.
std::vector<int> TopIndices(const std::vector<double>& values, int k) {
  std::vector<int> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return values[a] > values[b]; });
  order.resize(std::min<size_t>(k, order.size()));
  return order;
}

int IntentOfFrame(const Model& model, const FrameSeq& frame) {
  if (frame.tokens.empty() || frame.tokens[0].is_position()) return -1;
  return model.vocab().IntentId(frame.tokens[0].symbol());
}

void Finalize(Hypothesis& h, int source_length, const ScoreOptions& options) {
  h.n = static_cast<int>(h.frame.tokens.size());
  h.source_length = source_length;
  h.valid = ValidateFrame(h.frame, source_length).empty();
  if (h.frame.form == FrameForm::kSpan && h.valid) RecordSpanFrame(h.frame);
  h.score = ScoreHypothesis(h, options);
}

// Appends the per-position argmax of `log_probs` to the hypothesis.
void ReadArgmax(const Model& model, const Tensor& log_probs, Hypothesis& h) {
  for (int r = 0; r < log_probs.rows(); ++r) {
    const int id = ArgMax(log_probs.row(r));
    h.frame.tokens.push_back(model.TokenOf(id));
    h.token_log_probs.push_back(log_probs.at(r, id));
  }
}

}  // namespace

const char* ScoreMethodName(ScoreMethod method) {
  switch (method) {
    case ScoreMethod::kS1: return "s1";
    case ScoreMethod::kS2: return "s2";
    case ScoreMethod::kS3: return "s3";
  }
  return "?";
}

ScoreMethod ParseScoreMethod(std::string_view name) {
  if (name == "s1" || name == "S1") return ScoreMethod::kS1;
  if (name == "s2" || name == "S2") return ScoreMethod::kS2;
  if (name == "s3" || name == "S3") return ScoreMethod::kS3;
  throw std::invalid_argument("unknown scoring method '" + std::string(name) + "'");
}

double Hypothesis::TokenLogProbSum() const {
  double total = 0.0;
  for (double v : token_log_probs) total += v;
  return total;
}

double LengthPenalty(int n, double alpha) {
  if (n < 1) throw std::domain_error("length penalty needs n >= 1");
  return std::pow((5.0 + n) / 6.0, alpha);
}

double ScoreHypothesis(const Hypothesis& h, const ScoreOptions& options) {
  if (options.method == ScoreMethod::kS1) {
    if (!h.log_p_intent || !h.log_p_length) {
      throw std::invalid_argument("S1 needs both the intent and the length log-probability");
    }
    return *h.log_p_intent + *h.log_p_length;
  }
  double s2 = h.log_p_intent.value_or(0.0) + h.log_p_length.value_or(0.0) + h.TokenLogProbSum();
  if (options.method == ScoreMethod::kS2) return s2;
  const int length = options.penalty_length == PenaltyLength::kFrame ? h.n : h.source_length;
  return s2 / LengthPenalty(std::max(length, 1), options.alpha);
}

std::vector<Hypothesis> SelectTopK(std::vector<Hypothesis> hypotheses, int k,
                                   const ScoreOptions& options) {
  if (k < 0 || k > static_cast<int>(hypotheses.size())) {
    throw std::invalid_argument("cannot select " + std::to_string(k) + " of " +
                                std::to_string(hypotheses.size()) + " hypotheses");
  }
  for (auto& h : hypotheses) h.score = ScoreHypothesis(h, options);
  std::stable_sort(hypotheses.begin(), hypotheses.end(),
                   [](const Hypothesis& a, const Hypothesis& b) {
                     if (a.score != b.score) return a.score > b.score;
                     if (a.n != b.n) return a.n < b.n;
                     return a.intent < b.intent;
                   });
  hypotheses.resize(k);
  return hypotheses;
}

std::vector<Hypothesis> NarBaselineBeam(const Model& model, const EncoderOutput& enc, int k2,
                                        const ScoreOptions& options,
                                        const NarOverrides& overrides) {
  if (model.kind() != ModelKind::kBaselineNar) {
    throw std::invalid_argument("NarBaselineBeam needs a baseline NAR model");
  }
  if (overrides.intent) throw std::invalid_argument("the baseline has no intent to override");
  if (k2 < 1 || k2 > model.num_length_classes()) {
    throw std::invalid_argument("k2 must lie in [1, number of length classes]");
  }
  const std::vector<double> length_lp =
      LogSoftmaxVector(model.PredictLengthLogits(enc, std::nullopt));
  std::vector<int> classes = overrides.length
                                 ? std::vector<int>{model.LengthClass(*overrides.length)}
                                 : TopIndices(length_lp, k2);
  std::vector<Model::FrameRequest> requests;
  for (int c : classes) requests.push_back({model.LengthOfClass(c), std::nullopt});
  const std::vector<Tensor> decoded = model.DecodeFrameBatch(enc, requests);

  std::vector<Hypothesis> out;
  for (size_t i = 0; i < classes.size(); ++i) {
    Hypothesis h;
    h.frame.form = FrameForm::kSpan;
    h.log_p_length = length_lp[classes[i]];
    ReadArgmax(model, decoded[i], h);
    h.intent = IntentOfFrame(model, h.frame);
    Finalize(h, enc.length(), options);
    out.push_back(std::move(h));
  }
  return SelectTopK(std::move(out), static_cast<int>(classes.size()), options);
}

std::vector<Hypothesis> NarProposedBeam(const Model& model, const EncoderOutput& enc, int k1,
                                        int k2, const ScoreOptions& options,
                                        const NarOverrides& overrides) {
  if (model.kind() != ModelKind::kProposedNar) {
    throw std::invalid_argument("NarProposedBeam needs a proposed NAR model");
  }
  if (overrides.length) throw std::invalid_argument("the proposed oracle substitutes the intent only");
  if (k1 < 1 || k1 > model.num_intents()) {
    throw std::invalid_argument("k1 must lie in [1, number of intents]");
  }
  if (k2 < 1 || k2 > model.num_length_classes()) {
    throw std::invalid_argument("k2 must lie in [1, number of length classes]");
  }
  const std::vector<double> intent_lp = LogSoftmaxVector(model.PredictIntentLogits(enc));
  std::vector<int> intents;
  if (overrides.intent) {
    if (*overrides.intent < 0 || *overrides.intent >= model.num_intents()) {
      throw std::out_of_range("override intent out of range");
    }
    intents = {*overrides.intent};
  } else {
    intents = TopIndices(intent_lp, k1);
  }
  std::vector<Tensor> teacher;
  for (int i : intents) teacher.push_back(model.TeacherScores(i));
  const std::vector<Tensor> length_logits = model.PredictLengthLogitsBatch(enc, teacher);

  struct Pair {
    int intent;
    int length_class;
    double log_p_length;
  };
  std::vector<Pair> pairs;
  std::vector<Model::FrameRequest> requests;
  for (size_t i = 0; i < intents.size(); ++i) {
    const std::vector<double> length_lp = LogSoftmaxVector(length_logits[i]);
    for (int c : TopIndices(length_lp, k2)) {
      pairs.push_back({intents[i], c, length_lp[c]});
      requests.push_back({model.LengthOfClass(c), teacher[i]});
    }
  }
  const std::vector<Tensor> decoded = model.DecodeFrameBatch(enc, requests);

  std::vector<Hypothesis> out;
  for (size_t i = 0; i < pairs.size(); ++i) {
    Hypothesis h;
    h.frame.form = FrameForm::kSpan;
    h.intent = pairs[i].intent;
    h.log_p_intent = intent_lp[pairs[i].intent];
    h.log_p_length = pairs[i].log_p_length;
    h.frame.tokens.push_back(FrameToken::Symbol(model.vocab().intents[pairs[i].intent]));
    ReadArgmax(model, decoded[i], h);
    Finalize(h, enc.length(), options);
    out.push_back(std::move(h));
  }
  return SelectTopK(std::move(out), static_cast<int>(pairs.size()), options);
}

std::vector<ArSequence> ArBeamSearch(const ArStepScorer& scorer, int end_token, int k,
                                     int max_steps, double alpha, ArBeamTrace* trace) {
  if (k < 1) throw std::invalid_argument("beam width must be at least 1");
  if (max_steps < 1) throw std::invalid_argument("max_steps must be at least 1");
  std::vector<ArSequence> live(1), finished;
  for (int step = 0; step < max_steps && !live.empty(); ++step) {
    const int width = k - static_cast<int>(finished.size());
    if (width <= 0) break;
    std::vector<std::vector<int>> prefixes;
    for (const auto& s : live) prefixes.push_back(s.tokens);
    const auto scores = scorer(prefixes);
    if (scores.size() != live.size()) throw std::logic_error("scorer returned wrong batch size");

    struct Candidate {
      int beam;
      int token;
      double log_prob;
    };
    std::vector<Candidate> candidates;
    for (size_t b = 0; b < live.size(); ++b) {
      for (size_t t = 0; t < scores[b].size(); ++t) {
        candidates.push_back({static_cast<int>(b), static_cast<int>(t),
                              live[b].log_prob + scores[b][t]});
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.log_prob > b.log_prob; });
    std::optional<double> best_pruned;
    std::vector<ArSequence> next;
    for (size_t i = 0; i < candidates.size(); ++i) {
      const Candidate& c = candidates[i];
      if (static_cast<int>(i) >= width) {
        if (c.token == end_token && !best_pruned) best_pruned = c.log_prob;
        continue;
      }
      ArSequence s = live[c.beam];
      s.log_prob = c.log_prob;
      s.token_log_probs.push_back(scores[c.beam][c.token]);
      if (c.token == end_token) {
        s.finished = true;
        finished.push_back(std::move(s));
      } else {
        s.tokens.push_back(c.token);
        next.push_back(std::move(s));
      }
    }
    if (trace) trace->best_pruned_finished.push_back(best_pruned);
    live = std::move(next);
  }
  std::vector<ArSequence>& pool = finished.empty() ? live : finished;
  auto normalized = [alpha](const ArSequence& s) {
    return s.log_prob / LengthPenalty(std::max<int>(1, s.tokens.size()), alpha);
  };
  std::stable_sort(pool.begin(), pool.end(), [&](const ArSequence& a, const ArSequence& b) {
    const double sa = normalized(a), sb = normalized(b);
    if (sa != sb) return sa > sb;
    return a.tokens.size() < b.tokens.size();
  });
  if (static_cast<int>(pool.size()) > k) pool.resize(k);
  return pool;
}

std::vector<Hypothesis> ArBeam(const Model& model, const EncoderOutput& enc, int k,
                               double alpha) {
  if (!model.autoregressive()) throw std::invalid_argument("ArBeam needs an autoregressive model");
  ArStepScorer scorer = [&](const std::vector<std::vector<int>>& prefixes) {
    return model.ArStepBatch(enc, prefixes);
  };
  const auto sequences =
      ArBeamSearch(scorer, model.end_token(), k, model.config().max_frame_len, alpha);
  const ScoreOptions options{ScoreMethod::kS3, alpha, PenaltyLength::kFrame};
  std::vector<Hypothesis> out;
  for (const auto& s : sequences) {
    Hypothesis h;
    h.frame.form = model.config().frame_form;
    for (int id : s.tokens) h.frame.tokens.push_back(model.TokenOf(id));
    h.token_log_probs = s.token_log_probs;
    h.finished = s.finished;
    h.intent = IntentOfFrame(model, h.frame);
    Finalize(h, enc.length(), options);
    h.valid = h.valid && s.finished;
    out.push_back(std::move(h));
  }
  return out;
}

std::vector<Hypothesis> DecodeQuery(const Model& model, const EncoderOutput& enc,
                                    const DecodeSettings& settings) {
  const bool greedy = settings.mode == DecodeMode::kGreedy;
  std::vector<Hypothesis> out;
  switch (model.kind()) {
    case ModelKind::kProposedNar:
      out = NarProposedBeam(model, enc, greedy ? 1 : settings.k1, greedy ? 1 : settings.k2,
                            settings.score);
      break;
    case ModelKind::kBaselineNar:
      out = NarBaselineBeam(model, enc, greedy ? 1 : settings.k2, settings.score);
      break;
    case ModelKind::kAutoregressive:
      out = ArBeam(model, enc, greedy ? 1 : settings.k, settings.ar_alpha);
      break;
  }
  if (settings.drop_invalid) {
    std::erase_if(out, [](const Hypothesis& h) { return !h.valid; });
  }
  return out;
}

std::string BeamRecordJson(const BeamRecord& record) {
  json hyps = json::array();
  for (const auto& h : record.hypotheses) {
    json j{{"frame", h.frame.ToString()},
           {"form", FrameFormName(h.frame.form)},
           {"intent", h.frame.tokens.empty() || h.frame.tokens[0].is_position()
                          ? json(nullptr)
                          : json(h.frame.tokens[0].symbol())},
           {"intent_id", h.intent},
           {"n", h.n},
           {"log_p_intent", h.log_p_intent ? json(*h.log_p_intent) : json(nullptr)},
           {"log_p_length", h.log_p_length ? json(*h.log_p_length) : json(nullptr)},
           {"log_p_tokens", h.TokenLogProbSum()},
           {"token_log_probs", h.token_log_probs},
           {"score", h.score},
           {"valid", h.valid},
           {"finished", h.finished}};
    hyps.push_back(std::move(j));
  }
  json out{{"query", record.query}, {"gold", record.gold}, {"hypotheses", std::move(hyps)}};
  return out.dump();
}

BeamRecord ParseBeamRecord(std::string_view line) {
  BeamRecord record;
  try {
    json j = json::parse(line);
    record.query = j.at("query").get<std::string>();
    record.gold = j.value("gold", std::string());
    for (const auto& hj : j.at("hypotheses")) {
      Hypothesis h;
      const FrameForm form = ParseFrameForm(hj.value("form", std::string("span")));
      h.frame = ParseFrame(hj.at("frame").get<std::string>(), form);
      h.intent = hj.value("intent_id", -1);
      h.n = hj.value("n", static_cast<int>(h.frame.tokens.size()));
      if (!hj.at("log_p_intent").is_null()) h.log_p_intent = hj.at("log_p_intent").get<double>();
      if (!hj.at("log_p_length").is_null()) h.log_p_length = hj.at("log_p_length").get<double>();
      if (hj.contains("token_log_probs")) {
        h.token_log_probs = hj.at("token_log_probs").get<std::vector<double>>();
      } else {
        h.token_log_probs = {hj.at("log_p_tokens").get<double>()};
      }
      h.score = hj.at("score").get<double>();
      h.valid = hj.at("valid").get<bool>();
      h.finished = hj.value("finished", true);
      record.hypotheses.push_back(std::move(h));
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed beam record: ") + e.what());
  } catch (const ParseError& e) {
    throw std::invalid_argument(std::string("malformed frame in beam record: ") + e.what());
  }
  return record;
}

}  // namespace narp
