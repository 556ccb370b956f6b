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

#ifndef NARP_EVAL_METRICS_H_
#define NARP_EVAL_METRICS_H_

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "narp/beam.h"
#include "narp/model.h"
#include "narp/parse_repr.h"
#include "narp/synth_data.h"

namespace narp {

// Span-form canonical string of a frame, or its raw rendering when the frame
// cannot be converted (invalid frames never match a gold frame).
std::string CanonicalFrameString(const FrameSeq& frame);

struct ExactMatchReport {
  // Index k-1 holds top-k values, as fractions of queries.
  std::array<double, 3> em{};
  std::array<double, 3> im{};
  int queries = 0;
};

// `predictions[i]` must be sorted by score. Gold frames may be in either
// form. A query with fewer than k hypotheses uses all of them for top-k.
ExactMatchReport ExactMatch(const std::vector<std::vector<Hypothesis>>& predictions,
                            const std::vector<FrameSeq>& golds);

enum class OracleMode { kGoldLength, kGoldIntent };

struct OracleResult {
  int examples = 0;
  double greedy_em = 0.0;
  double oracle_em = 0.0;
  std::vector<bool> greedy_hits;
  std::vector<bool> oracle_hits;
  // Examples where greedy decoding matches but the oracle run does not.
  int counterexamples = 0;
};

// Greedy decoding with the gold frame length (baseline NAR) or the gold
// top-level intent (proposed NAR) substituted for the model's top-1 choice.
// Throws std::invalid_argument when the mode does not fit the model.
OracleResult OracleEval(const Model& model, const std::vector<Example>& examples,
                        OracleMode mode);

struct DiversityReport {
  int queries = 0;
  int parses = 0;
  int skipped_empty = 0;
  double unique_intents = 0.0;
  // Percentages: unique n-grams over output tokens, times 100.
  double distinct1_sentence = 0.0;
  double distinct2_sentence = 0.0;
  double distinct1_corpus = 0.0;
  double distinct2_corpus = 0.0;
};

// `topk[q]` holds the output frames of query q. Tokens are compared by their
// canonical rendering, brackets and positions included.
DiversityReport Diversity(const std::vector<std::vector<FrameSeq>>& topk);

struct LatencySample {
  int n = 0;  // length of the top output frame
  int64_t decoder_passes = 0;
  int64_t ar_steps = 0;
  double millis = 0.0;
};

struct LatencyReport {
  int examples = 0;
  double encoder_passes = 0.0;  // means per example
  double decoder_passes = 0.0;
  double ar_steps = 0.0;
  double mean_millis = 0.0;
  std::vector<LatencySample> samples;

  // Least-squares slopes against the output frame length.
  double StepSlope() const;
  double MillisSlope() const;
};

// Batch size 1, one query at a time; counts come from the model's counters.
LatencyReport MeasureLatency(const Model& model, const std::vector<Example>& examples,
                             const DecodeSettings& settings, int limit = 0);

double LinearSlope(const std::vector<double>& x, const std::vector<double>& y);

struct EvalReport {
  ExactMatchReport exact_match;
  DiversityReport diversity;
  std::optional<LatencyReport> latency;
  int invalid_top1 = 0;

  std::string ToJson() const;
  // Aligned plain-text tables: accuracy columns, then diversity rows.
  std::string ToTable() const;
};

// Scores beam records against their gold frames; diversity uses the first
// three hypotheses of each query.
EvalReport Evaluate(const std::vector<BeamRecord>& records);

}  // namespace narp

#endif  // NARP_EVAL_METRICS_H_
