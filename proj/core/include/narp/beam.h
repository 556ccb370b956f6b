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

#ifndef NARP_BEAM_H_
#define NARP_BEAM_H_

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "narp/model.h"
#include "narp/parse_repr.h"

namespace narp {

enum class ScoreMethod { kS1, kS2, kS3 };

const char* ScoreMethodName(ScoreMethod method);
ScoreMethod ParseScoreMethod(std::string_view name);

// Which length the penalty of S3 is computed from.
enum class PenaltyLength { kFrame, kSource };

struct ScoreOptions {
  ScoreMethod method = ScoreMethod::kS3;
  double alpha = 3.0;
  PenaltyLength penalty_length = PenaltyLength::kFrame;
};

struct Hypothesis {
  FrameSeq frame;
  int intent = -1;  // intent class, -1 when the frame has no known intent
  int n = 0;        // frame length
  std::optional<double> log_p_intent;
  std::optional<double> log_p_length;
  // One entry per generated token; autoregressive hypotheses include END.
  std::vector<double> token_log_probs;
  int source_length = 0;
  bool valid = true;
  bool finished = true;
  double score = 0.0;

  double TokenLogProbSum() const;
};

// ((5 + n) / 6)^alpha. Throws std::domain_error for n < 1.
double LengthPenalty(int n, double alpha);

// S1 = log p(n|y1,x) + log p(y1|x); S2 adds the token log-probabilities
// and S3 = S2 / lp. S2 and S3 include whichever of the intent and length
// terms are present, so they also score baseline and autoregressive
// hypotheses. S1 throws std::invalid_argument unless both are present.
double ScoreHypothesis(const Hypothesis& h, const ScoreOptions& options);

// Scores every hypothesis with `options` and returns the best k, sorted by
// score with ties broken by shorter frame and then lower intent id.
// Throws std::invalid_argument if k exceeds the number of hypotheses.
std::vector<Hypothesis> SelectTopK(std::vector<Hypothesis> hypotheses, int k,
                                   const ScoreOptions& options);

// Optional substitutions used by oracle evaluation.
struct NarOverrides {
  std::optional<int> length;  // baseline: decode only this frame length
  std::optional<int> intent;  // proposed: decode only this intent class
};

// Top-k2 lengths, one decoder pass, one parse per length.
std::vector<Hypothesis> NarBaselineBeam(const Model& model, const EncoderOutput& enc, int k2,
                                        const ScoreOptions& options,
                                        const NarOverrides& overrides = {});

// Top-k1 intents, top-k2 conditioned lengths per intent, and all k1*k2
// frames decoded in one batched pass.
std::vector<Hypothesis> NarProposedBeam(const Model& model, const EncoderOutput& enc, int k1,
                                        int k2, const ScoreOptions& options,
                                        const NarOverrides& overrides = {});

// Log-probabilities over the output space for each prefix.
using ArStepScorer =
    std::function<std::vector<std::vector<double>>(const std::vector<std::vector<int>>&)>;

struct ArSequence {
  std::vector<int> tokens;  // END excluded
  std::vector<double> token_log_probs;  // END included when finished
  double log_prob = 0.0;
  bool finished = false;
};

struct ArBeamTrace {
  // Per step, the best cumulative log-probability among finished candidates
  // that were pruned (absent when nothing finished was pruned).
  std::vector<std::optional<double>> best_pruned_finished;
};

// Width-k beam search. Candidates that select END leave the beam, which
// shrinks until k sequences have finished or `max_steps` is reached.
// Finished sequences are ranked by log_prob / LengthPenalty(len, alpha);
// when none finished, the best unfinished ones are returned instead.
std::vector<ArSequence> ArBeamSearch(const ArStepScorer& scorer, int end_token, int k,
                                     int max_steps, double alpha, ArBeamTrace* trace = nullptr);

std::vector<Hypothesis> ArBeam(const Model& model, const EncoderOutput& enc, int k,
                               double alpha = 1.0);

enum class DecodeMode { kGreedy, kBeam };

struct DecodeSettings {
  DecodeMode mode = DecodeMode::kGreedy;
  int k = 3;   // autoregressive beam width
  int k1 = 3;  // proposed NAR intents
  int k2 = 1;  // NAR lengths
  ScoreOptions score;
  double ar_alpha = 1.0;
  bool drop_invalid = false;
};

// Sorted hypotheses for one query with any model kind.
std::vector<Hypothesis> DecodeQuery(const Model& model, const EncoderOutput& enc,
                                    const DecodeSettings& settings);

// One line of beam output. `gold` is a canonical span-form frame string and
// may be empty when the query is unlabeled.
struct BeamRecord {
  std::string query;
  std::string gold;
  std::vector<Hypothesis> hypotheses;
};

// {query, gold, hypotheses: [{frame, form, intent, intent_id, n, log_p_intent,
// log_p_length, log_p_tokens, score, valid, finished}]}
std::string BeamRecordJson(const BeamRecord& record);
// Throws std::invalid_argument on malformed input.
BeamRecord ParseBeamRecord(std::string_view line);

}  // namespace narp

#endif  // NARP_BEAM_H_
