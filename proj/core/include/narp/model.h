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

#ifndef NARP_MODEL_H_
#define NARP_MODEL_H_

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "narp/autodiff.h"
#include "narp/ops.h"
#include "narp/parse_repr.h"
#include "narp/synth_data.h"

namespace narp {

enum class ModelKind {
  kProposedNar,   // intent module + conditioned length module + NAR decoder
  kBaselineNar,   // length module + NAR decoder
  kAutoregressive,
};

const char* ModelKindName(ModelKind kind);
ModelKind ParseModelKind(std::string_view name);

struct StackConfig {
  int layers = 2;
  int width = 64;
  int heads = 2;
};

struct ModelConfig {
  ModelKind kind = ModelKind::kProposedNar;
  StackConfig encoder;
  StackConfig decoder;
  StackConfig intent;
  StackConfig length;
  int ffn_multiplier = 4;
  float dropout = 0.0316f;
  float source_dropout = 0.0022f;
  int max_source_len = 32;
  // Length classes are the even lengths 2..max_frame_len.
  int max_frame_len = 50;
  // Smoothing of the one-hot intent scores fed to the conditioned modules.
  float teacher_epsilon = 0.1f;
  // Target linearization of the autoregressive model. NAR models always
  // decode span form.
  FrameForm frame_form = FrameForm::kSpan;

  // L2/H64/HD2 for every stack.
  static ModelConfig Desk(ModelKind kind);
  // Width 64 with the layer and head counts of the full-size models.
  static ModelConfig Table8Ratio(ModelKind kind);
  static ModelConfig Preset(std::string_view name, ModelKind kind);

  // Throws ConfigError.
  void Validate() const;
  int width() const { return decoder.width; }
  int num_length_classes() const { return max_frame_len / 2; }

  std::string ToJson() const;
  static ModelConfig FromJson(std::string_view text);
};

// Eval-mode encoding of one query.
struct EncoderOutput {
  Tensor e;  // [l, width]
  std::vector<int> source_ids;
  int length() const { return static_cast<int>(source_ids.size()); }
};

// Rows of a packed source batch on a tape.
struct SourceBatch {
  Var e;  // [sum of lengths, width]
  std::vector<int> offsets;
  std::vector<int> lengths;
  int size() const { return static_cast<int>(lengths.size()); }
  int max_length() const;
};

// One frame to decode in a packed NAR decoder pass: `positions` mask slots
// at frame positions first_position, first_position+1, ... over source
// `source`, optionally conditioned on row `conditioning_row` of the
// conditioning matrix.
struct FrameSlot {
  int source = 0;
  int positions = 0;
  int first_position = 0;
  int conditioning_row = -1;
};

// Decoder input for the autoregressive model: logits are produced after the
// start symbol and after every prefix token.
struct ArPrefix {
  int source = 0;
  std::vector<int> tokens;
};

// Packed logits with the number of meaningful columns of each row.
struct PackedLogits {
  Var logits;
  std::vector<int> widths;
};

struct InvocationCounts {
  int64_t encoder_passes = 0;
  int64_t decoder_passes = 0;
  int64_t ar_steps = 0;
};

// Output token ids: 0..S-1 are target symbols. NAR models follow with one
// id per source position; the autoregressive model places END at S and
// positions after it.
class Model {
 public:
  Model(ModelConfig config, VocabBundle vocab, uint64_t seed);
  ~Model();
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return config_; }
  const VocabBundle& vocab() const { return vocab_; }
  ModelKind kind() const { return config_.kind; }
  bool conditioned() const { return config_.kind == ModelKind::kProposedNar; }
  bool autoregressive() const { return config_.kind == ModelKind::kAutoregressive; }
  ParameterStore& params() { return store_; }
  const ParameterStore& params() const { return store_; }

  int num_symbols() const { return static_cast<int>(vocab_.target_symbols.size()); }
  int num_intents() const { return static_cast<int>(vocab_.intents.size()); }
  int num_length_classes() const { return config_.num_length_classes(); }
  int end_token() const;
  int PositionToken(int position) const;
  // Length class for a frame of length n; conditioned models classify n-1
  // with the same class index. Throws std::out_of_range.
  int LengthClass(int n) const;
  int LengthOfClass(int length_class) const;
  // Frame length predicted by the length head (n-1 for conditioned models).
  int HeadValueOfClass(int length_class) const;

  FrameToken TokenOf(int id) const;
  int TokenId(const FrameToken& token) const;  // -1 if not representable
  // Target ids of a frame; throws std::invalid_argument on unknown symbols.
  std::vector<int> FrameTokenIds(const FrameSeq& frame) const;
  // Symbol id of intent class `intent`.
  int IntentSymbol(int intent) const;

  // Source ids of a tokenized query; unknown words map to the UNK row.
  // Throws std::invalid_argument when the query is empty or too long.
  std::vector<int> SourceIds(const std::vector<std::string>& query) const;

  // --- Differentiable building blocks (training and batched inference).
  SourceBatch EncodeBatch(Tape& tape, const std::vector<std::vector<int>>& sources) const;
  Var IntentLogits(Tape& tape, const SourceBatch& batch) const;  // [B, I]
  // Normalizes intent scores [B, I] with a log-softmax and projects them to
  // decoder-width conditioning rows [B, d].
  Var Conditioning(Tape& tape, Var intent_scores) const;
  Var LengthLogits(Tape& tape, const SourceBatch& batch,
                   std::optional<Var> conditioning) const;  // [B, C]
  PackedLogits DecodeFrames(Tape& tape, const SourceBatch& batch,
                            std::optional<Var> conditioning,
                            const std::vector<FrameSlot>& slots) const;
  PackedLogits ArLogits(Tape& tape, const SourceBatch& batch,
                        const std::vector<ArPrefix>& prefixes) const;

  // --- Eval-mode convenience API.
  EncoderOutput Encode(const std::vector<std::string>& query) const;
  EncoderOutput EncodeIds(const std::vector<int>& source_ids) const;
  Tensor PredictIntentLogits(const EncoderOutput& enc) const;  // [I]
  // Conditioned models require `intent_scores`; the baseline rejects them.
  Tensor PredictLengthLogits(const EncoderOutput& enc,
                             const std::optional<Tensor>& intent_scores) const;
  // One length-module pass for several conditionings of the same query.
  std::vector<Tensor> PredictLengthLogitsBatch(const EncoderOutput& enc,
                                               const std::vector<Tensor>& intent_scores) const;
  // Teacher scores for intent class `intent`, the conditioning used when a
  // specific intent is selected at inference.
  Tensor TeacherScores(int intent) const;

  struct FrameRequest {
    int n = 0;  // full frame length, including the prepended intent
    std::optional<Tensor> intent_scores;
  };
  // Log-probabilities [rows, S + l] for each request, all from one decoder
  // pass. Conditioned requests yield n-1 rows; unconditioned ones n rows.
  std::vector<Tensor> DecodeFrameBatch(const EncoderOutput& enc,
                                       const std::vector<FrameRequest>& requests) const;
  Tensor DecodeFrame(const EncoderOutput& enc, int n,
                     const std::optional<Tensor>& intent_scores) const;

  // Next-token log-probabilities [S + 1 + l] for each prefix, one decoder
  // step for the whole batch.
  std::vector<std::vector<double>> ArStepBatch(const EncoderOutput& enc,
                                               const std::vector<std::vector<int>>& prefixes) const;
  std::vector<double> ArDecodeStep(const EncoderOutput& enc, const std::vector<int>& prefix) const;

  InvocationCounts counts() const;
  void ResetCounts() const;

 private:
  struct Impl;

  void Require(bool ok, const char* what) const;

  ModelConfig config_;
  VocabBundle vocab_;
  // Inference tapes read parameters without modifying them.
  mutable ParameterStore store_;
  std::unique_ptr<Impl> impl_;
  mutable std::atomic<int64_t> encoder_passes_{0};
  mutable std::atomic<int64_t> decoder_passes_{0};
  mutable std::atomic<int64_t> ar_steps_{0};
};

// A model directory holds model.json, vocab.json and checkpoint.narp.
void SaveModelDir(const Model& model, const std::filesystem::path& dir);
std::unique_ptr<Model> LoadModelDir(const std::filesystem::path& dir);

// Log of the epsilon-smoothed one-hot over `num_intents` classes.
Tensor IntentTeacherLogits(int num_intents, int intent, float epsilon);

int ArgMax(std::span<const float> values);

}  // namespace narp

#endif  // NARP_MODEL_H_
