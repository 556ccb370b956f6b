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

#include "narp/model.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "layers.h"
#include "narp/checkpoint.h"

namespace narp {

using internal::StackParams;

namespace {

using nlohmann::json;

json StackToJson(const StackConfig& s) {
  return json{{"layers", s.layers}, {"width", s.width}, {"heads", s.heads}};
}

StackConfig StackFromJson(const json& j, StackConfig fallback) {
  fallback.layers = j.value("layers", fallback.layers);
  fallback.width = j.value("width", fallback.width);
  fallback.heads = j.value("heads", fallback.heads);
  return fallback;
}

std::vector<int> Zeros(int n) { return std::vector<int>(n, 0); }

// Cross-attention memory for a list of (source, conditioning row) items.
// Without conditioning, items attend straight into the encoder rows.
struct Memory {
  Var rows;
  std::vector<int> begin;
  std::vector<int> count;
};

Memory BuildMemory(const SourceBatch& batch, std::optional<Var> conditioning,
                   const std::vector<std::pair<int, int>>& items) {
  Memory m;
  if (!conditioning) {
    m.rows = batch.e;
    for (const auto& [source, unused] : items) {
      m.begin.push_back(batch.offsets.at(source));
      m.count.push_back(batch.lengths.at(source));
    }
    return m;
  }
  const int cond_rows = conditioning->value().rows();
  std::vector<int> index;
  for (const auto& [source, row] : items) {
    if (row < 0 || row >= cond_rows) throw std::out_of_range("conditioning row out of range");
    m.begin.push_back(static_cast<int>(index.size()));
    m.count.push_back(batch.lengths.at(source) + 1);
    index.push_back(row);
    for (int p = 0; p < batch.lengths[source]; ++p) {
      index.push_back(cond_rows + batch.offsets[source] + p);
    }
  }
  m.rows = GatherRows(ConcatRows({*conditioning, batch.e}), std::move(index));
  return m;
}

}  // namespace

const char* ModelKindName(ModelKind kind) {
  switch (kind) {
    case ModelKind::kProposedNar: return "proposed-nar";
    case ModelKind::kBaselineNar: return "baseline-nar";
    case ModelKind::kAutoregressive: return "ar";
  }
  return "?";
}

ModelKind ParseModelKind(std::string_view name) {
  if (name == "proposed-nar" || name == "proposed") return ModelKind::kProposedNar;
  if (name == "baseline-nar" || name == "baseline") return ModelKind::kBaselineNar;
  if (name == "ar") return ModelKind::kAutoregressive;
  throw ConfigError("unknown model kind '" + std::string(name) + "'");
}

ModelConfig ModelConfig::Desk(ModelKind kind) {
  ModelConfig c;
  c.kind = kind;
  return c;
}

ModelConfig ModelConfig::Table8Ratio(ModelKind kind) {
  ModelConfig c;
  c.kind = kind;
  c.encoder = {4, 64, 4};
  c.decoder = {4, 64, 2};
  c.length = {8, 64, 4};
  c.intent = {8, 64, 4};
  return c;
}

ModelConfig ModelConfig::Preset(std::string_view name, ModelKind kind) {
  if (name == "desk") return Desk(kind);
  if (name == "table8-ratio") return Table8Ratio(kind);
  throw ConfigError("unknown model preset '" + std::string(name) + "'");
}

void ModelConfig::Validate() const {
  const int d = decoder.width;
  for (const StackConfig* s : {&encoder, &decoder, &intent, &length}) {
    if (s->layers < 1) throw ConfigError("every stack needs at least one layer");
    if (s->width != d) throw ConfigError("all stacks must share one width");
    if (s->heads < 1 || s->width % s->heads != 0) {
      throw ConfigError("width " + std::to_string(s->width) + " is not divisible by " +
                        std::to_string(s->heads) + " heads");
    }
  }
  if (d < 2) throw ConfigError("width must be at least 2");
  if (ffn_multiplier < 1) throw ConfigError("ffn_multiplier must be positive");
  if (!(dropout >= 0.0f && dropout < 1.0f) ||
      !(source_dropout >= 0.0f && source_dropout < 1.0f)) {
    throw ConfigError("dropout rates must lie in [0, 1)");
  }
  if (!(teacher_epsilon > 0.0f && teacher_epsilon < 1.0f)) {
    throw ConfigError("teacher_epsilon must lie in (0, 1)");
  }
  if (max_source_len < 1) throw ConfigError("max_source_len must be positive");
  if (max_frame_len < 2 || max_frame_len % 2 != 0) {
    throw ConfigError("max_frame_len must be an even number >= 2");
  }
}

std::string ModelConfig::ToJson() const {
  json j{{"kind", ModelKindName(kind)},
         {"encoder", StackToJson(encoder)},
         {"decoder", StackToJson(decoder)},
         {"intent", StackToJson(intent)},
         {"length", StackToJson(length)},
         {"ffn_multiplier", ffn_multiplier},
         {"dropout", dropout},
         {"source_dropout", source_dropout},
         {"max_source_len", max_source_len},
         {"max_frame_len", max_frame_len},
         {"teacher_epsilon", teacher_epsilon},
         {"frame_form", FrameFormName(frame_form)}};
  return j.dump(2);
}

ModelConfig ModelConfig::FromJson(std::string_view text) {
  ModelConfig c;
  try {
    json j = json::parse(text);
    c.kind = ParseModelKind(j.value("kind", std::string(ModelKindName(c.kind))));
    if (j.contains("preset")) c = Preset(j.at("preset").get<std::string>(), c.kind);
    if (j.contains("encoder")) c.encoder = StackFromJson(j.at("encoder"), c.encoder);
    if (j.contains("decoder")) c.decoder = StackFromJson(j.at("decoder"), c.decoder);
    if (j.contains("intent")) c.intent = StackFromJson(j.at("intent"), c.intent);
    if (j.contains("length")) c.length = StackFromJson(j.at("length"), c.length);
    c.ffn_multiplier = j.value("ffn_multiplier", c.ffn_multiplier);
    c.dropout = j.value("dropout", c.dropout);
    c.source_dropout = j.value("source_dropout", c.source_dropout);
    c.max_source_len = j.value("max_source_len", c.max_source_len);
    c.max_frame_len = j.value("max_frame_len", c.max_frame_len);
    c.teacher_epsilon = j.value("teacher_epsilon", c.teacher_epsilon);
    if (j.contains("frame_form")) {
      c.frame_form = ParseFrameForm(j.at("frame_form").get<std::string>());
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed model config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  c.Validate();
  return c;
}

int SourceBatch::max_length() const {
  int m = 0;
  for (int l : lengths) m = std::max(m, l);
  return m;
}

struct Model::Impl {
  Parameter* token_embed = nullptr;
  Parameter* position_embed = nullptr;
  StackParams encoder;

  Parameter* specials = nullptr;  // row 0: MASK / start, row 1: END
  Parameter* target_embed = nullptr;
  Parameter* pointer_wq = nullptr;
  Parameter* pointer_wk = nullptr;
  StackParams decoder;

  Parameter* length_query = nullptr;
  StackParams length;
  Parameter* length_w = nullptr;
  Parameter* length_b = nullptr;

  Parameter* intent_query = nullptr;
  StackParams intent;
  Parameter* intent_w = nullptr;
  Parameter* intent_b = nullptr;
  Parameter* inject_w = nullptr;
  Parameter* inject_b = nullptr;
};

Model::Model(ModelConfig config, VocabBundle vocab, uint64_t seed)
    : config_(std::move(config)), vocab_(std::move(vocab)), impl_(std::make_unique<Impl>()) {
  config_.Validate();
  vocab_.RebuildIndex();
  if (vocab_.source_words.empty() || vocab_.target_symbols.empty()) {
    throw ConfigError("vocabulary is empty");
  }
  if (vocab_.max_source_len > config_.max_source_len) {
    throw ConfigError("data has queries longer than max_source_len");
  }
  for (int n : vocab_.length_classes) {
    if (n > config_.max_frame_len) {
      throw ConfigError("data has frames longer than max_frame_len (" + std::to_string(n) + ")");
    }
  }
  if (conditioned() && vocab_.intents.size() < 2) {
    throw ConfigError("the intent module needs at least 2 intents");
  }
  for (const auto& intent : vocab_.intents) {
    if (vocab_.SymbolId(intent) < 0) throw ConfigError("intent " + intent + " is not a symbol");
  }

  Rng rng(seed);
  const int d = config_.width();
  const float embed_std = 1.0f / std::sqrt(static_cast<float>(d));
  const int ffn = config_.ffn_multiplier;
  Impl& m = *impl_;
  m.token_embed = &store_.Add("encoder/token_embed",
                              internal::RandomNormal({static_cast<int>(vocab_.source_words.size()), d},
                                                     embed_std, rng));
  m.position_embed = &store_.Add("encoder/position_embed",
                                 internal::RandomNormal({config_.max_source_len, d}, embed_std, rng));
  m.encoder = internal::AddStack(store_, "encoder", config_.encoder.layers, d,
                                 config_.encoder.heads, ffn, /*cross=*/false, rng);

  m.specials = &store_.Add("decoder/specials", internal::RandomNormal({2, d}, embed_std, rng));
  m.target_embed = &store_.Add("decoder/target_embed",
                               internal::RandomNormal({num_symbols(), d}, embed_std, rng));
  m.pointer_wq = &store_.Add("decoder/pointer/wq", internal::RandomNormal({d, d}, embed_std, rng));
  m.pointer_wk = &store_.Add("decoder/pointer/wk", internal::RandomNormal({d, d}, embed_std, rng));
  m.decoder = internal::AddStack(store_, "decoder", config_.decoder.layers, d,
                                 config_.decoder.heads, ffn, /*cross=*/true, rng);

  if (!autoregressive()) {
    const int classes = num_length_classes();
    m.length_query = &store_.Add("length/query", internal::RandomNormal({1, d}, embed_std, rng));
    m.length = internal::AddStack(store_, "length", config_.length.layers, d,
                                  config_.length.heads, ffn, /*cross=*/true, rng);
    m.length_w = &store_.Add("length/out/w", internal::RandomNormal({d, classes}, embed_std, rng));
    m.length_b = &store_.Add("length/out/b", Tensor({classes}, 0.0f));
  }
  if (conditioned()) {
    const int intents = num_intents();
    m.intent_query = &store_.Add("intent/query", internal::RandomNormal({1, d}, embed_std, rng));
    m.intent = internal::AddStack(store_, "intent", config_.intent.layers, d,
                                  config_.intent.heads, ffn, /*cross=*/true, rng);
    m.intent_w = &store_.Add("intent/out/w", internal::RandomNormal({d, intents}, embed_std, rng));
    m.intent_b = &store_.Add("intent/out/b", Tensor({intents}, 0.0f));
    m.inject_w = &store_.Add("intent/inject/w",
                             internal::RandomNormal({intents, d}, 1.0f / std::sqrt(float(intents)), rng));
    m.inject_b = &store_.Add("intent/inject/b", Tensor({d}, 0.0f));
  }
}

Model::~Model() = default;

void Model::Require(bool ok, const char* what) const {
  if (!ok) {
    throw std::logic_error(std::string(what) + " is not available for the " +
                           ModelKindName(config_.kind) + " model");
  }
}

int Model::end_token() const {
  Require(autoregressive(), "END");
  return num_symbols();
}

int Model::PositionToken(int position) const {
  return num_symbols() + (autoregressive() ? 1 : 0) + position;
}

int Model::LengthClass(int n) const {
  if (n < 2 || n > config_.max_frame_len || n % 2 != 0) {
    throw std::out_of_range("frame length " + std::to_string(n) + " has no length class");
  }
  return n / 2 - 1;
}

int Model::LengthOfClass(int length_class) const {
  if (length_class < 0 || length_class >= num_length_classes()) {
    throw std::out_of_range("length class out of range");
  }
  return 2 * (length_class + 1);
}

int Model::HeadValueOfClass(int length_class) const {
  return LengthOfClass(length_class) - (conditioned() ? 1 : 0);
}

FrameToken Model::TokenOf(int id) const {
  const int s = num_symbols();
  if (id >= 0 && id < s) return FrameToken::Symbol(vocab_.target_symbols[id]);
  if (autoregressive() && id == s) throw std::invalid_argument("END is not a frame token");
  const int p = id - s - (autoregressive() ? 1 : 0);
  if (id < 0 || p < 0) throw std::out_of_range("token id out of range");
  return FrameToken::Position(p);
}

int Model::TokenId(const FrameToken& token) const {
  if (token.is_position()) return PositionToken(token.position());
  return vocab_.SymbolId(token.symbol());
}

std::vector<int> Model::FrameTokenIds(const FrameSeq& frame) const {
  std::vector<int> ids;
  ids.reserve(frame.tokens.size());
  for (const auto& t : frame.tokens) {
    const int id = TokenId(t);
    if (id < 0) throw std::invalid_argument("unknown target symbol " + t.ToString());
    ids.push_back(id);
  }
  return ids;
}

int Model::IntentSymbol(int intent) const {
  return vocab_.SymbolId(vocab_.intents.at(intent));
}

std::vector<int> Model::SourceIds(const std::vector<std::string>& query) const {
  if (query.empty()) throw std::invalid_argument("empty query");
  if (static_cast<int>(query.size()) > config_.max_source_len) {
    throw std::invalid_argument("query has " + std::to_string(query.size()) +
                                " tokens; the maximum is " +
                                std::to_string(config_.max_source_len));
  }
  std::vector<int> ids;
  ids.reserve(query.size());
  for (const auto& w : query) ids.push_back(vocab_.WordId(w));
  return ids;
}

SourceBatch Model::EncodeBatch(Tape& tape, const std::vector<std::vector<int>>& sources) const {
  if (sources.empty()) throw std::invalid_argument("empty source batch");
  const Impl& m = *impl_;
  SourceBatch batch;
  std::vector<int> ids, positions;
  AttentionLayout layout;
  for (const auto& s : sources) {
    const int l = static_cast<int>(s.size());
    if (l < 1 || l > config_.max_source_len) {
      throw std::invalid_argument("source length " + std::to_string(l) + " out of range");
    }
    batch.offsets.push_back(static_cast<int>(ids.size()));
    batch.lengths.push_back(l);
    layout.segments.push_back({batch.offsets.back(), l, batch.offsets.back(), l});
    for (int p = 0; p < l; ++p) {
      if (s[p] < 0 || s[p] >= static_cast<int>(vocab_.source_words.size())) {
        throw std::out_of_range("source id out of range");
      }
      ids.push_back(s[p]);
      positions.push_back(p);
    }
  }
  Var x = Add(GatherRows(tape.Param(*m.token_embed), ids),
              GatherRows(tape.Param(*m.position_embed), positions));
  x = Dropout(x, config_.source_dropout);
  batch.e = internal::RunStack(tape, m.encoder, x, layout, x, layout, config_.dropout);
  ++encoder_passes_;
  return batch;
}

Var Model::IntentLogits(Tape& tape, const SourceBatch& batch) const {
  Require(conditioned(), "the intent module");
  const Impl& m = *impl_;
  const int b = batch.size();
  AttentionLayout self, cross;
  for (int i = 0; i < b; ++i) {
    self.segments.push_back({i, 1, i, 1});
    cross.segments.push_back({i, 1, batch.offsets[i], batch.lengths[i]});
  }
  Var q = GatherRows(tape.Param(*m.intent_query), Zeros(b));
  Var h = internal::RunStack(tape, m.intent, q, self, batch.e, cross, config_.dropout);
  return AddBias(MatMul(h, tape.Param(*m.intent_w)), tape.Param(*m.intent_b));
}

Var Model::Conditioning(Tape& tape, Var intent_scores) const {
  Require(conditioned(), "intent conditioning");
  const Impl& m = *impl_;
  return AddBias(MatMul(LogSoftmax(intent_scores), tape.Param(*m.inject_w)),
                 tape.Param(*m.inject_b));
}

Var Model::LengthLogits(Tape& tape, const SourceBatch& batch,
                        std::optional<Var> conditioning) const {
  Require(!autoregressive(), "the length module");
  if (conditioned() != conditioning.has_value()) {
    throw std::invalid_argument(conditioned() ? "conditioned length module needs intent scores"
                                              : "baseline length module takes no intent");
  }
  const Impl& m = *impl_;
  const int b = batch.size();
  std::vector<std::pair<int, int>> items;
  for (int i = 0; i < b; ++i) items.emplace_back(i, i);
  Memory memory = BuildMemory(batch, conditioning, items);
  AttentionLayout self, cross;
  for (int i = 0; i < b; ++i) {
    self.segments.push_back({i, 1, i, 1});
    cross.segments.push_back({i, 1, memory.begin[i], memory.count[i]});
  }
  Var q = GatherRows(tape.Param(*m.length_query), Zeros(b));
  Var h = internal::RunStack(tape, m.length, q, self, memory.rows, cross, config_.dropout);
  return AddBias(MatMul(h, tape.Param(*m.length_w)), tape.Param(*m.length_b));
}

PackedLogits Model::DecodeFrames(Tape& tape, const SourceBatch& batch,
                                 std::optional<Var> conditioning,
                                 const std::vector<FrameSlot>& slots) const {
  Require(!autoregressive(), "mask decoding");
  if (slots.empty()) throw std::invalid_argument("no frames to decode");
  const Impl& m = *impl_;
  const int d = config_.width();
  std::vector<int> positions, cond_index;
  std::vector<std::pair<int, int>> items;
  AttentionLayout self, pointer;
  for (const auto& s : slots) {
    if (s.positions < 1 || s.first_position < 0 ||
        s.first_position + s.positions > config_.max_frame_len) {
      throw std::out_of_range("frame positions exceed max_frame_len");
    }
    if (s.source < 0 || s.source >= batch.size()) throw std::out_of_range("bad slot source");
    if (conditioning.has_value() != (s.conditioning_row >= 0)) {
      throw std::invalid_argument("conditioning must be given for every slot or none");
    }
    const int begin = static_cast<int>(positions.size());
    self.segments.push_back({begin, s.positions, begin, s.positions});
    pointer.segments.push_back(
        {begin, s.positions, batch.offsets[s.source], batch.lengths[s.source]});
    items.emplace_back(s.source, s.conditioning_row);
    for (int i = 0; i < s.positions; ++i) {
      positions.push_back(s.first_position + i);
      cond_index.push_back(s.conditioning_row);
    }
  }
  const int rows = static_cast<int>(positions.size());
  Var x = Add(GatherRows(tape.Param(*m.specials), Zeros(rows)),
              tape.Constant(internal::SinusoidalPositions(positions, d)));
  if (conditioning) x = Add(x, GatherRows(*conditioning, cond_index));

  Memory memory = BuildMemory(batch, conditioning, items);
  AttentionLayout cross;
  for (size_t i = 0; i < slots.size(); ++i) {
    cross.segments.push_back(
        {self.segments[i].query_begin, slots[i].positions, memory.begin[i], memory.count[i]});
  }
  Var h = internal::RunStack(tape, m.decoder, x, self, memory.rows, cross, config_.dropout);
  ++decoder_passes_;

  Var symbols = MatMulTransposed(h, tape.Param(*m.target_embed));
  Var q = MatMul(h, tape.Param(*m.pointer_wq));
  Var k = MatMul(batch.e, tape.Param(*m.pointer_wk));
  Var copy = SegmentScores(q, k, pointer, 1.0f / std::sqrt(static_cast<float>(d)),
                           batch.max_length());
  PackedLogits out;
  out.logits = ConcatCols({symbols, copy});
  for (const auto& s : slots) {
    out.widths.insert(out.widths.end(), s.positions, num_symbols() + batch.lengths[s.source]);
  }
  return out;
}

PackedLogits Model::ArLogits(Tape& tape, const SourceBatch& batch,
                             const std::vector<ArPrefix>& prefixes) const {
  Require(autoregressive(), "autoregressive decoding");
  if (prefixes.empty()) throw std::invalid_argument("no prefixes to decode");
  const Impl& m = *impl_;
  const int d = config_.width();
  const int s_count = num_symbols();
  std::vector<int> index, positions;
  std::vector<std::pair<int, int>> items;
  AttentionLayout self, pointer;
  self.causal = true;
  for (const auto& prefix : prefixes) {
    const int len = static_cast<int>(prefix.tokens.size());
    if (len >= config_.max_frame_len) {
      throw std::out_of_range("prefix length must stay below max_frame_len");
    }
    if (prefix.source < 0 || prefix.source >= batch.size()) {
      throw std::out_of_range("bad prefix source");
    }
    const int begin = static_cast<int>(index.size());
    self.segments.push_back({begin, len + 1, begin, len + 1});
    pointer.segments.push_back(
        {begin, len + 1, batch.offsets[prefix.source], batch.lengths[prefix.source]});
    items.emplace_back(prefix.source, -1);
    index.push_back(0);
    positions.push_back(0);
    for (int i = 0; i < len; ++i) {
      const int id = prefix.tokens[i];
      if (id >= 0 && id < s_count) {
        index.push_back(2 + id);
      } else {
        const int p = id - s_count - 1;
        if (p < 0 || p >= batch.lengths[prefix.source]) {
          throw std::out_of_range("prefix token " + std::to_string(id) + " is not decodable");
        }
        index.push_back(2 + s_count + batch.offsets[prefix.source] + p);
      }
      positions.push_back(i + 1);
    }
  }
  Var table = ConcatRows({tape.Param(*m.specials), tape.Param(*m.target_embed), batch.e});
  Var x = Add(GatherRows(table, index),
              tape.Constant(internal::SinusoidalPositions(positions, d)));
  Memory memory = BuildMemory(batch, std::nullopt, items);
  AttentionLayout cross;
  for (size_t i = 0; i < prefixes.size(); ++i) {
    cross.segments.push_back({self.segments[i].query_begin, self.segments[i].query_count,
                              memory.begin[i], memory.count[i]});
  }
  Var h = internal::RunStack(tape, m.decoder, x, self, memory.rows, cross, config_.dropout);
  ++decoder_passes_;

  Var symbols = MatMulTransposed(h, tape.Param(*m.target_embed));
  Var end = MatMulTransposed(h, GatherRows(tape.Param(*m.specials), {1}));
  Var q = MatMul(h, tape.Param(*m.pointer_wq));
  Var k = MatMul(batch.e, tape.Param(*m.pointer_wk));
  Var copy = SegmentScores(q, k, pointer, 1.0f / std::sqrt(static_cast<float>(d)),
                           batch.max_length());
  PackedLogits out;
  out.logits = ConcatCols({symbols, end, copy});
  for (const auto& prefix : prefixes) {
    out.widths.insert(out.widths.end(), prefix.tokens.size() + 1,
                      s_count + 1 + batch.lengths[prefix.source]);
  }
  return out;
}

EncoderOutput Model::Encode(const std::vector<std::string>& query) const {
  return EncodeIds(SourceIds(query));
}

EncoderOutput Model::EncodeIds(const std::vector<int>& source_ids) const {
  Tape tape = Tape::Inference();
  SourceBatch batch = EncodeBatch(tape, {source_ids});
  return EncoderOutput{batch.e.value(), source_ids};
}

namespace {

SourceBatch ConstantBatch(Tape& tape, const EncoderOutput& enc) {
  if (enc.e.rows() != enc.length() || enc.length() < 1) {
    throw std::invalid_argument("malformed encoder output");
  }
  SourceBatch batch;
  batch.e = tape.Constant(enc.e);
  batch.offsets = {0};
  batch.lengths = {enc.length()};
  return batch;
}

Tensor RowsOf(const Tensor& t, int begin, int count) {
  Tensor out = Tensor::Matrix(count, t.cols());
  std::copy(t.data() + static_cast<size_t>(begin) * t.cols(),
            t.data() + static_cast<size_t>(begin + count) * t.cols(), out.data());
  return out;
}

}  // namespace

Tensor Model::PredictIntentLogits(const EncoderOutput& enc) const {
  Tape tape = Tape::Inference();
  SourceBatch batch = ConstantBatch(tape, enc);
  const Tensor& logits = IntentLogits(tape, batch).value();
  return Tensor({logits.cols()}, std::vector<float>(logits.data(), logits.data() + logits.cols()));
}

Tensor Model::PredictLengthLogits(const EncoderOutput& enc,
                                  const std::optional<Tensor>& intent_scores) const {
  Tape tape = Tape::Inference();
  SourceBatch batch = ConstantBatch(tape, enc);
  std::optional<Var> conditioning;
  if (intent_scores) {
    if (static_cast<int>(intent_scores->size()) != num_intents()) {
      throw std::invalid_argument("intent scores have the wrong size");
    }
    conditioning = Conditioning(tape, tape.Constant(Tensor({1, num_intents()},
                                                           std::vector<float>(intent_scores->values().begin(),
                                                                              intent_scores->values().end()))));
  }
  const Tensor& logits = LengthLogits(tape, batch, conditioning).value();
  return Tensor({logits.cols()}, std::vector<float>(logits.data(), logits.data() + logits.cols()));
}

std::vector<Tensor> Model::PredictLengthLogitsBatch(
    const EncoderOutput& enc, const std::vector<Tensor>& intent_scores) const {
  Require(conditioned(), "batched conditioned length prediction");
  if (intent_scores.empty()) return {};
  Tape tape = Tape::Inference();
  const int b = static_cast<int>(intent_scores.size());
  SourceBatch batch = ConstantBatch(tape, enc);
  batch.offsets.assign(b, 0);
  batch.lengths.assign(b, enc.length());
  Tensor scores = Tensor::Matrix(b, num_intents());
  for (int r = 0; r < b; ++r) {
    if (static_cast<int>(intent_scores[r].size()) != num_intents()) {
      throw std::invalid_argument("intent scores have the wrong size");
    }
    std::copy(intent_scores[r].values().begin(), intent_scores[r].values().end(),
              scores.row(r).begin());
  }
  Var conditioning = Conditioning(tape, tape.Constant(std::move(scores)));
  const Tensor& logits = LengthLogits(tape, batch, conditioning).value();
  std::vector<Tensor> out;
  for (int r = 0; r < b; ++r) {
    auto row = logits.row(r);
    out.emplace_back(std::vector<int>{logits.cols()}, std::vector<float>(row.begin(), row.end()));
  }
  return out;
}

Tensor Model::TeacherScores(int intent) const {
  return IntentTeacherLogits(num_intents(), intent, config_.teacher_epsilon);
}

std::vector<Tensor> Model::DecodeFrameBatch(const EncoderOutput& enc,
                                            const std::vector<FrameRequest>& requests) const {
  Tape tape = Tape::Inference();
  SourceBatch batch = ConstantBatch(tape, enc);
  std::vector<FrameSlot> slots;
  std::optional<Var> conditioning;
  if (conditioned()) {
    Tensor scores = Tensor::Matrix(static_cast<int>(requests.size()), num_intents());
    for (size_t r = 0; r < requests.size(); ++r) {
      const auto& s = requests[r].intent_scores;
      if (!s || static_cast<int>(s->size()) != num_intents()) {
        throw std::invalid_argument("conditioned decoding needs intent scores for every request");
      }
      std::copy(s->values().begin(), s->values().end(), scores.row(static_cast<int>(r)).begin());
    }
    conditioning = Conditioning(tape, tape.Constant(std::move(scores)));
  }
  for (size_t r = 0; r < requests.size(); ++r) {
    const int n = requests[r].n;
    if (n < 1 || n > config_.max_frame_len) {
      throw std::out_of_range("frame length " + std::to_string(n) + " out of range");
    }
    if (conditioned()) {
      if (n < 2) throw std::out_of_range("conditioned frames need n >= 2");
      slots.push_back({0, n - 1, 1, static_cast<int>(r)});
    } else {
      if (requests[r].intent_scores) {
        throw std::invalid_argument("the baseline decoder takes no intent");
      }
      slots.push_back({0, n, 0, -1});
    }
  }
  PackedLogits packed = DecodeFrames(tape, batch, conditioning, slots);
  Tensor log_probs = LogSoftmaxRows(packed.logits.value());
  std::vector<Tensor> out;
  int row = 0;
  for (const auto& s : slots) {
    out.push_back(RowsOf(log_probs, row, s.positions));
    row += s.positions;
  }
  return out;
}

Tensor Model::DecodeFrame(const EncoderOutput& enc, int n,
                          const std::optional<Tensor>& intent_scores) const {
  return DecodeFrameBatch(enc, {FrameRequest{n, intent_scores}}).front();
}

std::vector<std::vector<double>> Model::ArStepBatch(
    const EncoderOutput& enc, const std::vector<std::vector<int>>& prefixes) const {
  Tape tape = Tape::Inference();
  SourceBatch batch = ConstantBatch(tape, enc);
  std::vector<ArPrefix> items;
  for (const auto& p : prefixes) items.push_back({0, p});
  PackedLogits packed = ArLogits(tape, batch, items);
  ++ar_steps_;
  const Tensor& logits = packed.logits.value();
  std::vector<std::vector<double>> out;
  int row = -1;
  for (const auto& p : prefixes) {
    row += static_cast<int>(p.size()) + 1;
    auto values = logits.row(row);
    const int w = packed.widths[row];
    double mx = values[0];
    for (int c = 1; c < w; ++c) mx = std::max<double>(mx, values[c]);
    double z = 0.0;
    for (int c = 0; c < w; ++c) z += std::exp(values[c] - mx);
    const double lse = mx + std::log(z);
    std::vector<double> lp(w);
    for (int c = 0; c < w; ++c) lp[c] = values[c] - lse;
    out.push_back(std::move(lp));
  }
  return out;
}

std::vector<double> Model::ArDecodeStep(const EncoderOutput& enc,
                                        const std::vector<int>& prefix) const {
  return ArStepBatch(enc, {prefix}).front();
}

InvocationCounts Model::counts() const {
  return {encoder_passes_.load(), decoder_passes_.load(), ar_steps_.load()};
}

void Model::ResetCounts() const {
  encoder_passes_ = 0;
  decoder_passes_ = 0;
  ar_steps_ = 0;
}

namespace {

std::string ReadText(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void WriteText(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text << '\n';
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace

void SaveModelDir(const Model& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  WriteText(dir / "model.json", model.config().ToJson());
  WriteText(dir / "vocab.json", model.vocab().ToJson());
  SaveCheckpoint(dir / "checkpoint.narp", model.params());
}

std::unique_ptr<Model> LoadModelDir(const std::filesystem::path& dir) {
  auto model = std::make_unique<Model>(ModelConfig::FromJson(ReadText(dir / "model.json")),
                                       VocabBundle::FromJson(ReadText(dir / "vocab.json")), 0);
  LoadCheckpoint(dir / "checkpoint.narp", model->params());
  return model;
}

Tensor IntentTeacherLogits(int num_intents, int intent, float epsilon) {
  if (num_intents < 2 || intent < 0 || intent >= num_intents) {
    throw std::out_of_range("intent label out of range");
  }
  if (!(epsilon > 0.0f && epsilon < 1.0f)) {
    throw std::domain_error("teacher logits need epsilon in (0, 1)");
  }
  const float off = std::log(epsilon / static_cast<float>(num_intents - 1));
  Tensor t({num_intents}, off);
  t[intent] = std::log(1.0f - epsilon);
  return t;
}

int ArgMax(std::span<const float> values) {
  if (values.empty()) throw std::invalid_argument("ArgMax of an empty range");
  return static_cast<int>(std::max_element(values.begin(), values.end()) - values.begin());
}

}  // namespace narp
