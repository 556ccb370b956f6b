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
#include <filesystem>
#include <vector>

#include <gtest/gtest.h>

#include "narp/model.h"
#include "narp/synth_data.h"

namespace narp {
namespace {

namespace fs = std::filesystem;

const std::vector<Example>& Corpus() {
  static const std::vector<Example> data = GenerateDataset(DefaultGrammar(), 21, 300);
  return data;
}

ModelConfig Tiny(ModelKind kind) {
  ModelConfig c = ModelConfig::Desk(kind);
  for (StackConfig* s : {&c.encoder, &c.decoder, &c.intent, &c.length}) {
    s->layers = 1;
    s->width = 16;
    s->heads = 2;
  }
  return c;
}

std::vector<std::string> Words(const char* text) { return Tokenize(text); }

void ExpectRowsNormalized(const Tensor& log_probs) {
  for (int r = 0; r < log_probs.rows(); ++r) {
    double total = 0.0;
    for (float v : log_probs.row(r)) total += std::exp(static_cast<double>(v));
    EXPECT_NEAR(total, 1.0, 1e-5);
  }
}

class ModelTest : public ::testing::Test {
 protected:
  ModelTest()
      : vocab_(BuildVocabs(Corpus())),
        proposed_(Tiny(ModelKind::kProposedNar), vocab_, 3),
        baseline_(Tiny(ModelKind::kBaselineNar), vocab_, 3),
        ar_(Tiny(ModelKind::kAutoregressive), vocab_, 3) {}
  VocabBundle vocab_;
  Model proposed_;
  Model baseline_;
  Model ar_;
};

TEST(ModelConfigTest, PresetsAndValidation) {
  const ModelConfig desk = ModelConfig::Preset("desk", ModelKind::kProposedNar);
  EXPECT_EQ(desk.decoder.layers, 2);
  EXPECT_EQ(desk.decoder.width, 64);
  EXPECT_EQ(desk.decoder.heads, 2);
  const ModelConfig ratio = ModelConfig::Preset("table8-ratio", ModelKind::kProposedNar);
  EXPECT_EQ(ratio.decoder.layers, 4);
  EXPECT_EQ(ratio.length.layers, 8);
  EXPECT_EQ(ratio.intent.heads, 4);
  EXPECT_THROW(ModelConfig::Preset("huge", ModelKind::kProposedNar), ConfigError);

  ModelConfig bad = desk;
  bad.decoder.heads = 3;
  EXPECT_THROW(bad.Validate(), ConfigError);
  bad = desk;
  bad.max_frame_len = 51;
  EXPECT_THROW(bad.Validate(), ConfigError);

  const ModelConfig back = ModelConfig::FromJson(ratio.ToJson());
  EXPECT_EQ(back.ToJson(), ratio.ToJson());
}

TEST_F(ModelTest, EncoderShapesAndDeterminism) {
  const auto query = Words("weather in boston tomorrow");
  const EncoderOutput a = proposed_.Encode(query);
  EXPECT_EQ(a.e.rows(), 4);
  EXPECT_EQ(a.e.cols(), 16);
  EXPECT_EQ(proposed_.Encode(query).e, a.e);
  EXPECT_EQ(proposed_.SourceIds(Words("zzzz"))[0], 0);
  EXPECT_THROW(proposed_.Encode({}), std::invalid_argument);
  EXPECT_THROW(proposed_.Encode(std::vector<std::string>(40, "a")), std::invalid_argument);
}

TEST_F(ModelTest, PositionsAloneSeparateRowsWithZeroEmbeddings) {
  proposed_.params().Find("encoder/token_embed")->value.Fill(0.0f);
  const EncoderOutput enc = proposed_.Encode(Words("a a a"));
  for (int r = 1; r < 3; ++r) {
    bool differs = false;
    for (int c = 0; c < enc.e.cols(); ++c) differs |= enc.e.at(r, c) != enc.e.at(0, c);
    EXPECT_TRUE(differs) << "row " << r;
  }
}

TEST_F(ModelTest, IntentAndLengthHeads) {
  const EncoderOutput enc = proposed_.Encode(Words("how long until i reach the airport"));
  const Tensor intent = proposed_.PredictIntentLogits(enc);
  EXPECT_EQ(static_cast<int>(intent.size()), proposed_.num_intents());
  ExpectRowsNormalized(LogSoftmaxRows(Tensor({1, proposed_.num_intents()},
                                             std::vector<float>(intent.values().begin(),
                                                                intent.values().end()))));
  const Tensor a = proposed_.PredictLengthLogits(enc, proposed_.TeacherScores(0));
  const Tensor b = proposed_.PredictLengthLogits(enc, proposed_.TeacherScores(1));
  EXPECT_EQ(static_cast<int>(a.size()), proposed_.num_length_classes());
  EXPECT_NE(a, b);
  EXPECT_THROW(proposed_.PredictLengthLogits(enc, std::nullopt), std::invalid_argument);

  const EncoderOutput benc = baseline_.Encode(Words("how long until i reach the airport"));
  EXPECT_EQ(static_cast<int>(baseline_.PredictLengthLogits(benc, std::nullopt).size()),
            baseline_.num_length_classes());
  EXPECT_THROW(baseline_.PredictLengthLogits(benc, baseline_.TeacherScores(0)),
               std::logic_error);
  EXPECT_THROW(baseline_.PredictIntentLogits(benc), std::logic_error);
}

TEST_F(ModelTest, LengthClasses) {
  EXPECT_EQ(baseline_.LengthClass(2), 0);
  EXPECT_EQ(baseline_.LengthClass(10), 4);
  EXPECT_EQ(baseline_.LengthOfClass(4), 10);
  EXPECT_EQ(baseline_.HeadValueOfClass(4), 10);
  EXPECT_EQ(proposed_.LengthClass(10), 4);
  EXPECT_EQ(proposed_.HeadValueOfClass(4), 9);
  EXPECT_THROW(baseline_.LengthClass(7), std::out_of_range);
  EXPECT_THROW(baseline_.LengthClass(52), std::out_of_range);
}

TEST_F(ModelTest, ConditionedDecodeShape) {
  const EncoderOutput enc = proposed_.Encode(Words("play some jazz"));
  proposed_.ResetCounts();
  const Tensor out = proposed_.DecodeFrame(enc, 6, proposed_.TeacherScores(2));
  EXPECT_EQ(out.rows(), 5);
  EXPECT_EQ(out.cols(), proposed_.num_symbols() + 3);
  ExpectRowsNormalized(out);
  EXPECT_EQ(proposed_.counts().decoder_passes, 1);
  EXPECT_THROW(proposed_.DecodeFrame(enc, 60, proposed_.TeacherScores(2)), std::out_of_range);
}

TEST_F(ModelTest, BaselineDecodeShape) {
  const EncoderOutput enc = baseline_.Encode(Words("play some jazz"));
  const Tensor out = baseline_.DecodeFrame(enc, 6, std::nullopt);
  EXPECT_EQ(out.rows(), 6);
  EXPECT_EQ(out.cols(), baseline_.num_symbols() + 3);
  ExpectRowsNormalized(out);
  EXPECT_THROW(baseline_.DecodeFrame(enc, 0, std::nullopt), std::out_of_range);
}

TEST_F(ModelTest, BatchedDecodeMatchesSingleDecodes) {
  const EncoderOutput enc = proposed_.Encode(Words("avoid tolls on my route"));
  std::vector<Model::FrameRequest> requests;
  for (int i = 0; i < 4; ++i) requests.push_back({4 + 2 * i, proposed_.TeacherScores(i)});
  proposed_.ResetCounts();
  const std::vector<Tensor> batched = proposed_.DecodeFrameBatch(enc, requests);
  EXPECT_EQ(proposed_.counts().decoder_passes, 1);
  for (size_t i = 0; i < requests.size(); ++i) {
    const Tensor single = proposed_.DecodeFrame(enc, requests[i].n, requests[i].intent_scores);
    ASSERT_TRUE(single.SameShape(batched[i]));
    for (size_t j = 0; j < single.size(); ++j) EXPECT_NEAR(single[j], batched[i][j], 1e-5);
  }
}

TEST_F(ModelTest, ArStepDistribution) {
  const EncoderOutput enc = ar_.Encode(Words("find cafes nearby"));
  const std::vector<double> first = ar_.ArDecodeStep(enc, {});
  EXPECT_EQ(static_cast<int>(first.size()), ar_.num_symbols() + 1 + 3);
  double total = 0.0;
  for (double v : first) total += std::exp(v);
  EXPECT_NEAR(total, 1.0, 1e-6);
  EXPECT_EQ(ar_.end_token(), ar_.num_symbols());
  EXPECT_THROW(proposed_.end_token(), std::logic_error);

  const std::vector<int> prefix = {0, ar_.PositionToken(1)};
  ar_.ResetCounts();
  const auto batched = ar_.ArStepBatch(enc, {{}, prefix});
  EXPECT_EQ(ar_.counts().ar_steps, 1);
  const auto single = ar_.ArDecodeStep(enc, prefix);
  for (size_t j = 0; j < single.size(); ++j) EXPECT_NEAR(batched[1][j], single[j], 1e-5);
}

TEST_F(ModelTest, TokenIdMapping) {
  const FrameSeq frame = ParseFrame("[in:get_weather [sl:location 2 2 ] ]", FrameForm::kSpan);
  const std::vector<int> ids = proposed_.FrameTokenIds(frame);
  ASSERT_EQ(ids.size(), 6u);
  EXPECT_EQ(proposed_.TokenOf(ids[2]), FrameToken::Position(2));
  EXPECT_EQ(ids[2], proposed_.PositionToken(2));
  EXPECT_EQ(ar_.PositionToken(2), ar_.num_symbols() + 1 + 2);
  EXPECT_THROW(proposed_.FrameTokenIds(ParseFrame("[in:nope ]", FrameForm::kSpan)),
               std::invalid_argument);
}

TEST_F(ModelTest, ParameterCountIdentities) {
  const ParameterStore& p = proposed_.params();
  EXPECT_EQ(p.ElementCount(), baseline_.params().ElementCount() + p.ElementCount("intent/"));
  EXPECT_EQ(baseline_.params().ElementCount(),
            ar_.params().ElementCount() + baseline_.params().ElementCount("length/"));
  EXPECT_GT(p.ElementCount("intent/"), 0u);
}

TEST_F(ModelTest, SaveAndLoadDirectory) {
  const fs::path dir = fs::temp_directory_path() / "narp_model_test_dir";
  fs::remove_all(dir);
  SaveModelDir(proposed_, dir);
  const std::unique_ptr<Model> back = LoadModelDir(dir);
  EXPECT_EQ(back->kind(), ModelKind::kProposedNar);
  EXPECT_EQ(back->vocab(), proposed_.vocab());
  const auto query = Words("weather in boston");
  EXPECT_EQ(back->PredictIntentLogits(back->Encode(query)),
            proposed_.PredictIntentLogits(proposed_.Encode(query)));
  fs::remove_all(dir);
  EXPECT_THROW(LoadModelDir(dir), std::runtime_error);
}

TEST(IntentTeacherLogitsTest, SmoothedOneHot) {
  const Tensor t = IntentTeacherLogits(4, 1, 0.1f);
  EXPECT_NEAR(t[1], std::log(0.9), 1e-6);
  EXPECT_NEAR(t[0], std::log(0.1 / 3), 1e-6);
  EXPECT_THROW(IntentTeacherLogits(4, 1, 0.0f), std::domain_error);
  EXPECT_THROW(IntentTeacherLogits(4, 4, 0.1f), std::out_of_range);
  EXPECT_EQ(ArgMax(t.values()), 1);
}

}  // namespace
}  // namespace narp
