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

#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "diversity_cases.h"
#include "narp/eval_metrics.h"

namespace narp {
namespace {

Hypothesis Hyp(const std::string& text, int source_len = 10) {
  Hypothesis h;
  h.frame = ParseFrame(text, FrameForm::kSpan);
  h.n = static_cast<int>(h.frame.tokens.size());
  h.valid = ValidateFrame(h.frame, source_len).empty();
  return h;
}

FrameSeq Span(const std::string& text) { return ParseFrame(text, FrameForm::kSpan); }

std::vector<FrameSeq> Frames(const std::vector<std::string>& texts) {
  std::vector<FrameSeq> out;
  for (const auto& t : texts) out.push_back(Span(t));
  return out;
}

TEST(ExactMatchTest, IdenticalPredictionScoresOne) {
  const std::string gold = "[in:get_event [sl:location 4 4 ] ]";
  const auto r = ExactMatch({{Hyp(gold)}}, {Span(gold)});
  EXPECT_EQ(r.queries, 1);
  EXPECT_EQ(r.em[0], 1.0);
  EXPECT_EQ(r.im[2], 1.0);
}

TEST(ExactMatchTest, GoldAtRankThree) {
  const std::string gold = "[in:a [sl:x 1 2 ] ]";
  const auto r = ExactMatch({{Hyp("[in:b [sl:x 1 2 ] ]"), Hyp("[in:a [sl:x 1 1 ] ]"), Hyp(gold)}},
                            {Span(gold)});
  EXPECT_EQ(r.em[0], 0.0);
  EXPECT_EQ(r.em[1], 0.0);
  EXPECT_EQ(r.em[2], 1.0);
  EXPECT_EQ(r.im[0], 0.0);
  EXPECT_EQ(r.im[1], 1.0);
}

TEST(ExactMatchTest, ValidMatchThenInvalidDuplicate) {
  const std::string gold =
      "[in:update_directions [sl:path_avoid [in:get_location [sl:category_location 1 1 ] ] ] ]";
  const Hypothesis first = Hyp(gold, 5);
  const Hypothesis duplicate = Hyp(
      "[in:update_directions [sl:path_avoid [in:get_location [sl:category_location 1 1", 5);
  EXPECT_TRUE(first.valid);
  EXPECT_FALSE(duplicate.valid);
  const auto r = ExactMatch({{first, duplicate}}, {Span(gold)});
  EXPECT_EQ(r.em[0], 1.0);
  EXPECT_EQ(r.em[2], 1.0);
}

TEST(ExactMatchTest, IndexFormGoldAndShortLists) {
  const FrameSeq gold_index = ParseFrame("[in:a [sl:x 2 3 4 ] ]", FrameForm::kIndex);
  const auto r = ExactMatch({{Hyp("[in:a [sl:x 2 4 ] ]")}, {}}, {gold_index, gold_index});
  EXPECT_EQ(r.queries, 2);
  EXPECT_EQ(r.em[0], 0.5);
  EXPECT_EQ(r.em[2], 0.5);
  EXPECT_EQ(CanonicalFrameString(gold_index), "[in:a [sl:x 2 4 ] ]");
}

TEST(ExactMatchTest, MonotoneAndBoundedByIntentMatch) {
  Rng rng(4);
  const std::vector<std::string> pool = {"[in:a [sl:x 0 1 ] ]", "[in:a [sl:x 0 0 ] ]",
                                         "[in:b [sl:x 0 1 ] ]", "[in:b ]", "[in:a ]"};
  std::vector<std::vector<Hypothesis>> preds;
  std::vector<FrameSeq> golds;
  for (int q = 0; q < 200; ++q) {
    std::vector<Hypothesis> hs;
    for (int i = 0; i < 3; ++i) hs.push_back(Hyp(pool[rng.UniformInt(pool.size())]));
    preds.push_back(hs);
    golds.push_back(Span(pool[rng.UniformInt(pool.size())]));
  }
  const auto r = ExactMatch(preds, golds);
  for (int k = 0; k < 3; ++k) {
    EXPECT_LE(r.em[k], r.im[k]);
    if (k > 0) {
      EXPECT_LE(r.em[k - 1], r.em[k]);
      EXPECT_LE(r.im[k - 1], r.im[k]);
    }
  }
}

TEST(DiversityTest, HandCountedSets) {
  for (size_t i = 0; i < testing::kDiversitySets.size(); ++i) {
    const DiversityReport d = Diversity({Frames(testing::kDiversitySets[i])});
    const auto& e = testing::kDiversityExpected[i];
    EXPECT_DOUBLE_EQ(d.unique_intents, e[0]) << i;
    EXPECT_NEAR(d.distinct1_sentence, e[1], 1e-9) << i;
    EXPECT_NEAR(d.distinct2_sentence, e[2], 1e-9) << i;
    EXPECT_NEAR(d.distinct1_corpus, e[3], 1e-9) << i;
    EXPECT_NEAR(d.distinct2_corpus, e[4], 1e-9) << i;
  }
  std::vector<std::vector<FrameSeq>> all;
  for (const auto& set : testing::kDiversitySets) all.push_back(Frames(set));
  const DiversityReport d = Diversity(all);
  EXPECT_EQ(d.queries, 5);
  EXPECT_EQ(d.parses, 15);
  EXPECT_NEAR(d.unique_intents, testing::kDiversityPooled[0], 1e-12);
  EXPECT_NEAR(d.distinct1_sentence, testing::kDiversityPooled[1], 1e-9);
  EXPECT_NEAR(d.distinct2_sentence, testing::kDiversityPooled[2], 1e-9);
  EXPECT_NEAR(d.distinct1_corpus, testing::kDiversityPooled[3], 1e-9);
  EXPECT_NEAR(d.distinct2_corpus, testing::kDiversityPooled[4], 1e-9);
}

TEST(DiversityTest, AllUniqueParse) {
  const DiversityReport d = Diversity({Frames({"[in:a [sl:b 3 4 ]"})});
  EXPECT_DOUBLE_EQ(d.distinct1_sentence, 100.0);
  EXPECT_DOUBLE_EQ(d.distinct1_corpus, 100.0);
}

TEST(DiversityTest, DuplicatesDivideCorpusRatio) {
  const std::string p = "[in:get_event [sl:location 4 4 ] [sl:date_time 5 8 ] ]";
  const DiversityReport one = Diversity({Frames({p})});
  const DiversityReport three = Diversity({Frames({p, p, p})});
  EXPECT_DOUBLE_EQ(three.unique_intents, 1.0);
  EXPECT_NEAR(three.distinct1_corpus, one.distinct1_sentence / 3.0, 1e-9);
  EXPECT_NEAR(three.distinct2_corpus, one.distinct2_sentence / 3.0, 1e-9);
}

TEST(DiversityTest, EmptyParsesAreSkipped) {
  const DiversityReport d = Diversity({{FrameSeq{}, Span("[in:a ]")}, {FrameSeq{}}});
  EXPECT_EQ(d.skipped_empty, 2);
  EXPECT_EQ(d.parses, 1);
  EXPECT_EQ(d.queries, 1);
  EXPECT_DOUBLE_EQ(d.distinct1_sentence, 100.0);
}

TEST(LinearSlopeTest, ExactLine) {
  EXPECT_NEAR(LinearSlope({1, 2, 3, 4}, {3, 5, 7, 9}), 2.0, 1e-12);
  EXPECT_THROW(LinearSlope({1}, {2}), std::invalid_argument);
  EXPECT_THROW(LinearSlope({2, 2}, {1, 3}), std::invalid_argument);
}

class TinyModels : public ::testing::Test {
 protected:
  static ModelConfig Tiny(ModelKind kind) {
    ModelConfig c = ModelConfig::Desk(kind);
    for (StackConfig* s : {&c.encoder, &c.decoder, &c.intent, &c.length}) {
      s->layers = 1;
      s->width = 16;
    }
    return c;
  }
  TinyModels()
      : data_(GenerateDataset(DefaultGrammar(), 6, 40)),
        vocab_(BuildVocabs(data_)),
        proposed_(Tiny(ModelKind::kProposedNar), vocab_, 1),
        baseline_(Tiny(ModelKind::kBaselineNar), vocab_, 1),
        ar_(Tiny(ModelKind::kAutoregressive), vocab_, 1) {}
  std::vector<Example> data_;
  VocabBundle vocab_;
  Model proposed_, baseline_, ar_;
};

TEST_F(TinyModels, OracleModesAndDominance) {
  EXPECT_THROW(OracleEval(proposed_, data_, OracleMode::kGoldLength), std::invalid_argument);
  EXPECT_THROW(OracleEval(baseline_, data_, OracleMode::kGoldIntent), std::invalid_argument);
  EXPECT_THROW(OracleEval(ar_, data_, OracleMode::kGoldIntent), std::invalid_argument);
  for (const auto& [model, mode] : {std::pair{&proposed_, OracleMode::kGoldIntent},
                                    std::pair{&baseline_, OracleMode::kGoldLength}}) {
    const OracleResult r = OracleEval(*model, data_, mode);
    EXPECT_EQ(r.examples, 40);
    EXPECT_EQ(r.counterexamples, 0);
    EXPECT_GE(r.oracle_em, r.greedy_em);
  }
}

TEST_F(TinyModels, LatencyCounts) {
  DecodeSettings beam;
  beam.mode = DecodeMode::kBeam;
  beam.k1 = 5;
  beam.k2 = 3;
  for (const Model* m : {&proposed_, &baseline_}) {
    const LatencyReport r = MeasureLatency(*m, data_, beam, 10);
    EXPECT_EQ(r.examples, 10);
    EXPECT_DOUBLE_EQ(r.decoder_passes, 1.0);
    EXPECT_DOUBLE_EQ(r.encoder_passes, 1.0);
    EXPECT_DOUBLE_EQ(r.ar_steps, 0.0);
  }
  const LatencyReport ar = MeasureLatency(ar_, data_, DecodeSettings{}, 10);
  const int cap = ar_.config().max_frame_len;
  for (const LatencySample& s : ar.samples) EXPECT_EQ(s.ar_steps, std::min(s.n + 1, cap));
}

TEST(EvaluateTest, ReportTablesAndJson) {
  BeamRecord r;
  r.query = "weather in boston";
  r.gold = "[in:get_weather [sl:location 2 2 ] ]";
  r.hypotheses = {Hyp(r.gold, 3), Hyp("[in:get_event [sl:location 2 2 ] ]", 3),
                  Hyp("[in:get_weather [sl:location", 3)};
  const EvalReport report = Evaluate({r});
  EXPECT_EQ(report.exact_match.em[0], 1.0);
  EXPECT_EQ(report.diversity.unique_intents, 2.0);
  EXPECT_EQ(report.invalid_top1, 0);
  const std::string table = report.ToTable();
  for (const char* col : {"top-1 EM", "top-3 EM", "top-1 IM", "top-3 IM",
                          "# of unique 1st intents in top-3", "distinct-2 (corpus-wise)"}) {
    EXPECT_NE(table.find(col), std::string::npos) << col;
  }
  const auto j = nlohmann::json::parse(report.ToJson());
  EXPECT_TRUE(j.contains("top1_em"));
  EXPECT_TRUE(j.contains("distinct2_corpus"));
}

}  // namespace
}  // namespace narp
