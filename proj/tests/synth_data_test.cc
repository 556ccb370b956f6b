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

#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include <gtest/gtest.h>

#include "narp/synth_data.h"

namespace narp {
namespace {

namespace fs = std::filesystem;

GrammarSpec TwoIntents() {
  GrammarSpec spec;
  spec.intents = {{"get_weather", {"location"}}, {"get_location", {"category"}}};
  spec.slots = {{"location", {"get_location"}}};
  spec.fillers = {{"location", {"boston", "new york"}}, {"category", {"cafes", "gas stations"}}};
  spec.templates = {{"get_weather", {"weather in {location}", "is it raining in {location}"}},
                    {"get_location", {"find {category}"}}};
  spec.nested_templates = {{"get_location", {"the nearest {category}"}}};
  spec.nesting_prob = 0.5;
  return spec;
}

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("narp_synth_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
            "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path Write(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }
  fs::path dir_;
};

TEST(GenerateTest, DeterministicPerSeed) {
  const auto a = GenerateDataset(TwoIntents(), 1, 1);
  const auto b = GenerateDataset(TwoIntents(), 1, 1);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].query, b[0].query);
  EXPECT_EQ(a[0].tree, b[0].tree);
  const auto c = GenerateDataset(TwoIntents(), 2, 50);
  const auto d = GenerateDataset(TwoIntents(), 3, 50);
  bool differs = false;
  for (size_t i = 0; i < c.size(); ++i) differs |= c[i].QueryText() != d[i].QueryText();
  EXPECT_TRUE(differs);
}

TEST(GenerateTest, ZeroNestingGivesFlatTrees) {
  GrammarSpec spec = TwoIntents();
  spec.nesting_prob = 0.0;
  for (const Example& ex : GenerateDataset(spec, 4, 200)) EXPECT_EQ(ex.tree.depth(), 1);
}

TEST(GenerateTest, NestingHonorsDepthAndLengthBounds) {
  GrammarSpec spec = TwoIntents();
  spec.max_depth = 2;
  spec.max_len = 6;
  bool nested = false;
  for (const Example& ex : GenerateDataset(spec, 5, 300)) {
    EXPECT_LE(ex.tree.depth(), 2);
    EXPECT_LE(ex.query.size(), 6u);
    nested |= ex.tree.depth() == 2;
    for (FrameForm form : {FrameForm::kIndex, FrameForm::kSpan}) {
      EXPECT_TRUE(ValidateFrame(TreeToFrame(ex.tree, form), ex.query.size()).empty());
    }
  }
  EXPECT_TRUE(nested);
}

TEST(GenerateTest, DefaultGrammarCoversIntents) {
  const GrammarSpec spec = DefaultGrammar();
  EXPECT_EQ(spec.intents.size(), 25u);
  std::set<std::string> roots;
  for (const Example& ex : GenerateDataset(spec, 1, 10000)) {
    roots.insert(ex.tree.root.label);
    ASSERT_LE(ex.query.size(), 32u);
  }
  EXPECT_GE(roots.size(), 24u);
}

TEST(GrammarSpecTest, RejectsInvalidSpecs) {
  GrammarSpec one = TwoIntents();
  one.intents.erase("get_location");
  EXPECT_THROW(one.Validate(), ConfigError);

  GrammarSpec prob = TwoIntents();
  prob.nesting_prob = 1.0;
  EXPECT_THROW(GenerateDataset(prob, 1, 1), ConfigError);

  GrammarSpec no_filler = TwoIntents();
  no_filler.fillers.erase("category");
  EXPECT_THROW(no_filler.Validate(), ConfigError);

  GrammarSpec bad_slot = TwoIntents();
  bad_slot.templates["get_weather"] = {"weather at {date}"};
  EXPECT_THROW(bad_slot.Validate(), ConfigError);
}

TEST(GrammarSpecTest, JsonRoundTrip) {
  const GrammarSpec spec = TwoIntents();
  const GrammarSpec back = GrammarSpec::FromJson(spec.ToJson());
  EXPECT_EQ(back.intents, spec.intents);
  EXPECT_EQ(back.fillers, spec.fillers);
  EXPECT_EQ(back.templates, spec.templates);
  EXPECT_EQ(back.nested_templates, spec.nested_templates);
  EXPECT_EQ(back.nesting_prob, spec.nesting_prob);
  EXPECT_THROW(GrammarSpec::FromJson("{\"intents\": 3}"), ConfigError);
}

TEST_F(TempDir, LoadTsvReadsWeekendExample) {
  const fs::path p = Write(
      "a.tsv",
      "What is going on this weekend?\t[IN:GET_EVENT [SL:DATE_TIME this weekend ] ]\n");
  const LoadResult r = LoadTsv(p);
  ASSERT_EQ(r.examples.size(), 1u);
  EXPECT_EQ(r.examples[0].QueryText(), "what is going on this weekend ?");
  EXPECT_EQ(TreeToFrame(r.examples[0].tree, FrameForm::kSpan).ToString(),
            "[in:get_event [sl:date_time 4 5 ] ]");
}

TEST_F(TempDir, LoadTsvUsesFirstAndLastFields) {
  const fs::path p =
      Write("b.tsv", "play jazz\tignored middle\t[in:play_music [sl:genre jazz ] ]\n\n");
  const LoadResult r = LoadTsv(p);
  ASSERT_EQ(r.examples.size(), 1u);
  EXPECT_EQ(r.examples[0].tree.root.label, "in:play_music");
}

TEST_F(TempDir, LoadTsvSkipsOrFailsOnMalformedLines) {
  const fs::path p = Write("c.tsv",
                           "play jazz\t[in:play_music [sl:genre jazz ] ]\n"
                           "play rock\t[in:play_music [sl:genre rock ]\n"
                           "no tab here\n");
  const LoadResult r = LoadTsv(p);
  EXPECT_EQ(r.examples.size(), 1u);
  ASSERT_EQ(r.skipped.size(), 2u);
  EXPECT_EQ(r.skipped[0].line_number, 2);
  EXPECT_EQ(r.skipped[1].line_number, 3);
  EXPECT_THROW(LoadTsv(p, true), ConfigError);
}

TEST_F(TempDir, LoadTsvEmptyAndMissingFiles) {
  EXPECT_TRUE(LoadTsv(Write("empty.tsv", "")).examples.empty());
  EXPECT_THROW(LoadTsv(dir_ / "missing.tsv"), std::runtime_error);
}

TEST_F(TempDir, SaveThenLoadRoundTrip) {
  const auto data = GenerateDataset(TwoIntents(), 9, 40);
  SaveTsv(dir_ / "d.tsv", data);
  const LoadResult r = LoadTsv(dir_ / "d.tsv", true);
  ASSERT_EQ(r.examples.size(), data.size());
  for (size_t i = 0; i < data.size(); ++i) {
    EXPECT_EQ(r.examples[i].query, data[i].query);
    EXPECT_EQ(r.examples[i].tree, data[i].tree);
  }
}

TEST(SplitTest, StableAndRoughlyEightyTenTen) {
  const auto data = GenerateDataset(DefaultGrammar(), 3, 5000);
  const DatasetSplits s = SplitDataset(data, 3);
  EXPECT_EQ(s.train.size() + s.dev.size() + s.test.size(), data.size());
  EXPECT_NEAR(static_cast<double>(s.train.size()) / data.size(), 0.8, 0.03);
  EXPECT_NEAR(static_cast<double>(s.dev.size()) / data.size(), 0.1, 0.02);
  // Identical queries always land in the same split.
  for (const Example& ex : s.test) EXPECT_EQ(AssignSplit(ex, 3), Split::kTest);
}

TEST(VocabTest, BostonExample) {
  Example ex;
  ex.query = Tokenize(Lowercase("What is happening in Boston on New Year's Eve"));
  ex.tree = ParseBracketed(
      "[in:get_event [sl:location boston ] [sl:date_time on new year's eve ] ]", ex.query);
  const VocabBundle v = BuildVocabs({ex});
  EXPECT_EQ(std::set<std::string>(v.target_symbols.begin(), v.target_symbols.end()),
            (std::set<std::string>{"[in:get_event", "[sl:location", "[sl:date_time", "]"}));
  EXPECT_EQ(v.intents, std::vector<std::string>{"[in:get_event"});
  EXPECT_EQ(v.length_classes, std::vector<int>{10});
  EXPECT_EQ(v.max_source_len, 9);
  EXPECT_EQ(v.source_words[0], VocabBundle::kUnknownWord);
  EXPECT_EQ(v.WordId("boston"), v.WordId("boston"));
  EXPECT_EQ(v.WordId("paris"), 0);
  EXPECT_EQ(v.SymbolId("[sl:unknown"), -1);
  EXPECT_EQ(BuildVocabs({ex, ex}), v);
  EXPECT_EQ(VocabBundle::FromJson(v.ToJson()), v);
}

TEST(VocabTest, IntentsAreTargetSymbols) {
  const VocabBundle v = BuildVocabs(GenerateDataset(DefaultGrammar(), 2, 2000));
  for (const std::string& intent : v.intents) EXPECT_GE(v.SymbolId(intent), 0);
  EXPECT_GT(v.target_symbols.size(), v.intents.size());
  EXPECT_THROW(BuildVocabs({}), std::invalid_argument);
}

}  // namespace
}  // namespace narp
