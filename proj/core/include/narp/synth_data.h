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

#ifndef NARP_SYNTH_DATA_H_
#define NARP_SYNTH_DATA_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "narp/parse_repr.h"

namespace narp {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One (query, parse) pair. Query tokens are lowercased.
struct Example {
  std::vector<std::string> query;
  ParseTree tree;

  std::string QueryText() const;
  std::string ParseText() const { return RenderBracketed(tree, query); }
};

// Template grammar for synthetic task-oriented queries. Names are bare
// ("get_event", "location"); trees carry them as "in:get_event" /
// "sl:location". Templates are whitespace-tokenized; a token "{slot}" is a
// placeholder filled by a filler phrase or, with probability `nesting_prob`,
// by a nested intent rendered from its nested templates.
struct GrammarSpec {
  std::map<std::string, std::vector<std::string>> intents;    // intent -> slots
  std::map<std::string, std::vector<std::string>> slots;      // slot -> nestable intents
  std::map<std::string, std::vector<std::string>> fillers;    // slot -> phrases
  std::map<std::string, std::vector<std::string>> templates;  // intent -> templates
  std::map<std::string, std::vector<std::string>> nested_templates;
  double nesting_prob = 0.25;
  int max_len = 32;
  int max_depth = 3;

  // Throws ConfigError describing the first violated invariant.
  void Validate() const;

  static GrammarSpec FromJson(std::string_view text);
  static GrammarSpec FromFile(const std::filesystem::path& path);
  std::string ToJson() const;
};

// The 25-intent navigation/events grammar used for the desk experiments.
GrammarSpec DefaultGrammar();

// Deterministic per (spec, seed, size). Every tree round-trips through its
// bracketed rendering and every query has at most spec.max_len tokens.
std::vector<Example> GenerateDataset(const GrammarSpec& spec, uint64_t seed, int size);

struct SkippedLine {
  int line_number = 0;
  std::string reason;
};

struct LoadResult {
  std::vector<Example> examples;
  std::vector<SkippedLine> skipped;
};

// Reads "query \t ... \t parse" lines (first and last fields are used).
// Text is lowercased and tokenized. Malformed lines are skipped and
// reported, or rethrown as ConfigError when `fatal` is set. Blank lines are
// ignored. Throws std::runtime_error if the file cannot be read.
LoadResult LoadTsv(const std::filesystem::path& path, bool fatal = false);
void SaveTsv(const std::filesystem::path& path, const std::vector<Example>& examples);

enum class Split { kTrain, kDev, kTest };

// 80/10/10 assignment from a seeded FNV-1a hash of the query text.
Split AssignSplit(const Example& example, uint64_t seed);

struct DatasetSplits {
  std::vector<Example> train;
  std::vector<Example> dev;
  std::vector<Example> test;
};
DatasetSplits SplitDataset(const std::vector<Example>& examples, uint64_t seed);

struct VocabBundle {
  static constexpr const char* kUnknownWord = "<unk>";

  std::vector<std::string> source_words;    // index 0 is kUnknownWord
  std::vector<std::string> target_symbols;  // "[in:..", "[sl:..", "]"
  std::vector<std::string> intents;         // top-level intent symbols
  int max_source_len = 0;                   // copy positions are [0, max)
  std::vector<int> length_classes;          // distinct span-form lengths seen

  int WordId(const std::string& word) const;
  int SymbolId(const std::string& symbol) const;  // -1 if absent
  int IntentId(const std::string& symbol) const;  // -1 if absent

  std::string ToJson() const;
  static VocabBundle FromJson(std::string_view text);

  // Must be called after the public vectors are modified.
  void RebuildIndex();

  friend bool operator==(const VocabBundle& a, const VocabBundle& b) {
    return a.source_words == b.source_words && a.target_symbols == b.target_symbols &&
           a.intents == b.intents && a.max_source_len == b.max_source_len &&
           a.length_classes == b.length_classes;
  }

 private:
  std::map<std::string, int> word_index_;
  std::map<std::string, int> symbol_index_;
  std::map<std::string, int> intent_index_;
};

// Collects vocabularies from a dataset. Throws std::invalid_argument if
// `dataset` is empty.
VocabBundle BuildVocabs(const std::vector<Example>& dataset);

}  // namespace narp

#endif  // NARP_SYNTH_DATA_H_
