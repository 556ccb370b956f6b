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

#include "narp/synth_data.h"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "narp/rng.h"

namespace narp {
namespace {

using nlohmann::json;

bool IsPlaceholder(const std::string& token) {
  return token.size() > 2 && token.front() == '{' && token.back() == '}';
}

std::string PlaceholderName(const std::string& token) {
  return token.substr(1, token.size() - 2);
}

class Generator {
 public:
  Generator(const GrammarSpec& spec, uint64_t seed) : spec_(spec), rng_(seed) {
    for (const auto& [intent, list] : spec_.templates) {
      if (!list.empty()) roots_.push_back(intent);
    }
  }

  Example Next() {
    for (int attempt = 0; attempt < 1000; ++attempt) {
      Example ex;
      const std::string& intent = roots_[rng_.UniformInt(static_cast<int>(roots_.size()))];
      ex.tree.root = Render(intent, 1, /*nested=*/false, ex.query);
      if (static_cast<int>(ex.query.size()) > spec_.max_len) continue;
      // Leaf alignment must recover the generated spans from the text alone.
      if (ParseBracketed(ex.ParseText(), ex.query) != ex.tree) continue;
      return ex;
    }
    throw ConfigError("grammar cannot produce queries within max_len");
  }

 private:
  const std::string& Pick(const std::vector<std::string>& items) {
    return items[rng_.UniformInt(static_cast<int>(items.size()))];
  }

  IntentNode Render(const std::string& intent, int depth, bool nested,
                    std::vector<std::string>& out) {
    IntentNode node;
    node.label = "in:" + intent;
    auto nt = spec_.nested_templates.find(intent);
    const auto& pool = nested && nt != spec_.nested_templates.end() && !nt->second.empty()
                           ? nt->second
                           : spec_.templates.at(intent);
    for (const std::string& token : Tokenize(Pick(pool))) {
      if (!IsPlaceholder(token)) {
        out.push_back(Lowercase(token));
        continue;
      }
      const std::string slot = PlaceholderName(token);
      std::vector<std::string> nestable;
      auto it = spec_.slots.find(slot);
      if (it != spec_.slots.end()) nestable = it->second;
      if (!nestable.empty() && depth < spec_.max_depth &&
          rng_.Bernoulli(spec_.nesting_prob)) {
        IntentNode inner = Render(Pick(nestable), depth + 1, /*nested=*/true, out);
        node.slots.push_back(SlotNode::Nested("sl:" + slot, std::move(inner)));
      } else {
        const int start = static_cast<int>(out.size());
        for (const std::string& w : Tokenize(Pick(spec_.fillers.at(slot)))) {
          out.push_back(Lowercase(w));
        }
        const int end = static_cast<int>(out.size()) - 1;
        node.slots.push_back(SlotNode::Leaf("sl:" + slot, Span{start, end}));
      }
    }
    return node;
  }

  const GrammarSpec& spec_;
  Rng rng_;
  std::vector<std::string> roots_;
};

template <typename Map>
Map ReadStringListMap(const json& doc, const char* key, bool required) {
  Map out;
  if (!doc.contains(key)) {
    if (required) throw ConfigError(std::string("grammar spec missing key '") + key + "'");
    return out;
  }
  for (const auto& [name, list] : doc.at(key).items()) {
    out[name] = list.template get<std::vector<std::string>>();
  }
  return out;
}

uint64_t Fnv1a(std::string_view text, uint64_t seed) {
  uint64_t h = 1469598103934665603ull ^ (seed * 0x9E3779B97F4A7C15ull);
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string Trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

void CollectSymbols(const IntentNode& node, std::set<std::string>& out) {
  out.insert("[" + node.label);
  for (const auto& slot : node.slots) {
    out.insert("[" + slot.label);
    if (!slot.is_leaf()) CollectSymbols(slot.intent(), out);
  }
}

}  // namespace

std::string Example::QueryText() const {
  std::string out;
  for (size_t i = 0; i < query.size(); ++i) {
    if (i) out += ' ';
    out += query[i];
  }
  return out;
}

void GrammarSpec::Validate() const {
  if (intents.size() < 2) throw ConfigError("grammar needs at least 2 intents");
  if (!(nesting_prob >= 0.0 && nesting_prob < 1.0)) {
    throw ConfigError("nesting_prob must lie in [0, 1)");
  }
  if (max_len < 1) throw ConfigError("max_len must be positive");
  if (max_depth < 1) throw ConfigError("max_depth must be positive");
  std::set<std::string> all_slots;
  for (const auto& [intent, slot_list] : intents) {
    for (const auto& s : slot_list) all_slots.insert(s);
  }
  for (const auto& s : all_slots) {
    auto it = fillers.find(s);
    if (it == fillers.end() || it->second.empty()) {
      throw ConfigError("slot '" + s + "' has no filler phrases");
    }
    for (const auto& phrase : it->second) {
      if (Tokenize(phrase).empty()) throw ConfigError("empty filler for slot '" + s + "'");
    }
  }
  for (const auto& [slot, nestable] : slots) {
    for (const auto& intent : nestable) {
      if (!intents.count(intent)) {
        throw ConfigError("slot '" + slot + "' nests unknown intent '" + intent + "'");
      }
    }
  }
  bool any_root = false;
  auto check_templates = [&](const std::map<std::string, std::vector<std::string>>& m) {
    for (const auto& [intent, list] : m) {
      auto it = intents.find(intent);
      if (it == intents.end()) {
        throw ConfigError("templates given for unknown intent '" + intent + "'");
      }
      for (const auto& tmpl : list) {
        auto tokens = Tokenize(tmpl);
        if (tokens.empty()) throw ConfigError("empty template for '" + intent + "'");
        std::set<std::string> used;
        for (const auto& tok : tokens) {
          if (tok.find('{') == std::string::npos && tok.find('}') == std::string::npos) {
            continue;
          }
          if (!IsPlaceholder(tok)) {
            throw ConfigError("malformed placeholder '" + tok + "' in '" + tmpl + "'");
          }
          const std::string slot = PlaceholderName(tok);
          if (std::find(it->second.begin(), it->second.end(), slot) == it->second.end()) {
            throw ConfigError("template '" + tmpl + "' uses slot '" + slot +
                              "' not listed for intent '" + intent + "'");
          }
          if (!used.insert(slot).second) {
            throw ConfigError("template '" + tmpl + "' repeats slot '" + slot + "'");
          }
        }
      }
    }
  };
  check_templates(templates);
  check_templates(nested_templates);
  for (const auto& [intent, list] : templates) any_root = any_root || !list.empty();
  if (!any_root) throw ConfigError("grammar has no top-level templates");
  for (const auto& [slot, nestable] : slots) {
    for (const auto& intent : nestable) {
      auto t = templates.find(intent);
      auto n = nested_templates.find(intent);
      bool has = (t != templates.end() && !t->second.empty()) ||
                 (n != nested_templates.end() && !n->second.empty());
      if (!has) throw ConfigError("nestable intent '" + intent + "' has no templates");
    }
  }
}

GrammarSpec GrammarSpec::FromJson(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("grammar spec is not valid JSON: ") + e.what());
  }
  GrammarSpec spec;
  try {
    using M = std::map<std::string, std::vector<std::string>>;
    spec.intents = ReadStringListMap<M>(doc, "intents", true);
    spec.slots = ReadStringListMap<M>(doc, "slots", false);
    spec.fillers = ReadStringListMap<M>(doc, "fillers", true);
    spec.templates = ReadStringListMap<M>(doc, "templates", true);
    spec.nested_templates = ReadStringListMap<M>(doc, "nested_templates", false);
    spec.nesting_prob = doc.value("nesting_prob", spec.nesting_prob);
    spec.max_len = doc.value("max_len", spec.max_len);
    spec.max_depth = doc.value("max_depth", spec.max_depth);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed grammar spec: ") + e.what());
  }
  spec.Validate();
  return spec;
}

GrammarSpec GrammarSpec::FromFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read grammar spec " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return FromJson(buffer.str());
}

std::string GrammarSpec::ToJson() const {
  json doc;
  doc["intents"] = intents;
  doc["slots"] = slots;
  doc["fillers"] = fillers;
  doc["templates"] = templates;
  doc["nested_templates"] = nested_templates;
  doc["nesting_prob"] = nesting_prob;
  doc["max_len"] = max_len;
  doc["max_depth"] = max_depth;
  return doc.dump(2);
}

std::vector<Example> GenerateDataset(const GrammarSpec& spec, uint64_t seed, int size) {
  spec.Validate();
  if (size < 0) throw ConfigError("dataset size must be non-negative");
  Generator gen(spec, seed);
  std::vector<Example> out;
  out.reserve(size);
  for (int i = 0; i < size; ++i) out.push_back(gen.Next());
  return out;
}

LoadResult LoadTsv(const std::filesystem::path& path, bool fatal) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  LoadResult result;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (Trim(line).empty()) continue;
    const size_t first_tab = line.find('\t');
    const size_t last_tab = line.rfind('\t');
    std::string reason;
    if (first_tab == std::string::npos) {
      reason = "expected at least 2 tab-separated fields";
    } else {
      Example ex;
      ex.query = Tokenize(Lowercase(line.substr(0, first_tab)));
      const std::string parse = Lowercase(line.substr(last_tab + 1));
      try {
        if (ex.query.empty()) throw ParseError("empty query", 0);
        ex.tree = ParseBracketed(parse, ex.query);
        result.examples.push_back(std::move(ex));
        continue;
      } catch (const ParseError& e) {
        reason = e.what();
      }
    }
    if (fatal) {
      throw ConfigError(path.string() + ":" + std::to_string(line_number) + ": " + reason);
    }
    result.skipped.push_back(SkippedLine{line_number, reason});
  }
  return result;
}

void SaveTsv(const std::filesystem::path& path, const std::vector<Example>& examples) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& ex : examples) out << ex.QueryText() << '\t' << ex.ParseText() << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Split AssignSplit(const Example& example, uint64_t seed) {
  const uint64_t bucket = Fnv1a(example.QueryText(), seed) % 10;
  if (bucket < 8) return Split::kTrain;
  return bucket == 8 ? Split::kDev : Split::kTest;
}

DatasetSplits SplitDataset(const std::vector<Example>& examples, uint64_t seed) {
  DatasetSplits splits;
  for (const auto& ex : examples) {
    switch (AssignSplit(ex, seed)) {
      case Split::kTrain: splits.train.push_back(ex); break;
      case Split::kDev: splits.dev.push_back(ex); break;
      case Split::kTest: splits.test.push_back(ex); break;
    }
  }
  return splits;
}

int VocabBundle::WordId(const std::string& word) const {
  auto it = word_index_.find(word);
  return it == word_index_.end() ? 0 : it->second;
}

int VocabBundle::SymbolId(const std::string& symbol) const {
  auto it = symbol_index_.find(symbol);
  return it == symbol_index_.end() ? -1 : it->second;
}

int VocabBundle::IntentId(const std::string& symbol) const {
  auto it = intent_index_.find(symbol);
  return it == intent_index_.end() ? -1 : it->second;
}

void VocabBundle::RebuildIndex() {
  word_index_.clear();
  symbol_index_.clear();
  intent_index_.clear();
  for (size_t i = 0; i < source_words.size(); ++i) word_index_[source_words[i]] = static_cast<int>(i);
  for (size_t i = 0; i < target_symbols.size(); ++i) symbol_index_[target_symbols[i]] = static_cast<int>(i);
  for (size_t i = 0; i < intents.size(); ++i) intent_index_[intents[i]] = static_cast<int>(i);
}

std::string VocabBundle::ToJson() const {
  json doc;
  doc["source_words"] = source_words;
  doc["target_symbols"] = target_symbols;
  doc["intents"] = intents;
  doc["max_source_len"] = max_source_len;
  doc["length_classes"] = length_classes;
  return doc.dump(2);
}

VocabBundle VocabBundle::FromJson(std::string_view text) {
  VocabBundle v;
  try {
    json doc = json::parse(text);
    v.source_words = doc.at("source_words").get<std::vector<std::string>>();
    v.target_symbols = doc.at("target_symbols").get<std::vector<std::string>>();
    v.intents = doc.at("intents").get<std::vector<std::string>>();
    v.max_source_len = doc.at("max_source_len").get<int>();
    v.length_classes = doc.at("length_classes").get<std::vector<int>>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed vocabulary: ") + e.what());
  }
  v.RebuildIndex();
  return v;
}

VocabBundle BuildVocabs(const std::vector<Example>& dataset) {
  if (dataset.empty()) throw std::invalid_argument("cannot build vocabularies from no data");
  std::set<std::string> words, symbols, intents;
  std::set<int> lengths;
  int max_len = 0;
  for (const auto& ex : dataset) {
    for (const auto& w : ex.query) words.insert(w);
    CollectSymbols(ex.tree.root, symbols);
    intents.insert("[" + ex.tree.root.label);
    lengths.insert(FrameLength(TreeToFrame(ex.tree, FrameForm::kSpan)));
    max_len = std::max(max_len, static_cast<int>(ex.query.size()));
  }
  symbols.insert("]");
  VocabBundle v;
  v.source_words.push_back(VocabBundle::kUnknownWord);
  words.erase(VocabBundle::kUnknownWord);
  v.source_words.insert(v.source_words.end(), words.begin(), words.end());
  v.target_symbols.assign(symbols.begin(), symbols.end());
  v.intents.assign(intents.begin(), intents.end());
  v.max_source_len = max_len;
  v.length_classes.assign(lengths.begin(), lengths.end());
  v.RebuildIndex();
  return v;
}

}  // namespace narp
