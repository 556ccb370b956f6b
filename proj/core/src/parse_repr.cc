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

#include "narp/parse_repr.h"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <sstream>

namespace narp {
namespace {

constexpr std::string_view kIntentPrefix = "[in:";
constexpr std::string_view kSlotPrefix = "[sl:";

bool StartsWith(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

bool IsTerminalPunct(char c) {
  return c == '.' || c == ',' || c == '?' || c == '!' || c == ';' || c == ':';
}

std::atomic<uint64_t> g_span_frames{0};
std::atomic<uint64_t> g_odd_span_frames{0};

}  // namespace

SlotNode SlotNode::Leaf(std::string label, Span span) {
  SlotNode node;
  node.label = std::move(label);
  node.span = span;
  return node;
}

SlotNode SlotNode::Nested(std::string label, IntentNode intent) {
  SlotNode node;
  node.label = std::move(label);
  node.nested.push_back(std::move(intent));
  return node;
}

namespace {

int IntentDepth(const IntentNode& node) {
  int deepest = 0;
  for (const auto& slot : node.slots) {
    if (!slot.is_leaf()) deepest = std::max(deepest, IntentDepth(slot.intent()));
  }
  return deepest + 1;
}

}  // namespace

int ParseTree::depth() const { return IntentDepth(root); }

const char* FrameFormName(FrameForm form) {
  return form == FrameForm::kIndex ? "index" : "span";
}

FrameForm ParseFrameForm(std::string_view name) {
  if (name == "index") return FrameForm::kIndex;
  if (name == "span") return FrameForm::kSpan;
  throw std::invalid_argument("unknown frame form: " + std::string(name));
}

FrameToken FrameToken::Symbol(std::string symbol) {
  FrameToken t;
  t.symbol_ = std::move(symbol);
  return t;
}

FrameToken FrameToken::Position(int position) {
  if (position < 0) throw std::invalid_argument("negative source position");
  FrameToken t;
  t.position_ = position;
  return t;
}

bool FrameToken::is_open_intent() const {
  return !is_position() && StartsWith(symbol_, kIntentPrefix);
}

bool FrameToken::is_open_slot() const {
  return !is_position() && StartsWith(symbol_, kSlotPrefix);
}

bool FrameToken::is_close() const { return !is_position() && symbol_ == "]"; }

std::string FrameToken::ToString() const {
  return is_position() ? std::to_string(position_) : symbol_;
}

std::string FrameSeq::ToString() const {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i].ToString();
  }
  return out;
}

const char* ViolationName(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::kEmpty: return "empty";
    case ViolationKind::kUnbalanced: return "unbalanced";
    case ViolationKind::kAlternation: return "alternation";
    case ViolationKind::kEmptySlot: return "empty_slot";
    case ViolationKind::kSpanArity: return "span_arity";
    case ViolationKind::kSpanOrder: return "span_order";
    case ViolationKind::kOutOfRange: return "out_of_range";
    case ViolationKind::kParity: return "parity";
    case ViolationKind::kTrailing: return "trailing";
  }
  return "unknown";
}

namespace {

std::string DescribeViolations(const std::vector<FrameViolation>& violations) {
  std::string out = "invalid frame:";
  for (const auto& v : violations) {
    out += " ";
    out += ViolationName(v.kind);
    out += "@" + std::to_string(v.token_index);
  }
  return out;
}

}  // namespace

FrameError::FrameError(std::vector<FrameViolation> violations)
    : std::runtime_error(DescribeViolations(violations)),
      violations_(std::move(violations)) {}

std::vector<std::string> Tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) {
      std::string_view word = text.substr(i, j - i);
      if (word.size() > 1 && IsTerminalPunct(word.back())) {
        tokens.emplace_back(word.substr(0, word.size() - 1));
        tokens.emplace_back(1, word.back());
      } else {
        tokens.emplace_back(word);
      }
    }
    i = j;
  }
  return tokens;
}

std::string Lowercase(std::string_view text) {
  std::string out(text);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

namespace {

// Splits bracketed syntax into symbols, closing brackets and words, so that
// "bridges]]" yields "bridges", "]", "]".
std::vector<std::string> LexBracketed(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string chunk;
  while (in >> chunk) {
    size_t pos = 0;
    while (pos < chunk.size()) {
      if (chunk[pos] == ']') {
        out.emplace_back("]");
        ++pos;
        continue;
      }
      size_t end = chunk.find(']', pos + 1);
      if (end == std::string::npos) end = chunk.size();
      out.push_back(chunk.substr(pos, end - pos));
      pos = end;
    }
  }
  return out;
}

class BracketParser {
 public:
  BracketParser(std::vector<std::string> tokens, std::span<const std::string> query)
      : tokens_(std::move(tokens)), query_(query) {}

  ParseTree Parse() {
    if (tokens_.empty()) throw ParseError("empty parse", 0);
    if (!StartsWith(tokens_[0], kIntentPrefix)) {
      throw ParseError("parse must start with an intent", 0);
    }
    ParseTree tree;
    tree.root = ParseIntent();
    if (pos_ != tokens_.size()) {
      throw ParseError("trailing tokens after root intent", static_cast<int>(pos_));
    }
    return tree;
  }

 private:
  [[noreturn]] void Unbalanced() const {
    throw ParseError("unbalanced brackets", static_cast<int>(tokens_.size()));
  }

  IntentNode ParseIntent() {
    IntentNode node;
    node.label = tokens_[pos_++].substr(1);
    for (;;) {
      if (pos_ >= tokens_.size()) Unbalanced();
      const std::string& tok = tokens_[pos_];
      if (tok == "]") {
        ++pos_;
        return node;
      }
      if (!StartsWith(tok, kSlotPrefix)) {
        throw ParseError("expected a slot or ']' inside intent, got '" + tok + "'",
                         static_cast<int>(pos_));
      }
      node.slots.push_back(ParseSlot());
    }
  }

  SlotNode ParseSlot() {
    const size_t slot_index = pos_;
    std::string label = tokens_[pos_++].substr(1);
    if (pos_ >= tokens_.size()) Unbalanced();
    if (StartsWith(tokens_[pos_], kIntentPrefix)) {
      IntentNode nested = ParseIntent();
      if (pos_ >= tokens_.size()) Unbalanced();
      if (tokens_[pos_] != "]") {
        throw ParseError("expected ']' after nested intent", static_cast<int>(pos_));
      }
      ++pos_;
      return SlotNode::Nested(std::move(label), std::move(nested));
    }
    const size_t first_word = pos_;
    std::vector<std::string_view> words;
    for (;;) {
      if (pos_ >= tokens_.size()) Unbalanced();
      const std::string& tok = tokens_[pos_];
      if (tok == "]") break;
      if (tok.front() == '[') {
        throw ParseError("unexpected symbol inside slot leaf", static_cast<int>(pos_));
      }
      words.push_back(tok);
      ++pos_;
    }
    ++pos_;
    if (words.empty()) throw ParseError("empty slot", static_cast<int>(slot_index));
    return SlotNode::Leaf(std::move(label), Align(words, static_cast<int>(first_word)));
  }

  Span Align(const std::vector<std::string_view>& words, int token_index) {
    const int m = static_cast<int>(words.size());
    const int l = static_cast<int>(query_.size());
    for (int p = cursor_; p + m <= l; ++p) {
      bool match = true;
      for (int i = 0; i < m && match; ++i) match = query_[p + i] == words[i];
      if (match) {
        cursor_ = p + m;
        return Span{p, p + m - 1};
      }
    }
    throw ParseError("cannot align leaf word '" + std::string(words[0]) +
                         "' with the query",
                     token_index);
  }

  std::vector<std::string> tokens_;
  std::span<const std::string> query_;
  size_t pos_ = 0;
  int cursor_ = 0;
};

void RenderIntent(const IntentNode& node, std::span<const std::string> query,
                  std::string& out) {
  out += "[" + node.label;
  for (const auto& slot : node.slots) {
    out += " [" + slot.label;
    if (slot.is_leaf()) {
      for (int p = slot.span->start; p <= slot.span->end; ++p) {
        out += " " + query[p];
      }
    } else {
      out += " ";
      RenderIntent(slot.intent(), query, out);
    }
    out += " ]";
  }
  out += " ]";
}

void LinearizeIntent(const IntentNode& node, FrameForm form,
                     std::vector<FrameToken>& out) {
  out.push_back(FrameToken::Symbol("[" + node.label));
  for (const auto& slot : node.slots) {
    out.push_back(FrameToken::Symbol("[" + slot.label));
    if (slot.is_leaf()) {
      if (form == FrameForm::kSpan) {
        out.push_back(FrameToken::Position(slot.span->start));
        out.push_back(FrameToken::Position(slot.span->end));
      } else {
        for (int p = slot.span->start; p <= slot.span->end; ++p) {
          out.push_back(FrameToken::Position(p));
        }
      }
    } else {
      LinearizeIntent(slot.intent(), form, out);
    }
    out.push_back(FrameToken::Symbol("]"));
  }
  out.push_back(FrameToken::Symbol("]"));
}

}  // namespace

ParseTree ParseBracketed(std::string_view parse, std::span<const std::string> query) {
  return BracketParser(LexBracketed(parse), query).Parse();
}

std::string RenderBracketed(const ParseTree& tree, std::span<const std::string> query) {
  std::string out;
  RenderIntent(tree.root, query, out);
  return out;
}

FrameSeq TreeToFrame(const ParseTree& tree, FrameForm form) {
  FrameSeq frame;
  frame.form = form;
  LinearizeIntent(tree.root, form, frame.tokens);
  if (form == FrameForm::kSpan) RecordSpanFrame(frame);
  return frame;
}

std::vector<FrameViolation> ValidateFrame(const FrameSeq& frame, int source_len) {
  std::vector<FrameViolation> out;
  auto add = [&out](ViolationKind kind, int index, std::string message) {
    out.push_back(FrameViolation{kind, index, std::move(message)});
  };
  const auto& tokens = frame.tokens;
  if (tokens.empty()) {
    add(ViolationKind::kEmpty, 0, "frame has no tokens");
    return out;
  }
  if (frame.form == FrameForm::kSpan && tokens.size() % 2 != 0) {
    add(ViolationKind::kParity, static_cast<int>(tokens.size()) - 1,
        "span-form frame has odd length");
  }

  struct Open {
    bool intent;
    int index;
    std::vector<int> positions;
    bool has_nested = false;
  };
  std::vector<Open> stack;
  int last_leaf_end = -1;
  bool root_seen = false;

  for (int i = 0; i < static_cast<int>(tokens.size()); ++i) {
    const FrameToken& tok = tokens[i];
    if (stack.empty() && root_seen) {
      add(ViolationKind::kTrailing, i, "tokens after the root intent closed");
      break;
    }
    if (tok.is_open_intent()) {
      if (!stack.empty()) {
        Open& top = stack.back();
        if (top.intent || top.has_nested || !top.positions.empty()) {
          add(ViolationKind::kAlternation, i, "intent must be the sole child of a slot");
        }
        top.has_nested = true;
      }
      root_seen = true;
      stack.push_back(Open{true, i, {}});
    } else if (tok.is_open_slot()) {
      if (stack.empty() || !stack.back().intent) {
        add(ViolationKind::kAlternation, i, "slot must be a child of an intent");
      }
      root_seen = true;
      stack.push_back(Open{false, i, {}});
    } else if (tok.is_close()) {
      if (stack.empty()) {
        add(ViolationKind::kUnbalanced, i, "']' without an open bracket");
        root_seen = true;
        continue;
      }
      Open top = std::move(stack.back());
      stack.pop_back();
      if (top.intent) continue;
      if (!top.has_nested && top.positions.empty()) {
        add(ViolationKind::kEmptySlot, top.index, "slot has no filler");
        continue;
      }
      if (top.positions.empty()) continue;
      const auto& ps = top.positions;
      int start = ps.front(), end = ps.back();
      if (frame.form == FrameForm::kSpan) {
        if (ps.size() != 2) {
          add(ViolationKind::kSpanArity, top.index, "span leaf needs exactly two positions");
        } else if (start > end) {
          add(ViolationKind::kSpanOrder, top.index, "span start after end");
        }
      } else {
        for (size_t k = 1; k < ps.size(); ++k) {
          if (ps[k] != ps[k - 1] + 1) {
            add(ViolationKind::kSpanOrder, top.index, "index leaf is not contiguous");
            break;
          }
        }
      }
      if (start <= last_leaf_end) {
        add(ViolationKind::kSpanOrder, top.index, "leaf overlaps or precedes previous leaf");
      }
      last_leaf_end = std::max(last_leaf_end, std::max(start, end));
    } else if (tok.is_position()) {
      if (stack.empty() || stack.back().intent || stack.back().has_nested) {
        add(ViolationKind::kAlternation, i, "position outside a leaf slot");
        if (stack.empty()) root_seen = true;
      } else {
        stack.back().positions.push_back(tok.position());
      }
      if (source_len >= 0 && tok.position() >= source_len) {
        add(ViolationKind::kOutOfRange, i, "position beyond source length");
      }
    } else {
      add(ViolationKind::kAlternation, i, "unknown symbol '" + tok.symbol() + "'");
    }
    if (i == 0 && !tok.is_open_intent()) {
      add(ViolationKind::kAlternation, 0, "root must be an intent");
    }
  }
  if (!stack.empty()) {
    add(ViolationKind::kUnbalanced, static_cast<int>(tokens.size()),
        std::to_string(stack.size()) + " bracket(s) left open");
  }
  return out;
}

namespace {

class FrameReader {
 public:
  explicit FrameReader(const FrameSeq& frame) : frame_(frame) {}

  IntentNode ReadIntent() {
    IntentNode node;
    node.label = frame_.tokens[pos_++].symbol().substr(1);
    while (!frame_.tokens[pos_].is_close()) node.slots.push_back(ReadSlot());
    ++pos_;
    return node;
  }

 private:
  SlotNode ReadSlot() {
    std::string label = frame_.tokens[pos_++].symbol().substr(1);
    if (frame_.tokens[pos_].is_open_intent()) {
      IntentNode nested = ReadIntent();
      ++pos_;
      return SlotNode::Nested(std::move(label), std::move(nested));
    }
    std::vector<int> ps;
    while (frame_.tokens[pos_].is_position()) ps.push_back(frame_.tokens[pos_++].position());
    ++pos_;
    return SlotNode::Leaf(std::move(label), Span{ps.front(), ps.back()});
  }

  const FrameSeq& frame_;
  size_t pos_ = 0;
};

}  // namespace

ParseTree FrameToTree(const FrameSeq& frame) {
  auto violations = ValidateFrame(frame, -1);
  if (!violations.empty()) throw FrameError(std::move(violations));
  ParseTree tree;
  tree.root = FrameReader(frame).ReadIntent();
  return tree;
}

int FrameLength(const FrameSeq& frame) { return static_cast<int>(frame.tokens.size()); }

FrameSeq ParseFrame(std::string_view text, FrameForm form) {
  FrameSeq frame;
  frame.form = form;
  std::istringstream in{std::string(text)};
  std::string tok;
  int index = 0;
  while (in >> tok) {
    if (tok == "]" || StartsWith(tok, kIntentPrefix) || StartsWith(tok, kSlotPrefix)) {
      frame.tokens.push_back(FrameToken::Symbol(tok));
    } else {
      int value = -1;
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
      if (ec != std::errc() || ptr != tok.data() + tok.size() || value < 0) {
        throw ParseError("frame token '" + tok + "' is neither a symbol nor a position",
                         index);
      }
      frame.tokens.push_back(FrameToken::Position(value));
    }
    ++index;
  }
  return frame;
}

FrameSeq ToSpanForm(const FrameSeq& frame) {
  if (frame.form == FrameForm::kSpan) return frame;
  return TreeToFrame(FrameToTree(frame), FrameForm::kSpan);
}

void RecordSpanFrame(const FrameSeq& frame) {
  if (frame.form != FrameForm::kSpan) return;
  g_span_frames.fetch_add(1, std::memory_order_relaxed);
  if (frame.tokens.size() % 2 != 0) g_odd_span_frames.fetch_add(1, std::memory_order_relaxed);
}

SpanParityAudit GetSpanParityAudit() {
  return SpanParityAudit{g_span_frames.load(), g_odd_span_frames.load()};
}

}  // namespace narp
