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

#ifndef NARP_PARSE_REPR_H_
#define NARP_PARSE_REPR_H_

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace narp {

// Inclusive range of source token positions.
struct Span {
  int start = 0;
  int end = 0;
  friend bool operator==(const Span&, const Span&) = default;
};

struct IntentNode;

// A slot holds either a leaf span of the source or exactly one nested intent.
struct SlotNode {
  std::string label;  // "sl:location"
  std::optional<Span> span;
  std::vector<IntentNode> nested;

  static SlotNode Leaf(std::string label, Span span);
  static SlotNode Nested(std::string label, IntentNode intent);

  bool is_leaf() const { return span.has_value(); }
  const IntentNode& intent() const { return nested.at(0); }

  friend bool operator==(const SlotNode&, const SlotNode&) = default;
};

struct IntentNode {
  std::string label;  // "in:get_event"
  std::vector<SlotNode> slots;

  friend bool operator==(const IntentNode&, const IntentNode&) = default;
};

// Decoupled semantic parse: only intents, slots and slot-filling spans.
struct ParseTree {
  IntentNode root;

  // Number of intent levels; a flat intent with leaf slots has depth 1.
  int depth() const;
  friend bool operator==(const ParseTree&, const ParseTree&) = default;
};

enum class FrameForm { kIndex, kSpan };

const char* FrameFormName(FrameForm form);
FrameForm ParseFrameForm(std::string_view name);

// One linearized token: a parse symbol ("[in:x", "[sl:y", "]") or a source
// position.
class FrameToken {
 public:
  static FrameToken Symbol(std::string symbol);
  static FrameToken Position(int position);

  bool is_position() const { return position_ >= 0; }
  int position() const { return position_; }
  const std::string& symbol() const { return symbol_; }

  bool is_open_intent() const;
  bool is_open_slot() const;
  bool is_close() const;

  std::string ToString() const;
  friend bool operator==(const FrameToken&, const FrameToken&) = default;

 private:
  std::string symbol_;
  int position_ = -1;
};

struct FrameSeq {
  FrameForm form = FrameForm::kSpan;
  std::vector<FrameToken> tokens;

  // Canonical rendering: tokens joined by single spaces, positions in
  // decimal. Exact-match comparisons use this string.
  std::string ToString() const;
  friend bool operator==(const FrameSeq&, const FrameSeq&) = default;
};

enum class ViolationKind {
  kEmpty,
  kUnbalanced,
  kAlternation,
  kEmptySlot,
  kSpanArity,
  kSpanOrder,
  kOutOfRange,
  kParity,
  kTrailing,
};

const char* ViolationName(ViolationKind kind);

struct FrameViolation {
  ViolationKind kind;
  int token_index = -1;
  std::string message;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, int token_index)
      : std::runtime_error(message + " (token " + std::to_string(token_index) + ")"),
        token_index_(token_index) {}
  int token_index() const { return token_index_; }

 private:
  int token_index_;
};

class FrameError : public std::runtime_error {
 public:
  explicit FrameError(std::vector<FrameViolation> violations);
  const std::vector<FrameViolation>& violations() const { return violations_; }

 private:
  std::vector<FrameViolation> violations_;
};

// Whitespace split; terminal punctuation (. , ? ! ; :) at the end of a word
// becomes its own token. Case is preserved.
std::vector<std::string> Tokenize(std::string_view text);
std::string Lowercase(std::string_view text);

// Parses bracketed surface syntax with literal leaf words, e.g.
// "[in:get_event [sl:location boston ] ]". Leaf words are aligned to the
// earliest matching positions of `query` at or after the previous leaf.
ParseTree ParseBracketed(std::string_view parse, std::span<const std::string> query);

// Renders a tree back to bracketed syntax with the query's leaf words.
std::string RenderBracketed(const ParseTree& tree, std::span<const std::string> query);

// Pre-order linearization. Index form lists every position of each leaf;
// span form lists (start, end).
FrameSeq TreeToFrame(const ParseTree& tree, FrameForm form);

// Inverse of TreeToFrame. Throws FrameError if the frame is invalid.
ParseTree FrameToTree(const FrameSeq& frame);

// Empty result means the frame is well formed for a source of `source_len`
// tokens (pass a negative length to skip the range check).
std::vector<FrameViolation> ValidateFrame(const FrameSeq& frame, int source_len);

int FrameLength(const FrameSeq& frame);

// Parses a canonical frame string. Throws ParseError on tokens that are
// neither symbols nor non-negative integers.
FrameSeq ParseFrame(std::string_view text, FrameForm form);

// Converts a valid frame to span form (identity for span-form input).
// Throws FrameError on invalid input.
FrameSeq ToSpanForm(const FrameSeq& frame);

// Process-wide tally of span-form frames observed by the pipeline. Every
// span-form frame built by TreeToFrame or by a decoder is recorded.
struct SpanParityAudit {
  uint64_t frames = 0;
  uint64_t odd_frames = 0;
};
void RecordSpanFrame(const FrameSeq& frame);
SpanParityAudit GetSpanParityAudit();

}  // namespace narp

#endif  // NARP_PARSE_REPR_H_
