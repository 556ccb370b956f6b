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

#include "narp/eval_metrics.h"

#include <chrono>
#include <cstdio>
#include <iostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace narp {
namespace {

using nlohmann::json;

std::string FirstSymbol(const FrameSeq& frame) {
  if (frame.tokens.empty() || frame.tokens[0].is_position()) return {};
  return frame.tokens[0].symbol();
}

std::vector<std::string> TokenStrings(const FrameSeq& frame) {
  std::vector<std::string> out;
  out.reserve(frame.tokens.size());
  for (const auto& t : frame.tokens) out.push_back(t.ToString());
  return out;
}

void CollectNgrams(const std::vector<std::string>& tokens, int n,
                   std::set<std::vector<std::string>>& out) {
  for (size_t i = 0; i + n <= tokens.size(); ++i) {
    out.emplace(tokens.begin() + i, tokens.begin() + i + n);
  }
}

std::string Percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * fraction);
  return buf;
}

std::string Fixed(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", value);
  return buf;
}

void AppendRow(std::ostringstream& out, const std::vector<std::string>& cells,
               const std::vector<size_t>& widths) {
  for (size_t i = 0; i < cells.size(); ++i) {
    if (i) out << " | ";
    out << cells[i] << std::string(widths[i] - cells[i].size(), ' ');
  }
  out << '\n';
}

void AppendTable(std::ostringstream& out, const std::vector<std::vector<std::string>>& rows) {
  std::vector<size_t> widths(rows.front().size(), 0);
  for (const auto& r : rows) {
    for (size_t i = 0; i < r.size(); ++i) widths[i] = std::max(widths[i], r[i].size());
  }
  AppendRow(out, rows.front(), widths);
  size_t total = 0;
  for (size_t w : widths) total += w;
  out << std::string(total + 3 * (widths.size() - 1), '-') << '\n';
  for (size_t i = 1; i < rows.size(); ++i) AppendRow(out, rows[i], widths);
}

}  // namespace

std::string CanonicalFrameString(const FrameSeq& frame) {
  if (frame.form == FrameForm::kSpan) return frame.ToString();
  try {
    return ToSpanForm(frame).ToString();
  } catch (const FrameError&) {
    return frame.ToString();
  }
}

ExactMatchReport ExactMatch(const std::vector<std::vector<Hypothesis>>& predictions,
                            const std::vector<FrameSeq>& golds) {
  if (predictions.size() != golds.size()) {
    throw std::invalid_argument("one gold frame per prediction list is required");
  }
  ExactMatchReport report;
  report.queries = static_cast<int>(golds.size());
  if (golds.empty()) return report;
  std::array<int, 3> em{}, im{};
  for (size_t q = 0; q < golds.size(); ++q) {
    const std::string gold = CanonicalFrameString(golds[q]);
    const std::string gold_intent = FirstSymbol(golds[q]);
    bool em_hit = false, im_hit = false;
    for (int k = 0; k < 3; ++k) {
      if (k < static_cast<int>(predictions[q].size())) {
        const Hypothesis& h = predictions[q][k];
        em_hit = em_hit || (h.valid && CanonicalFrameString(h.frame) == gold);
        im_hit = im_hit || (!gold_intent.empty() && FirstSymbol(h.frame) == gold_intent);
      }
      em[k] += em_hit;
      im[k] += im_hit;
    }
  }
  for (int k = 0; k < 3; ++k) {
    report.em[k] = static_cast<double>(em[k]) / golds.size();
    report.im[k] = static_cast<double>(im[k]) / golds.size();
  }
  return report;
}

OracleResult OracleEval(const Model& model, const std::vector<Example>& examples,
                        OracleMode mode) {
  const bool proposed = model.kind() == ModelKind::kProposedNar;
  const bool baseline = model.kind() == ModelKind::kBaselineNar;
  if ((mode == OracleMode::kGoldIntent && !proposed) ||
      (mode == OracleMode::kGoldLength && !baseline)) {
    throw std::invalid_argument(std::string("oracle mode does not fit the ") +
                                ModelKindName(model.kind()) + " model");
  }
  const ScoreOptions options;
  OracleResult result;
  result.examples = static_cast<int>(examples.size());
  int greedy_hits = 0, oracle_hits = 0;
  for (const Example& ex : examples) {
    const FrameSeq gold_frame = TreeToFrame(ex.tree, FrameForm::kSpan);
    const std::string gold = gold_frame.ToString();
    const EncoderOutput enc = model.Encode(ex.query);
    std::vector<Hypothesis> greedy, oracle;
    if (proposed) {
      greedy = NarProposedBeam(model, enc, 1, 1, options);
      NarOverrides o;
      o.intent = model.vocab().IntentId("[" + ex.tree.root.label);
      if (*o.intent < 0) {
        throw std::invalid_argument("gold intent " + ex.tree.root.label + " is unknown");
      }
      oracle = NarProposedBeam(model, enc, 1, 1, options, o);
    } else {
      greedy = NarBaselineBeam(model, enc, 1, options);
      NarOverrides o;
      o.length = FrameLength(gold_frame);
      oracle = NarBaselineBeam(model, enc, 1, options, o);
    }
    const bool g = greedy[0].valid && greedy[0].frame.ToString() == gold;
    const bool o = oracle[0].valid && oracle[0].frame.ToString() == gold;
    result.greedy_hits.push_back(g);
    result.oracle_hits.push_back(o);
    greedy_hits += g;
    oracle_hits += o;
    if (g && !o) ++result.counterexamples;
  }
  if (!examples.empty()) {
    result.greedy_em = static_cast<double>(greedy_hits) / examples.size();
    result.oracle_em = static_cast<double>(oracle_hits) / examples.size();
  }
  return result;
}

DiversityReport Diversity(const std::vector<std::vector<FrameSeq>>& topk) {
  DiversityReport r;
  double sentence1 = 0.0, sentence2 = 0.0, corpus1 = 0.0, corpus2 = 0.0, intents = 0.0;
  for (const auto& parses : topk) {
    std::set<std::vector<std::string>> uni, bi;
    std::set<std::string> intent_set;
    size_t tokens = 0;
    for (const FrameSeq& frame : parses) {
      const std::vector<std::string> t = TokenStrings(frame);
      if (t.empty()) {
        ++r.skipped_empty;
        continue;
      }
      std::set<std::vector<std::string>> u1, u2;
      CollectNgrams(t, 1, u1);
      CollectNgrams(t, 2, u2);
      sentence1 += 100.0 * u1.size() / t.size();
      sentence2 += 100.0 * u2.size() / t.size();
      ++r.parses;
      uni.insert(u1.begin(), u1.end());
      bi.insert(u2.begin(), u2.end());
      tokens += t.size();
      const std::string intent = FirstSymbol(frame);
      if (!intent.empty()) intent_set.insert(intent);
    }
    if (tokens == 0) continue;
    ++r.queries;
    corpus1 += 100.0 * uni.size() / tokens;
    corpus2 += 100.0 * bi.size() / tokens;
    intents += intent_set.size();
  }
  if (r.skipped_empty > 0) {
    std::cerr << "warning: skipped " << r.skipped_empty << " empty parse(s) in diversity\n";
  }
  if (r.parses > 0) {
    r.distinct1_sentence = sentence1 / r.parses;
    r.distinct2_sentence = sentence2 / r.parses;
  }
  if (r.queries > 0) {
    r.distinct1_corpus = corpus1 / r.queries;
    r.distinct2_corpus = corpus2 / r.queries;
    r.unique_intents = intents / r.queries;
  }
  return r;
}

double LinearSlope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("slope needs at least two paired samples");
  }
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= x.size();
  my /= y.size();
  double sxy = 0.0, sxx = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw std::invalid_argument("slope is undefined for constant x");
  return sxy / sxx;
}

double LatencyReport::StepSlope() const {
  std::vector<double> x, y;
  for (const auto& s : samples) {
    x.push_back(s.n);
    y.push_back(static_cast<double>(s.ar_steps > 0 ? s.ar_steps : s.decoder_passes));
  }
  return LinearSlope(x, y);
}

double LatencyReport::MillisSlope() const {
  std::vector<double> x, y;
  for (const auto& s : samples) {
    x.push_back(s.n);
    y.push_back(s.millis);
  }
  return LinearSlope(x, y);
}

LatencyReport MeasureLatency(const Model& model, const std::vector<Example>& examples,
                             const DecodeSettings& settings, int limit) {
  LatencyReport report;
  const int count = limit > 0 ? std::min<int>(limit, examples.size()) : examples.size();
  double enc = 0, dec = 0, steps = 0, millis = 0;
  for (int i = 0; i < count; ++i) {
    model.ResetCounts();
    const auto start = std::chrono::steady_clock::now();
    const auto hyps = DecodeQuery(model, model.Encode(examples[i].query), settings);
    const auto stop = std::chrono::steady_clock::now();
    const InvocationCounts c = model.counts();
    LatencySample s;
    s.n = hyps.empty() ? 0 : hyps[0].n;
    s.decoder_passes = c.decoder_passes;
    s.ar_steps = c.ar_steps;
    s.millis = std::chrono::duration<double, std::milli>(stop - start).count();
    enc += c.encoder_passes;
    dec += c.decoder_passes;
    steps += c.ar_steps;
    millis += s.millis;
    report.samples.push_back(s);
  }
  model.ResetCounts();
  report.examples = count;
  if (count > 0) {
    report.encoder_passes = enc / count;
    report.decoder_passes = dec / count;
    report.ar_steps = steps / count;
    report.mean_millis = millis / count;
  }
  return report;
}

EvalReport Evaluate(const std::vector<BeamRecord>& records) {
  EvalReport report;
  std::vector<std::vector<Hypothesis>> predictions;
  std::vector<FrameSeq> golds;
  std::vector<std::vector<FrameSeq>> top3;
  for (const auto& r : records) {
    if (r.gold.empty()) throw std::invalid_argument("record for '" + r.query + "' has no gold");
    golds.push_back(ParseFrame(r.gold, FrameForm::kSpan));
    predictions.push_back(r.hypotheses);
    std::vector<FrameSeq> frames;
    for (size_t i = 0; i < r.hypotheses.size() && i < 3; ++i) {
      frames.push_back(r.hypotheses[i].frame);
    }
    top3.push_back(std::move(frames));
    if (!r.hypotheses.empty() && !r.hypotheses[0].valid) ++report.invalid_top1;
  }
  report.exact_match = ExactMatch(predictions, golds);
  report.diversity = Diversity(top3);
  return report;
}

std::string EvalReport::ToJson() const {
  const auto& e = exact_match;
  const auto& d = diversity;
  json j{{"queries", e.queries},
         {"top1_em", e.em[0]},
         {"top2_em", e.em[1]},
         {"top3_em", e.em[2]},
         {"top1_im", e.im[0]},
         {"top2_im", e.im[1]},
         {"top3_im", e.im[2]},
         {"invalid_top1", invalid_top1},
         {"unique_intents_top3", d.unique_intents},
         {"distinct1_sentence", d.distinct1_sentence},
         {"distinct2_sentence", d.distinct2_sentence},
         {"distinct1_corpus", d.distinct1_corpus},
         {"distinct2_corpus", d.distinct2_corpus}};
  if (latency) {
    j["latency"] = {{"examples", latency->examples},
                    {"encoder_passes", latency->encoder_passes},
                    {"decoder_passes", latency->decoder_passes},
                    {"ar_steps", latency->ar_steps},
                    {"mean_millis", latency->mean_millis}};
  }
  return j.dump(2);
}

std::string EvalReport::ToTable() const {
  const auto& e = exact_match;
  const auto& d = diversity;
  std::ostringstream out;
  AppendTable(out, {{"top-1 EM", "top-2 EM", "top-3 EM", "top-1 IM", "top-3 IM"},
                    {Percent(e.em[0]), Percent(e.em[1]), Percent(e.em[2]), Percent(e.im[0]),
                     Percent(e.im[2])}});
  out << '\n';
  AppendTable(out, {{"metric", "value"},
                    {"# of unique 1st intents in top-3", Fixed(d.unique_intents)},
                    {"distinct-1 (sentence-wise)", Fixed(d.distinct1_sentence)},
                    {"distinct-2 (sentence-wise)", Fixed(d.distinct2_sentence)},
                    {"distinct-1 (corpus-wise)", Fixed(d.distinct1_corpus)},
                    {"distinct-2 (corpus-wise)", Fixed(d.distinct2_corpus)}});
  if (latency) {
    out << '\n';
    AppendTable(out, {{"cost per example", "value"},
                      {"encoder passes", Fixed(latency->encoder_passes)},
                      {"decoder passes", Fixed(latency->decoder_passes)},
                      {"autoregressive steps", Fixed(latency->ar_steps)},
                      {"wall clock (ms)", Fixed(latency->mean_millis)}});
  }
  return out.str();
}

}  // namespace narp
