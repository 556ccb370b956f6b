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

#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "narp/beam.h"
#include "narp/model.h"
#include "narp/ops.h"
#include "narp/synth_data.h"

namespace narp {
namespace {

const VocabBundle& Vocab() {
  static const VocabBundle vocab = BuildVocabs(GenerateDataset(DefaultGrammar(), 1, 2000));
  return vocab;
}

const std::vector<std::string>& Query() {
  static const std::vector<std::string> query =
      Tokenize("what is the fastest way to the airport avoiding tolls");
  return query;
}

void BM_MatMul(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Tensor a = Tensor::Matrix(n, n, 0.5f), b = Tensor::Matrix(n, n, 0.25f);
  for (auto _ : state) {
    Tape tape = Tape::Inference();
    benchmark::DoNotOptimize(MatMul(tape.Constant(a), tape.Constant(b)).value().data());
  }
  state.SetItemsProcessed(state.iterations() * int64_t{2} * n * n * n);
}
BENCHMARK(BM_MatMul)->Arg(32)->Arg(64)->Arg(128);

void BM_Attention(benchmark::State& state) {
  const int rows = static_cast<int>(state.range(0));
  Tensor x = Tensor::Matrix(rows, 64, 0.1f);
  AttentionLayout layout{{{0, rows, 0, rows}}, false};
  for (auto _ : state) {
    Tape tape = Tape::Inference();
    Var v = tape.Constant(x);
    benchmark::DoNotOptimize(Attention(v, v, v, 2, layout).value().data());
  }
}
BENCHMARK(BM_Attention)->Arg(16)->Arg(64);

void BM_ProposedNarBeam(benchmark::State& state) {
  const Model model(ModelConfig::Desk(ModelKind::kProposedNar), Vocab(), 1);
  const EncoderOutput enc = model.Encode(Query());
  const int k1 = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(NarProposedBeam(model, enc, k1, 1, ScoreOptions{}));
  }
}
BENCHMARK(BM_ProposedNarBeam)->Arg(1)->Arg(3)->Arg(9);

void BM_BaselineNarBeam(benchmark::State& state) {
  const Model model(ModelConfig::Desk(ModelKind::kBaselineNar), Vocab(), 1);
  const EncoderOutput enc = model.Encode(Query());
  const int k2 = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(NarBaselineBeam(model, enc, k2, ScoreOptions{}));
  }
}
BENCHMARK(BM_BaselineNarBeam)->Arg(1)->Arg(3)->Arg(9);

// Untrained AR steps over fixed-length prefixes: cost per emitted token.
void BM_ArGreedySteps(benchmark::State& state) {
  const Model model(ModelConfig::Desk(ModelKind::kAutoregressive), Vocab(), 1);
  const EncoderOutput enc = model.Encode(Query());
  const int steps = static_cast<int>(state.range(0));
  for (auto _ : state) {
    std::vector<int> prefix;
    for (int i = 0; i < steps; ++i) {
      const auto lp = model.ArDecodeStep(enc, prefix);
      prefix.push_back(model.PositionToken(i % enc.length()));
      benchmark::DoNotOptimize(lp.data());
    }
  }
  state.SetComplexityN(steps);
}
BENCHMARK(BM_ArGreedySteps)->Arg(4)->Arg(8)->Arg(16)->Arg(32)->Complexity();

}  // namespace
}  // namespace narp

BENCHMARK_MAIN();
