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

#ifndef NARP_SRC_LAYERS_H_
#define NARP_SRC_LAYERS_H_

#include <string>
#include <vector>

#include "narp/autodiff.h"
#include "narp/ops.h"
#include "narp/rng.h"

namespace narp {
namespace internal {

struct LayerNormParams {
  Parameter* gamma = nullptr;
  Parameter* beta = nullptr;
};

struct AttentionParams {
  Parameter* wq = nullptr;
  Parameter* wk = nullptr;
  Parameter* wv = nullptr;
  Parameter* wo = nullptr;
};

struct FeedForwardParams {
  Parameter* w1 = nullptr;
  Parameter* b1 = nullptr;
  Parameter* w2 = nullptr;
  Parameter* b2 = nullptr;
};

struct TransformerLayerParams {
  LayerNormParams self_norm;
  AttentionParams self_attention;
  bool has_cross = false;
  LayerNormParams cross_norm;
  AttentionParams cross_attention;
  LayerNormParams ffn_norm;
  FeedForwardParams ffn;
};

// A pre-norm transformer stack followed by a final layer norm.
struct StackParams {
  std::vector<TransformerLayerParams> layers;
  LayerNormParams final_norm;
  int heads = 1;
};

Tensor RandomNormal(std::vector<int> shape, float stddev, Rng& rng);

StackParams AddStack(ParameterStore& store, const std::string& prefix, int layers,
                     int width, int heads, int ffn_multiplier, bool cross, Rng& rng);

Var ApplyLayerNorm(Tape& tape, const LayerNormParams& p, Var x);

// Runs the stack over packed rows `x`. `memory` and `cross_layout` are
// ignored by stacks without cross-attention.
Var RunStack(Tape& tape, const StackParams& stack, Var x, const AttentionLayout& self_layout,
             Var memory, const AttentionLayout& cross_layout, float dropout);

// Sinusoidal encodings for the given positions, one row each.
Tensor SinusoidalPositions(const std::vector<int>& positions, int width);

}  // namespace internal
}  // namespace narp

#endif  // NARP_SRC_LAYERS_H_
