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

#include "layers.h"

#include <cmath>

namespace narp {
namespace internal {
namespace {

LayerNormParams AddLayerNorm(ParameterStore& store, const std::string& name, int width) {
  return {&store.Add(name + "/gamma", Tensor({width}, 1.0f)),
          &store.Add(name + "/beta", Tensor({width}, 0.0f))};
}

AttentionParams AddAttention(ParameterStore& store, const std::string& name, int width,
                             Rng& rng) {
  const float stddev = 1.0f / std::sqrt(static_cast<float>(width));
  return {&store.Add(name + "/wq", RandomNormal({width, width}, stddev, rng)),
          &store.Add(name + "/wk", RandomNormal({width, width}, stddev, rng)),
          &store.Add(name + "/wv", RandomNormal({width, width}, stddev, rng)),
          &store.Add(name + "/wo", RandomNormal({width, width}, stddev, rng))};
}

Var RunAttention(Tape& tape, const AttentionParams& p, Var x, Var memory, int heads,
                 const AttentionLayout& layout) {
  Var q = MatMul(x, tape.Param(*p.wq));
  Var k = MatMul(memory, tape.Param(*p.wk));
  Var v = MatMul(memory, tape.Param(*p.wv));
  return MatMul(Attention(q, k, v, heads, layout), tape.Param(*p.wo));
}

}  // namespace

Tensor RandomNormal(std::vector<int> shape, float stddev, Rng& rng) {
  Tensor t(std::move(shape));
  for (float& v : t.values()) v = static_cast<float>(rng.Normal() * stddev);
  return t;
}

StackParams AddStack(ParameterStore& store, const std::string& prefix, int layers,
                     int width, int heads, int ffn_multiplier, bool cross, Rng& rng) {
  StackParams stack;
  stack.heads = heads;
  const int hidden = width * ffn_multiplier;
  for (int i = 0; i < layers; ++i) {
    const std::string name = prefix + "/layer" + std::to_string(i);
    TransformerLayerParams layer;
    layer.self_norm = AddLayerNorm(store, name + "/self_norm", width);
    layer.self_attention = AddAttention(store, name + "/self", width, rng);
    layer.has_cross = cross;
    if (cross) {
      layer.cross_norm = AddLayerNorm(store, name + "/cross_norm", width);
      layer.cross_attention = AddAttention(store, name + "/cross", width, rng);
    }
    layer.ffn_norm = AddLayerNorm(store, name + "/ffn_norm", width);
    layer.ffn.w1 = &store.Add(name + "/ffn/w1",
                              RandomNormal({width, hidden}, 1.0f / std::sqrt(float(width)), rng));
    layer.ffn.b1 = &store.Add(name + "/ffn/b1", Tensor({hidden}, 0.0f));
    layer.ffn.w2 = &store.Add(name + "/ffn/w2",
                              RandomNormal({hidden, width}, 1.0f / std::sqrt(float(hidden)), rng));
    layer.ffn.b2 = &store.Add(name + "/ffn/b2", Tensor({width}, 0.0f));
    stack.layers.push_back(layer);
  }
  stack.final_norm = AddLayerNorm(store, prefix + "/final_norm", width);
  return stack;
}

Var ApplyLayerNorm(Tape& tape, const LayerNormParams& p, Var x) {
  return LayerNorm(x, tape.Param(*p.gamma), tape.Param(*p.beta));
}

Var RunStack(Tape& tape, const StackParams& stack, Var x, const AttentionLayout& self_layout,
             Var memory, const AttentionLayout& cross_layout, float dropout) {
  for (const auto& layer : stack.layers) {
    Var h = ApplyLayerNorm(tape, layer.self_norm, x);
    x = Add(x, Dropout(RunAttention(tape, layer.self_attention, h, h, stack.heads,
                                    self_layout),
                       dropout));
    if (layer.has_cross) {
      h = ApplyLayerNorm(tape, layer.cross_norm, x);
      x = Add(x, Dropout(RunAttention(tape, layer.cross_attention, h, memory, stack.heads,
                                      cross_layout),
                         dropout));
    }
    h = ApplyLayerNorm(tape, layer.ffn_norm, x);
    Var inner = Relu(AddBias(MatMul(h, tape.Param(*layer.ffn.w1)), tape.Param(*layer.ffn.b1)));
    Var out = AddBias(MatMul(inner, tape.Param(*layer.ffn.w2)), tape.Param(*layer.ffn.b2));
    x = Add(x, Dropout(out, dropout));
  }
  return ApplyLayerNorm(tape, stack.final_norm, x);
}

Tensor SinusoidalPositions(const std::vector<int>& positions, int width) {
  Tensor out = Tensor::Matrix(static_cast<int>(positions.size()), width);
  for (size_t r = 0; r < positions.size(); ++r) {
    for (int i = 0; i < width; i += 2) {
      const double rate = std::pow(10000.0, -static_cast<double>(i) / width);
      out.at(r, i) = static_cast<float>(std::sin(positions[r] * rate));
      if (i + 1 < width) out.at(r, i + 1) = static_cast<float>(std::cos(positions[r] * rate));
    }
  }
  return out;
}

}  // namespace internal
}  // namespace narp
