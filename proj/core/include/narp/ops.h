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

#ifndef NARP_OPS_H_
#define NARP_OPS_H_

#include <span>
#include <vector>

#include "narp/autodiff.h"

namespace narp {

// Logit used for masked entries. Finite so that no op emits Inf/NaN.
inline constexpr float kMaskedLogit = -1e9f;

// Block structure for packed batches: each segment maps a contiguous range of
// query rows onto a contiguous range of key rows.
struct AttentionSegment {
  int query_begin = 0;
  int query_count = 0;
  int key_begin = 0;
  int key_count = 0;
};

struct AttentionLayout {
  std::vector<AttentionSegment> segments;
  // Query i of a segment may only see keys 0..i of that segment.
  bool causal = false;
};

Var MatMul(Var a, Var b);            // [n,k] x [k,m]
Var MatMulTransposed(Var a, Var b);  // [n,k] x [m,k]^T
Var Add(Var a, Var b);
Var AddBias(Var x, Var bias);  // adds a [m] bias to every row of [n,m]
Var Scale(Var x, float factor);
Var Relu(Var x);
Var LayerNorm(Var x, Var gamma, Var beta, float eps = 1e-5f);
Var Dropout(Var x, float rate);
Var Sum(Var x);

Var GatherRows(Var table, std::vector<int> rows);
Var ConcatRows(const std::vector<Var>& parts);
Var ConcatCols(const std::vector<Var>& parts);
Var LogSoftmax(Var x);

// Multi-head scaled dot-product attention over packed segments. q is
// [Rq,d]; k and v are [Rk,d]; d must be divisible by `heads`.
Var Attention(Var q, Var k, Var v, int heads, const AttentionLayout& layout);

// Dot-product scores of each query row against the keys of its segment,
// written into a [Rq,width] matrix whose unused columns hold kMaskedLogit.
Var SegmentScores(Var q, Var keys, const AttentionLayout& layout, float scale,
                  int width);

// Sum over rows of the label-smoothed NLL between softmax(logits row) and a
// smoothed one-hot target. Row r uses only its first widths[r] columns; the
// target places 1-eps on targets[r] and eps/(w-1) on the other columns.
Var SmoothedNllRows(Var logits, std::span<const int> targets,
                    std::span<const int> widths, float epsilon);

// Single-distribution form over all C entries of `logits`.
Var LabelSmoothedNll(Var logits, int label, float epsilon);

}  // namespace narp

#endif  // NARP_OPS_H_
