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

#ifndef NARP_GRADCHECK_H_
#define NARP_GRADCHECK_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "narp/autodiff.h"

namespace narp {

struct GradCheckOptions {
  float step = 1e-3f;
  double tolerance = 1e-3;
  // Elements sampled uniformly across all parameters; 0 checks every element.
  int max_samples = 0;
  uint64_t seed = 0;
};

struct GradCheckEntry {
  std::string param;
  size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double relative_error = 0.0;
};

struct GradCheckReport {
  int checked = 0;
  double max_relative_error = 0.0;
  std::vector<GradCheckEntry> failures;

  bool passed() const { return failures.empty(); }
};

// Builds a scalar on the given tape from the current parameter values.
using ScalarFunction = std::function<Var(Tape&)>;

// Compares reverse-mode gradients of `f` with central differences. The
// relative error of each element is |a - n| / max(|a|, |n|, 1e-6). `f` must
// be deterministic for a fixed parameter state; it is evaluated on
// non-training tapes. Throws std::domain_error if f is non-finite.
GradCheckReport FiniteDiffCheck(const ScalarFunction& f,
                                const std::vector<Parameter*>& params,
                                const GradCheckOptions& options);

}  // namespace narp

#endif  // NARP_GRADCHECK_H_
