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

#include "narp/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "narp/rng.h"

namespace narp {
namespace {

double Evaluate(const ScalarFunction& f) {
  Tape tape = Tape::Inference();
  const double value = f(tape).value().item();
  if (!std::isfinite(value)) throw std::domain_error("gradient check: non-finite value");
  return value;
}

}  // namespace

GradCheckReport FiniteDiffCheck(const ScalarFunction& f,
                                const std::vector<Parameter*>& params,
                                const GradCheckOptions& options) {
  for (Parameter* p : params) p->grad.reset();
  {
    Tape tape;
    Var out = f(tape);
    if (!std::isfinite(out.value().item())) {
      throw std::domain_error("gradient check: non-finite value");
    }
    tape.Backward(out);
  }

  struct Site {
    size_t param;
    size_t index;
  };
  std::vector<Site> sites;
  size_t total = 0;
  for (const Parameter* p : params) total += p->value.size();
  if (options.max_samples <= 0 || static_cast<size_t>(options.max_samples) >= total) {
    for (size_t i = 0; i < params.size(); ++i) {
      for (size_t j = 0; j < params[i]->value.size(); ++j) sites.push_back({i, j});
    }
  } else {
    Rng rng(options.seed);
    std::vector<size_t> flat(total);
    for (size_t i = 0; i < total; ++i) flat[i] = i;
    rng.Shuffle(flat);
    flat.resize(options.max_samples);
    std::sort(flat.begin(), flat.end());
    size_t param = 0, base = 0;
    for (size_t k : flat) {
      while (k >= base + params[param]->value.size()) base += params[param++]->value.size();
      sites.push_back({param, k - base});
    }
  }

  GradCheckReport report;
  for (const Site& site : sites) {
    Parameter& p = *params[site.param];
    const double analytic = p.grad ? (*p.grad)[site.index] : 0.0;
    float& slot = p.value[site.index];
    const float original = slot;
    const float plus = original + options.step;
    const float minus = original - options.step;
    slot = plus;
    const double f_plus = Evaluate(f);
    slot = minus;
    const double f_minus = Evaluate(f);
    slot = original;
    const double numeric =
        (f_plus - f_minus) / (static_cast<double>(plus) - static_cast<double>(minus));
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    const double rel = std::abs(analytic - numeric) / denom;
    ++report.checked;
    report.max_relative_error = std::max(report.max_relative_error, rel);
    if (rel > options.tolerance) {
      report.failures.push_back({p.name, site.index, analytic, numeric, rel});
    }
  }
  for (Parameter* p : params) p->grad.reset();
  return report;
}

}  // namespace narp
