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

#ifndef NARP_AUTODIFF_H_
#define NARP_AUTODIFF_H_

#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "narp/rng.h"
#include "narp/tensor.h"

namespace narp {

// A trainable tensor. `grad` is filled by Tape::Backward and consumed
// (reset) by the optimizer.
struct Parameter {
  std::string name;
  Tensor value;
  std::optional<Tensor> grad;
};

// Owns parameters with stable addresses, in registration order.
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;
  ParameterStore(ParameterStore&&) = default;
  ParameterStore& operator=(ParameterStore&&) = default;

  Parameter& Add(std::string name, Tensor init);
  Parameter* Find(const std::string& name);
  const Parameter* Find(const std::string& name) const;

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  // Parameters whose name starts with `prefix`.
  std::vector<Parameter*> WithPrefix(const std::string& prefix);

  size_t size() const { return params_.size(); }
  size_t ElementCount() const;
  size_t ElementCount(const std::string& prefix) const;
  void ClearGrads();

 private:
  std::deque<Parameter> params_;
  std::unordered_map<std::string, size_t> index_;
};

class Tape;

// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Tensor& value() const;
  bool valid() const { return tape != nullptr && id >= 0; }
};

// Records a computation for reverse-mode differentiation. A non-recording
// tape evaluates values only. Dropout is active only on training tapes.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  struct Options {
    bool record = true;
    bool training = false;
    Rng* rng = nullptr;
  };

  Tape() : Tape(Options{}) {}
  explicit Tape(Options options) : options_(options) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape Inference() { return Tape(Options{.record = false}); }

  Var Constant(Tensor value);
  Var Param(Parameter& param);

  // Used by op implementations: appends a node computed from `inputs`.
  Var Push(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var Push(Tensor value, const std::vector<Var>& inputs, BackwardFn backward);

  const Tensor& value(int id) const { return nodes_[id].value; }
  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  // Gradient buffer of a node, allocated on first access.
  Tensor& grad(int id);
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }
  bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }

  bool recording() const { return options_.record; }
  bool training() const { return options_.training; }
  Rng& rng();

  // Seeds d(loss)/d(loss) = 1 and accumulates into Parameter::grad.
  void Backward(Var loss);

  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    std::unique_ptr<Tensor> grad;
    bool needs_grad = false;
    BackwardFn backward;
    Parameter* param = nullptr;
  };

  Options options_;
  std::vector<Node> nodes_;
  std::unordered_map<Parameter*, int> param_nodes_;
};

inline const Tensor& Var::value() const { return tape->value(id); }

}  // namespace narp

#endif  // NARP_AUTODIFF_H_
