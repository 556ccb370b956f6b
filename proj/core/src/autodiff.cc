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

#include "narp/autodiff.h"

#include <stdexcept>

namespace narp {

Parameter& ParameterStore::Add(std::string name, Tensor init) {
  if (index_.count(name)) {
    throw std::invalid_argument("duplicate parameter name: " + name);
  }
  index_[name] = params_.size();
  params_.push_back(Parameter{std::move(name), std::move(init), std::nullopt});
  return params_.back();
}

Parameter* ParameterStore::Find(const std::string& name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &params_[it->second];
}

const Parameter* ParameterStore::Find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &params_[it->second];
}

std::vector<Parameter*> ParameterStore::all() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(&p);
  return out;
}

std::vector<const Parameter*> ParameterStore::all() const {
  std::vector<const Parameter*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(&p);
  return out;
}

std::vector<Parameter*> ParameterStore::WithPrefix(const std::string& prefix) {
  std::vector<Parameter*> out;
  for (auto& p : params_) {
    if (p.name.compare(0, prefix.size(), prefix) == 0) out.push_back(&p);
  }
  return out;
}

size_t ParameterStore::ElementCount() const {
  size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

size_t ParameterStore::ElementCount(const std::string& prefix) const {
  size_t n = 0;
  for (const auto& p : params_) {
    if (p.name.compare(0, prefix.size(), prefix) == 0) n += p.value.size();
  }
  return n;
}

void ParameterStore::ClearGrads() {
  for (auto& p : params_) p.grad.reset();
}

Var Tape::Constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::Param(Parameter& param) {
  auto it = param_nodes_.find(&param);
  if (it != param_nodes_.end()) return Var{this, it->second};
  Node node;
  node.value = param.value;
  node.needs_grad = options_.record;
  node.param = &param;
  nodes_.push_back(std::move(node));
  int id = static_cast<int>(nodes_.size()) - 1;
  param_nodes_[&param] = id;
  return Var{this, id};
}

Var Tape::Push(Tensor value, std::initializer_list<Var> inputs,
               BackwardFn backward) {
  return Push(std::move(value), std::vector<Var>(inputs), std::move(backward));
}

Var Tape::Push(Tensor value, const std::vector<Var>& inputs,
               BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  if (options_.record) {
    for (const Var& in : inputs) {
      if (in.tape != this) throw std::logic_error("var from a different tape");
      node.needs_grad = node.needs_grad || nodes_[in.id].needs_grad;
    }
    if (node.needs_grad) node.backward = std::move(backward);
  }
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Tensor& Tape::grad(int id) {
  Node& node = nodes_[id];
  if (!node.grad) node.grad = std::make_unique<Tensor>(node.value.shape());
  return *node.grad;
}

Rng& Tape::rng() {
  if (options_.rng == nullptr) {
    throw std::logic_error("training tape requires a random source");
  }
  return *options_.rng;
}

void Tape::Backward(Var loss) {
  if (!options_.record) throw std::logic_error("backward on a non-recording tape");
  if (loss.tape != this || value(loss).size() != 1) {
    throw std::invalid_argument("backward requires a scalar on this tape");
  }
  if (!nodes_[loss.id].needs_grad) return;
  grad(loss.id)[0] = 1.0f;
  for (int id = loss.id; id >= 0; --id) {
    Node& node = nodes_[id];
    if (!node.grad) continue;
    if (node.backward) {
      node.backward(*this, id);
    } else if (node.param != nullptr) {
      Parameter& p = *node.param;
      if (!p.grad) {
        p.grad = *node.grad;
      } else {
        auto dst = p.grad->values();
        auto src = node.grad->values();
        for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
      }
    }
  }
}

}  // namespace narp
