// src/params.cc

// Copyright 2026  The avmtl Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.


#include "avmtl/params.h"

#include <cmath>

namespace avmtl {

void ParameterSet::Add(const std::string &name, Tensor value) {
  if (!params_.emplace(name, std::move(value)).second)
    throw Error("duplicate parameter name '" + name + "'");
}

const Tensor &ParameterSet::Get(const std::string &name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error("missing parameter '" + name + "'");
  return it->second;
}

Tensor &ParameterSet::GetMutable(const std::string &name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error("missing parameter '" + name + "'");
  return it->second;
}

int64_t ParameterSet::NumScalars() const {
  int64_t n = 0;
  for (const auto &[name, t] : params_) n += t.numel();
  return n;
}

std::vector<std::string> ParameterSet::Names() const {
  std::vector<std::string> names;
  for (const auto &[name, t] : params_) names.push_back(name);
  return names;
}

ParameterSet ParameterSet::Clone() const {
  ParameterSet out;
  for (const auto &[name, t] : params_) {
    Tensor c = t.Clone();
    c.set_requires_grad(t.requires_grad());
    out.params_.emplace(name, std::move(c));
  }
  return out;
}

void ParameterSet::SetRequiresGrad(bool value) {
  for (auto &[name, t] : params_) t.set_requires_grad(value);
}

std::vector<NamedTensor> ParameterSet::Named(const std::string &prefix) const {
  std::vector<NamedTensor> out;
  for (const auto &[name, t] : params_)
    if (name.compare(0, prefix.size(), prefix) == 0) out.push_back({name, t});
  return out;
}

Tensor FanInUniform(const Shape &shape, int64_t fan_in, std::mt19937_64 &rng,
                    DType dtype) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(NumElements(shape));
  for (double &x : v) x = dist(rng);
  return Tensor(shape, std::move(v), dtype);
}

}  // namespace avmtl
