// avmtl/params.h

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


// Named parameter storage shared by all model components.  Iteration order is
// lexicographic by name, which fixes checkpoint layout and optimizer order.

#ifndef AVMTL_PARAMS_H_
#define AVMTL_PARAMS_H_

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "avmtl/grad_check.h"
#include "avmtl/tensor.h"

namespace avmtl {

class ParameterSet {
 public:
  using Map = std::map<std::string, Tensor>;

  /// Registers a trainable tensor; names must be unique.
  void Add(const std::string &name, Tensor value);
  const Tensor &Get(const std::string &name) const;
  Tensor &GetMutable(const std::string &name);
  bool Contains(const std::string &name) const { return params_.count(name) > 0; }

  size_t size() const { return params_.size(); }
  int64_t NumScalars() const;
  std::vector<std::string> Names() const;
  const Map &map() const { return params_; }
  Map::const_iterator begin() const { return params_.begin(); }
  Map::const_iterator end() const { return params_.end(); }

  /// Deep copy (fresh tensor ids).
  ParameterSet Clone() const;
  /// Marks every parameter as requiring a gradient.
  void SetRequiresGrad(bool value);
  /// The subset whose names start with `prefix`, as grad-check inputs.
  std::vector<NamedTensor> Named(const std::string &prefix = "") const;

 private:
  Map params_;
};

/// Centered uniform draw scaled by fan-in: U(-sqrt(6/fan_in), sqrt(6/fan_in)).
Tensor FanInUniform(const Shape &shape, int64_t fan_in, std::mt19937_64 &rng,
                    DType dtype);

}  // namespace avmtl

#endif  // AVMTL_PARAMS_H_
