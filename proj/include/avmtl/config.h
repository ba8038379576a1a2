// avmtl/config.h

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


// Run configuration: the whole model/training/evaluation tree as one JSON
// document.  Every field defaults to the desk-scale (toy) value; unknown
// keys are rejected so that typos do not silently fall back to defaults.

#ifndef AVMTL_CONFIG_H_
#define AVMTL_CONFIG_H_

#include <string>
#include <vector>

#include "json.hpp"

#include "avmtl/model.h"
#include "avmtl/mtl.h"

namespace avmtl {

struct EvalConfig {
  std::string dataset = "synth";
  int64_t items = 1000;
  uint64_t seed = 0;
  int min_u = 3;
  int max_u = 8;
  std::vector<int> tracks = {1, 2, 4, 8};
  std::vector<std::string> noise = {"clean", "20", "10", "0"};

  void Validate() const;
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;

  static RunConfig Toy();
  /// Published full-scale hyperparameters; far beyond desk-scale training.
  static RunConfig Paper();
  void Validate() const;
};

using Json = nlohmann::ordered_json;

/// Fully resolved document (every field present).
Json RunConfigToJson(const RunConfig &config);

/// Overlays `doc` on a preset: the optional top-level "preset" key picks
/// "toy" (default) or "paper"; every other key must name a known field.
RunConfig RunConfigFromJson(const Json &doc);
RunConfig LoadRunConfig(const std::string &path);

}  // namespace avmtl

#endif  // AVMTL_CONFIG_H_
