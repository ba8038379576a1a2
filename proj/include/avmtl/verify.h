// avmtl/verify.h

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


// Gradient verification of the model's composite blocks in float64.

#ifndef AVMTL_VERIFY_H_
#define AVMTL_VERIFY_H_

#include <string>
#include <vector>

#include "avmtl/grad_check.h"
#include "avmtl/model.h"

namespace avmtl {

struct ModuleCheck {
  std::string module;
  GradCheckReport report;
};

/// Names of the composites checked by RunGradChecks, in order.
const std::vector<std::string> &GradCheckModules();

/// Checks frontend, attention (through the softmax), encoder, joint,
/// transducer loss, detection loss and the blended objective of the full
/// model, each on small random inputs derived from `seed`.
std::vector<ModuleCheck> RunGradChecks(const ModelConfig &config, uint64_t seed,
                                       double tolerance, int max_coords = 16);

}  // namespace avmtl

#endif  // AVMTL_VERIFY_H_
