// avmtl/grad_check.h

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

#ifndef AVMTL_GRAD_CHECK_H_
#define AVMTL_GRAD_CHECK_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "avmtl/tensor.h"

namespace avmtl {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct GradCheckEntry {
  std::string name;
  int64_t coords_checked = 0;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tolerance = 0.0;
  double max_rel_error() const;
  bool passed() const { return max_rel_error() < tolerance; }
};

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  int max_coords = 64;
  uint64_t seed = 0;
};

/// Compares reverse-mode gradients of `f` with central differences on a
/// fixed random subsample of at most `max_coords` coordinates per tensor.
/// The relative error of a coordinate is
///   |g_analytic - g_fd| / max(|g_analytic|, |g_fd|, 1e-8).
/// `f` must build its value from the given tensors with ops from ops.h and
/// be deterministic; all tensors must be float64.
GradCheckReport GradCheck(const std::function<Tensor()> &f,
                          std::vector<NamedTensor> params,
                          const GradCheckOptions &options = {});

}  // namespace avmtl

#endif  // AVMTL_GRAD_CHECK_H_
