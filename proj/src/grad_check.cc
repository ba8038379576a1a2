// src/grad_check.cc

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

#include "avmtl/grad_check.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "avmtl/autodiff.h"

namespace avmtl {

double GradCheckReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto &e : entries) worst = std::max(worst, e.max_rel_error);
  return worst;
}

GradCheckReport GradCheck(const std::function<Tensor()> &f,
                          std::vector<NamedTensor> params,
                          const GradCheckOptions &options) {
  for (auto &p : params) {
    if (p.tensor.dtype() != DType::kFloat64)
      throw Error("grad check requires float64 tensors; '" + p.name +
                  "' is float32");
    p.tensor.set_requires_grad(true);
  }
  Tape tape;
  Tensor value;
  {
    TapeScope scope(&tape);
    value = f();
  }
  if (!std::isfinite(value.item()))
    throw Error("grad check: function value is not finite at the base point");
  GradientMap grads = tape.Backward(value);

  auto evaluate = [&](const std::string &name, int64_t coord) {
    NoGradScope no_grad;
    double v;
    try {
      v = f().item();
    } catch (const Error &e) {
      throw Error(fmt::format("grad check: evaluation failed after perturbing "
                              "{}[{}]: {}",
                              name, coord, e.what()));
    }
    if (!std::isfinite(v))
      throw Error(fmt::format("grad check: non-finite value after perturbing "
                              "{}[{}]",
                              name, coord));
    return v;
  };

  GradCheckReport report;
  report.tolerance = options.tolerance;
  std::mt19937_64 rng(options.seed);
  for (auto &p : params) {
    const int64_t n = p.tensor.numel();
    std::vector<int64_t> coords(n);
    std::iota(coords.begin(), coords.end(), 0);
    if (n > options.max_coords) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coords);
      std::sort(coords.begin(), coords.end());
    }
    Tensor analytic = grads.Get(p.tensor);
    GradCheckEntry entry{p.name, static_cast<int64_t>(coords.size()), 0.0};
    auto data = p.tensor.mutable_data();
    for (int64_t c : coords) {
      const double saved = data[c];
      data[c] = saved + options.step;
      const double plus = evaluate(p.name, c);
      data[c] = saved - options.step;
      const double minus = evaluate(p.name, c);
      data[c] = saved;
      const double fd = (plus - minus) / (2.0 * options.step);
      const double ga = analytic.data()[c];
      const double denom = std::max({std::abs(ga), std::abs(fd), 1e-8});
      entry.max_rel_error = std::max(entry.max_rel_error, std::abs(ga - fd) / denom);
    }
    report.entries.push_back(entry);
  }
  return report;
}

}  // namespace avmtl
