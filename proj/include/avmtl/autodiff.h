// avmtl/autodiff.h

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

// Reverse-mode differentiation.  Operations record onto the tape that is
// active on the calling thread (see TapeScope); with no active tape they run
// as plain forward computations.
//
//   Tape tape;
//   Tensor loss;
//   {
//     TapeScope scope(&tape);
//     loss = Sum(Mul(x, x));
//   }
//   GradientMap grads = tape.Backward(loss);

#ifndef AVMTL_AUTODIFF_H_
#define AVMTL_AUTODIFF_H_

#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "avmtl/tensor.h"

namespace avmtl {

/// Accumulates the contribution of one node to the gradients of its inputs.
/// `output` holds the node's forward values; `grad_inputs[i]` is null when
/// input i does not require a gradient.
using BackwardFn = std::function<void(std::span<const double> grad_output,
                                      std::span<const double> output,
                                      std::span<std::vector<double> *> grad_inputs)>;

class GradientMap {
 public:
  /// Gradient of the loss w.r.t. `leaf`; zeros when the loss does not
  /// depend on it.
  Tensor Get(const Tensor &leaf) const;
  bool Contains(const Tensor &leaf) const;

 private:
  friend class Tape;
  std::unordered_map<uint64_t, Tensor> grads_;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape &) = delete;
  Tape &operator=(const Tape &) = delete;

  /// Runs the reverse sweep from a scalar loss.  A tape supports exactly one
  /// sweep.
  GradientMap Backward(const Tensor &loss);

  bool consumed() const { return consumed_; }
  size_t num_nodes() const { return nodes_.size(); }

  void Record(const char *name, std::vector<Tensor> inputs, const Tensor &output,
              BackwardFn backward);

 private:
  struct Node {
    const char *name;
    std::vector<std::shared_ptr<detail::TensorImpl>> inputs;
    std::shared_ptr<detail::TensorImpl> output;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  bool consumed_ = false;
};

/// Makes `tape` the active recording target for the current thread for the
/// lifetime of the scope.  Scopes nest.
class TapeScope {
 public:
  explicit TapeScope(Tape *tape);
  ~TapeScope();
  TapeScope(const TapeScope &) = delete;
  TapeScope &operator=(const TapeScope &) = delete;

 private:
  Tape *previous_;
};

/// Suspends recording on the current thread (inference, gradient probes).
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope &) = delete;
  NoGradScope &operator=(const NoGradScope &) = delete;

 private:
  Tape *previous_;
};

Tape *ActiveTape();

/// Creates the output tensor of a primitive and, when recording and any
/// input requires a gradient, registers `backward` on the active tape.
/// Rounds `values` to `dtype` and checks finiteness in debug builds.
Tensor RecordOp(const char *name, const std::vector<Tensor> &inputs,
                Shape shape, std::vector<double> values, DType dtype,
                BackwardFn backward);

/// Test hook: primitives whose name is in the set have the sign of their
/// backward contribution flipped.  Thread-local.
void SetBackwardFault(const std::string &op_name);
void ClearBackwardFaults();

}  // namespace avmtl

#endif  // AVMTL_AUTODIFF_H_
