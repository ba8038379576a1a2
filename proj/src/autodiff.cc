// src/autodiff.cc

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

#include "avmtl/autodiff.h"

#include <set>

namespace avmtl {

namespace {
thread_local Tape *active_tape = nullptr;
thread_local std::set<std::string> faulty_ops;
}  // namespace

Tape *ActiveTape() { return active_tape; }

TapeScope::TapeScope(Tape *tape) : previous_(active_tape) {
  active_tape = tape;
}
TapeScope::~TapeScope() { active_tape = previous_; }

NoGradScope::NoGradScope() : previous_(active_tape) { active_tape = nullptr; }
NoGradScope::~NoGradScope() { active_tape = previous_; }

void SetBackwardFault(const std::string &op_name) { faulty_ops.insert(op_name); }
void ClearBackwardFaults() { faulty_ops.clear(); }

Tensor GradientMap::Get(const Tensor &leaf) const {
  auto it = grads_.find(leaf.id());
  if (it == grads_.end()) return Tensor::Zeros(leaf.shape(), DType::kFloat64);
  return it->second;
}

bool GradientMap::Contains(const Tensor &leaf) const {
  return grads_.count(leaf.id()) != 0;
}

void Tape::Record(const char *name, std::vector<Tensor> inputs,
                  const Tensor &output, BackwardFn backward) {
  if (consumed_) throw Error("cannot record onto a tape that was consumed");
  Node node;
  node.name = name;
  node.inputs.reserve(inputs.size());
  for (const Tensor &t : inputs) node.inputs.push_back(t.impl());
  node.output = output.impl();
  node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
}

GradientMap Tape::Backward(const Tensor &loss) {
  if (consumed_)
    throw Error("backward already ran on this tape; record a new forward pass");
  if (!loss.defined() || loss.numel() != 1 || loss.rank() != 0)
    throw Error("backward requires a scalar loss, got shape " +
                (loss.defined() ? ShapeString(loss.shape()) : "<undefined>"));
  consumed_ = true;

  std::unordered_map<const detail::TensorImpl *, std::vector<double>> grads;
  grads[loss.impl().get()] = {1.0};

  std::vector<std::vector<double> *> grad_inputs;
  std::vector<std::vector<double>> scratch;
  for (auto node = nodes_.rbegin(); node != nodes_.rend(); ++node) {
    auto out = grads.find(node->output.get());
    if (out == grads.end()) continue;
    // Every consumer of this output has already run.
    const std::vector<double> grad_output = std::move(out->second);
    grads.erase(out);
    const bool flip = !faulty_ops.empty() && faulty_ops.count(node->name);
    grad_inputs.assign(node->inputs.size(), nullptr);
    scratch.assign(node->inputs.size(), {});
    for (size_t i = 0; i < node->inputs.size(); ++i) {
      const auto &in = node->inputs[i];
      if (!in->requires_grad) continue;
      auto &g = grads[in.get()];
      if (g.empty()) g.assign(in->data.size(), 0.0);
      if (flip) {
        scratch[i].assign(in->data.size(), 0.0);
        grad_inputs[i] = &scratch[i];
      } else {
        grad_inputs[i] = &g;
      }
    }
    node->backward(grad_output, node->output->data, grad_inputs);
    if (flip) {
      for (size_t i = 0; i < node->inputs.size(); ++i) {
        if (!grad_inputs[i]) continue;
        auto &g = grads[node->inputs[i].get()];
        for (size_t k = 0; k < g.size(); ++k) g[k] -= scratch[i][k];
      }
    }
  }

  GradientMap result;
  std::set<const detail::TensorImpl *> interior;
  for (const Node &node : nodes_) interior.insert(node.output.get());
  for (const Node &node : nodes_) {
    for (const auto &in : node.inputs) {
      if (!in->requires_grad || interior.count(in.get())) continue;
      if (result.grads_.count(in->id)) continue;
      auto it = grads.find(in.get());
      std::vector<double> g = it != grads.end()
                                  ? it->second
                                  : std::vector<double>(in->data.size(), 0.0);
      result.grads_.emplace(in->id, MakeTensor(in->shape, std::move(g),
                                               DType::kFloat64));
    }
  }
  nodes_.clear();
  return result;
}

Tensor RecordOp(const char *name, const std::vector<Tensor> &inputs,
                Shape shape, std::vector<double> values, DType dtype,
                BackwardFn backward) {
  for (const Tensor &t : inputs) {
    if (t.dtype() != dtype)
      throw Error(std::string(name) + ": operands mix float32 and float64");
  }
  Tensor out = MakeTensor(std::move(shape), std::move(values), dtype);
#ifndef NDEBUG
  CheckFinite(out, name);
#endif
  Tape *tape = active_tape;
  if (tape == nullptr) return out;
  bool any = false;
  for (const Tensor &t : inputs) any = any || t.requires_grad();
  if (!any) return out;
  out.set_requires_grad(true);
  tape->Record(name, inputs, out, std::move(backward));
  return out;
}

}  // namespace avmtl
