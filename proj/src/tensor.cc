// src/tensor.cc

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

#include "avmtl/tensor.h"

#include <atomic>
#include <cmath>

#include <fmt/format.h>

namespace avmtl {

namespace {
std::atomic<uint64_t> next_tensor_id{1};
}  // namespace

const char *DTypeName(DType dtype) {
  return dtype == DType::kFloat32 ? "float32" : "float64";
}

DType ParseDType(const std::string &name) {
  if (name == "float32") return DType::kFloat32;
  if (name == "float64") return DType::kFloat64;
  throw Error("unknown dtype '" + name + "' (expected float32 or float64)");
}

int64_t NumElements(const Shape &shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

std::string ShapeString(const Shape &shape) {
  return fmt::format("[{}]", fmt::join(shape, ", "));
}

Tensor MakeTensor(Shape shape, std::vector<double> data, DType dtype) {
  for (int64_t d : shape) {
    if (d <= 0)
      throw Error("tensor dimensions must be positive, got " +
                  ShapeString(shape));
  }
  if (NumElements(shape) != static_cast<int64_t>(data.size()))
    throw Error(fmt::format("shape {} holds {} values but {} were given",
                            ShapeString(shape), NumElements(shape),
                            data.size()));
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->dtype = dtype;
  impl->data = std::move(data);
  impl->id = next_tensor_id.fetch_add(1, std::memory_order_relaxed);
  Tensor t(std::move(impl));
  t.RoundToDType();
  return t;
}

Tensor::Tensor(Shape shape, std::vector<double> data, DType dtype)
    : Tensor(MakeTensor(std::move(shape), std::move(data), dtype)) {}

Tensor Tensor::Zeros(const Shape &shape, DType dtype) {
  return MakeTensor(shape, std::vector<double>(NumElements(shape), 0.0), dtype);
}

Tensor Tensor::Full(const Shape &shape, double value, DType dtype) {
  return MakeTensor(shape, std::vector<double>(NumElements(shape), value),
                    dtype);
}

Tensor Tensor::Scalar(double value, DType dtype) {
  return MakeTensor({}, {value}, dtype);
}

int64_t Tensor::dim(int axis) const {
  int r = rank();
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r)
    throw Error(fmt::format("axis {} out of range for rank {}", axis, r));
  return impl_->shape[axis];
}

double Tensor::item() const {
  if (numel() != 1)
    throw Error("item() on tensor of shape " + ShapeString(shape()));
  return impl_->data[0];
}

double Tensor::at(std::initializer_list<int64_t> index) const {
  if (static_cast<int>(index.size()) != rank())
    throw Error("index rank does not match tensor rank");
  int64_t offset = 0;
  int axis = 0;
  for (int64_t i : index) {
    int64_t d = impl_->shape[axis++];
    if (i < 0 || i >= d) throw Error("index out of range");
    offset = offset * d + i;
  }
  return impl_->data[offset];
}

Tensor &Tensor::set_requires_grad(bool value) {
  impl_->requires_grad = value;
  return *this;
}

Tensor Tensor::Clone() const {
  Tensor t = MakeTensor(impl_->shape, impl_->data, impl_->dtype);
  t.impl_->requires_grad = impl_->requires_grad;
  return t;
}

Tensor Tensor::Cast(DType dtype) const {
  return MakeTensor(impl_->shape, impl_->data, dtype);
}

void Tensor::RoundToDType() {
  if (impl_->dtype != DType::kFloat32) return;
  for (double &v : impl_->data) v = static_cast<float>(v);
}

void CheckFinite(const Tensor &t, const std::string &what) {
  for (double v : t.data()) {
    if (!std::isfinite(v))
      throw Error("non-finite value produced by " + what);
  }
}

}  // namespace avmtl
