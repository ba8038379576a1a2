// avmtl/tensor.h

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

#ifndef AVMTL_TENSOR_H_
#define AVMTL_TENSOR_H_

#include <cstdint>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace avmtl {

/// Every recoverable failure in the library is reported with this type.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string &what) : std::runtime_error(what) {}
};

/// Storage precision.  Values are held as double internally; a float32 tensor
/// has every stored value rounded to single precision, so the two dtypes
/// behave like their IEEE counterparts at storage boundaries.
enum class DType : uint8_t { kFloat32 = 0, kFloat64 = 1 };

const char *DTypeName(DType dtype);
DType ParseDType(const std::string &name);

using Shape = std::vector<int64_t>;

int64_t NumElements(const Shape &shape);
std::string ShapeString(const Shape &shape);

namespace detail {
struct TensorImpl {
  Shape shape;
  DType dtype = DType::kFloat64;
  std::vector<double> data;
  bool requires_grad = false;
  uint64_t id = 0;
};
}  // namespace detail

/// Dense row-major N-d array.  Copies are shallow handles; use Clone() for a
/// deep copy.  A default-constructed Tensor is "undefined".
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, DType dtype = DType::kFloat64);

  static Tensor Zeros(const Shape &shape, DType dtype = DType::kFloat64);
  static Tensor Full(const Shape &shape, double value,
                     DType dtype = DType::kFloat64);
  static Tensor Scalar(double value, DType dtype = DType::kFloat64);

  bool defined() const { return impl_ != nullptr; }
  const Shape &shape() const { return impl_->shape; }
  int rank() const { return static_cast<int>(impl_->shape.size()); }
  int64_t dim(int axis) const;
  int64_t numel() const { return static_cast<int64_t>(impl_->data.size()); }
  DType dtype() const { return impl_->dtype; }
  uint64_t id() const { return impl_->id; }

  std::span<const double> data() const { return impl_->data; }
  /// In-place access; only legal on leaves (parameters, inputs) between
  /// recordings, e.g. for optimizer updates or finite-difference probes.
  std::span<double> mutable_data() { return impl_->data; }

  double item() const;
  double at(std::initializer_list<int64_t> index) const;

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor &set_requires_grad(bool value);

  Tensor Clone() const;
  /// Non-differentiable dtype conversion (rounds when narrowing).
  Tensor Cast(DType dtype) const;
  /// Rounds stored values to the tensor's dtype; a no-op for float64.
  void RoundToDType();

  const std::shared_ptr<detail::TensorImpl> &impl() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl)
      : impl_(std::move(impl)) {}
  friend Tensor MakeTensor(Shape shape, std::vector<double> data, DType dtype);

  std::shared_ptr<detail::TensorImpl> impl_;
};

Tensor MakeTensor(Shape shape, std::vector<double> data, DType dtype);

/// Throws unless every value is finite; `what` names the producer.
void CheckFinite(const Tensor &t, const std::string &what);

}  // namespace avmtl

#endif  // AVMTL_TENSOR_H_
