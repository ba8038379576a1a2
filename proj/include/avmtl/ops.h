// avmtl/ops.h

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

// Differentiable primitives.  Shapes are explicit: elementwise binary ops
// require identical shapes, and the only broadcasts are scalar-with-tensor
// and the named last-dimension ops (AddLastDim, MulLastDim).

#ifndef AVMTL_OPS_H_
#define AVMTL_OPS_H_

#include <cstdint>
#include <string>
#include <vector>

#include "avmtl/autodiff.h"
#include "avmtl/tensor.h"

namespace avmtl {

/// Two-operand Einstein contraction, e.g. "btq,qv->btv".  Labels are single
/// letters; every label of an operand must appear in the other operand or in
/// the output (no implicit reductions), and no label repeats inside one
/// operand.
Tensor Contract(const Tensor &a, const Tensor &b, const std::string &spec);

/// Raw kernel behind Contract, exposed for tests and fused ops.
std::vector<double> ContractValues(const std::string &spec,
                                   const std::vector<double> &a,
                                   const Shape &a_shape,
                                   const std::vector<double> &b,
                                   const Shape &b_shape, Shape *out_shape);

Tensor Add(const Tensor &a, const Tensor &b);
Tensor Sub(const Tensor &a, const Tensor &b);
Tensor Mul(const Tensor &a, const Tensor &b);
Tensor Scale(const Tensor &x, double s);
Tensor AddScalar(const Tensor &x, double s);
/// x[..., k] + v[k].
Tensor AddLastDim(const Tensor &x, const Tensor &v);
/// x[..., k] * v[k].
Tensor MulLastDim(const Tensor &x, const Tensor &v);

Tensor Relu(const Tensor &x);
Tensor Tanh(const Tensor &x);
Tensor Sigmoid(const Tensor &x);
Tensor Exp(const Tensor &x);
Tensor Log(const Tensor &x);

/// Softmax over the last dimension, computed with max subtraction.  When
/// `mask` is non-empty it must have x.numel() entries; zero entries are
/// excluded and receive probability exactly 0.  Every row needs at least one
/// unmasked entry.
Tensor SoftmaxLastDim(const Tensor &x, const std::vector<uint8_t> &mask = {});
Tensor LogSoftmaxLastDim(const Tensor &x);
/// log(sum(exp(x))) over the last dimension; output drops that dimension.
Tensor LogSumExpLastDim(const Tensor &x);
/// Max over the last dimension (gradient routed to the first maximum).
Tensor MaxLastDim(const Tensor &x);

Tensor Sum(const Tensor &x);
Tensor Mean(const Tensor &x);

Tensor Reshape(const Tensor &x, const Shape &shape);
Tensor Permute(const Tensor &x, const std::vector<int> &perm);
/// out[i] = x[index[i]], or 0 where index[i] < 0.  Gradients scatter-add.
Tensor Gather(const Tensor &x, const Shape &out_shape,
              std::vector<int64_t> index);

/// Zero-mean, unit-variance normalization of each last-dimension row.
Tensor NormalizeLastDim(const Tensor &x, double eps);

Tensor ConcatLastDim(const Tensor &a, const Tensor &b);
Tensor SliceLastDim(const Tensor &x, int64_t start, int64_t length);
/// Drops `axis` by taking position `index` along it.
Tensor Select(const Tensor &x, int axis, int64_t index);
/// Stacks equally shaped tensors along a new axis.
Tensor Stack(const std::vector<Tensor> &xs, int axis);

/// out[b, t, u, :] = a[b, t, :] + c[b, u, :] for a: B×T×J, c: B×U×J.
Tensor JointSum(const Tensor &a, const Tensor &c);

}  // namespace avmtl

#endif  // AVMTL_OPS_H_
