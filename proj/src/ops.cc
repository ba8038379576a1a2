// src/ops.cc

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

#include "avmtl/ops.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <fmt/format.h>

namespace avmtl {

namespace {

using Values = std::vector<double>;

void RequireSameShape(const char *op, const Tensor &a, const Tensor &b) {
  if (a.shape() != b.shape())
    throw Error(fmt::format("{}: shape mismatch {} vs {}", op,
                            ShapeString(a.shape()), ShapeString(b.shape())));
}

Values Copy(std::span<const double> s) { return Values(s.begin(), s.end()); }

// Row-major strides.
std::vector<int64_t> Strides(const Shape &shape) {
  std::vector<int64_t> strides(shape.size(), 1);
  for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i)
    strides[i] = strides[i + 1] * shape[i + 1];
  return strides;
}

// out[j] = in[source(j)] for a transposition given by `perm`
// (out axis i corresponds to in axis perm[i]).
Values PermuteValues(const Values &in, const Shape &shape,
                     const std::vector<int> &perm, Shape *out_shape) {
  const int r = static_cast<int>(shape.size());
  Shape oshape(r);
  for (int i = 0; i < r; ++i) oshape[i] = shape[perm[i]];
  *out_shape = oshape;
  bool identity = true;
  for (int i = 0; i < r; ++i) identity = identity && perm[i] == i;
  if (identity) return in;
  std::vector<int64_t> in_strides = Strides(shape);
  std::vector<int64_t> src_stride(r);
  for (int i = 0; i < r; ++i) src_stride[i] = in_strides[perm[i]];
  Values out(in.size());
  std::vector<int64_t> counter(r, 0);
  int64_t src = 0;
  const int64_t n = static_cast<int64_t>(in.size());
  for (int64_t j = 0; j < n; ++j) {
    out[j] = in[src];
    for (int ax = r - 1; ax >= 0; --ax) {
      if (++counter[ax] < oshape[ax]) {
        src += src_stride[ax];
        break;
      }
      src -= src_stride[ax] * (oshape[ax] - 1);
      counter[ax] = 0;
    }
  }
  return out;
}

// C[m×n] += A[m×k] · B[k×n], all row-major.
void Gemm(const double *a, const double *b, double *c, int64_t m, int64_t k,
          int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    double *crow = c + i * n;
    const double *arow = a + i * k;
    for (int64_t p = 0; p < k; ++p) {
      const double aip = arow[p];
      if (aip == 0.0) continue;
      const double *brow = b + p * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

struct ContractionPlan {
  std::string a_labels, b_labels, out_labels;
  std::string batch, a_free, b_free, summed;
  std::map<char, int64_t> size;
};

ContractionPlan ParseContraction(const std::string &spec, const Shape &a_shape,
                                 const Shape &b_shape) {
  ContractionPlan plan;
  auto arrow = spec.find("->");
  auto comma = spec.find(',');
  if (arrow == std::string::npos || comma == std::string::npos || comma > arrow)
    throw Error("contract: malformed spec '" + spec + "'");
  plan.a_labels = spec.substr(0, comma);
  plan.b_labels = spec.substr(comma + 1, arrow - comma - 1);
  plan.out_labels = spec.substr(arrow + 2);
  auto check_unique = [&](const std::string &labels, const char *what) {
    for (char c : labels) {
      if (!std::isalpha(static_cast<unsigned char>(c)))
        throw Error(fmt::format("contract: bad label '{}' in '{}'", c, spec));
      if (std::count(labels.begin(), labels.end(), c) != 1)
        throw Error(fmt::format("contract: label '{}' repeats in {} of '{}'",
                                c, what, spec));
    }
  };
  check_unique(plan.a_labels, "first operand");
  check_unique(plan.b_labels, "second operand");
  check_unique(plan.out_labels, "output");
  if (plan.a_labels.size() != a_shape.size())
    throw Error(fmt::format("contract '{}': first operand has rank {}, spec "
                            "names {} indices",
                            spec, a_shape.size(), plan.a_labels.size()));
  if (plan.b_labels.size() != b_shape.size())
    throw Error(fmt::format("contract '{}': second operand has rank {}, spec "
                            "names {} indices",
                            spec, b_shape.size(), plan.b_labels.size()));
  for (size_t i = 0; i < plan.a_labels.size(); ++i)
    plan.size[plan.a_labels[i]] = a_shape[i];
  for (size_t i = 0; i < plan.b_labels.size(); ++i) {
    char c = plan.b_labels[i];
    auto it = plan.size.find(c);
    if (it != plan.size.end() && it->second != b_shape[i])
      throw Error(fmt::format("contract '{}': index '{}' has size {} in the "
                              "first operand but {} in the second",
                              spec, c, it->second, b_shape[i]));
    plan.size[c] = b_shape[i];
  }
  auto in = [](const std::string &s, char c) {
    return s.find(c) != std::string::npos;
  };
  for (char c : plan.out_labels) {
    bool ia = in(plan.a_labels, c), ib = in(plan.b_labels, c);
    if (!ia && !ib)
      throw Error(fmt::format("contract '{}': output index '{}' appears in no "
                              "operand",
                              spec, c));
    if (ia && ib)
      plan.batch += c;
    else if (ia)
      plan.a_free += c;
    else
      plan.b_free += c;
  }
  for (char c : plan.a_labels) {
    if (in(plan.out_labels, c)) continue;
    if (!in(plan.b_labels, c))
      throw Error(fmt::format("contract '{}': index '{}' is summed within one "
                              "operand; reduce explicitly",
                              spec, c));
    plan.summed += c;
  }
  for (char c : plan.b_labels) {
    if (!in(plan.out_labels, c) && !in(plan.a_labels, c))
      throw Error(fmt::format("contract '{}': index '{}' is summed within one "
                              "operand; reduce explicitly",
                              spec, c));
  }
  return plan;
}

std::vector<int> PermutationTo(const std::string &from, const std::string &to) {
  std::vector<int> perm;
  for (char c : to) perm.push_back(static_cast<int>(from.find(c)));
  return perm;
}

int64_t Product(const ContractionPlan &plan, const std::string &labels) {
  int64_t n = 1;
  for (char c : labels) n *= plan.size.at(c);
  return n;
}

}  // namespace

std::vector<double> ContractValues(const std::string &spec,
                                   const std::vector<double> &a,
                                   const Shape &a_shape,
                                   const std::vector<double> &b,
                                   const Shape &b_shape, Shape *out_shape) {
  ContractionPlan plan = ParseContraction(spec, a_shape, b_shape);
  Shape pa_shape, pb_shape, tmp;
  Values pa = PermuteValues(
      a, a_shape, PermutationTo(plan.a_labels, plan.batch + plan.a_free + plan.summed),
      &pa_shape);
  Values pb = PermuteValues(
      b, b_shape, PermutationTo(plan.b_labels, plan.batch + plan.summed + plan.b_free),
      &pb_shape);
  const int64_t nb = Product(plan, plan.batch), m = Product(plan, plan.a_free),
                k = Product(plan, plan.summed), n = Product(plan, plan.b_free);
  Values c(nb * m * n, 0.0);
  for (int64_t i = 0; i < nb; ++i)
    Gemm(pa.data() + i * m * k, pb.data() + i * k * n, c.data() + i * m * n, m,
         k, n);
  const std::string c_labels = plan.batch + plan.a_free + plan.b_free;
  Shape c_shape;
  for (char ch : c_labels) c_shape.push_back(plan.size.at(ch));
  return PermuteValues(c, c_shape, PermutationTo(c_labels, plan.out_labels),
                       out_shape);
}


Tensor Contract(const Tensor &a, const Tensor &b, const std::string &spec) {
  Shape out_shape;
  Values out = ContractValues(spec, Copy(a.data()), a.shape(), Copy(b.data()),
                              b.shape(), &out_shape);
  ContractionPlan plan = ParseContraction(spec, a.shape(), b.shape());
  const std::string grad_a_spec =
      plan.out_labels + "," + plan.b_labels + "->" + plan.a_labels;
  const std::string grad_b_spec =
      plan.out_labels + "," + plan.a_labels + "->" + plan.b_labels;
  auto ai = a.impl(), bi = b.impl();
  return RecordOp(
      "contract", {a, b}, out_shape, std::move(out), a.dtype(),
      [=](auto g, auto, auto gin) {
        Values gv(g.begin(), g.end());
        Shape s;
        if (gin[0]) {
          Values ga = ContractValues(grad_a_spec, gv, out_shape, bi->data,
                                     bi->shape, &s);
          for (size_t i = 0; i < ga.size(); ++i) (*gin[0])[i] += ga[i];
        }
        if (gin[1]) {
          Values gb = ContractValues(grad_b_spec, gv, out_shape, ai->data,
                                     ai->shape, &s);
          for (size_t i = 0; i < gb.size(); ++i) (*gin[1])[i] += gb[i];
        }
      });
}

Tensor Add(const Tensor &a, const Tensor &b) {
  RequireSameShape("add", a, b);
  Values out(a.numel());
  auto av = a.data(), bv = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return RecordOp("add", {a, b}, a.shape(), std::move(out), a.dtype(),
                  [](auto g, auto, auto gin) {
                    for (Values *gi : gin) {
                      if (!gi) continue;
                      for (size_t i = 0; i < g.size(); ++i) (*gi)[i] += g[i];
                    }
                  });
}

Tensor Sub(const Tensor &a, const Tensor &b) {
  RequireSameShape("sub", a, b);
  Values out(a.numel());
  auto av = a.data(), bv = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return RecordOp("sub", {a, b}, a.shape(), std::move(out), a.dtype(),
                  [](auto g, auto, auto gin) {
                    if (gin[0])
                      for (size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i];
                    if (gin[1])
                      for (size_t i = 0; i < g.size(); ++i) (*gin[1])[i] -= g[i];
                  });
}

Tensor Mul(const Tensor &a, const Tensor &b) {
  RequireSameShape("mul", a, b);
  Values out(a.numel());
  auto av = a.data(), bv = b.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  auto ai = a.impl(), bi = b.impl();
  return RecordOp("mul", {a, b}, a.shape(), std::move(out), a.dtype(),
                  [ai, bi](auto g, auto, auto gin) {
                    if (gin[0])
                      for (size_t i = 0; i < g.size(); ++i)
                        (*gin[0])[i] += g[i] * bi->data[i];
                    if (gin[1])
                      for (size_t i = 0; i < g.size(); ++i)
                        (*gin[1])[i] += g[i] * ai->data[i];
                  });
}

Tensor Scale(const Tensor &x, double s) {
  Values out(x.numel());
  auto xv = x.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * s;
  return RecordOp("scale", {x}, x.shape(), std::move(out), x.dtype(),
                  [s](auto g, auto, auto gin) {
                    for (size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i] * s;
                  });
}

Tensor AddScalar(const Tensor &x, double s) {
  Values out(x.numel());
  auto xv = x.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = xv[i] + s;
  return RecordOp("add_scalar", {x}, x.shape(), std::move(out), x.dtype(),
                  [](auto g, auto, auto gin) {
                    for (size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i];
                  });
}

Tensor AddLastDim(const Tensor &x, const Tensor &v) {
  if (v.rank() != 1 || x.rank() < 1 || v.dim(0) != x.dim(-1))
    throw Error(fmt::format("add_last_dim: cannot add {} along the last axis "
                            "of {}",
                            ShapeString(v.shape()), ShapeString(x.shape())));
  const int64_t k = v.dim(0), rows = x.numel() / k;
  Values out(x.numel());
  auto xv = x.data(), vv = v.data();
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t j = 0; j < k; ++j) out[r * k + j] = xv[r * k + j] + vv[j];
  return RecordOp("add_last_dim", {x, v}, x.shape(), std::move(out), x.dtype(),
                  [k, rows](auto g, auto, auto gin) {
                    if (gin[0])
                      for (size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i];
                    if (gin[1])
                      for (int64_t r = 0; r < rows; ++r)
                        for (int64_t j = 0; j < k; ++j)
                          (*gin[1])[j] += g[r * k + j];
                  });
}

Tensor MulLastDim(const Tensor &x, const Tensor &v) {
  if (v.rank() != 1 || x.rank() < 1 || v.dim(0) != x.dim(-1))
    throw Error(fmt::format("mul_last_dim: cannot scale {} along the last axis "
                            "of {}",
                            ShapeString(x.shape()), ShapeString(v.shape())));
  const int64_t k = v.dim(0), rows = x.numel() / k;
  Values out(x.numel());
  auto xv = x.data(), vv = v.data();
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t j = 0; j < k; ++j) out[r * k + j] = xv[r * k + j] * vv[j];
  auto xi = x.impl(), vi = v.impl();
  return RecordOp("mul_last_dim", {x, v}, x.shape(), std::move(out), x.dtype(),
                  [=](auto g, auto, auto gin) {
                    if (gin[0])
                      for (int64_t r = 0; r < rows; ++r)
                        for (int64_t j = 0; j < k; ++j)
                          (*gin[0])[r * k + j] += g[r * k + j] * vi->data[j];
                    if (gin[1])
                      for (int64_t r = 0; r < rows; ++r)
                        for (int64_t j = 0; j < k; ++j)
                          (*gin[1])[j] += g[r * k + j] * xi->data[r * k + j];
                  });
}

namespace {

// Elementwise map; `dydx(x, y)` gives the local derivative.
template <typename F, typename D>
Tensor Unary(const char *name, const Tensor &x, F f, D dydx) {
  Values out(x.numel());
  auto xv = x.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = f(xv[i]);
  auto xi = x.impl();
  return RecordOp(name, {x}, x.shape(), std::move(out), x.dtype(),
                  [xi, dydx](auto g, auto y, auto gin) {
                    for (size_t i = 0; i < g.size(); ++i)
                      (*gin[0])[i] += g[i] * dydx(xi->data[i], y[i]);
                  });
}

}  // namespace

Tensor Relu(const Tensor &x) {
  return Unary(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor Tanh(const Tensor &x) {
  return Unary(
      "tanh", x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor Sigmoid(const Tensor &x) {
  return Unary(
      "sigmoid", x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor Exp(const Tensor &x) {
  return Unary(
      "exp", x, [](double v) { return std::exp(v); },
      [](double, double y) { return y; });
}

Tensor Log(const Tensor &x) {
  for (double v : x.data()) {
    if (!(v > 0.0)) throw Error("log: argument must be positive");
  }
  return Unary(
      "log", x, [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; });
}

namespace {

int64_t LastDim(const char *op, const Tensor &x) {
  if (x.rank() < 1) throw Error(std::string(op) + ": needs rank >= 1");
  return x.dim(-1);
}

}  // namespace

Tensor SoftmaxLastDim(const Tensor &x, const std::vector<uint8_t> &mask) {
  const int64_t k = LastDim("softmax", x), rows = x.numel() / k;
  if (!mask.empty() && static_cast<int64_t>(mask.size()) != x.numel())
    throw Error("softmax: mask size does not match input");
  Values out(x.numel(), 0.0);
  auto xv = x.data();
  for (int64_t r = 0; r < rows; ++r) {
    const double *row = xv.data() + r * k;
    const uint8_t *m = mask.empty() ? nullptr : mask.data() + r * k;
    double mx = -std::numeric_limits<double>::infinity();
    for (int64_t j = 0; j < k; ++j)
      if (!m || m[j]) mx = std::max(mx, row[j]);
    if (mx == -std::numeric_limits<double>::infinity())
      throw Error("softmax: row with every entry masked");
    double total = 0.0;
    double *o = out.data() + r * k;
    for (int64_t j = 0; j < k; ++j) {
      if (m && !m[j]) continue;
      o[j] = std::exp(row[j] - mx);
      total += o[j];
    }
    for (int64_t j = 0; j < k; ++j) o[j] /= total;
  }
  return RecordOp("softmax", {x}, x.shape(), std::move(out), x.dtype(),
                  [k, rows](auto g, auto y, auto gin) {
                    for (int64_t r = 0; r < rows; ++r) {
                      double dot = 0.0;
                      for (int64_t j = 0; j < k; ++j)
                        dot += g[r * k + j] * y[r * k + j];
                      for (int64_t j = 0; j < k; ++j)
                        (*gin[0])[r * k + j] +=
                            y[r * k + j] * (g[r * k + j] - dot);
                    }
                  });
}

Tensor LogSoftmaxLastDim(const Tensor &x) {
  const int64_t k = LastDim("log_softmax", x), rows = x.numel() / k;
  Values out(x.numel());
  auto xv = x.data();
  for (int64_t r = 0; r < rows; ++r) {
    const double *row = xv.data() + r * k;
    double mx = *std::max_element(row, row + k);
    double total = 0.0;
    for (int64_t j = 0; j < k; ++j) total += std::exp(row[j] - mx);
    const double lse = mx + std::log(total);
    for (int64_t j = 0; j < k; ++j) out[r * k + j] = row[j] - lse;
  }
  return RecordOp("log_softmax", {x}, x.shape(), std::move(out), x.dtype(),
                  [k, rows](auto g, auto y, auto gin) {
                    for (int64_t r = 0; r < rows; ++r) {
                      double total = 0.0;
                      for (int64_t j = 0; j < k; ++j) total += g[r * k + j];
                      for (int64_t j = 0; j < k; ++j)
                        (*gin[0])[r * k + j] +=
                            g[r * k + j] - std::exp(y[r * k + j]) * total;
                    }
                  });
}

Tensor LogSumExpLastDim(const Tensor &x) {
  const int64_t k = LastDim("logsumexp", x), rows = x.numel() / k;
  Values out(rows);
  auto xv = x.data();
  for (int64_t r = 0; r < rows; ++r) {
    const double *row = xv.data() + r * k;
    double mx = *std::max_element(row, row + k);
    double total = 0.0;
    for (int64_t j = 0; j < k; ++j) total += std::exp(row[j] - mx);
    out[r] = mx + std::log(total);
  }
  Shape shape(x.shape().begin(), x.shape().end() - 1);
  auto xi = x.impl();
  return RecordOp("logsumexp", {x}, shape, std::move(out), x.dtype(),
                  [xi, k, rows](auto g, auto y, auto gin) {
                    for (int64_t r = 0; r < rows; ++r)
                      for (int64_t j = 0; j < k; ++j)
                        (*gin[0])[r * k + j] +=
                            g[r] * std::exp(xi->data[r * k + j] - y[r]);
                  });
}

Tensor MaxLastDim(const Tensor &x) {
  const int64_t k = LastDim("max", x), rows = x.numel() / k;
  Values out(rows);
  std::vector<int64_t> arg(rows);
  auto xv = x.data();
  for (int64_t r = 0; r < rows; ++r) {
    const double *row = xv.data() + r * k;
    arg[r] = std::max_element(row, row + k) - row;
    out[r] = row[arg[r]];
  }
  Shape shape(x.shape().begin(), x.shape().end() - 1);
  return RecordOp("max", {x}, shape, std::move(out), x.dtype(),
                  [arg = std::move(arg), k](auto g, auto, auto gin) {
                    for (size_t r = 0; r < arg.size(); ++r)
                      (*gin[0])[r * k + arg[r]] += g[r];
                  });
}

Tensor Sum(const Tensor &x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return RecordOp("sum", {x}, {}, {total}, x.dtype(),
                  [](auto g, auto, auto gin) {
                    for (double &v : *gin[0]) v += g[0];
                  });
}

Tensor Mean(const Tensor &x) {
  return Scale(Sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor Reshape(const Tensor &x, const Shape &shape) {
  if (NumElements(shape) != x.numel())
    throw Error(fmt::format("reshape: cannot view {} as {}",
                            ShapeString(x.shape()), ShapeString(shape)));
  return RecordOp("reshape", {x}, shape, Copy(x.data()), x.dtype(),
                  [](auto g, auto, auto gin) {
                    for (size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i];
                  });
}

Tensor Permute(const Tensor &x, const std::vector<int> &perm) {
  const int r = x.rank();
  if (static_cast<int>(perm.size()) != r)
    throw Error("permute: permutation length does not match rank");
  std::vector<int> seen(perm);
  std::sort(seen.begin(), seen.end());
  for (int i = 0; i < r; ++i)
    if (seen[i] != i) throw Error("permute: not a permutation");
  Shape out_shape;
  Values out = PermuteValues(Copy(x.data()), x.shape(), perm, &out_shape);
  std::vector<int> inverse(r);
  for (int i = 0; i < r; ++i) inverse[perm[i]] = i;
  return RecordOp("permute", {x}, out_shape, std::move(out), x.dtype(),
                  [inverse, out_shape](auto g, auto, auto gin) {
                    Shape s;
                    Values back = PermuteValues(Values(g.begin(), g.end()),
                                                out_shape, inverse, &s);
                    for (size_t i = 0; i < back.size(); ++i)
                      (*gin[0])[i] += back[i];
                  });
}

Tensor Gather(const Tensor &x, const Shape &out_shape,
              std::vector<int64_t> index) {
  if (NumElements(out_shape) != static_cast<int64_t>(index.size()))
    throw Error("gather: index count does not match output shape");
  Values out(index.size());
  auto xv = x.data();
  const int64_t n = x.numel();
  for (size_t i = 0; i < index.size(); ++i) {
    const int64_t src = index[i];
    if (src >= n) throw Error("gather: index out of range");
    out[i] = src < 0 ? 0.0 : xv[src];
  }
  return RecordOp("gather", {x}, out_shape, std::move(out), x.dtype(),
                  [index = std::move(index)](auto g, auto, auto gin) {
                    for (size_t i = 0; i < index.size(); ++i)
                      if (index[i] >= 0) (*gin[0])[index[i]] += g[i];
                  });
}

// Mean and (biased) variance of one row.  The mean is accumulated relative to
// the first element so constant rows give exactly zero deviations.
static void RowMoments(const double *row, int64_t k, double *mean, double *var) {
  const double shift = row[0];
  double acc = 0.0;
  for (int64_t j = 0; j < k; ++j) acc += row[j] - shift;
  *mean = shift + acc / static_cast<double>(k);
  double v = 0.0;
  for (int64_t j = 0; j < k; ++j) v += (row[j] - *mean) * (row[j] - *mean);
  *var = v / static_cast<double>(k);
}

Tensor NormalizeLastDim(const Tensor &x, double eps) {
  const int64_t k = LastDim("normalize", x), rows = x.numel() / k;
  Values out(x.numel());
  Values inv_std(rows);
  auto xv = x.data();
  for (int64_t r = 0; r < rows; ++r) {
    const double *row = xv.data() + r * k;
    double mean, var;
    RowMoments(row, k, &mean, &var);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (int64_t j = 0; j < k; ++j) out[r * k + j] = (row[j] - mean) * inv_std[r];
  }
  auto xi = x.impl();
  return RecordOp(
      "normalize", {x}, x.shape(), std::move(out), x.dtype(),
      [k, rows, eps, xi](auto g, auto, auto gin) {
        // Recompute the unrounded normalized values so float32 storage does
        // not leak into the derivative.
        std::vector<double> yhat(k);
        for (int64_t r = 0; r < rows; ++r) {
          const double *row = xi->data.data() + r * k;
          double mean, var;
          RowMoments(row, k, &mean, &var);
          const double inv = 1.0 / std::sqrt(var + eps);
          double gmean = 0.0, gy = 0.0;
          for (int64_t j = 0; j < k; ++j) {
            yhat[j] = (row[j] - mean) * inv;
            gmean += g[r * k + j];
            gy += g[r * k + j] * yhat[j];
          }
          gmean /= static_cast<double>(k);
          gy /= static_cast<double>(k);
          for (int64_t j = 0; j < k; ++j)
            (*gin[0])[r * k + j] += inv * (g[r * k + j] - gmean - yhat[j] * gy);
        }
      });
}

Tensor ConcatLastDim(const Tensor &a, const Tensor &b) {
  if (a.rank() < 1 || a.rank() != b.rank() ||
      !std::equal(a.shape().begin(), a.shape().end() - 1, b.shape().begin()))
    throw Error(fmt::format("concat: leading dimensions differ, {} vs {}",
                            ShapeString(a.shape()), ShapeString(b.shape())));
  const int64_t ka = a.dim(-1), kb = b.dim(-1), rows = a.numel() / ka;
  Values out(a.numel() + b.numel());
  auto av = a.data(), bv = b.data();
  for (int64_t r = 0; r < rows; ++r) {
    std::copy_n(av.data() + r * ka, ka, out.data() + r * (ka + kb));
    std::copy_n(bv.data() + r * kb, kb, out.data() + r * (ka + kb) + ka);
  }
  Shape shape = a.shape();
  shape.back() = ka + kb;
  return RecordOp("concat", {a, b}, shape, std::move(out), a.dtype(),
                  [ka, kb, rows](auto g, auto, auto gin) {
                    for (int64_t r = 0; r < rows; ++r) {
                      if (gin[0])
                        for (int64_t j = 0; j < ka; ++j)
                          (*gin[0])[r * ka + j] += g[r * (ka + kb) + j];
                      if (gin[1])
                        for (int64_t j = 0; j < kb; ++j)
                          (*gin[1])[r * kb + j] += g[r * (ka + kb) + ka + j];
                    }
                  });
}

Tensor SliceLastDim(const Tensor &x, int64_t start, int64_t length) {
  const int64_t k = LastDim("slice", x), rows = x.numel() / k;
  if (start < 0 || length <= 0 || start + length > k)
    throw Error(fmt::format("slice: [{}, {}) outside last dimension {}", start,
                            start + length, k));
  Values out(rows * length);
  auto xv = x.data();
  for (int64_t r = 0; r < rows; ++r)
    std::copy_n(xv.data() + r * k + start, length, out.data() + r * length);
  Shape shape = x.shape();
  shape.back() = length;
  return RecordOp("slice", {x}, shape, std::move(out), x.dtype(),
                  [k, rows, start, length](auto g, auto, auto gin) {
                    for (int64_t r = 0; r < rows; ++r)
                      for (int64_t j = 0; j < length; ++j)
                        (*gin[0])[r * k + start + j] += g[r * length + j];
                  });
}

Tensor Select(const Tensor &x, int axis, int64_t index) {
  const int r = x.rank();
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) throw Error("select: axis out of range");
  const int64_t n = x.dim(axis);
  if (index < 0 || index >= n)
    throw Error(fmt::format("select: index {} outside axis of size {}", index, n));
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= x.dim(i);
  for (int i = axis + 1; i < r; ++i) inner *= x.dim(i);
  Values out(outer * inner);
  auto xv = x.data();
  for (int64_t o = 0; o < outer; ++o)
    std::copy_n(xv.data() + (o * n + index) * inner, inner,
                out.data() + o * inner);
  Shape shape = x.shape();
  shape.erase(shape.begin() + axis);
  return RecordOp("select", {x}, shape, std::move(out), x.dtype(),
                  [outer, inner, n, index](auto g, auto, auto gin) {
                    for (int64_t o = 0; o < outer; ++o)
                      for (int64_t i = 0; i < inner; ++i)
                        (*gin[0])[(o * n + index) * inner + i] += g[o * inner + i];
                  });
}

Tensor Stack(const std::vector<Tensor> &xs, int axis) {
  if (xs.empty()) throw Error("stack: no tensors");
  const Shape &base = xs[0].shape();
  const int r = static_cast<int>(base.size());
  if (axis < 0) axis += r + 1;
  if (axis < 0 || axis > r) throw Error("stack: axis out of range");
  for (const Tensor &t : xs) {
    if (t.shape() != base)
      throw Error(fmt::format("stack: shape mismatch {} vs {}",
                              ShapeString(base), ShapeString(t.shape())));
  }
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= base[i];
  for (int i = axis; i < r; ++i) inner *= base[i];
  const int64_t n = static_cast<int64_t>(xs.size());
  Values out(outer * n * inner);
  for (int64_t s = 0; s < n; ++s) {
    auto v = xs[s].data();
    for (int64_t o = 0; o < outer; ++o)
      std::copy_n(v.data() + o * inner, inner, out.data() + (o * n + s) * inner);
  }
  Shape shape = base;
  shape.insert(shape.begin() + axis, n);
  return RecordOp("stack", xs, shape, std::move(out), xs[0].dtype(),
                  [outer, inner, n](auto g, auto, auto gin) {
                    for (int64_t s = 0; s < n; ++s) {
                      if (!gin[s]) continue;
                      for (int64_t o = 0; o < outer; ++o)
                        for (int64_t i = 0; i < inner; ++i)
                          (*gin[s])[o * inner + i] += g[(o * n + s) * inner + i];
                    }
                  });
}

Tensor JointSum(const Tensor &a, const Tensor &c) {
  if (a.rank() != 3 || c.rank() != 3 || a.dim(0) != c.dim(0) ||
      a.dim(2) != c.dim(2))
    throw Error(fmt::format("joint_sum: incompatible shapes {} and {}",
                            ShapeString(a.shape()), ShapeString(c.shape())));
  const int64_t nb = a.dim(0), nt = a.dim(1), nu = c.dim(1), nj = a.dim(2);
  Values out(nb * nt * nu * nj);
  auto av = a.data(), cv = c.data();
  for (int64_t b = 0; b < nb; ++b)
    for (int64_t t = 0; t < nt; ++t)
      for (int64_t u = 0; u < nu; ++u) {
        const double *ar = av.data() + (b * nt + t) * nj;
        const double *cr = cv.data() + (b * nu + u) * nj;
        double *o = out.data() + ((b * nt + t) * nu + u) * nj;
        for (int64_t j = 0; j < nj; ++j) o[j] = ar[j] + cr[j];
      }
  return RecordOp(
      "joint_sum", {a, c}, {nb, nt, nu, nj}, std::move(out), a.dtype(),
      [=](auto g, auto, auto gin) {
        for (int64_t b = 0; b < nb; ++b)
          for (int64_t t = 0; t < nt; ++t)
            for (int64_t u = 0; u < nu; ++u) {
              const double *gr = g.data() + ((b * nt + t) * nu + u) * nj;
              if (gin[0])
                for (int64_t j = 0; j < nj; ++j)
                  (*gin[0])[(b * nt + t) * nj + j] += gr[j];
              if (gin[1])
                for (int64_t j = 0; j < nj; ++j)
                  (*gin[1])[(b * nu + u) * nj + j] += gr[j];
            }
      });
}

}  // namespace avmtl
