// src/attention.cc

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


#include "avmtl/attention.h"

#include <fmt/format.h>

#include "avmtl/frontend.h"
#include "avmtl/ops.h"
#include "avmtl/random.h"

namespace avmtl {

namespace {

std::string QueryName(size_t layer, const char *what) {
  return fmt::format("attention.query.L{}.{}", layer, what);
}

}  // namespace

void QueryNetConfig::Validate() const {
  if (channels.empty()) throw Error("query net has no layers");
  if (kernel < 1 || kernel % 2 == 0)
    throw Error(fmt::format("query net kernel must be odd, got {}", kernel));
  for (size_t i = 0; i + 1 < channels.size(); ++i)
    if (channels[i] % norm_groups != 0)
      throw Error(fmt::format("query net layer {}: {} groups do not divide {} "
                              "channels",
                              i, norm_groups, channels[i]));
}

void InitAttention(const QueryNetConfig &config, int64_t da, int64_t dv,
                   uint64_t seed, DType dtype, ParameterSet *params) {
  config.Validate();
  int64_t in = da;
  for (size_t i = 0; i < config.channels.size(); ++i) {
    std::mt19937_64 rng(DeriveSeed(seed, {0xa7, i}));
    const int64_t out = config.channels[i], fan_in = config.kernel * in;
    params->Add(QueryName(i, "kernel"),
                FanInUniform({fan_in, out}, fan_in, rng, dtype));
    params->Add(QueryName(i, "bias"), Tensor::Zeros({out}, dtype));
    if (i + 1 < config.channels.size()) {
      params->Add(QueryName(i, "gn_scale"), Tensor::Full({out}, 1.0, dtype));
      params->Add(QueryName(i, "gn_shift"), Tensor::Zeros({out}, dtype));
    }
    in = out;
  }
  std::mt19937_64 rng(DeriveSeed(seed, {0xa7, 0xff}));
  params->Add("attention.W", FanInUniform({config.dq(), dv}, config.dq(), rng, dtype));
}

Tensor TemporalIm2Col(const Tensor &x, int kernel) {
  if (x.rank() != 3) throw Error("temporal im2col expects B x T x D input");
  if (kernel == 1) return x;
  const int64_t b = x.dim(0), t = x.dim(1), d = x.dim(2);
  const int pad = (kernel - 1) / 2;
  std::vector<int64_t> idx(b * t * kernel * d);
  int64_t n = 0;
  for (int64_t bi = 0; bi < b; ++bi)
    for (int64_t ti = 0; ti < t; ++ti)
      for (int k = 0; k < kernel; ++k) {
        const int64_t ts = ti + k - pad;
        const bool inside = ts >= 0 && ts < t;
        for (int64_t di = 0; di < d; ++di)
          idx[n++] = inside ? (bi * t + ts) * d + di : -1;
      }
  return Gather(x, {b, t, kernel * d}, std::move(idx));
}

Tensor ComputeQueries(const Tensor &acoustic, const QueryNetConfig &config,
                      const ParameterSet &params) {
  if (acoustic.rank() != 3)
    throw Error("queries expect B x T x Da acoustic features, got " +
                ShapeString(acoustic.shape()));
  Tensor x = acoustic;
  for (size_t i = 0; i < config.channels.size(); ++i) {
    const Tensor &k = params.Get(QueryName(i, "kernel"));
    if (k.dim(0) != config.kernel * x.dim(2))
      throw Error(fmt::format("query net layer {}: input has {} channels, "
                              "kernel expects {}",
                              i, x.dim(2), k.dim(0) / config.kernel));
    x = Contract(TemporalIm2Col(x, config.kernel), k, "btk,kc->btc");
    x = AddLastDim(x, params.Get(QueryName(i, "bias")));
    if (i + 1 < config.channels.size())
      x = Relu(GroupNorm(x, 2, config.norm_groups,
                         params.Get(QueryName(i, "gn_scale")),
                         params.Get(QueryName(i, "gn_shift"))));
  }
  return x;
}

Tensor AttentionScores(const Tensor &q, const Tensor &v, const Tensor &w) {
  if (q.rank() != 3 || v.rank() != 3 || w.rank() != 2)
    throw Error("attention scores expect Q: B x T x Dq, V: M x T x Dv, W: Dq x Dv");
  if (q.dim(1) != v.dim(1))
    throw Error(fmt::format("attention scores: queries have {} frames, visual "
                            "features {}",
                            q.dim(1), v.dim(1)));
  return Contract(Contract(q, w, "btq,qv->btv"), v, "btv,mtv->btm");
}

Tensor AttentionWeights(const Tensor &scores) { return SoftmaxLastDim(scores); }

Tensor FuseVisual(const Tensor &weights, const Tensor &v) {
  if (weights.rank() != 3 || v.rank() != 3 || weights.dim(2) != v.dim(0) ||
      weights.dim(1) != v.dim(1))
    throw Error(fmt::format("fuse: weights {} incompatible with visual "
                            "features {}",
                            ShapeString(weights.shape()), ShapeString(v.shape())));
  return Contract(weights, v, "btm,mtv->btv");
}

std::vector<int64_t> SelectTrack(const Tensor &scores) {
  const int64_t m = scores.dim(-1), rows = scores.numel() / m;
  auto s = scores.data();
  std::vector<int64_t> out(rows);
  for (int64_t r = 0; r < rows; ++r) {
    int64_t best = 0;
    for (int64_t j = 1; j < m; ++j)
      if (s[r * m + j] > s[r * m + best]) best = j;
    out[r] = best;
  }
  return out;
}

AttentionOutput Attend(const Tensor &acoustic, const Tensor &visual,
                       const QueryNetConfig &config, const ParameterSet &params) {
  AttentionOutput out;
  Tensor q = ComputeQueries(acoustic, config, params);
  out.scores = AttentionScores(q, visual, params.Get("attention.W"));
  out.weights = AttentionWeights(out.scores);
  out.fused = FuseVisual(out.weights, visual);
  return out;
}

}  // namespace avmtl
