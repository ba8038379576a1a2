// src/frontend.cc

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


#include "avmtl/frontend.h"

#include <fmt/format.h>

#include "avmtl/ops.h"
#include "avmtl/random.h"

namespace avmtl {

FrontendConfig FrontendConfig::Toy() {
  FrontendConfig c;
  c.height = c.width = 16;
  c.channels = 1;
  c.layers = {
      {1, 3, 3, 8, true, 1, 2},    // 16 -> 7 -> 3
      {3, 1, 1, 16, false, 4, 1},
      {1, 3, 3, 16, false, 1, 1},  // 3 -> 1
      {3, 1, 1, 32, false, 4, 1},
      {1, 1, 1, 32, false, 1, 1},
      {3, 1, 1, 32, false, 4, 1},
  };
  return c;
}

FrontendConfig FrontendConfig::Paper() {
  FrontendConfig c;
  c.height = c.width = 128;
  c.channels = 3;
  c.layers = {
      {1, 3, 3, 23, true, 1, 2},   {3, 1, 1, 64, false, 32, 1},
      {1, 3, 3, 64, true, 1, 1},   {3, 1, 1, 128, false, 32, 1},
      {1, 3, 3, 256, true, 1, 1},  {3, 1, 1, 256, false, 32, 1},
      {1, 3, 3, 921, false, 1, 1}, {3, 1, 1, 512, false, 32, 1},
      {1, 3, 3, 460, true, 1, 1},  {1, 1, 1, 512, false, 32, 1},
  };
  return c;
}

std::vector<std::pair<int64_t, int64_t>> FrontendConfig::SpatialTrace() const {
  std::vector<std::pair<int64_t, int64_t>> trace = {{height, width}};
  int64_t h = height, w = width;
  for (size_t i = 0; i < layers.size(); ++i) {
    const ConvLayerSpec &l = layers[i];
    if (h < l.kh || w < l.kw)
      throw Error(fmt::format("frontend layer {}: spatial extent {}x{} is "
                              "smaller than the {}x{} kernel",
                              i, h, w, l.kh, l.kw));
    h = (h - l.kh) / l.spatial_stride + 1;
    w = (w - l.kw) / l.spatial_stride + 1;
    if (l.spatial_pool) {
      if (h < 2 || w < 2)
        throw Error(fmt::format("frontend layer {}: cannot pool a {}x{} map", i,
                                h, w));
      h /= 2;
      w /= 2;
    }
    trace.emplace_back(h, w);
  }
  return trace;
}

void FrontendConfig::Validate() const {
  if (layers.empty()) throw Error("frontend has no layers");
  for (size_t i = 0; i < layers.size(); ++i) {
    const ConvLayerSpec &l = layers[i];
    const bool spatial = l.kt == 1, temporal = l.kh == 1 && l.kw == 1;
    if (!spatial && !temporal)
      throw Error(fmt::format("frontend layer {}: kernel [{}, {}, {}] is "
                              "neither spatial nor temporal",
                              i, l.kt, l.kh, l.kw));
    if (l.kt < 1 || l.kh < 1 || l.kw < 1 || l.kt % 2 == 0)
      throw Error(fmt::format("frontend layer {}: temporal kernel must be odd "
                              "and all extents positive",
                              i));
    if (l.norm_groups < 1 || l.out_channels % l.norm_groups != 0)
      throw Error(fmt::format("frontend layer {}: {} groups do not divide {} "
                              "channels",
                              i, l.norm_groups, l.out_channels));
    if (l.spatial_stride < 1)
      throw Error(fmt::format("frontend layer {}: bad stride", i));
  }
  auto last = SpatialTrace().back();
  if (last.first != 1 || last.second != 1)
    throw Error(fmt::format("frontend reduces {}x{} input to {}x{}, not 1x1",
                            height, width, last.first, last.second));
}

Tensor GroupNorm(const Tensor &x, int num_lead, int groups, const Tensor &gamma,
                 const Tensor &beta, double eps) {
  const Shape &s = x.shape();
  if (num_lead < 0 || num_lead >= x.rank())
    throw Error("group norm: bad number of leading axes");
  const int64_t c = s.back();
  if (groups < 1 || c % groups != 0)
    throw Error(fmt::format("group norm: {} groups do not divide {} channels",
                            groups, c));
  int64_t lead = 1, mid = 1;
  for (int i = 0; i < num_lead; ++i) lead *= s[i];
  for (int i = num_lead; i + 1 < x.rank(); ++i) mid *= s[i];
  const int64_t cg = c / groups;

  Tensor y;
  if (groups == 1 || mid == 1) {
    // Each group is already contiguous.
    y = Reshape(NormalizeLastDim(Reshape(x, {lead, groups, mid * cg}), eps), s);
  } else {
    std::vector<int64_t> fwd(lead * c * mid), back(lead * c * mid);
    int64_t k = 0;
    for (int64_t l = 0; l < lead; ++l)
      for (int64_t g = 0; g < groups; ++g)
        for (int64_t m = 0; m < mid; ++m)
          for (int64_t j = 0; j < cg; ++j, ++k) {
            const int64_t src = (l * mid + m) * c + g * cg + j;
            fwd[k] = src;
            back[src] = k;
          }
    Tensor grouped = Gather(x, {lead, groups, mid * cg}, std::move(fwd));
    y = Gather(NormalizeLastDim(grouped, eps), s, std::move(back));
  }
  return AddLastDim(MulLastDim(y, gamma), beta);
}

Tensor Im2Col(const Tensor &x, int kt, int kh, int kw, int stride) {
  if (x.rank() != 5) throw Error("im2col expects M x T x H x W x C input");
  const int64_t m = x.dim(0), t = x.dim(1), h = x.dim(2), w = x.dim(3),
                c = x.dim(4);
  if (h < kh || w < kw)
    throw Error(fmt::format("im2col: {}x{} map smaller than {}x{} kernel", h, w,
                            kh, kw));
  if (kt == 1 && kh == 1 && kw == 1 && stride == 1) return x;
  const int64_t ho = (h - kh) / stride + 1, wo = (w - kw) / stride + 1;
  const int64_t k = static_cast<int64_t>(kt) * kh * kw * c;
  const int pad = (kt - 1) / 2;
  std::vector<int64_t> idx(m * t * ho * wo * k);
  int64_t n = 0;
  for (int64_t mi = 0; mi < m; ++mi)
    for (int64_t ti = 0; ti < t; ++ti)
      for (int64_t yi = 0; yi < ho; ++yi)
        for (int64_t xi = 0; xi < wo; ++xi)
          for (int dt = 0; dt < kt; ++dt) {
            const int64_t ts = ti + dt - pad;
            const bool inside = ts >= 0 && ts < t;
            for (int dh = 0; dh < kh; ++dh)
              for (int dw = 0; dw < kw; ++dw) {
                const int64_t base =
                    (((mi * t + ts) * h + yi * stride + dh) * w + xi * stride +
                     dw) *
                    c;
                for (int64_t ci = 0; ci < c; ++ci)
                  idx[n++] = inside ? base + ci : -1;
              }
          }
  return Gather(x, {m, t, ho, wo, k}, std::move(idx));
}

Tensor MaxPool2x2(const Tensor &x) {
  const int64_t m = x.dim(0), t = x.dim(1), h = x.dim(2), w = x.dim(3),
                c = x.dim(4);
  const int64_t ho = h / 2, wo = w / 2;
  if (ho == 0 || wo == 0) throw Error("max pool: map smaller than 2x2");
  std::vector<int64_t> idx(m * t * ho * wo * c * 4);
  int64_t n = 0;
  for (int64_t mt = 0; mt < m * t; ++mt)
    for (int64_t yi = 0; yi < ho; ++yi)
      for (int64_t xi = 0; xi < wo; ++xi)
        for (int64_t ci = 0; ci < c; ++ci)
          for (int d = 0; d < 4; ++d)
            idx[n++] = ((mt * h + 2 * yi + d / 2) * w + 2 * xi + d % 2) * c + ci;
  return MaxLastDim(Gather(x, {m, t, ho, wo, c, 4}, std::move(idx)));
}

Tensor Conv2Plus1dForward(const Tensor &x, const ConvLayerSpec &spec,
                          int layer_index, const Tensor &kernel,
                          const Tensor &gamma, const Tensor &beta) {
  if (x.rank() != 5)
    throw Error(fmt::format("frontend layer {}: expected rank-5 input, got {}",
                            layer_index, ShapeString(x.shape())));
  if (x.dim(2) < spec.kh || x.dim(3) < spec.kw)
    throw Error(fmt::format("frontend layer {}: spatial extent {}x{} is smaller "
                            "than the {}x{} kernel",
                            layer_index, x.dim(2), x.dim(3), spec.kh, spec.kw));
  const int64_t k = static_cast<int64_t>(spec.kt) * spec.kh * spec.kw * x.dim(4);
  if (kernel.rank() != 2 || kernel.dim(0) != k ||
      kernel.dim(1) != spec.out_channels)
    throw Error(fmt::format("frontend layer {}: kernel shape {} does not match "
                            "[{}, {}]",
                            layer_index, ShapeString(kernel.shape()), k,
                            spec.out_channels));
  Tensor cols = Im2Col(x, spec.kt, spec.kh, spec.kw, spec.spatial_stride);
  Tensor y = Contract(cols, kernel, "mthwk,kc->mthwc");
  y = Relu(GroupNorm(y, 2, spec.norm_groups, gamma, beta));
  if (spec.spatial_pool) y = MaxPool2x2(y);
  return y;
}

std::string FrontendParamName(int layer, const char *what) {
  return fmt::format("frontend.L{}.{}", layer, what);
}

void InitFrontend(const FrontendConfig &config, uint64_t seed, DType dtype,
                  ParameterSet *params) {
  config.Validate();
  int64_t in_c = config.channels;
  for (size_t i = 0; i < config.layers.size(); ++i) {
    const ConvLayerSpec &l = config.layers[i];
    std::mt19937_64 rng(DeriveSeed(seed, {0xf0, i}));
    const int64_t fan_in = static_cast<int64_t>(l.kt) * l.kh * l.kw * in_c;
    params->Add(FrontendParamName(i, "kernel"),
                FanInUniform({fan_in, l.out_channels}, fan_in, rng, dtype));
    params->Add(FrontendParamName(i, "gn_scale"),
                Tensor::Full({l.out_channels}, 1.0, dtype));
    params->Add(FrontendParamName(i, "gn_shift"),
                Tensor::Zeros({l.out_channels}, dtype));
    in_c = l.out_channels;
  }
}

Tensor FrontendForward(const Tensor &video, const FrontendConfig &config,
                       const ParameterSet &params) {
  if (video.rank() != 5 || video.dim(2) != config.height ||
      video.dim(3) != config.width || video.dim(4) != config.channels)
    throw Error(fmt::format("frontend expects M x T x {} x {} x {} video, got {}",
                            config.height, config.width, config.channels,
                            ShapeString(video.shape())));
  Tensor x = video;
  for (size_t i = 0; i < config.layers.size(); ++i)
    x = Conv2Plus1dForward(x, config.layers[i], i,
                           params.Get(FrontendParamName(i, "kernel")),
                           params.Get(FrontendParamName(i, "gn_scale")),
                           params.Get(FrontendParamName(i, "gn_shift")));
  if (x.dim(2) != 1 || x.dim(3) != 1)
    throw Error(fmt::format("frontend output is {}x{} spatially, not 1x1",
                            x.dim(2), x.dim(3)));
  return Reshape(x, {x.dim(0), x.dim(1), x.dim(4)});
}

}  // namespace avmtl
