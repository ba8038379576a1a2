// avmtl/frontend.h

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


// (2+1)D convolutional visual frontend.  Video is laid out channels-last,
// M × T × H × W × C.  Each layer is a convolution that is either purely
// spatial (1, k, k) or purely temporal (k, 1, 1), followed by group
// normalization, ReLU and an optional 2×2 max pool.  Spatial padding is VALID,
// temporal padding is SAME (zeros).

#ifndef AVMTL_FRONTEND_H_
#define AVMTL_FRONTEND_H_

#include <cstdint>
#include <string>
#include <vector>

#include "avmtl/params.h"
#include "avmtl/tensor.h"

namespace avmtl {

struct ConvLayerSpec {
  int kt = 1, kh = 1, kw = 1;
  int64_t out_channels = 1;
  bool spatial_pool = false;
  int norm_groups = 1;
  int spatial_stride = 1;
};

struct FrontendConfig {
  std::vector<ConvLayerSpec> layers;
  int64_t height = 16, width = 16, channels = 1;

  int64_t dv() const { return layers.empty() ? 0 : layers.back().out_channels; }

  /// Six-layer desk-scale network on 16×16×1 frames, Dv = 32.
  static FrontendConfig Toy();
  /// The ten-layer network on 128×128×3 frames, Dv = 512.
  static FrontendConfig Paper();

  /// Throws unless every layer is (2+1)D, groups divide channels and the
  /// spatial extent reduces to exactly 1×1.
  void Validate() const;
  /// Spatial extent (h, w) after every layer, starting with the input.
  std::vector<std::pair<int64_t, int64_t>> SpatialTrace() const;
};

/// Group normalization.  Axes [0, num_lead) are kept separate; statistics
/// are pooled over the remaining axes and the channels of each group (the
/// last axis).  gamma/beta are per channel.
Tensor GroupNorm(const Tensor &x, int num_lead, int groups, const Tensor &gamma,
                 const Tensor &beta, double eps = 1e-5);

/// Unfolds the (kt, kh, kw) neighbourhood of every output position into the
/// last axis: M × T × Ho × Wo × (kt·kh·kw·C), ordered (dt, dh, dw, c).
Tensor Im2Col(const Tensor &x, int kt, int kh, int kw, int stride);

/// 2×2 VALID max pooling over H, W; odd trailing rows/columns are dropped.
Tensor MaxPool2x2(const Tensor &x);

/// One layer.  `kernel` is (kt·kh·kw·C_in) × C_out in Im2Col order.
Tensor Conv2Plus1dForward(const Tensor &x, const ConvLayerSpec &spec,
                          int layer_index, const Tensor &kernel,
                          const Tensor &gamma, const Tensor &beta);

/// Registers frontend.L{i}.{kernel,gn_scale,gn_shift}.
void InitFrontend(const FrontendConfig &config, uint64_t seed, DType dtype,
                  ParameterSet *params);

/// M × T × H × W × C  →  M × T × Dv.
Tensor FrontendForward(const Tensor &video, const FrontendConfig &config,
                       const ParameterSet &params);

std::string FrontendParamName(int layer, const char *what);

}  // namespace avmtl

#endif  // AVMTL_FRONTEND_H_
