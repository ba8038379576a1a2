// avmtl/attention.h

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


// Cross-modal attention over competing face tracks.  A small 1-D ConvNet maps
// acoustic features to queries; a bilinear form scores every (query, track)
// pair per time step, a softmax over tracks gives the attention weights and
// the fused visual feature is their convex combination.
//
//   S[b,t,m]  = Q[b,t,q] W[q,v] V[m,t,v]
//   α[b,t,:]  = softmax(S[b,t,:])
//   V'[b,t,v] = α[b,t,m] V[m,t,v]
//   I[b,t]    = argmax_m S[b,t,m]

#ifndef AVMTL_ATTENTION_H_
#define AVMTL_ATTENTION_H_

#include <cstdint>
#include <vector>

#include "avmtl/params.h"
#include "avmtl/tensor.h"

namespace avmtl {

struct QueryNetConfig {
  /// Output channels of each layer; the last entry is Dq.
  std::vector<int64_t> channels = {64, 64, 128, 128, 32};
  int kernel = 3;
  int norm_groups = 8;

  int64_t dq() const { return channels.back(); }
  /// Frames on each side that can influence one query.
  int64_t ReceptiveRadius() const {
    return static_cast<int64_t>(channels.size()) * (kernel - 1) / 2;
  }
  void Validate() const;
};

struct AttentionOutput {
  Tensor scores;   // B × T × M
  Tensor weights;  // B × T × M
  Tensor fused;    // B × T × Dv
};

/// Registers attention.query.L{i}.{kernel,bias[,gn_scale,gn_shift]} and
/// attention.W (Dq × Dv).
void InitAttention(const QueryNetConfig &config, int64_t da, int64_t dv,
                   uint64_t seed, DType dtype, ParameterSet *params);

/// Zero-padded ("SAME") temporal unfolding of B × T × D into
/// B × T × (kernel·D), ordered (dt, d).
Tensor TemporalIm2Col(const Tensor &x, int kernel);

/// B × T × Da → B × T × Dq.  Hidden layers are followed by group
/// normalization and ReLU; the output layer is linear.
Tensor ComputeQueries(const Tensor &acoustic, const QueryNetConfig &config,
                      const ParameterSet &params);

Tensor AttentionScores(const Tensor &q, const Tensor &v, const Tensor &w);
Tensor AttentionWeights(const Tensor &scores);
Tensor FuseVisual(const Tensor &weights, const Tensor &v);
/// Row-major B × T track indices; ties go to the lowest index.
std::vector<int64_t> SelectTrack(const Tensor &scores);

AttentionOutput Attend(const Tensor &acoustic, const Tensor &visual,
                       const QueryNetConfig &config, const ParameterSet &params);

}  // namespace avmtl

#endif  // AVMTL_ATTENTION_H_
