// avmtl/model.h

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


// The audio-visual model: visual frontend, cross-modal track attention, and
// the transducer ASR branch over the concatenated features.

#ifndef AVMTL_MODEL_H_
#define AVMTL_MODEL_H_

#include <cstdint>
#include <vector>

#include "avmtl/asr.h"
#include "avmtl/attention.h"
#include "avmtl/features.h"
#include "avmtl/frontend.h"
#include "avmtl/params.h"

namespace avmtl {

struct ModelConfig {
  LogMelOptions features;
  SynthOptions synth;
  FrontendConfig frontend = FrontendConfig::Toy();
  QueryNetConfig query;
  EncoderConfig encoder;
  DecoderConfig decoder;

  int64_t acoustic_dim() const { return features.feature_dim(); }
  void Validate() const;
};

/// How the fused visual feature V' is formed.
enum class VisualMode {
  kAttention,    // soft selection over all M tracks
  kSingleTrack,  // V'[b] = V[b]; requires M == B (one track per item)
  kZero,         // V' = 0 (audio-only)
};

struct ModelOutputs {
  Tensor visual;           // M × T × Dv
  AttentionOutput attention;  // undefined unless kAttention
  Tensor fused;            // B × T × Dv
  Tensor encoded;          // B × T × d
};

ParameterSet InitModel(const ModelConfig &config, uint64_t seed,
                       DType dtype = DType::kFloat32);

/// Expected (name, shape) of every parameter, in checkpoint order.
std::vector<std::pair<std::string, Shape>> ModelParameterShapes(const ModelConfig &config);

/// Frontend, attention (or bypass) and encoder.
ModelOutputs ModelForward(const Tensor &acoustic, const Tensor &video,
                          const std::vector<int64_t> &t_lengths,
                          const ModelConfig &config, const ParameterSet &params,
                          VisualMode mode);

/// Lattice for the batch targets on top of ModelForward's encoder output.
Tensor ModelLattice(const ModelOutputs &outputs,
                    const std::vector<std::vector<int>> &targets,
                    const ModelConfig &config, const ParameterSet &params);

}  // namespace avmtl

#endif  // AVMTL_MODEL_H_
