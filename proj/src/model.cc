// src/model.cc

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


#include "avmtl/model.h"

#include <fmt/format.h>

#include "avmtl/ops.h"
#include "avmtl/random.h"

namespace avmtl {

void ModelConfig::Validate() const {
  frontend.Validate();
  query.Validate();
  encoder.Validate();
  decoder.Validate();
  if (frontend.height != synth.height || frontend.width != synth.width ||
      frontend.channels != synth.channels)
    throw Error(fmt::format("frontend input {}x{}x{} does not match synthetic "
                            "frames {}x{}x{}",
                            frontend.height, frontend.width, frontend.channels,
                            synth.height, synth.width, synth.channels));
  if (decoder.vocab_size != synth.vocab_size + 1)
    throw Error(fmt::format("decoder vocabulary {} must be synthetic vocabulary "
                            "{} plus blank",
                            decoder.vocab_size, synth.vocab_size));
}

ParameterSet InitModel(const ModelConfig &config, uint64_t seed, DType dtype) {
  config.Validate();
  ParameterSet params;
  InitFrontend(config.frontend, DeriveSeed(seed, {1}), dtype, &params);
  InitAttention(config.query, config.acoustic_dim(), config.frontend.dv(),
                DeriveSeed(seed, {2}), dtype, &params);
  InitEncoder(config.encoder, config.acoustic_dim() + config.frontend.dv(),
              DeriveSeed(seed, {3}), dtype, &params);
  InitPredictionNetwork(config.decoder, DeriveSeed(seed, {4}), dtype, &params);
  InitJoint(config.decoder, config.encoder.model_dim, DeriveSeed(seed, {5}), dtype,
            &params);
  return params;
}

std::vector<std::pair<std::string, Shape>> ModelParameterShapes(const ModelConfig &config) {
  ParameterSet p = InitModel(config, 0, DType::kFloat64);
  std::vector<std::pair<std::string, Shape>> out;
  for (const auto &[name, t] : p) out.emplace_back(name, t.shape());
  return out;
}

ModelOutputs ModelForward(const Tensor &acoustic, const Tensor &video,
                          const std::vector<int64_t> &t_lengths,
                          const ModelConfig &config, const ParameterSet &params,
                          VisualMode mode) {
  if (acoustic.rank() != 3 || video.rank() != 5 || acoustic.dim(1) != video.dim(1))
    throw Error(fmt::format("model: acoustic {} and video {} are not synchronized",
                            ShapeString(acoustic.shape()), ShapeString(video.shape())));
  ModelOutputs out;
  const int64_t b = acoustic.dim(0), t = acoustic.dim(1);
  if (mode == VisualMode::kZero) {
    out.fused = Tensor::Zeros({b, t, config.frontend.dv()}, acoustic.dtype());
  } else {
    out.visual = FrontendForward(video, config.frontend, params);
    if (mode == VisualMode::kAttention) {
      out.attention = Attend(acoustic, out.visual, config.query, params);
      out.fused = out.attention.fused;
    } else {
      if (video.dim(0) != b)
        throw Error(fmt::format("single-track mode needs one track per item, got "
                                "{} tracks for {} items",
                                video.dim(0), b));
      out.fused = out.visual;
    }
  }
  out.encoded = EncoderForward(ConcatFeatures(acoustic, out.fused), config.encoder,
                               params, t_lengths);
  return out;
}

Tensor ModelLattice(const ModelOutputs &outputs,
                    const std::vector<std::vector<int>> &targets,
                    const ModelConfig &config, const ParameterSet &params) {
  return JointLogProbs(outputs.encoded, PredictionForward(targets, config.decoder, params),
                       params);
}

}  // namespace avmtl
