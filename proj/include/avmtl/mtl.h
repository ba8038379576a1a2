// avmtl/mtl.h

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


// Multi-task objective and training.
//
//   L_ASD = −(1/N) Σ_{b,t valid} log α[b,t,b],   N = Σ_b valid_len(b)
//   L     = γ·L_ASR + (1−γ)·L_ASD
//
// Training runs in two stages: a single-track stage (one matched track per
// item, γ = 1) that produces the initial checkpoint, then the multi-task
// stage over all B tracks of the batch.

#ifndef AVMTL_MTL_H_
#define AVMTL_MTL_H_

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "avmtl/model.h"
#include "avmtl/params.h"

namespace avmtl {

/// Cross entropy of the attention weights against the diagonal (item b
/// owns track b), over valid frames only.
Tensor AsdLoss(const Tensor &weights, const std::vector<int64_t> &valid_lengths);
/// The same quantity computed stably from the scores (log-softmax).
Tensor AsdLossFromScores(const Tensor &scores, const std::vector<int64_t> &valid_lengths);

Tensor MtlLoss(const Tensor &l_asr, const Tensor &l_asd, double gamma);

struct AdamOptions {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::map<std::string, std::vector<double>> m, v;
  int64_t step = 0;
};

/// One bias-corrected Adam update.  `grads` must hold an entry for every
/// parameter.  Parameters are rounded back to their dtype afterwards.
void AdamStep(ParameterSet *params, const std::map<std::string, Tensor> &grads,
              AdamState *state, const AdamOptions &options = {});

enum class Stage { kPretrainSingleTrack, kMtl };
const char *StageName(Stage stage);
Stage ParseStage(const std::string &name);

struct TrainConfig {
  Stage stage = Stage::kMtl;
  double gamma = 0.5;
  double lr = 2e-4;
  int64_t steps = 2000;
  int batch_size = 8;
  uint64_t seed = 0;
  DType dtype = DType::kFloat32;
  int min_u = 3;
  int max_u = 8;
  int log_every = 50;

  void Validate() const;
};

struct MetricsRecord {
  int64_t step = 0;
  double l_asr = 0.0;
  double l_asd = 0.0;
  double l = 0.0;
  /// Fraction of valid training frames whose top-scoring track is the
  /// item's own (multi-task stage only).
  double asd_accuracy = 0.0;
};

std::string MetricsJson(const MetricsRecord &record);

/// The B synthetic pairs of one training step.
std::vector<SyntheticPair> TrainingBatch(const ModelConfig &model, const TrainConfig &config,
                                         int64_t step);

struct StepResult {
  MetricsRecord metrics;
  std::map<std::string, Tensor> grads;
};

/// Forward and backward for one batch (no parameter update).
StepResult ComputeStep(const FeatureBatch &batch, const ModelConfig &model,
                       const ParameterSet &params, Stage stage, double gamma);

struct TrainResult {
  ParameterSet params;
  std::vector<MetricsRecord> log;
};

/// Deterministic in (model, config).  The single-track stage initializes
/// from config.seed and must not be given `init`; the multi-task stage
/// requires it.
TrainResult Train(const ModelConfig &model, const TrainConfig &config,
                  const ParameterSet *init,
                  const std::function<void(const MetricsRecord &)> &on_log = {});

}  // namespace avmtl

#endif  // AVMTL_MTL_H_
