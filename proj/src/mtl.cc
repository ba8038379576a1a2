// src/mtl.cc

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


#include "avmtl/mtl.h"

#include <cmath>

#include <fmt/format.h>

#include "avmtl/autodiff.h"
#include "avmtl/checkpoint.h"
#include "avmtl/ops.h"
#include "avmtl/random.h"

namespace avmtl {

namespace {

// Flat indices of (b, t, b) for every valid frame of a B × T × B tensor.
std::vector<int64_t> DiagonalIndices(const Tensor &x,
                                     const std::vector<int64_t> &valid_lengths) {
  if (x.rank() != 3)
    throw Error("ASD loss expects B x T x M attention, got " + ShapeString(x.shape()));
  const int64_t b = x.dim(0), t = x.dim(1), m = x.dim(2);
  if (m != b)
    throw Error(fmt::format("ASD loss needs one track per item (M == B), got M = {}, "
                            "B = {}",
                            m, b));
  if (static_cast<int64_t>(valid_lengths.size()) != b)
    throw Error("ASD loss: one valid length per item required");
  std::vector<int64_t> idx;
  for (int64_t bi = 0; bi < b; ++bi) {
    if (valid_lengths[bi] < 0 || valid_lengths[bi] > t)
      throw Error(fmt::format("ASD loss: valid length {} outside [0, {}]",
                              valid_lengths[bi], t));
    for (int64_t ti = 0; ti < valid_lengths[bi]; ++ti)
      idx.push_back((bi * t + ti) * m + bi);
  }
  if (idx.empty()) throw Error("ASD loss: no valid frames");
  return idx;
}

}  // namespace

Tensor AsdLoss(const Tensor &weights, const std::vector<int64_t> &valid_lengths) {
  std::vector<int64_t> idx = DiagonalIndices(weights, valid_lengths);
  const int64_t n = static_cast<int64_t>(idx.size());
  return Scale(Sum(Log(Gather(weights, {n}, std::move(idx)))), -1.0 / n);
}

Tensor AsdLossFromScores(const Tensor &scores, const std::vector<int64_t> &valid_lengths) {
  std::vector<int64_t> idx = DiagonalIndices(scores, valid_lengths);
  const int64_t n = static_cast<int64_t>(idx.size());
  return Scale(Sum(Gather(LogSoftmaxLastDim(scores), {n}, std::move(idx))), -1.0 / n);
}

Tensor MtlLoss(const Tensor &l_asr, const Tensor &l_asd, double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0))
    throw Error(fmt::format("gamma must lie in [0, 1], got {}", gamma));
  return Add(Scale(l_asr, gamma), Scale(l_asd, 1.0 - gamma));
}

void AdamStep(ParameterSet *params, const std::map<std::string, Tensor> &grads,
              AdamState *state, const AdamOptions &options) {
  for (const auto &[name, t] : *params)
    if (!grads.count(name)) throw Error("Adam: no gradient for parameter '" + name + "'");
  state->step += 1;
  const double c1 = 1.0 - std::pow(options.beta1, static_cast<double>(state->step));
  const double c2 = 1.0 - std::pow(options.beta2, static_cast<double>(state->step));
  for (const auto &[name, unused] : *params) {
    Tensor &p = params->GetMutable(name);
    const Tensor &g = grads.at(name);
    if (g.numel() != p.numel())
      throw Error(fmt::format("Adam: gradient for '{}' has {} entries, parameter {}",
                              name, g.numel(), p.numel()));
    auto &m = state->m[name];
    auto &v = state->v[name];
    if (m.empty()) {
      m.assign(p.numel(), 0.0);
      v.assign(p.numel(), 0.0);
    }
    auto pv = p.mutable_data();
    auto gv = g.data();
    for (int64_t i = 0; i < p.numel(); ++i) {
      m[i] = options.beta1 * m[i] + (1.0 - options.beta1) * gv[i];
      v[i] = options.beta2 * v[i] + (1.0 - options.beta2) * gv[i] * gv[i];
      const double m_hat = m[i] / c1, v_hat = v[i] / c2;
      pv[i] -= options.lr * m_hat / (std::sqrt(v_hat) + options.eps);
    }
    p.RoundToDType();
  }
}

const char *StageName(Stage stage) {
  return stage == Stage::kPretrainSingleTrack ? "pretrain_single_track" : "mtl";
}

Stage ParseStage(const std::string &name) {
  if (name == "pretrain_single_track" || name == "pretrain")
    return Stage::kPretrainSingleTrack;
  if (name == "mtl") return Stage::kMtl;
  throw Error("unknown training stage '" + name + "' (pretrain_single_track or mtl)");
}

void TrainConfig::Validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0))
    throw Error(fmt::format("gamma must lie in [0, 1], got {}", gamma));
  if (!(lr > 0.0)) throw Error("learning rate must be positive");
  if (steps < 0) throw Error("steps must be non-negative");
  if (batch_size < 1) throw Error("batch size must be positive");
  if (min_u < 1 || max_u < min_u) throw Error("need 1 <= min_u <= max_u");
  if (log_every < 1) throw Error("log interval must be positive");
}

std::string MetricsJson(const MetricsRecord &r) {
  return fmt::format("{{\"step\": {}, \"l_asr\": {}, \"l_asd\": {}, \"l\": {}}}",
                     r.step, r.l_asr, r.l_asd, r.l);
}

std::vector<SyntheticPair> TrainingBatch(const ModelConfig &model, const TrainConfig &config,
                                         int64_t step) {
  std::vector<SyntheticPair> pairs;
  for (int b = 0; b < config.batch_size; ++b) {
    const uint64_t s = DeriveSeed(config.seed, {0x7a, static_cast<uint64_t>(config.stage),
                                                static_cast<uint64_t>(step),
                                                static_cast<uint64_t>(b)});
    const int u = config.min_u + static_cast<int>(s % (config.max_u - config.min_u + 1));
    pairs.push_back(GenerateSyntheticPair(s, u, model.synth));
  }
  return pairs;
}

StepResult ComputeStep(const FeatureBatch &batch, const ModelConfig &model,
                       const ParameterSet &params, Stage stage, double gamma) {
  const bool single = stage == Stage::kPretrainSingleTrack;
  if (single) gamma = 1.0;
  StepResult result;
  Tape tape;
  Tensor loss;
  {
    TapeScope scope(&tape);
    ModelOutputs out = ModelForward(batch.acoustic, batch.video, batch.t_lengths, model,
                                    params,
                                    single ? VisualMode::kSingleTrack : VisualMode::kAttention);
    // A branch with zero weight is evaluated for the log but not recorded.
    Tensor l_asr, l_asd;
    {
      std::optional<NoGradScope> off;
      if (gamma == 0.0) off.emplace();
      l_asr = RnntLoss(ModelLattice(out, batch.targets, model, params), batch.targets,
                       batch.t_lengths, batch.u_lengths);
    }
    if (single) {
      l_asd = Tensor::Scalar(0.0, l_asr.dtype());
    } else {
      std::optional<NoGradScope> off;
      if (gamma == 1.0) off.emplace();
      l_asd = AsdLossFromScores(out.attention.scores, batch.t_lengths);
      auto sel = SelectTrack(out.attention.scores);
      int64_t hits = 0, total = 0;
      const int64_t t = batch.max_frames();
      for (int64_t b = 0; b < batch.batch_size(); ++b)
        for (int64_t ti = 0; ti < batch.t_lengths[b]; ++ti, ++total)
          hits += sel[b * t + ti] == batch.true_track[b];
      result.metrics.asd_accuracy = static_cast<double>(hits) / total;
    }
    loss = MtlLoss(l_asr, l_asd, gamma);
    result.metrics.l_asr = l_asr.item();
    result.metrics.l_asd = l_asd.item();
    result.metrics.l = loss.item();
  }
  if (!std::isfinite(result.metrics.l))
    throw Error(fmt::format("training loss is not finite ({})", result.metrics.l));
  GradientMap grads = loss.requires_grad() ? tape.Backward(loss) : GradientMap();
  for (const auto &[name, p] : params) result.grads.emplace(name, grads.Get(p));
  return result;
}

TrainResult Train(const ModelConfig &model, const TrainConfig &config,
                  const ParameterSet *init,
                  const std::function<void(const MetricsRecord &)> &on_log) {
  config.Validate();
  model.Validate();
  TrainResult result;
  if (config.stage == Stage::kPretrainSingleTrack) {
    if (init) throw Error("the single-track stage starts from scratch; no init expected");
    result.params = InitModel(model, DeriveSeed(config.seed, {0x1417}), config.dtype);
  } else {
    if (!init) throw Error("the multi-task stage requires an init checkpoint");
    CheckCompatible(InitModel(model, 0, config.dtype), *init);
    result.params = init->Clone();
  }
  ParameterSet &params = result.params;
  params.SetRequiresGrad(true);
  AdamState adam;
  AdamOptions opts;
  opts.lr = config.lr;
  for (int64_t step = 0; step < config.steps; ++step) {
    FeatureBatch batch =
        AssembleBatch(TrainingBatch(model, config, step), 512, model.features);
    const DType dt = params.begin()->second.dtype();
    batch.acoustic = batch.acoustic.Cast(dt);
    batch.video = batch.video.Cast(dt);
    StepResult r = ComputeStep(batch, model, params, config.stage, config.gamma);
    AdamStep(&params, r.grads, &adam, opts);
    if ((step + 1) % config.log_every == 0 || step + 1 == config.steps) {
      r.metrics.step = step + 1;
      result.log.push_back(r.metrics);
      if (on_log) on_log(r.metrics);
    }
  }
  params.SetRequiresGrad(false);
  return result;
}

}  // namespace avmtl
