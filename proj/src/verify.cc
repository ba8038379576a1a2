// verify.cc

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


#include "avmtl/verify.h"

#include <random>

#include "avmtl/mtl.h"
#include "avmtl/ops.h"
#include "avmtl/random.h"

namespace avmtl {

namespace {

Tensor Uniform(const Shape &shape, uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<double> v(NumElements(shape));
  for (double &x : v) x = u(rng);
  return Tensor(shape, std::move(v));
}

// Σ x ⊙ R with a fixed random R: a scalar whose gradient reaches every output.
Tensor Probe(const Tensor &x, uint64_t seed) { return Sum(Mul(x, Uniform(x.shape(), seed))); }

std::vector<NamedTensor> WithPrefix(const ParameterSet &p, const std::string &prefix) {
  std::vector<NamedTensor> out;
  for (const auto &[name, t] : p)
    if (name.rfind(prefix, 0) == 0) out.push_back({name, t});
  return out;
}

}  // namespace

const std::vector<std::string> &GradCheckModules() {
  static const std::vector<std::string> names = {
      "frontend", "attention", "encoder", "joint", "rnnt_loss", "asd_loss", "mtl"};
  return names;
}

std::vector<ModuleCheck> RunGradChecks(const ModelConfig &config, uint64_t seed,
                                       double tolerance, int max_coords) {
  ParameterSet p = InitModel(config, seed, DType::kFloat64);
  p.SetRequiresGrad(true);
  GradCheckOptions opts;
  opts.tolerance = tolerance;
  opts.max_coords = max_coords;
  opts.seed = seed;
  auto s = [&](uint64_t k) { return DeriveSeed(seed, {0x9c, k}); };
  const FrontendConfig &fe = config.frontend;
  const int64_t da = config.acoustic_dim(), dv = fe.dv();
  const int64_t d = config.encoder.model_dim, v = config.decoder.vocab_size;
  std::vector<std::vector<int>> y = {{1, std::min(3, static_cast<int>(v) - 1)}, {2}};
  std::vector<ModuleCheck> out;

  {
    Tensor video = Uniform({2, 4, fe.height, fe.width, fe.channels}, s(1));
    out.push_back({"frontend", GradCheck([&] { return Probe(FrontendForward(video, fe, p), s(2)); },
                                         WithPrefix(p, "frontend."), opts)});
  }
  {
    Tensor a = Uniform({2, 5, da}, s(3)), vis = Uniform({3, 5, dv}, s(4));
    auto named = WithPrefix(p, "attention.");
    named.push_back({"visual", vis});
    out.push_back({"attention", GradCheck(
                                    [&] {
                                      AttentionOutput o = Attend(a, vis, config.query, p);
                                      return Add(Probe(o.fused, s(5)), Probe(o.weights, s(6)));
                                    },
                                    named, opts)});
  }
  {
    Tensor f = Uniform({2, 6, da + dv}, s(7));
    auto named = WithPrefix(p, "encoder.");
    named.push_back({"features", f});
    out.push_back({"encoder", GradCheck(
                                  [&] {
                                    return Probe(EncoderForward(f, config.encoder, p, {6, 4}),
                                                 s(8));
                                  },
                                  named, opts)});
  }
  {
    Tensor enc = Uniform({2, 4, d}, s(9));
    auto named = WithPrefix(p, "joint.");
    for (auto &n : WithPrefix(p, "pred.")) named.push_back(n);
    named.push_back({"encoded", enc});
    out.push_back({"joint", GradCheck(
                                [&] {
                                  return Probe(JointLogProbs(
                                                   enc, PredictionForward(y, config.decoder, p), p),
                                               s(10));
                                },
                                named, opts)});
  }
  {
    Tensor logits = Uniform({2, 4, 3, v}, s(11), 2.0);
    out.push_back({"rnnt_loss", GradCheck(
                                    [&] {
                                      return RnntLoss(LogSoftmaxLastDim(logits), y, {4, 3},
                                                      {2, 1});
                                    },
                                    {{"logits", logits}}, opts)});
  }
  {
    Tensor scores = Uniform({3, 5, 3}, s(12), 2.0);
    out.push_back({"asd_loss", GradCheck(
                                   [&] { return AsdLoss(SoftmaxLastDim(scores), {5, 3, 2}); },
                                   {{"scores", scores}}, opts)});
  }
  {
    // Random unit-scale inputs: real log-mel magnitudes saturate the
    // untrained attention softmax and leave nothing measurable.
    Tensor a = Uniform({2, 5, da}, s(13));
    Tensor video = Uniform({2, 5, fe.height, fe.width, fe.channels}, s(14));
    const std::vector<int64_t> t_len = {5, 3}, u_len = {2, 1};
    GradCheckOptions few = opts;
    few.max_coords = std::max(1, max_coords / 4);
    out.push_back({"mtl", GradCheck(
                              [&] {
                                ModelOutputs o = ModelForward(a, video, t_len, config, p,
                                                              VisualMode::kAttention);
                                Tensor l_asr = RnntLoss(ModelLattice(o, y, config, p), y, t_len,
                                                        u_len);
                                Tensor l_asd = AsdLossFromScores(o.attention.scores, t_len);
                                return MtlLoss(l_asr, l_asd, 0.5);
                              },
                              p.Named(), few)});
  }
  return out;
}

}  // namespace avmtl
