// tests/mtl_test.cc

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


#include <cmath>
#include <random>

#include "doctest.h"

#include "avmtl/checkpoint.h"
#include "avmtl/mtl.h"
#include "avmtl/ops.h"
#include "test_util.h"

namespace avmtl {
namespace {

using testing::RandomTensor;

TEST_CASE("ASD loss special cases") {
  SUBCASE("perfect detection") {
    std::vector<double> a(3 * 2 * 3, 0.0);
    for (int b = 0; b < 3; ++b)
      for (int t = 0; t < 2; ++t) a[(b * 2 + t) * 3 + b] = 1.0;
    CHECK(AsdLoss(Tensor({3, 2, 3}, a), {2, 2, 2}).item() == 0.0);
  }
  SUBCASE("uniform weights") {
    Tensor u = Tensor::Full({4, 5, 4}, 0.25);
    CHECK(AsdLoss(u, {5, 5, 5, 5}).item() == doctest::Approx(std::log(4.0)).epsilon(1e-14));
    CHECK(AsdLossFromScores(Tensor::Zeros({4, 5, 4}), {5, 3, 1, 2}).item() ==
          doctest::Approx(std::log(4.0)).epsilon(1e-14));
  }
  CHECK_THROWS_AS(AsdLoss(Tensor::Full({2, 3, 3}, 1.0 / 3), {3, 3}), Error);
  CHECK_THROWS_AS(AsdLoss(Tensor::Full({2, 3, 2}, 0.5), {3}), Error);
}

TEST_CASE("ASD loss against a direct sum with mixed lengths") {
  std::mt19937_64 rng(1);
  Tensor s = RandomTensor({3, 6, 3}, rng, 3.0);
  Tensor a = SoftmaxLastDim(s);
  std::vector<int64_t> len = {6, 2, 4};
  double total = 0;
  int n = 0;
  for (int64_t b = 0; b < 3; ++b)
    for (int64_t t = 0; t < len[b]; ++t, ++n) total -= std::log(a.at({b, t, b}));
  const double want = total / n;
  CHECK(std::abs(AsdLoss(a, len).item() - want) < 1e-12);
  CHECK(std::abs(AsdLossFromScores(s, len).item() - want) < 1e-12);
  CHECK(AsdLoss(a, len).item() >= 0.0);
  // Padded frames do not matter.
  Tensor s2 = s.Clone();
  s2.mutable_data()[(1 * 6 + 5) * 3 + 1] = 40.0;
  CHECK(AsdLossFromScores(s2, len).item() == AsdLossFromScores(s, len).item());
}

TEST_CASE("multi-task blend") {
  Tensor a = Tensor::Scalar(2.0), d = Tensor::Scalar(4.0);
  CHECK(MtlLoss(a, d, 1.0).item() == 2.0);
  CHECK(MtlLoss(a, d, 0.0).item() == 4.0);
  CHECK(MtlLoss(a, d, 0.5).item() == 3.0);
  CHECK_THROWS_AS(MtlLoss(a, d, 1.5), Error);
  CHECK_THROWS_AS(MtlLoss(a, d, -0.1), Error);
  // Affine in gamma: slope L_ASR − L_ASD.
  Tensor x = Tensor::Scalar(1.75), y = Tensor::Scalar(0.5);
  const double slope = MtlLoss(x, y, 1.0).item() - MtlLoss(x, y, 0.0).item();
  CHECK(slope == 1.25);
  CHECK(MtlLoss(x, y, 0.25).item() == doctest::Approx(0.5 + 0.25 * slope).epsilon(1e-15));
}

TEST_CASE("Adam") {
  SUBCASE("zero gradient") {
    ParameterSet p;
    p.Add("w", Tensor({3}, {1.0, -2.0, 0.5}));
    AdamState s;
    AdamStep(&p, {{"w", Tensor::Zeros({3})}}, &s);
    CHECK(s.step == 1);
    CHECK(p.Get("w").at({1}) == -2.0);
  }
  SUBCASE("first step moves by lr against the sign") {
    ParameterSet p;
    p.Add("w", Tensor({2}, {1.0, 1.0}));
    AdamState s;
    AdamStep(&p, {{"w", Tensor({2}, {3.0, -0.02})}}, &s);
    CHECK(p.Get("w").at({0}) == doctest::Approx(1.0 - 2e-4).epsilon(1e-9));
    CHECK(p.Get("w").at({1}) == doctest::Approx(1.0 + 2e-4).epsilon(1e-9));
  }
  SUBCASE("two steps on x^2 against a scalar reference") {
    ParameterSet p;
    p.Add("x", Tensor::Scalar(1.0));
    AdamState s;
    double x = 1.0, m = 0, v = 0;
    for (int t = 1; t <= 2; ++t) {
      const double g = 2 * p.Get("x").item();
      AdamStep(&p, {{"x", Tensor::Scalar(g)}}, &s);
      const double gr = 2 * x;
      m = 0.9 * m + 0.1 * gr;
      v = 0.999 * v + 0.001 * gr * gr;
      x -= 2e-4 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    }
    CHECK(std::abs(p.Get("x").item() - x) < 1e-12);
  }
  SUBCASE("missing gradient") {
    ParameterSet p;
    p.Add("a", Tensor::Scalar(1.0));
    p.Add("b", Tensor::Scalar(1.0));
    AdamState s;
    try {
      AdamStep(&p, {{"a", Tensor::Scalar(1.0)}}, &s);
      FAIL("expected an error");
    } catch (const Error &e) {
      CHECK(std::string(e.what()).find("'b'") != std::string::npos);
    }
  }
}

ModelConfig SmallModel() {
  ModelConfig m;
  m.query.channels = {16, 16, 16, 16, 8};
  m.query.norm_groups = 4;
  m.encoder.model_dim = 12;
  m.encoder.head_dim = 3;
  m.encoder.ff_dim = 16;
  m.decoder.lstm_units = 8;
  m.decoder.joint_dim = 8;
  return m;
}

FeatureBatch SmallBatch(const ModelConfig &m, uint64_t seed, int b) {
  std::vector<SyntheticPair> pairs;
  for (int i = 0; i < b; ++i) pairs.push_back(GenerateSyntheticPair(seed + i, 2 + i, m.synth));
  return AssembleBatch(pairs, 512, m.features);
}

TEST_CASE("blended gradient is the blend of the task gradients") {
  ModelConfig m = SmallModel();
  ParameterSet p = InitModel(m, 3, DType::kFloat64);
  p.SetRequiresGrad(true);
  FeatureBatch batch = SmallBatch(m, 10, 3);
  StepResult asr = ComputeStep(batch, m, p, Stage::kMtl, 1.0);
  StepResult asd = ComputeStep(batch, m, p, Stage::kMtl, 0.0);
  StepResult mix = ComputeStep(batch, m, p, Stage::kMtl, 0.3);
  CHECK(mix.metrics.l == doctest::Approx(0.3 * asr.metrics.l_asr + 0.7 * asd.metrics.l_asd)
                             .epsilon(1e-14));
  double worst = 0;
  for (const auto &[name, g] : mix.grads) {
    auto ga = asr.grads.at(name).data(), gd = asd.grads.at(name).data();
    for (int64_t i = 0; i < g.numel(); ++i)
      worst = std::max(worst, std::abs(g.data()[i] - (0.3 * ga[i] + 0.7 * gd[i])));
  }
  CHECK(worst < 1e-10);
  // Pure ASD training leaves the ASR-only parameters without gradient.
  for (double v : asd.grads.at("joint.out").data()) CHECK(v == 0.0);
}

TEST_CASE("training contract") {
  ModelConfig m = SmallModel();
  TrainConfig c;
  c.batch_size = 2;
  c.steps = 3;
  c.log_every = 1;
  c.min_u = 2;
  c.max_u = 3;
  ParameterSet init = InitModel(m, 5, DType::kFloat32);

  SUBCASE("zero steps returns the init checkpoint") {
    c.steps = 0;
    TrainResult r = Train(m, c, &init);
    CHECK(SerializeCheckpoint(r.params) == SerializeCheckpoint(init));
  }
  SUBCASE("bit-identical reruns") {
    TrainResult a = Train(m, c, &init), b = Train(m, c, &init);
    CHECK(SerializeCheckpoint(a.params) == SerializeCheckpoint(b.params));
    CHECK(SerializeCheckpoint(a.params) != SerializeCheckpoint(init));
    REQUIRE(a.log.size() == 3);
    for (size_t i = 0; i < 3; ++i) CHECK(MetricsJson(a.log[i]) == MetricsJson(b.log[i]));
  }
  SUBCASE("stage preconditions") {
    c.stage = Stage::kPretrainSingleTrack;
    CHECK_THROWS_AS(Train(m, c, &init), Error);
    CHECK_NOTHROW(Train(m, c, nullptr));
    c.stage = Stage::kMtl;
    CHECK_THROWS_AS(Train(m, c, nullptr), Error);
    ParameterSet wrong = InitModel(ModelConfig{}, 5, DType::kFloat32);
    try {
      Train(m, c, &wrong);
      FAIL("expected an error");
    } catch (const CheckpointError &e) {
      CHECK(std::string(e.what()).find("attention.query.L0.kernel") != std::string::npos);
    }
  }
  SUBCASE("finite losses across the gamma sweep") {
    for (double g : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      c.gamma = g;
      for (const auto &rec : Train(m, c, &init).log) {
        CHECK(std::isfinite(rec.l));
        CHECK(std::isfinite(rec.l_asr));
        CHECK(std::isfinite(rec.l_asd));
      }
    }
  }
  c.gamma = 1.5;
  CHECK_THROWS_AS(Train(m, c, &init), Error);
}

TEST_CASE("metrics lines") {
  MetricsRecord r;
  r.step = 50;
  r.l_asr = 1.5;
  r.l_asd = 0.25;
  r.l = 0.875;
  CHECK(MetricsJson(r) == R"({"step": 50, "l_asr": 1.5, "l_asd": 0.25, "l": 0.875})");
}

}  // namespace
}  // namespace avmtl
