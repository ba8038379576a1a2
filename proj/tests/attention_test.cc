// tests/attention_test.cc

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

#include "avmtl/attention.h"
#include "avmtl/grad_check.h"
#include "avmtl/ops.h"
#include "test_util.h"

namespace avmtl {
namespace {

using testing::MaxAbsDiff;
using testing::RandomTensor;

QueryNetConfig SmallQueryNet() {
  QueryNetConfig c;
  c.channels = {8, 8, 16, 16, 5};
  c.norm_groups = 2;
  return c;
}

TEST_CASE("queries: zeros, length and receptive field") {
  QueryNetConfig c = SmallQueryNet();
  ParameterSet p;
  InitAttention(c, 6, 7, 1, DType::kFloat64, &p);
  Tensor zq = ComputeQueries(Tensor::Zeros({2, 9, 6}), c, p);
  for (double v : zq.data()) CHECK(v == 0.0);
  std::mt19937_64 rng(1);
  CHECK(ComputeQueries(RandomTensor({1, 512, 6}, rng), c, p).dim(1) == 512);

  CHECK(c.ReceptiveRadius() == 5);
  Tensor a = RandomTensor({1, 20, 6}, rng);
  Tensor base = ComputeQueries(a, c, p);
  const int64_t t = 8;
  for (int64_t tp = 0; tp < 20; ++tp) {
    Tensor b = a.Clone();
    for (int64_t d = 0; d < 6; ++d) b.mutable_data()[tp * 6 + d] += 0.5;
    Tensor q = ComputeQueries(b, c, p);
    const double diff = MaxAbsDiff(Select(q, 1, t), Select(base, 1, t));
    if (std::abs(tp - t) > 5) CHECK(diff == 0.0);
    else if (std::abs(tp - t) <= 1) CHECK(diff > 0.0);
  }
  CHECK_THROWS_AS(ComputeQueries(Tensor::Zeros({1, 4, 5}), c, p), Error);
}

TEST_CASE("bilinear scores") {
  std::mt19937_64 rng(2);
  SUBCASE("identity and unit vectors") {
    std::vector<double> eye(9, 0.0);
    eye[0] = eye[4] = eye[8] = 1.0;
    Tensor w({3, 3}, eye);
    Tensor e1({1, 1, 3}, {1.0, 0.0, 0.0});
    CHECK(AttentionScores(e1, e1, w).item() == 1.0);
  }
  SUBCASE("zero W") {
    Tensor s = AttentionScores(RandomTensor({2, 3, 4}, rng), RandomTensor({5, 3, 6}, rng),
                               Tensor::Zeros({4, 6}));
    for (double v : s.data()) CHECK(v == 0.0);
  }
  SUBCASE("quadruple loop oracle") {
    Tensor q = RandomTensor({2, 3, 5}, rng), v = RandomTensor({4, 3, 6}, rng),
           w = RandomTensor({5, 6}, rng);
    Tensor s = AttentionScores(q, v, w);
    REQUIRE(s.shape() == Shape{2, 3, 4});
    for (int64_t b = 0; b < 2; ++b)
      for (int64_t t = 0; t < 3; ++t)
        for (int64_t m = 0; m < 4; ++m) {
          double acc = 0;
          for (int64_t i = 0; i < 5; ++i)
            for (int64_t j = 0; j < 6; ++j)
              acc += q.at({b, t, i}) * w.at({i, j}) * v.at({m, t, j});
          CHECK(std::abs(s.at({b, t, m}) - acc) < 1e-12);
        }
  }
  CHECK_THROWS_AS(AttentionScores(Tensor::Zeros({1, 2, 3}), Tensor::Zeros({1, 2, 4}),
                                  Tensor::Zeros({3, 5})),
                  Error);
  CHECK_THROWS_AS(AttentionScores(Tensor::Zeros({1, 2, 3}), Tensor::Zeros({1, 3, 4}),
                                  Tensor::Zeros({3, 4})),
                  Error);
}

TEST_CASE("attention weights") {
  Tensor one = AttentionWeights(Tensor({2, 3, 1}, {0.3, -2, 5, 7, 1e3, -1e3}));
  for (double v : one.data()) CHECK(v == 1.0);
  Tensor w = AttentionWeights(Tensor({1, 1, 2}, {0.0, std::log(3.0)}));
  CHECK(w.at({0, 0, 0}) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(w.at({0, 0, 1}) == doctest::Approx(0.75).epsilon(1e-14));
  std::mt19937_64 rng(3);
  Tensor r = AttentionWeights(RandomTensor({3, 4, 6}, rng, 5.0));
  for (int64_t i = 0; i < 12; ++i) {
    double s = 0;
    for (int64_t m = 0; m < 6; ++m) s += r.data()[i * 6 + m];
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
}

TEST_CASE("fusion") {
  std::mt19937_64 rng(4);
  Tensor v = RandomTensor({3, 2, 4}, rng);
  SUBCASE("one-hot picks the track") {
    std::vector<double> a(2 * 2 * 3, 0.0);
    a[0 * 3 + 2] = a[1 * 3 + 2] = a[2 * 3 + 0] = a[3 * 3 + 1] = 1.0;
    Tensor f = FuseVisual(Tensor({2, 2, 3}, a), v);
    for (int64_t d = 0; d < 4; ++d) {
      CHECK(f.at({0, 0, d}) == v.at({2, 0, d}));
      CHECK(f.at({1, 1, d}) == v.at({1, 1, d}));
    }
  }
  SUBCASE("uniform over two tracks is the mean") {
    Tensor v2 = RandomTensor({2, 3, 4}, rng);
    Tensor f = FuseVisual(Tensor::Full({1, 3, 2}, 0.5), v2);
    for (int64_t t = 0; t < 3; ++t)
      for (int64_t d = 0; d < 4; ++d)
        CHECK(std::abs(f.at({0, t, d}) - 0.5 * (v2.at({0, t, d}) + v2.at({1, t, d}))) <
              1e-15);
  }
  SUBCASE("loop oracle and convexity") {
    Tensor a = AttentionWeights(RandomTensor({2, 2, 3}, rng, 3.0));
    Tensor f = FuseVisual(a, v);
    for (int64_t b = 0; b < 2; ++b)
      for (int64_t t = 0; t < 2; ++t)
        for (int64_t d = 0; d < 4; ++d) {
          double acc = 0, lo = 1e300, hi = -1e300;
          for (int64_t m = 0; m < 3; ++m) {
            acc += a.at({b, t, m}) * v.at({m, t, d});
            lo = std::min(lo, v.at({m, t, d}));
            hi = std::max(hi, v.at({m, t, d}));
          }
          CHECK(std::abs(f.at({b, t, d}) - acc) < 1e-12);
          CHECK(f.at({b, t, d}) >= lo - 1e-12);
          CHECK(f.at({b, t, d}) <= hi + 1e-12);
        }
  }
  CHECK_THROWS_AS(FuseVisual(Tensor::Zeros({1, 2, 2}), v), Error);
}

TEST_CASE("track selection") {
  CHECK(SelectTrack(Tensor({1, 1, 2}, {0.1, 0.9}))[0] == 1);
  CHECK(SelectTrack(Tensor({1, 1, 3}, {0.4, 0.4, 0.4}))[0] == 0);
  CHECK(SelectTrack(Tensor({1, 1, 3}, {0.1, 0.4, 0.4}))[0] == 1);
  std::mt19937_64 rng(5);
  Tensor s = RandomTensor({3, 5, 4}, rng);
  CHECK(SelectTrack(s) == SelectTrack(AttentionWeights(s)));
  CHECK(SelectTrack(s) == SelectTrack(AddScalar(s, 17.5)));
}

TEST_CASE("permutation equivariance over tracks") {
  QueryNetConfig c = SmallQueryNet();
  ParameterSet p;
  InitAttention(c, 6, 7, 2, DType::kFloat64, &p);
  std::mt19937_64 rng(6);
  Tensor a = RandomTensor({2, 5, 6}, rng), v = RandomTensor({4, 5, 7}, rng);
  const int perm[4] = {2, 0, 3, 1};
  Tensor pv = Stack({Select(v, 0, perm[0]), Select(v, 0, perm[1]), Select(v, 0, perm[2]),
                     Select(v, 0, perm[3])},
                    0);
  AttentionOutput o = Attend(a, v, c, p), po = Attend(a, pv, c, p);
  auto sel = SelectTrack(o.scores), psel = SelectTrack(po.scores);
  for (int64_t r = 0; r < 10; ++r) {
    for (int m = 0; m < 4; ++m) {
      CHECK(po.scores.data()[r * 4 + m] == o.scores.data()[r * 4 + perm[m]]);
      CHECK(po.weights.data()[r * 4 + m] == doctest::Approx(o.weights.data()[r * 4 + perm[m]]).epsilon(1e-14));
    }
    CHECK(perm[psel[r]] == sel[r]);
  }
  CHECK(MaxAbsDiff(po.fused, o.fused) < 1e-14);
}

TEST_CASE("a single track passes through unchanged") {
  QueryNetConfig c = SmallQueryNet();
  ParameterSet p;
  InitAttention(c, 6, 7, 3, DType::kFloat64, &p);
  std::mt19937_64 rng(7);
  Tensor v = RandomTensor({1, 5, 7}, rng);
  AttentionOutput o = Attend(RandomTensor({1, 5, 6}, rng), v, c, p);
  CHECK(MaxAbsDiff(o.fused, v) == 0.0);
}

TEST_CASE("gradient check through scores, softmax and fusion") {
  QueryNetConfig c = SmallQueryNet();
  ParameterSet p;
  std::mt19937_64 rng(8);
  InitAttention(c, 6, 7, 4, DType::kFloat64, &p);
  for (auto &[name, t] : p.map()) {
    Tensor &m = p.GetMutable(name);
    for (double &x : m.mutable_data()) x += 0.1 * std::uniform_real_distribution<>(-1, 1)(rng);
  }
  Tensor a = RandomTensor({2, 5, 6}, rng), v = RandomTensor({3, 5, 7}, rng);
  Tensor probe_f = RandomTensor({2, 5, 7}, rng), probe_s = RandomTensor({2, 5, 3}, rng);
  auto named = p.Named();
  named.push_back({"acoustic", a});
  named.push_back({"visual", v});
  auto report = GradCheck(
      [&] {
        AttentionOutput o = Attend(a, v, c, p);
        return Add(Sum(Mul(o.fused, probe_f)), Sum(Mul(Log(o.weights), probe_s)));
      },
      named);
  for (const auto &e : report.entries)
    if (e.max_rel_error > 1e-6) MESSAGE(e.name << " " << e.max_rel_error);
  CHECK(report.passed());
  MESSAGE("max rel error " << report.max_rel_error());
}

}  // namespace
}  // namespace avmtl
