// tests/eval_test.cc

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


#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <regex>
#include <set>

#include "doctest.h"

#include "avmtl/eval.h"
#include "avmtl/random.h"

namespace avmtl {
namespace {

TEST_CASE("noise level tokens") {
  CHECK_FALSE(ParseNoiseLevel("clean").has_value());
  CHECK(*ParseNoiseLevel("10") == 10.0);
  CHECK(*ParseNoiseLevel("0") == 0.0);
  CHECK(NoiseLevelName(20.0) == "20");
  CHECK(NoiseLevelName(std::nullopt) == "clean");
  CHECK_THROWS_AS(ParseNoiseLevel("5"), Error);
  CHECK_THROWS_AS(ParseNoiseLevel("loud"), Error);
}

TEST_CASE("evaluation set construction") {
  SUBCASE("single track") {
    MultiTrackEvalSet s = BuildEvalSet(20, 1, std::nullopt, 3);
    REQUIRE(s.items.size() == 20);
    for (const EvalItem &it : s.items) {
      CHECK(it.true_track_pos == 0);
      CHECK(it.distractor_ids.empty());
    }
  }
  SUBCASE("deterministic and well formed") {
    MultiTrackEvalSet a = BuildEvalSet(50, 8, 10.0, 4), b = BuildEvalSet(50, 8, 10.0, 4);
    for (size_t i = 0; i < a.items.size(); ++i) {
      CHECK(a.items[i].true_track_pos == b.items[i].true_track_pos);
      CHECK(a.items[i].distractor_ids == b.items[i].distractor_ids);
      std::set<int64_t> d(a.items[i].distractor_ids.begin(), a.items[i].distractor_ids.end());
      CHECK(d.size() == 7);
      CHECK(d.count(static_cast<int64_t>(i)) == 0);
      CHECK(*d.begin() >= 0);
      CHECK(*d.rbegin() < 50);
    }
  }
  SUBCASE("all other items are reachable as distractors") {
    MultiTrackEvalSet s = BuildEvalSet(5, 5, std::nullopt, 0);
    for (size_t i = 0; i < 5; ++i) CHECK(s.items[i].distractor_ids.size() == 4);
  }
  SUBCASE("uniform true positions") {
    MultiTrackEvalSet s = BuildEvalSet(1000, 4, std::nullopt, 11);
    std::vector<double> counts(4, 0.0);
    for (const EvalItem &it : s.items) counts[it.true_track_pos] += 1;
    double chi2 = 0;
    for (double c : counts) chi2 += (c - 250.0) * (c - 250.0) / 250.0;
    // 99th percentile of chi-square with 3 degrees of freedom.
    CHECK(chi2 < 11.345);
  }
  CHECK_THROWS_AS(BuildEvalSet(3, 4, std::nullopt, 0), Error);
}

TEST_CASE("evaluation manifest") {
  const auto path = std::filesystem::temp_directory_path() / "avmtl_eval_manifest.jsonl";
  std::vector<ManifestItem> base = MakeBaseManifest(6, 1, 3, 8);
  WriteEvalManifest(path.string(), BuildEvalSet(6, 2, 20.0, 1), base);
  std::ifstream in(path);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    CHECK(std::regex_match(line, std::regex(R"(\{"id":"item-\d{6}","true_track_pos":[01],)"
                                            R"("distractor_ids":\["item-\d{6}"\],"snr_db":20\.0\})")));
  }
  CHECK(n == 6);
  std::filesystem::remove(path);
}

TEST_CASE("frame-level accuracy") {
  CHECK(AsdAccuracy({{1, 1}, {0}}, {1, 0}) == 1.0);
  CHECK(AsdAccuracy({{0, 0, 0, 0}}, {0}) == 1.0);
  CHECK(AsdAccuracy({{2, 2, 1, 2}, {0, 3, 3, 3}}, {2, 3}) == 0.75);
  CHECK_THROWS_AS(AsdAccuracy({}, {}), Error);
  CHECK_THROWS_AS(AsdAccuracy({{}}, {0}), Error);
}

// Breadth-first search over single-symbol edits; strings never need to grow
// beyond the longer of the two to realize an optimal script.
int64_t EditScriptDistance(const std::vector<int> &from, const std::vector<int> &to) {
  const size_t cap = std::max(from.size(), to.size());
  std::map<std::vector<int>, int64_t> seen{{from, 0}};
  std::deque<std::vector<int>> queue{from};
  while (!queue.empty()) {
    std::vector<int> s = queue.front();
    queue.pop_front();
    const int64_t d = seen[s];
    if (s == to) return d;
    std::vector<std::vector<int>> next;
    for (size_t i = 0; i < s.size(); ++i) {
      std::vector<int> del = s;
      del.erase(del.begin() + i);
      next.push_back(del);
      for (int a = 1; a <= 3; ++a) {
        std::vector<int> sub = s;
        sub[i] = a;
        next.push_back(sub);
      }
    }
    if (s.size() < cap)
      for (size_t i = 0; i <= s.size(); ++i)
        for (int a = 1; a <= 3; ++a) {
          std::vector<int> ins = s;
          ins.insert(ins.begin() + i, a);
          next.push_back(ins);
        }
    for (auto &n : next)
      if (seen.emplace(n, d + 1).second) queue.push_back(std::move(n));
  }
  return -1;
}

TEST_CASE("token error rate") {
  CHECK(ErrorRate({{1, 2, 3}}, {{1, 2, 3}}) == 0.0);
  CHECK(ErrorRate({{1, 9, 3}}, {{1, 2, 3}}) == doctest::Approx(1.0 / 3).epsilon(1e-15));
  CHECK(ErrorRate({{}, {1, 2}}, {{1, 2}, {1, 2}}) == 0.5);
  CHECK(EditDistance({1, 2, 3, 4}, {}) == 4);
  CHECK_THROWS_AS(ErrorRate({{1}}, {{}}), Error);
  CHECK_THROWS_AS(ErrorRate({}, {}), Error);

  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> len(0, 6), sym(1, 3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> a(len(rng)), b(len(rng));
    for (int &x : a) x = sym(rng);
    for (int &x : b) x = sym(rng);
    const int64_t d = EditDistance(a, b);
    CHECK(d == EditScriptDistance(a, b));
    CHECK(d == EditDistance(b, a));
    CHECK((d == 0) == (a == b));
  }
}

EvalRecord Rec(std::string noise, int tracks, double gamma, std::optional<double> acc,
               std::optional<double> wer) {
  return {"synth", std::move(noise), tracks, gamma, acc, wer};
}

TEST_CASE("report CSV") {
  CHECK(ReportCsv({Rec("clean", 4, 0.5, 0.8125, 0.25)}) ==
        "dataset,noise_db,tracks,gamma,acc,wer\nsynth,clean,4,0.5,0.8125,0.25\n");
  CHECK(ReportCsv({Rec("0", 2, 0.0, 0.5, std::nullopt)}) ==
        "dataset,noise_db,tracks,gamma,acc,wer\nsynth,0,2,0,0.5,\n");

  std::vector<EvalRecord> recs;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::string noise : {"0", "10", "clean", "20"})
    for (int n : {8, 1, 4})
      for (double g : {1.0, 0.25, 0.0})
        recs.push_back(Rec(noise, n, g, u(rng), g == 0.0 ? std::nullopt
                                                          : std::optional<double>(u(rng))));
  const std::string csv = ReportCsv(recs);
  std::vector<EvalRecord> back = ParseReportCsv(csv);
  REQUIRE(back.size() == recs.size());
  SortRecords(&recs);
  for (size_t i = 0; i < recs.size(); ++i) {
    CHECK(back[i].dataset == recs[i].dataset);
    CHECK(back[i].noise_db == recs[i].noise_db);
    CHECK(back[i].tracks == recs[i].tracks);
    CHECK(back[i].gamma == recs[i].gamma);
    CHECK(back[i].acc == recs[i].acc);
    CHECK(back[i].wer == recs[i].wer);
  }
  CHECK(ReportCsv(back) == csv);
  // Table order: noise clean → 0 dB, then tracks, then gamma.
  CHECK(back.front().noise_db == "clean");
  CHECK(back.front().tracks == 1);
  CHECK(back.front().gamma == 0.0);
  CHECK(back.back().noise_db == "0");
  CHECK_THROWS_AS(ParseReportCsv("a,b\n"), Error);
  CHECK_THROWS_AS(ParseReportCsv("dataset,noise_db,tracks,gamma,acc,wer\nx,5,1,1,1,\n"),
                  Error);
}

TEST_CASE("summary lines") {
  std::vector<EvalRecord> recs;
  for (int n : {2, 4})
    for (double g : {0.5, 1.0}) recs.push_back(Rec("clean", n, g, g == 1.0 ? 0.4 : 0.5, 0.1));
  const std::string s = ReportSummary(recs);
  int cells = 0;
  std::smatch m;
  std::string rest = s;
  const std::regex rel(R"(gamma=0\.5 acc=0\.5000 vs_gamma1=\+(\d+\.\d\d)%)");
  for (std::string::size_type p = 0; (p = s.find("cell ", p)) != std::string::npos; ++p)
    ++cells;
  CHECK(cells == 2);
  REQUIRE(std::regex_search(rest, m, rel));
  CHECK(std::stod(m[1]) == doctest::Approx(25.0).epsilon(1e-6));
  CHECK(s.find("average dataset=synth noise=clean gamma=0.5: vs_gamma1=+25.00% "
               "vs_gamma0=n/a") != std::string::npos);
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

TEST_CASE("evaluation of an untrained model") {
  const ModelConfig m = SmallModel();
  const ParameterSet p = InitModel(m, 2);
  EvalCorpus corpus(MakeBaseManifest(500, 3, 3, 6), m);
  EvalOptions o;
  o.gamma = 0.5;
  o.decode = false;

  SUBCASE("chance accuracy with four tracks") {
    EvalRecord r = EvaluateSet(p, m, corpus, BuildEvalSet(500, 4, std::nullopt, 1), o);
    CHECK(std::abs(*r.acc - 0.25) <= 0.05);
    CHECK_FALSE(r.wer.has_value());
  }
  SUBCASE("one track is always right") {
    EvalRecord r = EvaluateSet(p, m, corpus, BuildEvalSet(500, 1, 0.0, 1), o);
    CHECK(*r.acc == 1.0);
    CHECK(r.noise_db == "0");
  }
}

TEST_CASE("evaluation contract") {
  const ModelConfig m = SmallModel();
  const ParameterSet p = InitModel(m, 2);
  EvalCorpus corpus(MakeBaseManifest(24, 3, 3, 6), m);
  std::vector<MultiTrackEvalSet> sets = {BuildEvalSet(24, 4, std::nullopt, 5),
                                         BuildEvalSet(24, 2, 10.0, 5)};
  EvalOptions o;
  o.gamma = 0.75;

  std::vector<EvalRecord> a = Evaluate(p, m, corpus, sets, {{"clean", 4}, {"10", 2}}, o);
  REQUIRE(a.size() == 2);
  CHECK(a[0].wer.has_value());
  CHECK(a[1].tracks == 2);
  CHECK_THROWS_AS(Evaluate(p, m, corpus, sets, {{"20", 4}}, o), Error);

  SUBCASE("repeatable, also across worker counts") {
    o.threads = 3;
    CHECK(ReportCsv(Evaluate(p, m, corpus, sets, {{"clean", 4}, {"10", 2}}, o)) ==
          ReportCsv(a));
  }
  SUBCASE("pure detection rows carry no error rate") {
    o.gamma = 0.0;
    CHECK_FALSE(EvaluateSet(p, m, corpus, sets[0], o).wer.has_value());
  }
  SUBCASE("baselines") {
    o.variant = EvalVariant::kOneTrack;
    EvalRecord one = EvaluateSet(p, m, corpus, sets[0], o);
    CHECK(one.tracks == 1);
    CHECK(*one.acc == 1.0);
    o.variant = EvalVariant::kAudioOnly;
    EvalRecord audio = EvaluateSet(p, m, corpus, sets[0], o);
    CHECK_FALSE(audio.acc.has_value());
    CHECK(audio.wer.has_value());
  }
  SUBCASE("distractor identities do not matter") {
    MultiTrackEvalSet shuffled = sets[0];
    for (EvalItem &it : shuffled.items)
      std::reverse(it.distractor_ids.begin(), it.distractor_ids.end());
    o.decode = false;
    CHECK(*EvaluateSet(p, m, corpus, shuffled, o).acc ==
          *EvaluateSet(p, m, corpus, sets[0], o).acc);
  }
}

}  // namespace
}  // namespace avmtl
