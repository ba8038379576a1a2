// tests/commands_test.cc

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
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>

#include "doctest.h"

#include "avmtl/autodiff.h"
#include "avmtl/commands.h"
#include "avmtl/eval.h"
#include "avmtl/features.h"

namespace fs = std::filesystem;

namespace avmtl {
namespace {

std::string Slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int Lines(const std::string &s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

// A fresh scratch directory per test case.
struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string &name)
      : dir(fs::temp_directory_path() / ("avmtl_cmd_" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  std::string operator/(const std::string &leaf) const { return (dir / leaf).string(); }
};

int RunCli(const std::string &args) {
  const int status = std::system((std::string(AVMTL_CLI) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST_CASE("gen-data") {
  Scratch s("gen");
  std::ostringstream log;
  CmdGenData({"", s / "a", 10, 5, 2, 4, false}, log);
  CmdGenData({"", s / "b", 10, 5, 2, 4, false}, log);
  const std::string manifest = Slurp(s / "a/manifest.jsonl");
  CHECK(Lines(manifest) == 10);
  CHECK(manifest == Slurp(s / "b/manifest.jsonl"));
  CHECK(fs::exists(s / "a/config.json"));
  for (const ManifestItem &item : ReadManifest(s / "a/manifest.jsonl")) {
    // U tokens of 90 ms each at 16 kHz.
    const AudioClip clip = ReadPcm(s / ("a/audio/" + item.id + ".pcm"));
    CHECK(clip.samples.size() == static_cast<size_t>(item.u) * 1440);
    CHECK(fs::file_size(s / ("a/video/" + item.id + ".f32")) ==
          static_cast<uintmax_t>(item.u) * 3 * 16 * 16 * 4);
    CHECK(item.u >= 2);
    CHECK(item.u <= 4);
  }
  CHECK_THROWS_AS(CmdGenData({"", s / "a", 10, 5, 2, 4, false}, log), Error);
  CHECK_NOTHROW(CmdGenData({"", s / "a", 3, 5, 2, 4, true}, log));
  CHECK(Lines(Slurp(s / "a/manifest.jsonl")) == 3);
  CHECK_THROWS_AS(CmdGenData({"", s / "c", 3, 5, 4, 2, false}, log), UsageError);
}

TEST_CASE("train, eval and report") {
  Scratch s("pipeline");
  std::ostringstream log;
  CmdGenData({"", s / "data", 12, 1, 3, 5, false}, log);

  TrainOptions pre;
  pre.stage = "pretrain_single_track";
  pre.steps = 3;
  pre.out = s / "pre";
  CmdTrain(pre, log);
  for (const char *f : {"config.json", "metrics.jsonl", "checkpoint.avmt"})
    CHECK(fs::exists(s / (std::string("pre/") + f)));

  TrainOptions mtl;
  mtl.init = s / "pre/checkpoint.avmt";
  mtl.steps = 0;
  mtl.out = s / "zero";
  CmdTrain(mtl, log);
  CHECK(Slurp(s / "zero/checkpoint.avmt") == Slurp(s / "pre/checkpoint.avmt"));

  mtl.steps = 3;
  mtl.gamma = 0.5;
  mtl.out = s / "m1";
  CmdTrain(mtl, log);
  mtl.out = s / "m2";
  CmdTrain(mtl, log);
  CHECK(Slurp(s / "m1/metrics.jsonl") == Slurp(s / "m2/metrics.jsonl"));
  CHECK(Slurp(s / "m1/checkpoint.avmt") == Slurp(s / "m2/checkpoint.avmt"));
  CHECK(Lines(Slurp(s / "m1/metrics.jsonl")) == 1);
  const std::regex metrics_line(
      R"(\{"step": 3, "l_asr": [-0-9.e+]+, "l_asd": [-0-9.e+]+, "l": [-0-9.e+]+\}\n)");
  CHECK(std::regex_match(Slurp(s / "m1/metrics.jsonl"), metrics_line));

  TrainOptions bad = mtl;
  bad.gamma = 1.5;
  bad.out = s / "bad";
  CHECK_THROWS_AS(CmdTrain(bad, log), UsageError);
  bad.gamma = 0.5;
  bad.init.clear();
  CHECK_THROWS_AS(CmdTrain(bad, log), UsageError);

  EvalCmdOptions ev;
  ev.checkpoint = s / "m1/checkpoint.avmt";
  ev.data = s / "data";
  ev.tracks = {1, 4};
  ev.noise = {"clean", "0"};
  ev.gamma_tag = 0.5;
  ev.out = s / "runs/g05";
  CmdEval(ev, log);
  const std::string csv = Slurp(s / "runs/g05/report.csv");
  CHECK(Lines(csv) == 5);
  for (const EvalRecord &r : ParseReportCsv(csv)) {
    if (r.tracks == 1) CHECK(*r.acc == 1.0);
    CHECK(r.wer.has_value());
  }
  CHECK(Lines(Slurp(s / "runs/g05/sets/0-4.jsonl")) == 12);
  ev.out = s / "again";
  CmdEval(ev, log);
  CHECK(Slurp(s / "again/report.csv") == csv);

  ReportOptions rep{s / "runs", s / "merged1"};
  CmdReport(rep, log);
  CHECK(Slurp(s / "merged1/report.csv") == csv);

  ev.gamma_tag = 1.0;
  ev.out = s / "runs/g10";
  CmdEval(ev, log);
  ev.gamma_tag = 0.0;
  ev.out = s / "runs/g00";
  CmdEval(ev, log);
  for (const EvalRecord &r : ParseReportCsv(Slurp(s / "runs/g00/report.csv")))
    CHECK_FALSE(r.wer.has_value());
  rep.out = s / "runs/merged";
  CmdReport(rep, log);
  const std::string merged = Slurp(s / "runs/merged/report.csv");
  CHECK(Lines(merged) == 13);
  CmdReport(rep, log);  // its own output is not merged again
  CHECK(Slurp(s / "runs/merged/report.csv") == merged);

  // One line per (noise, tracks) cell; every percentage recomputes from the CSV.
  const std::string summary = Slurp(s / "runs/merged/summary.txt");
  std::map<std::tuple<std::string, int, double>, double> acc;
  for (const EvalRecord &r : ParseReportCsv(merged)) acc[{r.noise_db, r.tracks, r.gamma}] = *r.acc;
  const std::regex cell(R"(cell dataset=synth noise=(\w+) tracks=(\d+): (.*))");
  const std::regex part(R"(gamma=([0-9.]+) acc=[0-9.]+ vs_gamma1=([-+0-9.]+)% vs_gamma0=([-+0-9.]+)%)");
  int cells = 0;
  std::istringstream lines(summary);
  std::string line;
  while (std::getline(lines, line)) {
    std::smatch m;
    if (!std::regex_match(line, m, cell)) continue;
    ++cells;
    const std::string noise = m[1];
    const int tracks = std::stoi(m[2]);
    std::string rest = m[3];
    for (std::sregex_iterator it(rest.begin(), rest.end(), part), end; it != end; ++it) {
      const double g = std::stod((*it)[1]);
      const double a = acc.at({noise, tracks, g});
      const double r1 = 100 * (a - acc.at({noise, tracks, 1.0})) / acc.at({noise, tracks, 1.0});
      const double r0 = 100 * (a - acc.at({noise, tracks, 0.0})) / acc.at({noise, tracks, 0.0});
      CHECK(std::abs(std::stod((*it)[2]) - r1) <= 0.005 + 1e-9);
      CHECK(std::abs(std::stod((*it)[3]) - r0) <= 0.005 + 1e-9);
    }
  }
  CHECK(cells == 4);

  ev.noise = {"5"};
  CHECK_THROWS_AS(CmdEval(ev, log), UsageError);
  ev.noise = {"clean"};
  ev.checkpoint = s / "missing.avmt";
  CHECK_THROWS_AS(CmdEval(ev, log), Error);
  CHECK_THROWS_AS(CmdReport({s / "data", s / "empty"}, log), Error);
}

TEST_CASE("gradcheck command") {
  std::ostringstream log;
  GradCheckCmdOptions o;
  o.max_coords = 4;
  CHECK(CmdGradCheck(o, log));
  CHECK(Lines(log.str()) == 7);

  SUBCASE("a sign-flipped backward rule is caught") {
    std::ostringstream flog;
    o.fault = "softmax";
    CHECK_FALSE(CmdGradCheck(o, flog));
    CHECK(flog.str().find("attention  FAIL") != std::string::npos);
    CHECK(flog.str().find("asd_loss   FAIL") != std::string::npos);
    CHECK(flog.str().find("frontend   PASS") != std::string::npos);
  }
  SUBCASE("an unreachable tolerance fails with the measured errors") {
    std::ostringstream tlog;
    o.tolerance = 1e-12;
    CHECK_FALSE(CmdGradCheck(o, tlog));
    CHECK(tlog.str().find("FAIL max_rel_error=") != std::string::npos);
  }
}

TEST_CASE("exit codes") {
  Scratch s("exit");
  CHECK(RunCli("") == kExitUsage);
  CHECK(RunCli("frobnicate") == kExitUsage);
  CHECK(RunCli("train --stage mtl --out " + (s / "t")) == kExitUsage);
  CHECK(RunCli("eval --checkpoint " + (s / "none.avmt") + " --data " + (s / "d") +
               " --out " + (s / "e")) == kExitUsage);
  CHECK(RunCli("gen-data --items 2 --out " + (s / "d")) == kExitOk);
  CHECK(RunCli("gradcheck --coords 2 --tol 1e-12") == kExitVerification);
  CHECK(RunCli("--help") == kExitOk);
}

}  // namespace
}  // namespace avmtl
