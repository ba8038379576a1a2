// commands.cc

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


#include "avmtl/commands.h"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "avmtl/autodiff.h"
#include "avmtl/checkpoint.h"
#include "avmtl/config.h"
#include "avmtl/eval.h"
#include "avmtl/verify.h"

namespace fs = std::filesystem;

namespace avmtl {

namespace {

RunConfig ConfigOrDefault(const std::string &path) {
  return path.empty() ? RunConfig::Toy() : LoadRunConfig(path);
}

void WriteText(const fs::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

std::string ReadText(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void MakeRunDir(const std::string &out) {
  if (out.empty()) throw UsageError("an output directory (--out) is required");
  fs::create_directories(out);
}

void EchoConfig(const std::string &dir, const RunConfig &config) {
  WriteText(fs::path(dir) / "config.json", RunConfigToJson(config).dump(2) + "\n");
}

}  // namespace

int WorkerThreads() {
  const char *env = std::getenv("AVMTL_THREADS");
  if (!env || !*env) return 1;
  char *end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1 || n > 1024)
    throw UsageError(fmt::format("AVMTL_THREADS must be a positive integer, got '{}'", env));
  return static_cast<int>(n);
}

void CmdGenData(const GenDataOptions &o, std::ostream &log) {
  if (o.out.empty()) throw UsageError("an output directory (--out) is required");
  RunConfig config = ConfigOrDefault(o.config);
  if (o.items < 1) throw UsageError("--items must be positive");
  if (o.min_u < 1 || o.max_u < o.min_u)
    throw UsageError(fmt::format("bad length range [{}, {}]", o.min_u, o.max_u));
  const fs::path out(o.out);
  if (fs::exists(out) && !fs::is_empty(out)) {
    if (!o.force)
      throw Error(fmt::format("'{}' is not empty (use --force to overwrite)", o.out));
    for (const char *owned : {"manifest.jsonl", "config.json", "audio", "video"})
      fs::remove_all(out / owned);
  }
  fs::create_directories(out / "audio");
  fs::create_directories(out / "video");
  const std::vector<ManifestItem> items =
      MakeBaseManifest(o.items, o.seed, o.min_u, o.max_u, "item");
  for (const ManifestItem &item : items) {
    const SyntheticPair pair = GenerateSyntheticPair(item.seed, item.u, config.model.synth);
    WritePcm((out / "audio" / (item.id + ".pcm")).string(), pair.audio);
    WriteFloat32((out / "video" / (item.id + ".f32")).string(), pair.video.pixels);
  }
  WriteManifest((out / "manifest.jsonl").string(), items);
  EchoConfig(o.out, config);
  fmt::print(log, "wrote {} items to {}\n", items.size(), o.out);
}

void CmdTrain(const TrainOptions &o, std::ostream &log) {
  RunConfig config = ConfigOrDefault(o.config);
  TrainConfig &t = config.train;
  if (o.stage) t.stage = ParseStage(*o.stage);
  if (o.gamma) t.gamma = *o.gamma;
  if (o.steps) t.steps = *o.steps;
  if (o.seed) t.seed = *o.seed;
  if (t.stage == Stage::kPretrainSingleTrack) {
    if (o.gamma && *o.gamma != 1.0)
      throw UsageError("the pretrain stage trains the ASR loss alone (gamma 1)");
    t.gamma = 1.0;
  }
  try {
    config.Validate();
  } catch (const Error &e) {
    throw UsageError(e.what());
  }
  std::optional<ParameterSet> init;
  if (t.stage == Stage::kMtl) {
    if (o.init.empty()) throw UsageError("the mtl stage requires --init");
    init = LoadCheckpoint(o.init);
  } else if (!o.init.empty()) {
    throw UsageError("the pretrain stage starts from scratch; --init is not accepted");
  }
  MakeRunDir(o.out);
  EchoConfig(o.out, config);
  const fs::path metrics_path = fs::path(o.out) / "metrics.jsonl";
  std::ofstream metrics(metrics_path, std::ios::binary);
  if (!metrics) throw Error("cannot open '" + metrics_path.string() + "' for writing");
  fmt::print(log, "training stage={} gamma={} steps={} seed={}\n", StageName(t.stage),
             t.gamma, t.steps, t.seed);
  TrainResult r = Train(config.model, t, init ? &*init : nullptr,
                        [&](const MetricsRecord &rec) {
                          const std::string line = MetricsJson(rec);
                          metrics << line << "\n";
                          log << line << "\n";
                        });
  metrics.close();
  if (!metrics) throw Error("failed writing '" + metrics_path.string() + "'");
  SaveCheckpoint(r.params, (fs::path(o.out) / "checkpoint.avmt").string());
  fmt::print(log, "wrote {}\n", (fs::path(o.out) / "checkpoint.avmt").string());
}

void CmdEval(const EvalCmdOptions &o, std::ostream &log) {
  RunConfig config = ConfigOrDefault(o.config);
  if (!o.tracks.empty()) config.eval.tracks = o.tracks;
  if (!o.noise.empty()) config.eval.noise = o.noise;
  for (const std::string &n : config.eval.noise) {
    try {
      ParseNoiseLevel(n);
    } catch (const Error &e) {
      throw UsageError(e.what());
    }
  }
  if (o.gamma_tag < 0.0 || o.gamma_tag > 1.0)
    throw UsageError(fmt::format("--gamma-tag must be in [0, 1], got {}", o.gamma_tag));
  EvalOptions options;
  options.dataset = config.eval.dataset;
  options.gamma = o.gamma_tag;
  options.threads = WorkerThreads();
  if (o.variant == "multi")
    options.variant = EvalVariant::kMultiTrack;
  else if (o.variant == "audio-only")
    options.variant = EvalVariant::kAudioOnly;
  else if (o.variant == "one-track")
    options.variant = EvalVariant::kOneTrack;
  else
    throw UsageError(fmt::format("unknown variant '{}'", o.variant));
  if (o.checkpoint.empty()) throw UsageError("--checkpoint is required");
  if (o.data.empty()) throw UsageError("--data is required");

  const ParameterSet params = LoadCheckpoint(o.checkpoint);
  CheckCompatible(InitModel(config.model, 0, params.begin()->second.dtype()), params);
  std::vector<ManifestItem> base =
      ReadManifest((fs::path(o.data) / "manifest.jsonl").string());
  for (int n : config.eval.tracks)
    if (n < 1 || n > static_cast<int>(base.size()))
      throw UsageError(fmt::format("cannot build {}-track sets from {} items", n,
                                   base.size()));
  MakeRunDir(o.out);
  EchoConfig(o.out, config);
  fs::create_directories(fs::path(o.out) / "sets");
  const EvalCorpus corpus(base, config.model);
  std::vector<MultiTrackEvalSet> sets;
  std::vector<EvalCell> cells;
  for (const std::string &noise : config.eval.noise)
    for (int n : config.eval.tracks) {
      sets.push_back(BuildEvalSet(corpus.size(), n, ParseNoiseLevel(noise), config.eval.seed));
      WriteEvalManifest(
          (fs::path(o.out) / "sets" / fmt::format("{}-{}.jsonl", noise, n)).string(),
          sets.back(), base);
      cells.push_back({noise, n});
    }
  std::vector<EvalRecord> records;
  for (const EvalCell &cell : cells) {
    std::vector<EvalRecord> r = Evaluate(params, config.model, corpus, sets, {cell}, options);
    fmt::print(log, "noise={} tracks={} acc={} wer={}\n", cell.noise, r[0].tracks,
               r[0].acc ? fmt::format("{:.4f}", *r[0].acc) : "-",
               r[0].wer ? fmt::format("{:.4f}", *r[0].wer) : "-");
    records.push_back(r[0]);
  }
  WriteText(fs::path(o.out) / "report.csv", ReportCsv(records));
  WriteText(fs::path(o.out) / "summary.txt", ReportSummary(records));
}

bool CmdGradCheck(const GradCheckCmdOptions &o, std::ostream &log) {
  RunConfig config = ConfigOrDefault(o.config);
  if (!(o.tolerance > 0.0)) throw UsageError("--tol must be positive");
  struct FaultGuard {
    ~FaultGuard() { ClearBackwardFaults(); }
  } guard;
  if (!o.fault.empty()) SetBackwardFault(o.fault);
  bool ok = true;
  for (const ModuleCheck &m : RunGradChecks(config.model, o.seed, o.tolerance, o.max_coords)) {
    const bool pass = m.report.passed();
    ok = ok && pass;
    fmt::print(log, "{:<10} {} max_rel_error={:.3e} tol={:g}\n", m.module,
               pass ? "PASS" : "FAIL", m.report.max_rel_error(), o.tolerance);
    if (!pass)
      for (const GradCheckEntry &e : m.report.entries)
        if (!(e.max_rel_error < o.tolerance))
          fmt::print(log, "    {} max_rel_error={:.3e}\n", e.name, e.max_rel_error);
  }
  return ok;
}

void CmdReport(const ReportOptions &o, std::ostream &log) {
  if (o.runs.empty()) throw UsageError("--runs is required");
  if (!fs::is_directory(o.runs)) throw Error(fmt::format("'{}' is not a directory", o.runs));
  MakeRunDir(o.out);
  const fs::path out = fs::canonical(o.out);
  std::vector<fs::path> files;
  for (const auto &entry : fs::recursive_directory_iterator(o.runs)) {
    if (!entry.is_regular_file() || entry.path().filename() != "report.csv") continue;
    if (fs::canonical(entry.path()).parent_path() == out) continue;
    files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<EvalRecord> records;
  for (const fs::path &f : files)
    for (EvalRecord &r : ParseReportCsv(ReadText(f))) records.push_back(std::move(r));
  if (records.empty()) throw Error(fmt::format("no report records under '{}'", o.runs));
  const std::string summary = ReportSummary(records);
  WriteText(out / "report.csv", ReportCsv(records));
  WriteText(out / "summary.txt", summary);
  fmt::print(log, "merged {} records from {} runs\n{}", records.size(), files.size(), summary);
}

}  // namespace avmtl
