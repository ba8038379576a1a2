// avmtl/commands.h

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


// The command-line subcommands.  Each writes its primary outputs under a
// run directory with fixed file names:
//   config.json     resolved configuration
//   metrics.jsonl   training log
//   checkpoint.avmt final parameters
//   report.csv      evaluation table (plus summary.txt)

#ifndef AVMTL_COMMANDS_H_
#define AVMTL_COMMANDS_H_

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "avmtl/tensor.h"

namespace avmtl {

/// Bad flags or arguments; the CLI exits with status 1.
class UsageError : public Error {
 public:
  using Error::Error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitVerification = 2;

/// Worker cap from AVMTL_THREADS (default 1).
int WorkerThreads();

struct GenDataOptions {
  std::string config;  // optional run config (synth and feature settings)
  std::string out;
  int64_t items = 100;
  uint64_t seed = 0;
  int min_u = 3, max_u = 8;
  bool force = false;
};
/// manifest.jsonl, audio/<id>.pcm, video/<id>.f32 (frames × H × W × C,
/// little-endian float32) and config.json.
void CmdGenData(const GenDataOptions &options, std::ostream &log);

struct TrainOptions {
  std::string config;
  std::optional<std::string> stage;
  std::optional<double> gamma;
  std::optional<int64_t> steps;
  std::optional<uint64_t> seed;
  std::string init;
  std::string out;
};
void CmdTrain(const TrainOptions &options, std::ostream &log);

struct EvalCmdOptions {
  std::string config;
  std::string checkpoint;
  std::string data;
  std::vector<int> tracks;          // empty: from the config
  std::vector<std::string> noise;   // empty: from the config
  double gamma_tag = 1.0;
  std::string variant = "multi";    // multi | audio-only | one-track
  std::string out;
};
void CmdEval(const EvalCmdOptions &options, std::ostream &log);

struct GradCheckCmdOptions {
  std::string config;
  uint64_t seed = 0;
  double tolerance = 1e-4;
  int max_coords = 16;
  std::string fault;  // primitive whose backward is sign-flipped (testing)
};
/// Returns true when every module passes.
bool CmdGradCheck(const GradCheckCmdOptions &options, std::ostream &log);

struct ReportOptions {
  std::string runs;
  std::string out;
};
void CmdReport(const ReportOptions &options, std::ostream &log);

}  // namespace avmtl

#endif  // AVMTL_COMMANDS_H_
