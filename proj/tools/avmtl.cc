// tools/avmtl.cc

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


// avmtl: data generation, training, evaluation, gradient verification and
// reporting for the multi-task audio-visual model.
//
// Exit status: 0 success, 1 usage or runtime error, 2 verification failure.

#include <iostream>

#include "CLI11.hpp"

#include "avmtl/commands.h"

namespace {

std::vector<std::string> SplitList(const std::string &s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty() || !out.empty()) out.push_back(cur);
  return out;
}

}  // namespace

int main(int argc, char **argv) {
  using namespace avmtl;
  CLI::App app{"Multi-task audio-visual speech recognition and active speaker detection"};
  app.require_subcommand(1);

  GenDataOptions gen;
  CLI::App *gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic paired corpus");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--items", gen.items, "Number of items")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Corpus seed")->capture_default_str();
  gen_cmd->add_option("--min-u", gen.min_u, "Shortest transcript")->capture_default_str();
  gen_cmd->add_option("--max-u", gen.max_u, "Longest transcript")->capture_default_str();
  gen_cmd->add_option("--config", gen.config, "Run configuration (JSON)");
  gen_cmd->add_flag("--force", gen.force, "Overwrite a non-empty output directory");

  TrainOptions train;
  std::string stage;
  double gamma = 0.0;
  int64_t steps = 0;
  uint64_t seed = 0;
  CLI::App *train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("--config", train.config, "Run configuration (JSON)");
  CLI::Option *stage_opt =
      train_cmd->add_option("--stage", stage, "pretrain_single_track | mtl");
  CLI::Option *gamma_opt = train_cmd->add_option("--gamma", gamma, "ASR weight in [0, 1]");
  CLI::Option *steps_opt = train_cmd->add_option("--steps", steps, "Optimizer steps");
  CLI::Option *seed_opt = train_cmd->add_option("--seed", seed, "Training seed");
  train_cmd->add_option("--init", train.init, "Initial checkpoint (mtl stage)");
  train_cmd->add_option("--out", train.out, "Run directory")->required();

  EvalCmdOptions eval;
  std::string tracks, noise;
  CLI::App *eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--config", eval.config, "Run configuration (JSON)");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--data", eval.data, "Corpus directory from gen-data")->required();
  eval_cmd->add_option("--tracks", tracks, "Track counts, e.g. 1,2,4,8");
  eval_cmd->add_option("--noise", noise, "Noise levels, e.g. clean,20,10,0");
  eval_cmd->add_option("--gamma-tag", eval.gamma_tag, "Gamma the model was trained with")
      ->capture_default_str();
  eval_cmd->add_option("--variant", eval.variant, "multi | audio-only | one-track")
      ->capture_default_str();
  eval_cmd->add_option("--out", eval.out, "Run directory")->required();

  GradCheckCmdOptions gc;
  CLI::App *gc_cmd = app.add_subcommand("gradcheck", "Verify gradients in float64");
  gc_cmd->add_option("--config", gc.config, "Run configuration (JSON)");
  gc_cmd->add_option("--seed", gc.seed, "Seed")->capture_default_str();
  gc_cmd->add_option("--tol", gc.tolerance, "Relative error tolerance")->capture_default_str();
  gc_cmd->add_option("--coords", gc.max_coords, "Coordinates probed per tensor")
      ->capture_default_str();
  gc_cmd->add_option("--inject-fault", gc.fault, "Flip the backward sign of a primitive")
      ->group("");

  ReportOptions report;
  CLI::App *report_cmd = app.add_subcommand("report", "Merge evaluation reports");
  report_cmd->add_option("--runs", report.runs, "Directory holding run directories")
      ->required();
  report_cmd->add_option("--out", report.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen_cmd) {
      CmdGenData(gen, std::cout);
    } else if (*train_cmd) {
      if (*stage_opt) train.stage = stage;
      if (*gamma_opt) train.gamma = gamma;
      if (*steps_opt) train.steps = steps;
      if (*seed_opt) train.seed = seed;
      CmdTrain(train, std::cout);
    } else if (*eval_cmd) {
      for (const std::string &t : SplitList(tracks)) {
        try {
          eval.tracks.push_back(std::stoi(t));
        } catch (const std::exception &) {
          throw UsageError("bad track count '" + t + "'");
        }
      }
      eval.noise = SplitList(noise);
      CmdEval(eval, std::cout);
    } else if (*gc_cmd) {
      if (!CmdGradCheck(gc, std::cout)) return kExitVerification;
    } else if (*report_cmd) {
      CmdReport(report, std::cout);
    }
  } catch (const std::exception &e) {
    std::cerr << "avmtl: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitOk;
}
