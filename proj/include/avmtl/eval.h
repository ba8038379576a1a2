// avmtl/eval.h

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


// Multi-track evaluation: N-track noisy evaluation sets built from a base
// corpus, frame-level top-1 track accuracy, token error rate, and the
// results table.

#ifndef AVMTL_EVAL_H_
#define AVMTL_EVAL_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "avmtl/features.h"
#include "avmtl/model.h"

namespace avmtl {

/// Noise conditions in table order.
inline const std::vector<std::string> &NoiseLevels() {
  static const std::vector<std::string> levels = {"clean", "20", "10", "0"};
  return levels;
}
/// "clean" → nullopt, "20" → 20 dB, ...; anything else throws.
std::optional<double> ParseNoiseLevel(const std::string &token);
std::string NoiseLevelName(const std::optional<double> &snr_db);

/// Base corpus: `items` manifest records with U uniform in [min_u, max_u],
/// per-item seeds derived from `seed`.
std::vector<ManifestItem> MakeBaseManifest(int64_t items, uint64_t seed, int min_u,
                                           int max_u, const std::string &prefix = "item");

struct EvalItem {
  int64_t base = 0;                     // index of the audio owner
  int64_t true_track_pos = 0;           // where its track sits among the N
  std::vector<int64_t> distractor_ids;  // base indices of the other tracks
};

struct MultiTrackEvalSet {
  int n_tracks = 1;
  std::optional<double> snr_db;
  uint64_t seed = 0;
  std::vector<EvalItem> items;
};

/// One item per base record; distractors are drawn without replacement
/// from the other records, the true track lands at a uniform position.
MultiTrackEvalSet BuildEvalSet(int64_t base_size, int n_tracks,
                               std::optional<double> snr_db, uint64_t seed);

/// JSON lines {"id", "true_track_pos", "distractor_ids", "snr_db"}.
void WriteEvalManifest(const std::string &path, const MultiTrackEvalSet &set,
                       const std::vector<ManifestItem> &base);

/// Fraction of frames whose predicted track equals the item's true one.
double AsdAccuracy(const std::vector<std::vector<int64_t>> &predicted,
                   const std::vector<int64_t> &truth);

/// Levenshtein distance with unit costs.
int64_t EditDistance(const std::vector<int> &hyp, const std::vector<int> &ref);
/// Σ distance / Σ |ref|.
double ErrorRate(const std::vector<std::vector<int>> &hyps,
                 const std::vector<std::vector<int>> &refs);

struct EvalRecord {
  std::string dataset;
  std::string noise_db;
  int tracks = 0;
  double gamma = 0.0;
  std::optional<double> acc;  // absent for the audio-only baseline
  std::optional<double> wer;  // absent for γ = 0
};

/// Which model behaviour an evaluation measures.
enum class EvalVariant {
  kMultiTrack,  // attention over the N tracks
  kAudioOnly,   // fused visual feature replaced by zeros
  kOneTrack,    // only the true track is shown
};

struct EvalOptions {
  std::string dataset = "synth";
  double gamma = 1.0;
  EvalVariant variant = EvalVariant::kMultiTrack;
  bool decode = true;      // error rates (left empty when γ = 0 regardless)
  int threads = 1;
  int max_symbols_per_step = 4;
};

/// Features and stacked video for one item of a set.
struct EvalInput {
  Tensor acoustic;  // 1 × T × Da
  Tensor video;     // N × T × H × W × C
  int64_t true_track = 0;
  std::vector<int> targets;
};

/// Caches the base pairs so that every set reuses the same corpus.
class EvalCorpus {
 public:
  EvalCorpus(std::vector<ManifestItem> base, const ModelConfig &config);
  int64_t size() const { return static_cast<int64_t>(base_.size()); }
  const std::vector<ManifestItem> &base() const { return base_; }
  const SyntheticPair &pair(int64_t i) const { return pairs_[i]; }
  EvalInput Input(const MultiTrackEvalSet &set, int64_t index,
                  bool true_track_only = false) const;

 private:
  std::vector<ManifestItem> base_;
  ModelConfig config_;
  std::vector<SyntheticPair> pairs_;
};

/// One record for the set.  Inference runs with B = 1 per item.
EvalRecord EvaluateSet(const ParameterSet &params, const ModelConfig &config,
                       const EvalCorpus &corpus, const MultiTrackEvalSet &set,
                       const EvalOptions &options);

struct EvalCell {
  std::string noise;
  int tracks = 1;
};

/// Runs every requested cell; each must have a matching set in `sets`.
std::vector<EvalRecord> Evaluate(const ParameterSet &params, const ModelConfig &config,
                                 const EvalCorpus &corpus,
                                 const std::vector<MultiTrackEvalSet> &sets,
                                 const std::vector<EvalCell> &cells,
                                 const EvalOptions &options);

/// Table order: dataset, noise (clean, 20, 10, 0), tracks, gamma.
void SortRecords(std::vector<EvalRecord> *records);
std::string ReportCsv(std::vector<EvalRecord> records);
std::vector<EvalRecord> ParseReportCsv(const std::string &text);
/// Relative ACC change of every γ against γ = 1 and γ = 0, one line per
/// (dataset, noise, tracks) cell, followed by per-noise averages.
std::string ReportSummary(std::vector<EvalRecord> records);

}  // namespace avmtl

#endif  // AVMTL_EVAL_H_
