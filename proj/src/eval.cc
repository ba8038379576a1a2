// eval.cc

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


#include "avmtl/eval.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include "json.hpp"

#include "avmtl/autodiff.h"
#include "avmtl/ops.h"
#include "avmtl/random.h"

namespace avmtl {

std::optional<double> ParseNoiseLevel(const std::string &token) {
  if (token == "clean") return std::nullopt;
  for (const std::string &level : NoiseLevels())
    if (token == level) return std::stod(token);
  throw Error(fmt::format("unknown noise level '{}' (expected one of {})", token,
                          fmt::join(NoiseLevels(), ", ")));
}

std::string NoiseLevelName(const std::optional<double> &snr_db) {
  return snr_db ? fmt::format("{}", *snr_db) : "clean";
}

static int NoiseRank(const std::string &noise) {
  const auto &levels = NoiseLevels();
  auto it = std::find(levels.begin(), levels.end(), noise);
  return it == levels.end() ? static_cast<int>(levels.size())
                            : static_cast<int>(it - levels.begin());
}

std::vector<ManifestItem> MakeBaseManifest(int64_t items, uint64_t seed, int min_u,
                                           int max_u, const std::string &prefix) {
  if (items < 0 || min_u < 1 || max_u < min_u)
    throw Error(fmt::format("bad corpus request: {} items, U in [{}, {}]", items, min_u,
                            max_u));
  std::mt19937_64 rng(DeriveSeed(seed, {0xba5e}));
  std::uniform_int_distribution<int> u(min_u, max_u);
  std::vector<ManifestItem> out;
  for (int64_t i = 0; i < items; ++i) {
    ManifestItem item;
    item.id = fmt::format("{}-{:06d}", prefix, i);
    item.seed = DeriveSeed(seed, {0x17e3, static_cast<uint64_t>(i)});
    item.u = u(rng);
    out.push_back(std::move(item));
  }
  return out;
}

MultiTrackEvalSet BuildEvalSet(int64_t base_size, int n_tracks,
                               std::optional<double> snr_db, uint64_t seed) {
  if (n_tracks < 1) throw Error(fmt::format("bad track count {}", n_tracks));
  if (base_size < n_tracks)
    throw Error(fmt::format("base set of {} items cannot supply {} tracks", base_size,
                            n_tracks));
  MultiTrackEvalSet set;
  set.n_tracks = n_tracks;
  set.snr_db = snr_db;
  set.seed = seed;
  for (int64_t i = 0; i < base_size; ++i) {
    std::mt19937_64 rng(DeriveSeed(seed, {0xe5e7, static_cast<uint64_t>(n_tracks),
                                          static_cast<uint64_t>(i)}));
    EvalItem item;
    item.base = i;
    item.true_track_pos =
        std::uniform_int_distribution<int64_t>(0, n_tracks - 1)(rng);
    // Partial Fisher-Yates over the other indices, drawn lazily.
    std::map<int64_t, int64_t> swapped;
    auto at = [&](int64_t k) {
      auto it = swapped.find(k);
      return it == swapped.end() ? k : it->second;
    };
    const int64_t pool = base_size - 1;
    for (int64_t k = 0; k + 1 < n_tracks; ++k) {
      const int64_t j = std::uniform_int_distribution<int64_t>(k, pool - 1)(rng);
      const int64_t pick = at(j);
      swapped[j] = at(k);
      item.distractor_ids.push_back(pick < i ? pick : pick + 1);
    }
    set.items.push_back(std::move(item));
  }
  return set;
}

void WriteEvalManifest(const std::string &path, const MultiTrackEvalSet &set,
                       const std::vector<ManifestItem> &base) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  for (const EvalItem &item : set.items) {
    nlohmann::ordered_json j;
    j["id"] = base.at(item.base).id;
    j["true_track_pos"] = item.true_track_pos;
    std::vector<std::string> ids;
    for (int64_t d : item.distractor_ids) ids.push_back(base.at(d).id);
    j["distractor_ids"] = ids;
    if (set.snr_db)
      j["snr_db"] = *set.snr_db;
    else
      j["snr_db"] = nullptr;
    out << j.dump() << "\n";
  }
  if (!out) throw Error("failed writing '" + path + "'");
}

double AsdAccuracy(const std::vector<std::vector<int64_t>> &predicted,
                   const std::vector<int64_t> &truth) {
  if (predicted.size() != truth.size())
    throw Error(fmt::format("{} prediction rows for {} items", predicted.size(),
                            truth.size()));
  int64_t correct = 0, total = 0;
  for (size_t i = 0; i < predicted.size(); ++i) {
    for (int64_t p : predicted[i]) correct += p == truth[i];
    total += static_cast<int64_t>(predicted[i].size());
  }
  if (total == 0) throw Error("accuracy over an empty set of frames");
  return static_cast<double>(correct) / static_cast<double>(total);
}

int64_t EditDistance(const std::vector<int> &hyp, const std::vector<int> &ref) {
  std::vector<int64_t> row(ref.size() + 1);
  std::iota(row.begin(), row.end(), 0);
  for (size_t i = 1; i <= hyp.size(); ++i) {
    int64_t diag = row[0];
    row[0] = static_cast<int64_t>(i);
    for (size_t j = 1; j <= ref.size(); ++j) {
      const int64_t up = row[j];
      row[j] = std::min({up + 1, row[j - 1] + 1, diag + (hyp[i - 1] != ref[j - 1])});
      diag = up;
    }
  }
  return row[ref.size()];
}

double ErrorRate(const std::vector<std::vector<int>> &hyps,
                 const std::vector<std::vector<int>> &refs) {
  if (hyps.size() != refs.size())
    throw Error(fmt::format("{} hypotheses for {} references", hyps.size(), refs.size()));
  int64_t dist = 0, words = 0;
  for (size_t i = 0; i < refs.size(); ++i) {
    dist += EditDistance(hyps[i], refs[i]);
    words += static_cast<int64_t>(refs[i].size());
  }
  if (words == 0) throw Error("error rate over an empty reference corpus");
  return static_cast<double>(dist) / static_cast<double>(words);
}

EvalCorpus::EvalCorpus(std::vector<ManifestItem> base, const ModelConfig &config)
    : base_(std::move(base)), config_(config) {
  pairs_.reserve(base_.size());
  for (const ManifestItem &item : base_)
    pairs_.push_back(GenerateSyntheticPair(item.seed, item.u, config_.synth));
}

// A track at the feature rate covering `frames` frames; shorter tracks are
// looped so that every frame shows the face.
static VideoTrack CoverFrames(const VideoTrack &track, int64_t frames, bool exact) {
  VideoTrack src = exact ? ResampleVideo(track, kFeatureRateHz, frames)
                         : ResampleVideo(track, kFeatureRateHz);
  if (src.num_frames >= frames) return src;
  VideoTrack out = src;
  const int64_t fs = src.frame_size();
  out.num_frames = frames;
  out.pixels.resize(frames * fs);
  for (int64_t k = src.num_frames; k < frames; ++k)
    std::copy_n(src.pixels.data() + (k % src.num_frames) * fs, fs,
                out.pixels.data() + k * fs);
  return out;
}

EvalInput EvalCorpus::Input(const MultiTrackEvalSet &set, int64_t index,
                            bool true_track_only) const {
  const EvalItem &item = set.items.at(index);
  const SyntheticPair &pair = pairs_.at(item.base);
  AudioClip audio = pair.audio;
  if (set.snr_db) {
    AudioClip babble = SynthBabble(static_cast<int64_t>(audio.samples.size()),
                                   DeriveSeed(set.seed, {0xbab, static_cast<uint64_t>(index)}));
    audio = MixNoise(audio, babble, *set.snr_db).audio;
  }
  EvalInput in;
  Tensor feats = LogMelFeatures(audio, config_.features);
  const int64_t t = feats.dim(0);
  in.acoustic = Reshape(feats, {1, t, feats.dim(1)});
  in.targets = pair.tokens;
  std::vector<VideoTrack> tracks;
  if (true_track_only) {
    tracks.push_back(CoverFrames(pair.video, t, true));
    in.true_track = 0;
  } else {
    size_t next = 0;
    for (int64_t m = 0; m < set.n_tracks; ++m) {
      if (m == item.true_track_pos)
        tracks.push_back(CoverFrames(pair.video, t, true));
      else
        tracks.push_back(CoverFrames(pairs_.at(item.distractor_ids.at(next++)).video, t,
                                     false));
    }
    in.true_track = item.true_track_pos;
  }
  in.video = StackVideo(tracks, t);
  return in;
}

namespace {

struct ItemResult {
  int64_t correct = 0, frames = 0;
  int64_t distance = 0, ref_len = 0;
};

ItemResult EvaluateItem(const ParameterSet &params, const ModelConfig &config,
                        const EvalCorpus &corpus, const MultiTrackEvalSet &set,
                        int64_t index, const EvalOptions &options, bool decode) {
  NoGradScope no_grad;
  const DType dtype = params.begin()->second.dtype();
  EvalInput in = corpus.Input(set, index, options.variant == EvalVariant::kOneTrack);
  const Tensor acoustic = in.acoustic.Cast(dtype), video = in.video.Cast(dtype);
  const int64_t t = acoustic.dim(1);
  const VisualMode mode = options.variant == EvalVariant::kAudioOnly
                              ? VisualMode::kZero
                              : VisualMode::kAttention;
  ModelOutputs out = ModelForward(acoustic, video, {t}, config, params, mode);
  ItemResult r;
  if (mode == VisualMode::kAttention) {
    for (int64_t p : SelectTrack(out.attention.scores)) r.correct += p == in.true_track;
    r.frames = t;
  }
  if (decode) {
    std::vector<int> hyp = GreedyDecode(out.encoded, t, config.decoder, params,
                                        options.max_symbols_per_step);
    r.distance = EditDistance(hyp, in.targets);
    r.ref_len = static_cast<int64_t>(in.targets.size());
  }
  return r;
}

}  // namespace

EvalRecord EvaluateSet(const ParameterSet &params, const ModelConfig &config,
                       const EvalCorpus &corpus, const MultiTrackEvalSet &set,
                       const EvalOptions &options) {
  if (set.items.empty()) throw Error("evaluation set is empty");
  if (params.size() == 0) throw Error("evaluation needs model parameters");
  const bool decode = options.decode && options.gamma != 0.0;
  const int64_t n = static_cast<int64_t>(set.items.size());
  std::vector<ItemResult> results(n);
  const int threads = std::max(1, std::min<int>(options.threads, static_cast<int>(n)));
  auto work = [&](int worker) {
    for (int64_t i = worker; i < n; i += threads)
      results[i] = EvaluateItem(params, config, corpus, set, i, options, decode);
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w)
      pool.emplace_back([&, w] {
        try {
          work(w);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    for (auto &th : pool) th.join();
    for (auto &e : errors)
      if (e) std::rethrow_exception(e);
  }
  ItemResult total;
  for (const ItemResult &r : results) {
    total.correct += r.correct;
    total.frames += r.frames;
    total.distance += r.distance;
    total.ref_len += r.ref_len;
  }
  EvalRecord rec;
  rec.dataset = options.dataset;
  rec.noise_db = NoiseLevelName(set.snr_db);
  rec.tracks = options.variant == EvalVariant::kOneTrack ? 1 : set.n_tracks;
  rec.gamma = options.gamma;
  if (options.variant == EvalVariant::kAudioOnly) {
    rec.acc = std::nullopt;
  } else {
    if (total.frames == 0) throw Error("accuracy over an empty set of frames");
    rec.acc = static_cast<double>(total.correct) / static_cast<double>(total.frames);
  }
  if (decode) {
    if (total.ref_len == 0) throw Error("error rate over an empty reference corpus");
    rec.wer = static_cast<double>(total.distance) / static_cast<double>(total.ref_len);
  }
  return rec;
}

std::vector<EvalRecord> Evaluate(const ParameterSet &params, const ModelConfig &config,
                                 const EvalCorpus &corpus,
                                 const std::vector<MultiTrackEvalSet> &sets,
                                 const std::vector<EvalCell> &cells,
                                 const EvalOptions &options) {
  std::vector<EvalRecord> out;
  for (const EvalCell &cell : cells) {
    const std::optional<double> snr = ParseNoiseLevel(cell.noise);
    auto it = std::find_if(sets.begin(), sets.end(), [&](const MultiTrackEvalSet &s) {
      return s.n_tracks == cell.tracks && s.snr_db == snr;
    });
    if (it == sets.end())
      throw Error(fmt::format("no evaluation set for noise {} with {} tracks", cell.noise,
                              cell.tracks));
    out.push_back(EvaluateSet(params, config, corpus, *it, options));
  }
  return out;
}

void SortRecords(std::vector<EvalRecord> *records) {
  std::stable_sort(records->begin(), records->end(),
                   [](const EvalRecord &a, const EvalRecord &b) {
                     return std::make_tuple(a.dataset, NoiseRank(a.noise_db), a.tracks,
                                            a.gamma) <
                            std::make_tuple(b.dataset, NoiseRank(b.noise_db), b.tracks,
                                            b.gamma);
                   });
}

static std::string OptionalField(const std::optional<double> &v) {
  return v ? fmt::format("{}", *v) : std::string();
}

std::string ReportCsv(std::vector<EvalRecord> records) {
  SortRecords(&records);
  std::string out = "dataset,noise_db,tracks,gamma,acc,wer\n";
  for (const EvalRecord &r : records) {
    if (r.dataset.find_first_of(",\n\"") != std::string::npos)
      throw Error(fmt::format("dataset name '{}' cannot be written to CSV", r.dataset));
    out += fmt::format("{},{},{},{},{},{}\n", r.dataset, r.noise_db, r.tracks, r.gamma,
                       OptionalField(r.acc), OptionalField(r.wer));
  }
  return out;
}

static double ParseDouble(const std::string &s, int line) {
  char *end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0')
    throw Error(fmt::format("report line {}: bad number '{}'", line, s));
  return v;
}

std::vector<EvalRecord> ParseReportCsv(const std::string &text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "dataset,noise_db,tracks,gamma,acc,wer")
    throw Error("report: missing or wrong CSV header");
  std::vector<EvalRecord> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 6)
      throw Error(fmt::format("report line {}: expected 6 fields, got {}", lineno,
                              f.size()));
    EvalRecord r;
    r.dataset = f[0];
    r.noise_db = f[1];
    if (NoiseRank(r.noise_db) == static_cast<int>(NoiseLevels().size()))
      throw Error(fmt::format("report line {}: unknown noise '{}'", lineno, f[1]));
    r.tracks = static_cast<int>(ParseDouble(f[2], lineno));
    r.gamma = ParseDouble(f[3], lineno);
    if (!f[4].empty()) r.acc = ParseDouble(f[4], lineno);
    if (!f[5].empty()) r.wer = ParseDouble(f[5], lineno);
    out.push_back(std::move(r));
  }
  return out;
}

static std::string RelativeChange(double value, const std::optional<double> &ref) {
  if (!ref || *ref == 0.0) return "n/a";
  return fmt::format("{:+.2f}%", 100.0 * (value - *ref) / *ref);
}

std::string ReportSummary(std::vector<EvalRecord> records) {
  SortRecords(&records);
  std::string out;
  // (dataset, noise, gamma) → relative changes collected over multi-track cells.
  std::map<std::tuple<std::string, int, double>, std::vector<double>> vs1, vs0;
  for (size_t i = 0; i < records.size();) {
    size_t j = i;
    while (j < records.size() && records[j].dataset == records[i].dataset &&
           records[j].noise_db == records[i].noise_db &&
           records[j].tracks == records[i].tracks)
      ++j;
    std::optional<double> ref1, ref0;
    for (size_t k = i; k < j; ++k) {
      if (records[k].gamma == 1.0) ref1 = records[k].acc;
      if (records[k].gamma == 0.0) ref0 = records[k].acc;
    }
    std::vector<std::string> parts;
    for (size_t k = i; k < j; ++k) {
      const EvalRecord &r = records[k];
      if (!r.acc) continue;
      parts.push_back(fmt::format("gamma={} acc={:.4f} vs_gamma1={} vs_gamma0={}",
                                  r.gamma, *r.acc, RelativeChange(*r.acc, ref1),
                                  RelativeChange(*r.acc, ref0)));
      const auto key = std::make_tuple(r.dataset, NoiseRank(r.noise_db), r.gamma);
      if (r.tracks > 1 && ref1 && *ref1 != 0.0)
        vs1[key].push_back((*r.acc - *ref1) / *ref1);
      if (r.tracks > 1 && ref0 && *ref0 != 0.0)
        vs0[key].push_back((*r.acc - *ref0) / *ref0);
    }
    if (!parts.empty())
      out += fmt::format("cell dataset={} noise={} tracks={}: {}\n", records[i].dataset,
                         records[i].noise_db, records[i].tracks, fmt::join(parts, "; "));
    i = j;
  }
  std::set<std::tuple<std::string, int, double>> keys;
  for (const auto &kv : vs1) keys.insert(kv.first);
  for (const auto &kv : vs0) keys.insert(kv.first);
  auto mean = [](const std::vector<double> &v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  for (const auto &key : keys) {
    const auto &[dataset, rank, gamma] = key;
    auto a = vs1.find(key), b = vs0.find(key);
    out += fmt::format(
        "average dataset={} noise={} gamma={}: vs_gamma1={} vs_gamma0={}\n", dataset,
        NoiseLevels()[rank], gamma,
        a == vs1.end() ? "n/a" : fmt::format("{:+.2f}%", 100.0 * mean(a->second)),
        b == vs0.end() ? "n/a" : fmt::format("{:+.2f}%", 100.0 * mean(b->second)));
  }
  return out;
}

}  // namespace avmtl
