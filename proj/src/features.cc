// src/features.cc

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

#include "avmtl/features.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <mutex>
#include <numbers>
#include <random>

#include <fftw3.h>
#include <fmt/format.h>

#include "avmtl/random.h"
#include "json.hpp"

namespace avmtl {

namespace {

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double MelToHz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

// std::complex<double> is layout-compatible with fftw_complex.
fftw_complex *AsFftw(std::complex<double> *p) {
  return reinterpret_cast<fftw_complex *>(p);
}

// FFTW planning is not thread-safe; executing an existing plan on new arrays
// is.  Plans are created once per size under a lock.
class RealFft {
 public:
  explicit RealFft(int n) : n_(n) {
    std::vector<double> in(n);
    std::vector<std::complex<double>> out(n / 2 + 1);
    std::lock_guard<std::mutex> lock(PlannerMutex());
    plan_ = fftw_plan_dft_r2c_1d(n, in.data(), AsFftw(out.data()),
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
  }
  ~RealFft() {
    std::lock_guard<std::mutex> lock(PlannerMutex());
    fftw_destroy_plan(plan_);
  }
  RealFft(const RealFft &) = delete;
  RealFft &operator=(const RealFft &) = delete;

  void Magnitude(std::vector<double> &in, std::vector<std::complex<double>> &scratch,
                 double *magnitude) const {
    scratch.resize(n_ / 2 + 1);
    fftw_execute_dft_r2c(plan_, in.data(), AsFftw(scratch.data()));
    for (int k = 0; k <= n_ / 2; ++k)
      magnitude[k] = std::abs(scratch[k]);
  }

  static const RealFft &ForSize(int n) {
    static std::mutex cache_mutex;
    static std::vector<std::unique_ptr<RealFft>> cache;
    std::lock_guard<std::mutex> lock(cache_mutex);
    for (const auto &p : cache)
      if (p->n_ == n) return *p;
    cache.push_back(std::make_unique<RealFft>(n));
    return *cache.back();
  }

 private:
  static std::mutex &PlannerMutex() {
    static std::mutex m;
    return m;
  }
  int n_;
  fftw_plan plan_;
};

// RBJ biquad, direct form I.
class Biquad {
 public:
  static Biquad LowPass(double cutoff_hz, double q) {
    return Make(cutoff_hz, q, false);
  }
  static Biquad HighPass(double cutoff_hz, double q) {
    return Make(cutoff_hz, q, true);
  }
  double Process(double x) {
    double y = b0_ * x + b1_ * x1_ + b2_ * x2_ - a1_ * y1_ - a2_ * y2_;
    x2_ = x1_;
    x1_ = x;
    y2_ = y1_;
    y1_ = y;
    return y;
  }

 private:
  static Biquad Make(double f, double q, bool high) {
    const double w0 = 2.0 * std::numbers::pi * f / kSampleRateHz;
    const double alpha = std::sin(w0) / (2.0 * q), c = std::cos(w0);
    const double a0 = 1.0 + alpha;
    Biquad bq;
    if (high) {
      bq.b0_ = (1.0 + c) / 2.0 / a0;
      bq.b1_ = -(1.0 + c) / a0;
    } else {
      bq.b0_ = (1.0 - c) / 2.0 / a0;
      bq.b1_ = (1.0 - c) / a0;
    }
    bq.b2_ = bq.b0_;
    bq.a1_ = -2.0 * c / a0;
    bq.a2_ = (1.0 - alpha) / a0;
    return bq;
  }
  double b0_ = 0, b1_ = 0, b2_ = 0, a1_ = 0, a2_ = 0;
  double x1_ = 0, x2_ = 0, y1_ = 0, y2_ = 0;
};

}  // namespace

std::vector<double> MelEdgeFrequencies(const LogMelOptions &opts) {
  const double lo = HzToMel(opts.low_hz), hi = HzToMel(opts.high_hz);
  std::vector<double> edges(opts.num_mel + 2);
  for (int i = 0; i < opts.num_mel + 2; ++i)
    edges[i] = MelToHz(lo + (hi - lo) * i / (opts.num_mel + 1));
  return edges;
}

std::vector<double> MelFilterbank(const LogMelOptions &opts) {
  const int bins = opts.fft_size / 2 + 1;
  const std::vector<double> edges = MelEdgeFrequencies(opts);
  std::vector<double> fb(static_cast<size_t>(opts.num_mel) * bins, 0.0);
  for (int m = 0; m < opts.num_mel; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * kSampleRateHz / opts.fft_size;
      double w = 0.0;
      if (f > left && f <= center)
        w = (f - left) / (center - left);
      else if (f > center && f < right)
        w = (right - f) / (right - center);
      fb[static_cast<size_t>(m) * bins + k] = w;
    }
  }
  return fb;
}

std::vector<double> HannWindow(int length) {
  std::vector<double> w(length);
  for (int n = 0; n < length; ++n)
    w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / (length - 1));
  return w;
}

int64_t NumRawFrames(int64_t num_samples, const LogMelOptions &opts) {
  if (num_samples < opts.window) return 0;
  return (num_samples - opts.window) / opts.hop + 1;
}

Tensor RawLogMel(const AudioClip &clip, const LogMelOptions &opts) {
  if (clip.sample_rate_hz != kSampleRateHz)
    throw Error(fmt::format("expected {} Hz audio, got {} Hz", kSampleRateHz,
                            clip.sample_rate_hz));
  const int64_t frames = NumRawFrames(clip.samples.size(), opts);
  if (frames == 0)
    throw Error(fmt::format("clip of {} samples is shorter than one {}-sample "
                            "window",
                            clip.samples.size(), opts.window));
  static thread_local LogMelOptions cached_opts{.window = -1};
  static thread_local std::vector<double> window, filterbank;
  if (cached_opts.window != opts.window || cached_opts.fft_size != opts.fft_size ||
      cached_opts.num_mel != opts.num_mel || cached_opts.low_hz != opts.low_hz ||
      cached_opts.high_hz != opts.high_hz) {
    window = HannWindow(opts.window);
    filterbank = MelFilterbank(opts);
    cached_opts = opts;
  }
  const RealFft &fft = RealFft::ForSize(opts.fft_size);
  const int bins = opts.fft_size / 2 + 1;
  std::vector<double> frame(opts.fft_size, 0.0), magnitude(bins);
  std::vector<std::complex<double>> scratch;
  std::vector<double> out(frames * opts.num_mel);
  for (int64_t f = 0; f < frames; ++f) {
    const float *src = clip.samples.data() + f * opts.hop;
    for (int n = 0; n < opts.window; ++n) frame[n] = src[n] * window[n];
    std::fill(frame.begin() + opts.window, frame.end(), 0.0);
    fft.Magnitude(frame, scratch, magnitude.data());
    for (int m = 0; m < opts.num_mel; ++m) {
      const double *w = filterbank.data() + static_cast<size_t>(m) * bins;
      double energy = 0.0;
      for (int k = 0; k < bins; ++k) energy += w[k] * magnitude[k];
      out[f * opts.num_mel + m] = std::log(energy + opts.log_floor);
    }
  }
  return Tensor({frames, opts.num_mel}, std::move(out));
}

Tensor LogMelFeatures(const AudioClip &clip, const LogMelOptions &opts) {
  Tensor raw = RawLogMel(clip, opts);
  const int64_t stacked = raw.dim(0) / opts.stack;
  if (stacked == 0)
    throw Error(fmt::format("clip yields {} raw frames, fewer than one stack "
                            "of {}",
                            raw.dim(0), opts.stack));
  // Row-major layout makes stacking a prefix reinterpretation.
  const int64_t dim = static_cast<int64_t>(opts.num_mel) * opts.stack;
  std::vector<double> v(raw.data().begin(), raw.data().begin() + stacked * dim);
  return Tensor({stacked, dim}, std::move(v));
}

int64_t ResampledLength(int64_t num_frames, double fps, double target_hz) {
  return std::max<int64_t>(
      1, static_cast<int64_t>(std::floor(num_frames * target_hz / fps + 1e-9)));
}

std::vector<int64_t> ResampleIndices(int64_t num_frames, double fps,
                                     double target_hz, int64_t out_frames) {
  if (num_frames <= 0) throw Error("cannot resample an empty video track");
  if (!(fps > 0.0) || !(target_hz > 0.0))
    throw Error("frame rates must be positive");
  std::vector<int64_t> idx(out_frames);
  for (int64_t k = 0; k < out_frames; ++k) {
    const double pos = static_cast<double>(k) * fps / target_hz;
    // Nearest frame; exact (or rounding-level) ties go to the earlier frame.
    int64_t j = static_cast<int64_t>(std::ceil(pos - 0.5 - 1e-9));
    idx[k] = std::clamp<int64_t>(j, 0, num_frames - 1);
  }
  return idx;
}

VideoTrack ResampleVideo(const VideoTrack &track, double target_hz,
                         int64_t out_frames) {
  if (track.num_frames <= 0) throw Error("cannot resample an empty video track");
  if (out_frames < 0)
    out_frames = ResampledLength(track.num_frames, track.fps, target_hz);
  const std::vector<int64_t> idx =
      ResampleIndices(track.num_frames, track.fps, target_hz, out_frames);
  VideoTrack out = track;
  out.fps = target_hz;
  out.num_frames = out_frames;
  const int64_t fs = track.frame_size();
  out.pixels.resize(out_frames * fs);
  for (int64_t k = 0; k < out_frames; ++k)
    std::copy_n(track.pixels.data() + idx[k] * fs, fs, out.pixels.data() + k * fs);
  return out;
}

double SignalPower(const std::vector<float> &samples) {
  if (samples.empty()) return 0.0;
  double total = 0.0;
  for (float s : samples) total += static_cast<double>(s) * s;
  return total / static_cast<double>(samples.size());
}

MixResult MixNoise(const AudioClip &signal, const AudioClip &noise,
                   double snr_db) {
  if (noise.samples.empty()) throw Error("noise clip is empty");
  const size_t n = signal.samples.size();
  std::vector<float> extended(n);
  for (size_t i = 0; i < n; ++i)
    extended[i] = noise.samples[i % noise.samples.size()];
  const double ps = SignalPower(signal.samples);
  const double pn = SignalPower(extended);
  if (!(ps > 0.0)) throw Error("signal has zero power; SNR is undefined");
  if (!(pn > 0.0)) throw Error("noise has zero power over the signal extent");
  MixResult result;
  result.gain = std::sqrt(ps / (pn * std::pow(10.0, snr_db / 10.0)));
  result.audio.sample_rate_hz = signal.sample_rate_hz;
  result.audio.samples.resize(n);
  size_t clipped = 0;
  for (size_t i = 0; i < n; ++i) {
    double v = signal.samples[i] + result.gain * extended[i];
    if (v > 1.0 || v < -1.0) {
      ++clipped;
      v = std::clamp(v, -1.0, 1.0);
    }
    result.audio.samples[i] = static_cast<float>(v);
  }
  result.clipped_fraction = n ? static_cast<double>(clipped) / n : 0.0;
  return result;
}

AudioClip SynthBabble(int64_t length, uint64_t seed) {
  if (length <= 0) throw Error("babble length must be positive");
  constexpr int kStreams = 6;
  std::vector<double> mix(length, 0.0);
  for (int s = 0; s < kStreams; ++s) {
    std::mt19937_64 rng(DeriveSeed(seed, {static_cast<uint64_t>(s)}));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double mod_hz = 3.0 + 3.0 * unit(rng);
    const double phase = 2.0 * std::numbers::pi * unit(rng);
    Biquad hp1 = Biquad::HighPass(100.0, M_SQRT1_2), hp2 = hp1;
    Biquad lp1 = Biquad::LowPass(4000.0, M_SQRT1_2), lp2 = lp1;
    for (int64_t i = 0; i < length; ++i) {
      double x = gauss(rng);
      x = lp2.Process(lp1.Process(hp2.Process(hp1.Process(x))));
      const double t = static_cast<double>(i) / kSampleRateHz;
      const double env =
          0.6 + 0.4 * std::sin(2.0 * std::numbers::pi * mod_hz * t + phase);
      mix[i] += env * x;
    }
  }
  double peak = 0.0;
  for (double v : mix) peak = std::max(peak, std::abs(v));
  AudioClip clip;
  clip.samples.resize(length);
  for (int64_t i = 0; i < length; ++i)
    clip.samples[i] = static_cast<float>(peak > 0 ? 0.5 * mix[i] / peak : 0.0);
  return clip;
}

std::vector<float> AudioTemplate(int token, const SynthOptions &opts) {
  if (token < 1 || token > opts.vocab_size)
    throw Error(fmt::format("token {} outside 1..{}", token, opts.vocab_size));
  std::mt19937_64 rng(DeriveSeed(opts.template_seed, {1, static_cast<uint64_t>(token)}));
  std::uniform_real_distribution<double> freq(150.0, 3800.0), amp(0.3, 1.0),
      ph(0.0, 2.0 * std::numbers::pi);
  constexpr int kTones = 3;
  double f[kTones], a[kTones], p[kTones];
  for (int i = 0; i < kTones; ++i) {
    f[i] = freq(rng);
    a[i] = amp(rng);
    p[i] = ph(rng);
  }
  const int n = opts.token_samples;
  const int fade = std::min(80, n / 4);
  std::vector<double> w(n);
  double peak = 0.0;
  for (int k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / kSampleRateHz;
    double v = 0.0;
    for (int i = 0; i < kTones; ++i)
      v += a[i] * std::sin(2.0 * std::numbers::pi * f[i] * t + p[i]);
    double g = 1.0;
    if (k < fade) g = 0.5 - 0.5 * std::cos(std::numbers::pi * k / fade);
    if (k >= n - fade) g = 0.5 - 0.5 * std::cos(std::numbers::pi * (n - 1 - k) / fade);
    w[k] = v * g;
    peak = std::max(peak, std::abs(w[k]));
  }
  std::vector<float> out(n);
  for (int k = 0; k < n; ++k) out[k] = static_cast<float>(0.5 * w[k] / peak);
  return out;
}

std::vector<float> VideoTemplate(int token, const SynthOptions &opts) {
  if (token < 1 || token > opts.vocab_size)
    throw Error(fmt::format("token {} outside 1..{}", token, opts.vocab_size));
  std::mt19937_64 rng(DeriveSeed(opts.template_seed, {2, static_cast<uint64_t>(token)}));
  std::uniform_real_distribution<double> pix(-0.8, 0.8);
  std::vector<float> img(opts.height * opts.width * opts.channels);
  for (float &v : img) v = static_cast<float>(pix(rng));
  return img;
}

SyntheticPair GenerateSyntheticPair(uint64_t seed, int num_tokens,
                                    const SynthOptions &opts) {
  if (num_tokens < 1) throw Error("synthetic pairs need at least one token");
  std::mt19937_64 rng(DeriveSeed(seed, {3}));
  std::uniform_int_distribution<int> symbol(1, opts.vocab_size);
  SyntheticPair pair;
  pair.tokens.resize(num_tokens);
  for (int &y : pair.tokens) y = symbol(rng);

  std::normal_distribution<double> audio_noise(0.0, 1.0), video_noise(0.0, 1.0);
  const int n = opts.token_samples;
  pair.audio.samples.resize(static_cast<size_t>(n) * num_tokens);
  for (int u = 0; u < num_tokens; ++u) {
    const std::vector<float> tpl = AudioTemplate(pair.tokens[u], opts);
    for (int k = 0; k < n; ++k) {
      double v = tpl[k];
      if (opts.audio_noise > 0) v += opts.audio_noise * audio_noise(rng);
      pair.audio.samples[static_cast<size_t>(u) * n + k] =
          static_cast<float>(std::clamp(v, -1.0, 1.0));
    }
  }

  VideoTrack &video = pair.video;
  video.height = opts.height;
  video.width = opts.width;
  video.channels = opts.channels;
  video.fps = opts.video_fps;
  video.num_frames = static_cast<int64_t>(num_tokens) * opts.frames_per_token;
  video.track_id = fmt::format("synth-{}", seed);
  const int64_t fs = video.frame_size();
  video.pixels.resize(video.num_frames * fs);
  for (int u = 0; u < num_tokens; ++u) {
    const std::vector<float> tpl = VideoTemplate(pair.tokens[u], opts);
    for (int r = 0; r < opts.frames_per_token; ++r) {
      float *dst = video.pixels.data() +
                   (static_cast<int64_t>(u) * opts.frames_per_token + r) * fs;
      for (int64_t i = 0; i < fs; ++i) {
        double v = tpl[i];
        if (opts.video_noise > 0) v += opts.video_noise * video_noise(rng);
        dst[i] = static_cast<float>(std::clamp(v, -1.0, 1.0));
      }
    }
  }
  return pair;
}

Tensor StackVideo(const std::vector<VideoTrack> &tracks, int64_t frames) {
  if (tracks.empty()) throw Error("no video tracks to stack");
  const VideoTrack &first = tracks[0];
  const int64_t fs = first.frame_size();
  std::vector<double> v(tracks.size() * frames * fs, 0.0);
  for (size_t m = 0; m < tracks.size(); ++m) {
    const VideoTrack &tr = tracks[m];
    if (tr.height != first.height || tr.width != first.width ||
        tr.channels != first.channels)
      throw Error("video tracks disagree on frame geometry");
    const int64_t n = std::min(frames, tr.num_frames);
    for (int64_t i = 0; i < n * fs; ++i) v[m * frames * fs + i] = tr.pixels[i];
  }
  return Tensor({static_cast<int64_t>(tracks.size()), frames, first.height,
                 first.width, first.channels},
                std::move(v));
}

FeatureBatch AssembleBatch(const std::vector<SyntheticPair> &pairs,
                           int64_t max_frames, const LogMelOptions &opts) {
  if (pairs.empty()) throw Error("cannot assemble an empty batch");
  const int64_t b = static_cast<int64_t>(pairs.size());
  std::vector<Tensor> feats;
  std::vector<VideoTrack> tracks;
  FeatureBatch batch;
  int64_t t_max = 0;
  for (const SyntheticPair &p : pairs) {
    Tensor f = LogMelFeatures(p.audio, opts);
    const int64_t t = std::min(f.dim(0), max_frames);
    tracks.push_back(ResampleVideo(p.video, kFeatureRateHz, t));
    feats.push_back(std::move(f));
    batch.t_lengths.push_back(t);
    batch.u_lengths.push_back(static_cast<int64_t>(p.tokens.size()));
    batch.targets.push_back(p.tokens);
    t_max = std::max(t_max, t);
  }
  const int64_t da = opts.feature_dim();
  std::vector<double> acoustic(b * t_max * da, 0.0);
  for (int64_t i = 0; i < b; ++i) {
    auto src = feats[i].data();
    std::copy_n(src.begin(), batch.t_lengths[i] * da,
                acoustic.begin() + i * t_max * da);
  }
  batch.acoustic = Tensor({b, t_max, da}, std::move(acoustic));
  batch.video = StackVideo(tracks, t_max);
  for (int64_t i = 0; i < b; ++i) batch.true_track.push_back(i);
  return batch;
}

void WriteFloat32(const std::string &path, const std::vector<float> &values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  for (float s : values) {
    uint32_t bits;
    std::memcpy(&bits, &s, 4);
    const unsigned char bytes[4] = {
        static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
        static_cast<unsigned char>(bits >> 16),
        static_cast<unsigned char>(bits >> 24)};
    out.write(reinterpret_cast<const char *>(bytes), 4);
  }
  if (!out) throw Error("failed writing '" + path + "'");
}

void WritePcm(const std::string &path, const AudioClip &clip) {
  WriteFloat32(path, clip.samples);
}

AudioClip ReadPcm(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() % 4 != 0)
    throw Error("'" + path + "' is not a whole number of float32 samples");
  AudioClip clip;
  clip.samples.resize(bytes.size() / 4);
  for (size_t i = 0; i < clip.samples.size(); ++i) {
    const uint32_t bits = uint32_t(bytes[4 * i]) | uint32_t(bytes[4 * i + 1]) << 8 |
                          uint32_t(bytes[4 * i + 2]) << 16 |
                          uint32_t(bytes[4 * i + 3]) << 24;
    std::memcpy(&clip.samples[i], &bits, 4);
  }
  return clip;
}

void WriteManifest(const std::string &path,
                   const std::vector<ManifestItem> &items) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  for (const ManifestItem &item : items) {
    nlohmann::ordered_json j;
    j["id"] = item.id;
    j["seed"] = item.seed;
    j["u"] = item.u;
    out << j.dump() << "\n";
  }
}

std::vector<ManifestItem> ReadManifest(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest '" + path + "'");
  std::vector<ManifestItem> items;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      items.push_back({j.at("id").get<std::string>(), j.at("seed").get<uint64_t>(),
                       j.at("u").get<int>()});
    } catch (const nlohmann::json::exception &e) {
      throw Error(fmt::format("{}:{}: bad manifest record: {}", path, lineno,
                              e.what()));
    }
  }
  return items;
}

}  // namespace avmtl
