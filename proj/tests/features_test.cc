// tests/features_test.cc

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
#include <complex>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <random>

#include "doctest.h"

#include "avmtl/features.h"

namespace avmtl {
namespace {

constexpr double kPi = std::numbers::pi;

AudioClip Sine(double hz, int64_t n, double amp = 0.5) {
  AudioClip clip;
  clip.samples.resize(n);
  for (int64_t i = 0; i < n; ++i)
    clip.samples[i] =
        static_cast<float>(amp * std::sin(2.0 * kPi * hz * i / kSampleRateHz));
  return clip;
}

// Naive O(N^2) DFT magnitude of a zero-padded frame.
std::vector<double> DftMagnitude(const std::vector<double> &x, int n_fft) {
  std::vector<double> mag(n_fft / 2 + 1);
  for (int k = 0; k <= n_fft / 2; ++k) {
    std::complex<long double> acc = 0;
    for (size_t n = 0; n < x.size(); ++n) {
      long double ang = -2.0L * std::numbers::pi_v<long double> * k * n / n_fft;
      acc += std::complex<long double>(x[n] * std::cos(ang), x[n] * std::sin(ang));
    }
    mag[k] = static_cast<double>(std::abs(acc));
  }
  return mag;
}

// Filterbank built from the textbook definition, independent of the library.
std::vector<std::vector<double>> OracleFilterbank(double *centers_out) {
  auto mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
  auto hz = [](double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); };
  double pts[82];
  for (int i = 0; i < 82; ++i) pts[i] = hz(mel(8000.0) * i / 81.0);
  std::vector<std::vector<double>> fb(80, std::vector<double>(257, 0.0));
  for (int m = 0; m < 80; ++m) {
    centers_out[m] = pts[m + 1];
    for (int k = 0; k < 257; ++k) {
      double f = k * 16000.0 / 512.0;
      double up = (f - pts[m]) / (pts[m + 1] - pts[m]);
      double down = (pts[m + 2] - f) / (pts[m + 2] - pts[m + 1]);
      fb[m][k] = std::max(0.0, std::min(up, down));
    }
  }
  return fb;
}

TEST_CASE("logmel of silence is the log floor everywhere") {
  AudioClip clip;
  clip.samples.assign(16000, 0.0f);
  Tensor f = LogMelFeatures(clip);
  CHECK(f.dim(1) == 240);
  for (double v : f.data()) CHECK(v == doctest::Approx(std::log(1e-6)).epsilon(1e-12));
  CHECK(std::log(1e-6) == doctest::Approx(-13.8155).epsilon(1e-5));
}

TEST_CASE("logmel framing arithmetic") {
  CHECK(NumRawFrames(16000) == (16000 - 400) / 160 + 1);
  CHECK(NumRawFrames(16000) == 98);
  AudioClip clip = Sine(440.0, 16000);
  CHECK(RawLogMel(clip).dim(0) == 98);
  Tensor f = LogMelFeatures(clip);
  CHECK(f.dim(0) == 32);
  CHECK(f.dim(1) == 240);
  // Exactly one window is one raw frame, which stacks to nothing.
  AudioClip one = Sine(440.0, 400);
  CHECK(RawLogMel(one).dim(0) == 1);
  CHECK_THROWS_AS(LogMelFeatures(one), Error);
  AudioClip short_clip = Sine(440.0, 399);
  CHECK_THROWS_AS(RawLogMel(short_clip), Error);
}

TEST_CASE("stacking concatenates consecutive raw frames and drops the remainder") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<float> u(-0.9f, 0.9f);
  AudioClip clip;
  clip.samples.resize(400 + 160 * 10);  // 11 raw frames -> 3 stacked, 2 dropped
  for (float &s : clip.samples) s = u(rng);
  Tensor raw = RawLogMel(clip);
  Tensor st = LogMelFeatures(clip);
  REQUIRE(raw.dim(0) == 11);
  REQUIRE(st.dim(0) == 3);
  for (int t = 0; t < 3; ++t)
    for (int j = 0; j < 3; ++j)
      for (int m = 0; m < 80; ++m)
        CHECK(st.at({t, j * 80 + m}) == raw.at({3 * t + j, m}));
}

TEST_CASE("logmel matches a direct DFT and filterbank oracle") {
  AudioClip clip = Sine(1000.0, 4000);
  Tensor raw = RawLogMel(clip);
  double centers[80];
  auto fb = OracleFilterbank(centers);
  for (int frame : {0, 7, 22}) {
    std::vector<double> x(400);
    for (int n = 0; n < 400; ++n)
      x[n] = clip.samples[frame * 160 + n] * (0.5 - 0.5 * std::cos(2 * kPi * n / 399));
    auto mag = DftMagnitude(x, 512);
    int best = 0;
    double best_e = -1;
    for (int m = 0; m < 80; ++m) {
      double e = 0;
      for (int k = 0; k < 257; ++k) e += fb[m][k] * mag[k];
      CHECK(raw.at({frame, m}) == doctest::Approx(std::log(e + 1e-6)).epsilon(1e-9));
      if (e > best_e) best_e = e, best = m;
    }
    // Library argmax agrees with the oracle and sits on 1 kHz.
    int lib_best = 0;
    for (int m = 1; m < 80; ++m)
      if (raw.at({frame, m}) > raw.at({frame, lib_best})) lib_best = m;
    CHECK(lib_best == best);
    double lo = best == 0 ? 0.0 : centers[best - 1];
    double hi = best == 79 ? 8000.0 : centers[best + 1];
    CHECK(lo < 1000.0);
    CHECK(hi > 1000.0);
  }
  auto edges = MelEdgeFrequencies({});
  REQUIRE(edges.size() == 82);
  for (int m = 0; m < 80; ++m) CHECK(edges[m + 1] == doctest::Approx(centers[m]));
}

TEST_CASE("logmel is finite for any input in range") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  AudioClip clip;
  clip.samples.resize(8000);
  for (float &s : clip.samples) s = u(rng);
  for (int i = 0; i < 500; ++i) clip.samples[i] = 1.0f;
  Tensor f = LogMelFeatures(clip);
  for (double v : f.data()) CHECK(std::isfinite(v));
}

TEST_CASE("logmel rejects other sample rates") {
  AudioClip clip = Sine(100.0, 1000);
  clip.sample_rate_hz = 8000;
  CHECK_THROWS_AS(RawLogMel(clip), Error);
}

// Nearest timestamp by exhaustive search; earlier frame on ties.
std::vector<int64_t> TimestampOracle(int64_t n, double fps, double target,
                                     int64_t out) {
  std::vector<int64_t> idx(out);
  for (int64_t k = 0; k < out; ++k) {
    const double t = k / target;
    int64_t best = 0;
    double best_d = 1e300;
    for (int64_t j = 0; j < n; ++j) {
      double d = std::abs(j / fps - t);
      if (d < best_d - 1e-12) best_d = d, best = j;
    }
    idx[k] = best;
  }
  return idx;
}

TEST_CASE("resample indices") {
  SUBCASE("identity") {
    auto idx = ResampleIndices(17, kFeatureRateHz, kFeatureRateHz, 17);
    for (int64_t k = 0; k < 17; ++k) CHECK(idx[k] == k);
  }
  SUBCASE("half rate doubles every frame") {
    auto idx = ResampleIndices(10, kFeatureRateHz / 2, kFeatureRateHz, 20);
    for (int64_t k = 0; k < 20; ++k) CHECK(idx[k] == k / 2);
  }
  SUBCASE("30 fps to the feature rate") {
    CHECK(ResampledLength(30, 30.0, kFeatureRateHz) == 33);
    auto idx = ResampleIndices(30, 30.0, kFeatureRateHz, 33);
    auto oracle = TimestampOracle(30, 30.0, kFeatureRateHz, 33);
    CHECK(idx == oracle);
    CHECK(idx.back() == 29);
  }
  SUBCASE("25 fps and clamping at the end") {
    auto idx = ResampleIndices(25, 25.0, kFeatureRateHz, 40);
    CHECK(idx == TimestampOracle(25, 25.0, kFeatureRateHz, 40));
    CHECK(idx.back() == 24);
  }
  CHECK_THROWS_AS(ResampleIndices(0, 30.0, kFeatureRateHz, 3), Error);
}

TEST_CASE("resample video copies frames and ignores content for length") {
  VideoTrack tr;
  tr.height = 2;
  tr.width = 2;
  tr.channels = 1;
  tr.fps = 25.0;
  tr.num_frames = 25;
  tr.pixels.resize(25 * 4);
  for (int i = 0; i < 25 * 4; ++i) tr.pixels[i] = static_cast<float>(i / 4) / 25.0f;
  VideoTrack out = ResampleVideo(tr);
  auto idx = ResampleIndices(25, 25.0, kFeatureRateHz, out.num_frames);
  CHECK(out.num_frames == 33);
  for (int64_t k = 0; k < out.num_frames; ++k)
    CHECK(out.pixels[k * 4 + 3] == tr.pixels[idx[k] * 4]);
  VideoTrack other = tr;
  std::fill(other.pixels.begin(), other.pixels.end(), -0.3f);
  CHECK(ResampleVideo(other).num_frames == out.num_frames);
  VideoTrack empty;
  CHECK_THROWS_AS(ResampleVideo(empty), Error);
}

AudioClip RandomClip(int64_t n, uint64_t seed, double amp) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-amp, amp);
  AudioClip c;
  c.samples.resize(n);
  for (float &s : c.samples) s = static_cast<float>(u(rng));
  return c;
}

TEST_CASE("mix noise gains") {
  AudioClip a = RandomClip(4000, 1, 0.3);
  AudioClip b = a;
  std::reverse(b.samples.begin(), b.samples.end());  // same power
  CHECK(MixNoise(a, b, 0.0).gain == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(MixNoise(a, b, 20.0).gain == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("mix noise hits the requested SNR") {
  AudioClip s = RandomClip(16000, 5, 0.2);
  AudioClip n = SynthBabble(7000, 9);  // shorter: cycled
  for (double snr : {0.0, 10.0, 20.0}) {
    MixResult r = MixNoise(s, n, snr);
    CHECK(r.clipped_fraction == 0.0);
    double ps = 0, pn = 0;
    for (size_t i = 0; i < s.samples.size(); ++i) {
      double noise = static_cast<double>(r.audio.samples[i]) - s.samples[i];
      ps += static_cast<double>(s.samples[i]) * s.samples[i];
      pn += noise * noise;
    }
    CHECK(std::abs(10.0 * std::log10(ps / pn) - snr) < 0.01);
  }
}

TEST_CASE("mix noise clips and reports") {
  AudioClip s = RandomClip(1000, 2, 0.9);
  AudioClip n = RandomClip(1000, 3, 0.9);
  MixResult r = MixNoise(s, n, -10.0);
  CHECK(r.clipped_fraction > 0.0);
  for (float v : r.audio.samples) CHECK(std::abs(v) <= 1.0f);
}

TEST_CASE("mix noise errors") {
  AudioClip s = RandomClip(100, 2, 0.5);
  AudioClip zero;
  zero.samples.assign(100, 0.0f);
  CHECK_THROWS_AS(MixNoise(s, zero, 0.0), Error);
  CHECK_THROWS_AS(MixNoise(zero, s, 0.0), Error);
}

TEST_CASE("babble determinism, band and independence") {
  AudioClip a = SynthBabble(16000, 42), b = SynthBabble(16000, 42);
  CHECK(a.samples == b.samples);
  double peak = 0;
  for (float v : a.samples) peak = std::max(peak, static_cast<double>(std::abs(v)));
  CHECK(peak == doctest::Approx(0.5).epsilon(1e-6));

  // Spectral centroid from a direct DFT of a 2048-sample excerpt.
  std::vector<double> x(a.samples.begin() + 4000, a.samples.begin() + 6048);
  auto mag = DftMagnitude(x, 2048);
  double num = 0, den = 0;
  for (size_t k = 0; k < mag.size(); ++k) {
    double p = mag[k] * mag[k];
    num += p * k * 16000.0 / 2048.0;
    den += p;
  }
  double centroid = num / den;
  CHECK(centroid > 100.0);
  CHECK(centroid < 4000.0);

  AudioClip c = SynthBabble(16000, 43);
  double ma = 0, mc = 0;
  for (int i = 0; i < 16000; ++i) ma += a.samples[i], mc += c.samples[i];
  ma /= 16000, mc /= 16000;
  double sac = 0, saa = 0, scc = 0;
  for (int i = 0; i < 16000; ++i) {
    double da = a.samples[i] - ma, dc = c.samples[i] - mc;
    sac += da * dc, saa += da * da, scc += dc * dc;
  }
  CHECK(std::abs(sac / std::sqrt(saa * scc)) < 0.1);
  CHECK_THROWS_AS(SynthBabble(0, 1), Error);
}

TEST_CASE("synthetic pairs are deterministic and well formed") {
  SyntheticPair p = GenerateSyntheticPair(77, 6), q = GenerateSyntheticPair(77, 6);
  CHECK(p.tokens == q.tokens);
  CHECK(p.audio.samples == q.audio.samples);
  CHECK(p.video.pixels == q.video.pixels);
  CHECK(p.tokens.size() == 6);
  for (int y : p.tokens) {
    CHECK(y >= 1);
    CHECK(y <= 16);
  }
  const double seconds = static_cast<double>(p.audio.samples.size()) / kSampleRateHz;
  CHECK(std::abs(seconds - 6 * 0.09) <= 0.01);
  CHECK(p.video.num_frames == 18);
  CHECK(p.video.frame_size() == 256);
  for (float v : p.video.pixels) CHECK(std::abs(v) <= 1.0f);
  for (float v : p.audio.samples) CHECK(std::abs(v) <= 1.0f);
  CHECK(GenerateSyntheticPair(78, 6).audio.samples != p.audio.samples);
  CHECK_THROWS_AS(GenerateSyntheticPair(1, 0), Error);
}

TEST_CASE("clean synthetic audio decodes by nearest template") {
  SynthOptions clean;
  clean.audio_noise = 0.0;
  clean.video_noise = 0.0;
  for (uint64_t seed : {1, 2, 3}) {
    SyntheticPair p = GenerateSyntheticPair(seed, 8, clean);
    for (size_t u = 0; u < p.tokens.size(); ++u) {
      int best = 0;
      double best_d = 1e300;
      for (int tok = 1; tok <= 16; ++tok) {
        auto tpl = AudioTemplate(tok, clean);
        double d = 0;
        for (int k = 0; k < clean.token_samples; ++k) {
          double e = p.audio.samples[u * clean.token_samples + k] - tpl[k];
          d += e * e;
        }
        if (d < best_d) best_d = d, best = tok;
      }
      CHECK(best == p.tokens[u]);
    }
  }
}

TEST_CASE("video signatures separate tokens beyond the noise floor") {
  SynthOptions opts;
  // Two single-token pairs with different symbols.
  SyntheticPair a, b;
  uint64_t seed = 100;
  a = GenerateSyntheticPair(seed, 1, opts);
  do b = GenerateSyntheticPair(++seed, 1, opts);
  while (b.tokens[0] == a.tokens[0]);
  const int64_t fs = a.video.frame_size();
  auto dist = [&](const float *x, const float *y) {
    double d = 0;
    for (int64_t i = 0; i < fs; ++i) d += (x[i] - y[i]) * (x[i] - y[i]);
    return std::sqrt(d);
  };
  double within = dist(a.video.pixels.data(), a.video.pixels.data() + fs);
  double across = dist(a.video.pixels.data(), b.video.pixels.data());
  CHECK(across > 2.0 * within);
}

SyntheticPair PairWithFrames(int64_t stacked, uint64_t seed) {
  SyntheticPair p = GenerateSyntheticPair(seed, 2);
  p.audio.samples.resize(400 + 160 * (3 * stacked - 1), 0.01f);
  p.video.num_frames = stacked;
  p.video.pixels.resize(stacked * p.video.frame_size(), 0.2f);
  return p;
}

TEST_CASE("assemble batch") {
  SUBCASE("single item") {
    FeatureBatch b = AssembleBatch({GenerateSyntheticPair(1, 4)});
    CHECK(b.batch_size() == 1);
    CHECK(b.num_tracks() == 1);
    CHECK(b.true_track == std::vector<int64_t>{0});
    CHECK(b.video.dim(1) == b.max_frames());
  }
  SUBCASE("padding") {
    FeatureBatch b = AssembleBatch({PairWithFrames(10, 1), PairWithFrames(20, 2)});
    CHECK(b.max_frames() == 20);
    CHECK(b.t_lengths == std::vector<int64_t>{10, 20});
    CHECK(b.true_track == std::vector<int64_t>{0, 1});
    CHECK(b.u_lengths == std::vector<int64_t>{2, 2});
    for (int64_t t = 10; t < 20; ++t) {
      CHECK(b.acoustic.at({0, t, 5}) == 0.0);
      CHECK(b.video.at({0, t, 3, 3, 0}) == 0.0);
    }
    CHECK(b.acoustic.at({0, 9, 5}) != 0.0);
    CHECK(b.video.at({0, 9, 3, 3, 0}) != 0.0);
  }
  SUBCASE("truncation to 512") {
    SyntheticPair p = GenerateSyntheticPair(5, 180);
    CHECK(LogMelFeatures(p.audio).dim(0) > 512);
    FeatureBatch b = AssembleBatch({p});
    CHECK(b.max_frames() == 512);
    CHECK(b.t_lengths[0] == 512);
    CHECK(b.targets[0] == p.tokens);
  }
  CHECK_THROWS_AS(AssembleBatch({}), Error);
}

TEST_CASE("pcm and manifest round trips") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "avmtl_features_test";
  fs::create_directories(dir);
  AudioClip clip = RandomClip(1234, 8, 0.7);
  WritePcm((dir / "a.pcm").string(), clip);
  CHECK(fs::file_size(dir / "a.pcm") == 1234 * 4);
  CHECK(ReadPcm((dir / "a.pcm").string()).samples == clip.samples);

  std::vector<ManifestItem> items = {{"x0", 1, 3}, {"x1", 18446744073709551615ULL, 9}};
  WriteManifest((dir / "m.jsonl").string(), items);
  auto back = ReadManifest((dir / "m.jsonl").string());
  REQUIRE(back.size() == 2);
  CHECK(back[1].id == "x1");
  CHECK(back[1].seed == items[1].seed);
  CHECK(back[1].u == 9);

  FILE *f = std::fopen((dir / "bad.jsonl").string().c_str(), "w");
  std::fputs("{\"id\": \"a\"}\n", f);
  std::fclose(f);
  CHECK_THROWS_AS(ReadManifest((dir / "bad.jsonl").string()), Error);
  CHECK_THROWS_AS(ReadPcm((dir / "missing.pcm").string()), Error);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace avmtl
