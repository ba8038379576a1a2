// avmtl/features.h

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

// Input pipeline: log-mel featurization with frame stacking, nearest-neighbour
// video resampling, SNR-controlled noise mixing and the synthetic paired
// audio/video corpus used for desk-scale training and evaluation.

#ifndef AVMTL_FEATURES_H_
#define AVMTL_FEATURES_H_

#include <cstdint>
#include <string>
#include <vector>

#include "avmtl/tensor.h"

namespace avmtl {

inline constexpr int kSampleRateHz = 16000;
/// Rate of stacked acoustic feature vectors (one per 30 ms).
inline constexpr double kFeatureRateHz = 100.0 / 3.0;

struct AudioClip {
  std::vector<float> samples;
  int sample_rate_hz = kSampleRateHz;
};

/// Frames are stored contiguously as num_frames × height × width × channels.
struct VideoTrack {
  std::vector<float> pixels;
  int64_t num_frames = 0;
  int64_t height = 0, width = 0, channels = 0;
  double fps = kFeatureRateHz;
  std::string track_id;

  int64_t frame_size() const { return height * width * channels; }
};

struct LogMelOptions {
  int window = 400;  // 25 ms
  int hop = 160;     // 10 ms
  int fft_size = 512;
  int num_mel = 80;
  double low_hz = 0.0;
  double high_hz = 8000.0;
  double log_floor = 1e-6;
  int stack = 3;

  int feature_dim() const { return num_mel * stack; }
};

/// Triangular mel filterbank over the fft_size/2+1 magnitude bins, standard
/// (2595·log10(1 + f/700)) mel scale, no area normalization.  Row-major
/// num_mel × num_bins.
std::vector<double> MelFilterbank(const LogMelOptions &opts);
/// Centre frequency (Hz) of every filter, plus the two outer edges:
/// num_mel + 2 values.
std::vector<double> MelEdgeFrequencies(const LogMelOptions &opts);

/// Symmetric Hann window of the configured length.
std::vector<double> HannWindow(int length);

int64_t NumRawFrames(int64_t num_samples, const LogMelOptions &opts = {});

/// Unstacked log-mel matrix, raw_frames × num_mel.
Tensor RawLogMel(const AudioClip &clip, const LogMelOptions &opts = {});

/// Stacked features, T × (num_mel·stack) with T = raw_frames / stack
/// (remainder frames dropped).
Tensor LogMelFeatures(const AudioClip &clip, const LogMelOptions &opts = {});

/// Source frame index for every output frame: nearest input timestamp with
/// ties resolved toward the earlier frame, clamped to the last frame.
std::vector<int64_t> ResampleIndices(int64_t num_frames, double fps,
                                     double target_hz, int64_t out_frames);
/// Default output length floor(num_frames · target_hz / fps), at least 1.
int64_t ResampledLength(int64_t num_frames, double fps, double target_hz);

VideoTrack ResampleVideo(const VideoTrack &track,
                         double target_hz = kFeatureRateHz,
                         int64_t out_frames = -1);

struct MixResult {
  AudioClip audio;
  double gain = 0.0;
  double clipped_fraction = 0.0;
};

/// signal + g·noise with g chosen so the pre-clipping SNR equals `snr_db`;
/// noise is cycled when shorter than the signal.  Output clipped to [-1, 1].
MixResult MixNoise(const AudioClip &signal, const AudioClip &noise,
                   double snr_db);

/// Mean square of the samples.
double SignalPower(const std::vector<float> &samples);

/// Six band-passed (100–4000 Hz) Gaussian streams with syllable-rate
/// amplitude modulation, summed and normalized to peak 0.5.
AudioClip SynthBabble(int64_t length, uint64_t seed);

struct SynthOptions {
  int vocab_size = 16;          // non-blank symbols; tokens are 1..vocab_size
  int token_samples = 1440;     // 90 ms
  double audio_noise = 0.05;
  double video_noise = 0.1;
  int frames_per_token = 3;
  int64_t height = 16, width = 16, channels = 1;
  double video_fps = kFeatureRateHz;
  uint64_t template_seed = 0x5eed;
};

struct SyntheticPair {
  AudioClip audio;
  VideoTrack video;
  std::vector<int> tokens;
};

/// Per-symbol signature waveform (token_samples long).  Fixed per
/// (template_seed, token).
std::vector<float> AudioTemplate(int token, const SynthOptions &opts);
/// Per-symbol signature image (height × width × channels).
std::vector<float> VideoTemplate(int token, const SynthOptions &opts);

SyntheticPair GenerateSyntheticPair(uint64_t seed, int num_tokens,
                                    const SynthOptions &opts = {});

struct FeatureBatch {
  Tensor acoustic;  // B × T × Da
  Tensor video;     // M × T × H × W × C
  std::vector<int64_t> true_track;
  std::vector<std::vector<int>> targets;
  std::vector<int64_t> t_lengths;
  std::vector<int64_t> u_lengths;

  int64_t batch_size() const { return acoustic.dim(0); }
  int64_t num_tracks() const { return video.dim(0); }
  int64_t max_frames() const { return acoustic.dim(1); }
};

/// Features, synchronization and zero padding for matched pairs
/// (M = B, true_track[b] = b).  Items longer than max_frames are truncated.
FeatureBatch AssembleBatch(const std::vector<SyntheticPair> &pairs,
                           int64_t max_frames = 512,
                           const LogMelOptions &opts = {});

/// Stacks tracks (already at the feature rate) into an M × T × H × W × C
/// tensor: frames beyond a track's end are zero, extra frames are dropped.
Tensor StackVideo(const std::vector<VideoTrack> &tracks, int64_t frames);

// Headerless little-endian float32 PCM.
void WriteFloat32(const std::string &path, const std::vector<float> &values);
void WritePcm(const std::string &path, const AudioClip &clip);
AudioClip ReadPcm(const std::string &path);

struct ManifestItem {
  std::string id;
  uint64_t seed = 0;
  int u = 0;
};

void WriteManifest(const std::string &path, const std::vector<ManifestItem> &items);
std::vector<ManifestItem> ReadManifest(const std::string &path);

}  // namespace avmtl

#endif  // AVMTL_FEATURES_H_
