// avmtl/asr.h

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


// Transducer ASR branch: a limited-context pre-norm transformer encoder over
// the audio-visual features, an LSTM prediction network over the label
// history, an additive joint network and the RNN-T loss.  Symbol 0 is the
// blank; labels are 1..vocab_size-1.

#ifndef AVMTL_ASR_H_
#define AVMTL_ASR_H_

#include <cstdint>
#include <functional>
#include <vector>

#include "avmtl/params.h"
#include "avmtl/tensor.h"

namespace avmtl {

inline constexpr int kBlank = 0;

struct EncoderConfig {
  int num_layers = 2;
  int num_heads = 2;
  int head_dim = 8;
  int64_t model_dim = 32;
  int context_radius = 16;
  int64_t ff_dim = 64;

  void Validate() const;
};

struct DecoderConfig {
  int lstm_layers = 1;
  int64_t lstm_units = 32;
  int vocab_size = 17;
  int64_t joint_dim = 32;

  void Validate() const;
};

Tensor ConcatFeatures(const Tensor &acoustic, const Tensor &fused);

/// Fixed sinusoidal position table, T × d.
Tensor SinusoidalPositions(int64_t t, int64_t d, DType dtype);

/// Keep-mask for self-attention, B × T × T (1 = attend).  Keys beyond the
/// item's valid length are never attended; valid queries see keys within
/// `radius`; padded queries see every valid key (their outputs are unused).
std::vector<uint8_t> EncoderMask(int64_t t, const std::vector<int64_t> &valid_lengths,
                                 int radius);

void InitEncoder(const EncoderConfig &config, int64_t input_dim, uint64_t seed,
                 DType dtype, ParameterSet *params);

/// B × T × D → B × T × model_dim.  When `attention` is non-null it receives
/// each layer's attention weights (B × heads × T × T).
Tensor EncoderForward(const Tensor &features, const EncoderConfig &config,
                      const ParameterSet &params,
                      const std::vector<int64_t> &valid_lengths,
                      std::vector<Tensor> *attention = nullptr);

void InitPredictionNetwork(const DecoderConfig &config, uint64_t seed, DType dtype,
                           ParameterSet *params);

/// One LSTM cell update; gates are laid out (input, forget, cell, output).
/// Returns {h, c}.
std::pair<Tensor, Tensor> LstmCell(const Tensor &x, const Tensor &h, const Tensor &c,
                                   const Tensor &w_x, const Tensor &w_h,
                                   const Tensor &bias);

/// Position u of the output encodes blank, y_1..y_u.  Sequences shorter than
/// the longest are padded; padded positions are computed but meaningless.
/// Returns B × (U_max+1) × lstm_units.
Tensor PredictionForward(const std::vector<std::vector<int>> &targets,
                         const DecoderConfig &config, const ParameterSet &params);

void InitJoint(const DecoderConfig &config, int64_t enc_dim, uint64_t seed,
               DType dtype, ParameterSet *params);

/// log softmax(W_o · tanh(W_e·enc + W_p·pred + b) + b_o): B × T × (U+1) × V.
Tensor JointLogProbs(const Tensor &enc, const Tensor &pred, const ParameterSet &params);

/// Mean over the batch of −log P(y | x), by the forward-backward recursion.
/// Lattice entries outside [0, T_b) × [0, U_b] do not affect the result.
Tensor RnntLoss(const Tensor &lattice, const std::vector<std::vector<int>> &targets,
                const std::vector<int64_t> &t_lengths,
                const std::vector<int64_t> &u_lengths);

/// Per-item −log P(y | x) without recording (for reporting).
std::vector<double> RnntNegLogLikelihood(const Tensor &lattice,
                                         const std::vector<std::vector<int>> &targets,
                                         const std::vector<int64_t> &t_lengths,
                                         const std::vector<int64_t> &u_lengths);

/// Source of output distributions for greedy search: LogProbs(t) scores the
/// current label history at frame t; Emit extends the history.
class GreedyScorer {
 public:
  virtual ~GreedyScorer() = default;
  virtual std::vector<double> LogProbs(int64_t t) = 0;
  virtual void Emit(int token) = 0;
};

/// Frame-synchronous greedy search: at each frame, emit argmax labels until
/// blank wins or `max_symbols_per_step` labels were emitted, then advance.
/// Ties go to the lower symbol index.
std::vector<int> GreedySearch(int64_t num_frames, GreedyScorer *scorer,
                              int max_symbols_per_step = 4);

/// Greedy decoding of one encoded utterance (1 × T × d, first `valid`
/// frames) with the prediction and joint networks in `params`.
std::vector<int> GreedyDecode(const Tensor &enc, int64_t valid,
                              const DecoderConfig &config, const ParameterSet &params,
                              int max_symbols_per_step = 4);

}  // namespace avmtl

#endif  // AVMTL_ASR_H_
