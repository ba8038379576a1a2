// src/asr.cc

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


#include "avmtl/asr.h"

#include <cmath>
#include <limits>
#include <memory>

#include <fmt/format.h>

#include "avmtl/autodiff.h"
#include "avmtl/ops.h"
#include "avmtl/random.h"

namespace avmtl {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double LogAddExp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

std::string EncName(int layer, const char *what) {
  return fmt::format("encoder.L{}.{}", layer, what);
}

std::string PredName(int layer, const char *what) {
  return fmt::format("pred.L{}.{}", layer, what);
}

Tensor LayerNorm(const Tensor &x, const ParameterSet &p, const std::string &prefix) {
  return AddLastDim(MulLastDim(NormalizeLastDim(x, 1e-5), p.Get(prefix + ".scale")),
                    p.Get(prefix + ".shift"));
}

void AddLayerNorm(const std::string &prefix, int64_t d, DType dtype,
                  ParameterSet *params) {
  params->Add(prefix + ".scale", Tensor::Full({d}, 1.0, dtype));
  params->Add(prefix + ".shift", Tensor::Zeros({d}, dtype));
}

}  // namespace

void EncoderConfig::Validate() const {
  if (num_layers < 1 || num_heads < 1 || head_dim < 1 || model_dim < 1 ||
      ff_dim < 1)
    throw Error("encoder dimensions must be positive");
  if (context_radius < 1) throw Error("encoder context radius must be >= 1");
}

void DecoderConfig::Validate() const {
  if (lstm_layers < 1 || lstm_units < 1 || joint_dim < 1)
    throw Error("decoder dimensions must be positive");
  if (vocab_size < 2) throw Error("vocabulary must contain blank and one label");
}

Tensor ConcatFeatures(const Tensor &acoustic, const Tensor &fused) {
  if (acoustic.rank() != 3 || fused.rank() != 3 || acoustic.dim(0) != fused.dim(0) ||
      acoustic.dim(1) != fused.dim(1))
    throw Error(fmt::format("concat: acoustic {} and visual {} disagree on B or T",
                            ShapeString(acoustic.shape()), ShapeString(fused.shape())));
  return ConcatLastDim(acoustic, fused);
}

Tensor SinusoidalPositions(int64_t t, int64_t d, DType dtype) {
  std::vector<double> pe(t * d);
  for (int64_t p = 0; p < t; ++p)
    for (int64_t i = 0; i < d; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(i - i % 2) / d);
      pe[p * d + i] = i % 2 == 0 ? std::sin(p * rate) : std::cos(p * rate);
    }
  return Tensor({t, d}, std::move(pe), dtype);
}

std::vector<uint8_t> EncoderMask(int64_t t, const std::vector<int64_t> &valid_lengths,
                                 int radius) {
  const int64_t b = static_cast<int64_t>(valid_lengths.size());
  std::vector<uint8_t> mask(b * t * t, 0);
  for (int64_t bi = 0; bi < b; ++bi) {
    const int64_t valid = valid_lengths[bi];
    if (valid < 1 || valid > t)
      throw Error(fmt::format("encoder: valid length {} outside [1, {}]", valid, t));
    for (int64_t i = 0; i < t; ++i)
      for (int64_t j = 0; j < valid; ++j)
        if (i >= valid || std::abs(i - j) <= radius) mask[(bi * t + i) * t + j] = 1;
  }
  return mask;
}

void InitEncoder(const EncoderConfig &config, int64_t input_dim, uint64_t seed,
                 DType dtype, ParameterSet *params) {
  config.Validate();
  const int64_t d = config.model_dim, h = config.num_heads, e = config.head_dim;
  std::mt19937_64 rng(DeriveSeed(seed, {0xe0}));
  params->Add("encoder.in.weight", FanInUniform({input_dim, d}, input_dim, rng, dtype));
  params->Add("encoder.in.bias", Tensor::Zeros({d}, dtype));
  for (int l = 0; l < config.num_layers; ++l) {
    std::mt19937_64 lr(DeriveSeed(seed, {0xe1, static_cast<uint64_t>(l)}));
    AddLayerNorm(EncName(l, "ln1"), d, dtype, params);
    params->Add(EncName(l, "attn.wq"), FanInUniform({d, h, e}, d, lr, dtype));
    params->Add(EncName(l, "attn.wk"), FanInUniform({d, h, e}, d, lr, dtype));
    params->Add(EncName(l, "attn.wv"), FanInUniform({d, h, e}, d, lr, dtype));
    params->Add(EncName(l, "attn.wo"), FanInUniform({h, e, d}, h * e, lr, dtype));
    params->Add(EncName(l, "attn.bo"), Tensor::Zeros({d}, dtype));
    AddLayerNorm(EncName(l, "ln2"), d, dtype, params);
    params->Add(EncName(l, "ff.w1"), FanInUniform({d, config.ff_dim}, d, lr, dtype));
    params->Add(EncName(l, "ff.b1"), Tensor::Zeros({config.ff_dim}, dtype));
    params->Add(EncName(l, "ff.w2"),
                FanInUniform({config.ff_dim, d}, config.ff_dim, lr, dtype));
    params->Add(EncName(l, "ff.b2"), Tensor::Zeros({d}, dtype));
  }
  AddLayerNorm("encoder.ln_f", d, dtype, params);
}

Tensor EncoderForward(const Tensor &features, const EncoderConfig &config,
                      const ParameterSet &params,
                      const std::vector<int64_t> &valid_lengths,
                      std::vector<Tensor> *attention) {
  if (features.rank() != 3)
    throw Error("encoder expects B x T x D input, got " + ShapeString(features.shape()));
  const int64_t b = features.dim(0), t = features.dim(1), d = config.model_dim;
  const Tensor &w_in = params.Get("encoder.in.weight");
  if (w_in.dim(0) != features.dim(2) || w_in.dim(1) != d)
    throw Error(fmt::format("encoder: input projection {} does not map {} -> {}",
                            ShapeString(w_in.shape()), features.dim(2), d));
  if (static_cast<int64_t>(valid_lengths.size()) != b)
    throw Error("encoder: one valid length per batch item required");

  std::vector<uint8_t> mask = EncoderMask(t, valid_lengths, config.context_radius);
  std::vector<uint8_t> head_mask(b * config.num_heads * t * t);
  for (int64_t bi = 0; bi < b; ++bi)
    for (int hi = 0; hi < config.num_heads; ++hi)
      std::copy_n(mask.begin() + bi * t * t, t * t,
                  head_mask.begin() + (bi * config.num_heads + hi) * t * t);

  Tensor pos = SinusoidalPositions(t, d, features.dtype());
  Tensor x = AddLastDim(Contract(features, w_in, "btf,fd->btd"),
                        params.Get("encoder.in.bias"));
  x = Add(x, Stack(std::vector<Tensor>(b, pos), 0));
  const double scale = 1.0 / std::sqrt(static_cast<double>(config.head_dim));
  for (int l = 0; l < config.num_layers; ++l) {
    Tensor h = LayerNorm(x, params, EncName(l, "ln1"));
    Tensor q = Contract(h, params.Get(EncName(l, "attn.wq")), "btd,dhe->bthe");
    Tensor k = Contract(h, params.Get(EncName(l, "attn.wk")), "btd,dhe->bthe");
    Tensor v = Contract(h, params.Get(EncName(l, "attn.wv")), "btd,dhe->bthe");
    Tensor s = Scale(Contract(q, k, "bthe,bshe->bhts"), scale);
    Tensor a = SoftmaxLastDim(s, head_mask);
    if (attention) attention->push_back(a);
    Tensor ctx = Contract(a, v, "bhts,bshe->bthe");
    x = Add(x, AddLastDim(Contract(ctx, params.Get(EncName(l, "attn.wo")),
                                   "bthe,hed->btd"),
                          params.Get(EncName(l, "attn.bo"))));
    Tensor f = LayerNorm(x, params, EncName(l, "ln2"));
    f = Relu(AddLastDim(Contract(f, params.Get(EncName(l, "ff.w1")), "btd,df->btf"),
                        params.Get(EncName(l, "ff.b1"))));
    x = Add(x, AddLastDim(Contract(f, params.Get(EncName(l, "ff.w2")), "btf,fd->btd"),
                          params.Get(EncName(l, "ff.b2"))));
  }
  return LayerNorm(x, params, "encoder.ln_f");
}

void InitPredictionNetwork(const DecoderConfig &config, uint64_t seed, DType dtype,
                           ParameterSet *params) {
  config.Validate();
  const int64_t u = config.lstm_units;
  std::mt19937_64 rng(DeriveSeed(seed, {0xd0}));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> embed(config.vocab_size * u);
  for (double &x : embed) x = gauss(rng);
  params->Add("pred.embed", Tensor({config.vocab_size, u}, std::move(embed), dtype));
  for (int l = 0; l < config.lstm_layers; ++l) {
    std::mt19937_64 lr(DeriveSeed(seed, {0xd1, static_cast<uint64_t>(l)}));
    // Uniform(-1/sqrt(units), 1/sqrt(units)) as in common LSTM practice.
    const double bound = 1.0 / std::sqrt(static_cast<double>(u));
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<double> wx(u * 4 * u), wh(u * 4 * u), bias(4 * u, 0.0);
    for (double &x : wx) x = dist(lr);
    for (double &x : wh) x = dist(lr);
    for (int64_t i = u; i < 2 * u; ++i) bias[i] = 1.0;  // forget gate
    params->Add(PredName(l, "w_x"), Tensor({u, 4 * u}, std::move(wx), dtype));
    params->Add(PredName(l, "w_h"), Tensor({u, 4 * u}, std::move(wh), dtype));
    params->Add(PredName(l, "bias"), Tensor({4 * u}, std::move(bias), dtype));
  }
}

std::pair<Tensor, Tensor> LstmCell(const Tensor &x, const Tensor &h, const Tensor &c,
                                   const Tensor &w_x, const Tensor &w_h,
                                   const Tensor &bias) {
  const int64_t u = h.dim(-1);
  Tensor gates = AddLastDim(
      Add(Contract(x, w_x, "bi,ig->bg"), Contract(h, w_h, "bh,hg->bg")), bias);
  Tensor i = Sigmoid(SliceLastDim(gates, 0, u));
  Tensor f = Sigmoid(SliceLastDim(gates, u, u));
  Tensor g = Tanh(SliceLastDim(gates, 2 * u, u));
  Tensor o = Sigmoid(SliceLastDim(gates, 3 * u, u));
  Tensor c_new = Add(Mul(f, c), Mul(i, g));
  return {Mul(o, Tanh(c_new)), c_new};
}

namespace {

Tensor EmbedTokens(const Tensor &table, const std::vector<int> &tokens, int vocab) {
  const int64_t u = table.dim(1), n = static_cast<int64_t>(tokens.size());
  std::vector<int64_t> idx(n * u);
  for (int64_t i = 0; i < n; ++i) {
    if (tokens[i] < 0 || tokens[i] >= vocab)
      throw Error(fmt::format("token {} outside vocabulary of size {}", tokens[i], vocab));
    for (int64_t j = 0; j < u; ++j) idx[i * u + j] = tokens[i] * u + j;
  }
  return Gather(table, {n, u}, std::move(idx));
}

}  // namespace

Tensor PredictionForward(const std::vector<std::vector<int>> &targets,
                         const DecoderConfig &config, const ParameterSet &params) {
  if (targets.empty()) throw Error("prediction network: empty batch");
  const int64_t b = static_cast<int64_t>(targets.size());
  size_t u_max = 0;
  for (const auto &y : targets) {
    for (int tok : y)
      if (tok < 1 || tok >= config.vocab_size)
        throw Error(fmt::format("target token {} outside 1..{}", tok,
                                config.vocab_size - 1));
    u_max = std::max(u_max, y.size());
  }
  const Tensor &table = params.Get("pred.embed");
  const DType dt = table.dtype();
  std::vector<Tensor> h(config.lstm_layers), c(config.lstm_layers);
  for (int l = 0; l < config.lstm_layers; ++l)
    h[l] = c[l] = Tensor::Zeros({b, config.lstm_units}, dt);
  std::vector<Tensor> outputs;
  for (size_t u = 0; u <= u_max; ++u) {
    std::vector<int> step(b, kBlank);
    if (u > 0)
      for (int64_t bi = 0; bi < b; ++bi)
        if (u <= targets[bi].size()) step[bi] = targets[bi][u - 1];
    Tensor x = EmbedTokens(table, step, config.vocab_size);
    for (int l = 0; l < config.lstm_layers; ++l) {
      std::tie(h[l], c[l]) = LstmCell(x, h[l], c[l], params.Get(PredName(l, "w_x")),
                                      params.Get(PredName(l, "w_h")),
                                      params.Get(PredName(l, "bias")));
      x = h[l];
    }
    outputs.push_back(x);
  }
  return Stack(outputs, 1);
}

void InitJoint(const DecoderConfig &config, int64_t enc_dim, uint64_t seed, DType dtype,
               ParameterSet *params) {
  std::mt19937_64 rng(DeriveSeed(seed, {0xc0}));
  const int64_t j = config.joint_dim;
  params->Add("joint.enc", FanInUniform({enc_dim, j}, enc_dim, rng, dtype));
  params->Add("joint.pred", FanInUniform({config.lstm_units, j}, config.lstm_units, rng, dtype));
  params->Add("joint.bias", Tensor::Zeros({j}, dtype));
  params->Add("joint.out", FanInUniform({j, config.vocab_size}, j, rng, dtype));
  params->Add("joint.out_bias", Tensor::Zeros({config.vocab_size}, dtype));
}

Tensor JointLogProbs(const Tensor &enc, const Tensor &pred, const ParameterSet &params) {
  if (enc.rank() != 3 || pred.rank() != 3 || enc.dim(0) != pred.dim(0))
    throw Error(fmt::format("joint: encoder {} and prediction {} outputs disagree",
                            ShapeString(enc.shape()), ShapeString(pred.shape())));
  Tensor e = Contract(enc, params.Get("joint.enc"), "btd,dj->btj");
  Tensor p = AddLastDim(Contract(pred, params.Get("joint.pred"), "bud,dj->buj"),
                        params.Get("joint.bias"));
  Tensor z = Tanh(JointSum(e, p));
  Tensor logits = AddLastDim(Contract(z, params.Get("joint.out"), "btuj,jv->btuv"),
                             params.Get("joint.out_bias"));
  return LogSoftmaxLastDim(logits);
}

namespace {

struct LatticeView {
  const double *data;
  int64_t t, u1, v;
  double at(int64_t b, int64_t ti, int64_t ui, int64_t k) const {
    return data[((b * t + ti) * u1 + ui) * v + k];
  }
};

void CheckRnntInputs(const Tensor &lattice, const std::vector<std::vector<int>> &targets,
                     const std::vector<int64_t> &t_lengths,
                     const std::vector<int64_t> &u_lengths) {
  if (lattice.rank() != 4)
    throw Error("rnnt loss expects a B x T x (U+1) x V lattice, got " +
                ShapeString(lattice.shape()));
  const int64_t b = lattice.dim(0);
  if (static_cast<int64_t>(targets.size()) != b ||
      static_cast<int64_t>(t_lengths.size()) != b ||
      static_cast<int64_t>(u_lengths.size()) != b)
    throw Error("rnnt loss: targets and lengths must have one entry per item");
  for (int64_t i = 0; i < b; ++i) {
    if (t_lengths[i] < 1 || t_lengths[i] > lattice.dim(1))
      throw Error(fmt::format("rnnt loss: item {} has T = {} outside [1, {}]", i,
                              t_lengths[i], lattice.dim(1)));
    if (u_lengths[i] < 0 || u_lengths[i] + 1 > lattice.dim(2) ||
        u_lengths[i] > static_cast<int64_t>(targets[i].size()))
      throw Error(fmt::format("rnnt loss: item {} has U = {} incompatible with the "
                              "lattice or its targets",
                              i, u_lengths[i]));
    for (int64_t u = 0; u < u_lengths[i]; ++u)
      if (targets[i][u] < 1 || targets[i][u] >= lattice.dim(3))
        throw Error(fmt::format("rnnt loss: item {} label {} outside 1..{}", i,
                                targets[i][u], lattice.dim(3) - 1));
  }
#ifndef NDEBUG
  LatticeView lv{lattice.data().data(), lattice.dim(1), lattice.dim(2), lattice.dim(3)};
  for (int64_t i = 0; i < b; ++i)
    for (int64_t t = 0; t < t_lengths[i]; ++t)
      for (int64_t u = 0; u <= u_lengths[i]; ++u) {
        double lse = kNegInf;
        for (int64_t k = 0; k < lv.v; ++k) lse = LogAddExp(lse, lv.at(i, t, u, k));
        if (std::abs(lse) > 1e-5)
          throw Error(fmt::format("rnnt loss: lattice slice ({}, {}, {}) is not "
                                  "normalized (logsumexp {})",
                                  i, t, u, lse));
      }
#endif
}

// Forward-backward for one item.  Returns −log P and, when `grad` is
// non-null, adds scale · ∂(−log P)/∂lattice into it.
double RnntItem(const LatticeView &lv, int64_t b, const std::vector<int> &y,
                int64_t nt, int64_t nu, double scale, double *grad) {
  auto blank = [&](int64_t t, int64_t u) { return lv.at(b, t, u, kBlank); };
  auto label = [&](int64_t t, int64_t u) { return lv.at(b, t, u, y[u]); };
  const int64_t w = nu + 1;
  std::vector<double> alpha(nt * w, kNegInf), beta(nt * w, kNegInf);
  alpha[0] = 0.0;
  for (int64_t t = 0; t < nt; ++t)
    for (int64_t u = 0; u <= nu; ++u) {
      if (t == 0 && u == 0) continue;
      double a = kNegInf;
      if (t > 0) a = alpha[(t - 1) * w + u] + blank(t - 1, u);
      if (u > 0) a = LogAddExp(a, alpha[t * w + u - 1] + label(t, u - 1));
      alpha[t * w + u] = a;
    }
  const double log_p = alpha[(nt - 1) * w + nu] + blank(nt - 1, nu);
  if (!grad) return -log_p;

  beta[(nt - 1) * w + nu] = blank(nt - 1, nu);
  for (int64_t t = nt - 1; t >= 0; --t)
    for (int64_t u = nu; u >= 0; --u) {
      if (t == nt - 1 && u == nu) continue;
      double bt = kNegInf;
      if (t + 1 < nt) bt = beta[(t + 1) * w + u] + blank(t, u);
      if (u < nu) bt = LogAddExp(bt, beta[t * w + u + 1] + label(t, u));
      beta[t * w + u] = bt;
    }
  for (int64_t t = 0; t < nt; ++t)
    for (int64_t u = 0; u <= nu; ++u) {
      const double a = alpha[t * w + u];
      const int64_t base = ((b * lv.t + t) * lv.u1 + u) * lv.v;
      const double next_blank = t + 1 < nt ? beta[(t + 1) * w + u]
                                           : (u == nu ? 0.0 : kNegInf);
      grad[base + kBlank] -= scale * std::exp(a + blank(t, u) + next_blank - log_p);
      if (u < nu)
        grad[base + y[u]] -=
            scale * std::exp(a + label(t, u) + beta[t * w + u + 1] - log_p);
    }
  return -log_p;
}

}  // namespace

std::vector<double> RnntNegLogLikelihood(const Tensor &lattice,
                                         const std::vector<std::vector<int>> &targets,
                                         const std::vector<int64_t> &t_lengths,
                                         const std::vector<int64_t> &u_lengths) {
  CheckRnntInputs(lattice, targets, t_lengths, u_lengths);
  LatticeView lv{lattice.data().data(), lattice.dim(1), lattice.dim(2), lattice.dim(3)};
  std::vector<double> out(lattice.dim(0));
  for (int64_t b = 0; b < lattice.dim(0); ++b)
    out[b] = RnntItem(lv, b, targets[b], t_lengths[b], u_lengths[b], 0.0, nullptr);
  return out;
}

Tensor RnntLoss(const Tensor &lattice, const std::vector<std::vector<int>> &targets,
                const std::vector<int64_t> &t_lengths,
                const std::vector<int64_t> &u_lengths) {
  CheckRnntInputs(lattice, targets, t_lengths, u_lengths);
  const int64_t nb = lattice.dim(0);
  LatticeView lv{lattice.data().data(), lattice.dim(1), lattice.dim(2), lattice.dim(3)};
  const bool need_grad = ActiveTape() != nullptr && lattice.requires_grad();
  auto grad = std::make_shared<std::vector<double>>(need_grad ? lattice.numel() : 0, 0.0);
  double total = 0.0;
  for (int64_t b = 0; b < nb; ++b)
    total += RnntItem(lv, b, targets[b], t_lengths[b], u_lengths[b], 1.0 / nb,
                      need_grad ? grad->data() : nullptr);
  return RecordOp("rnnt_loss", {lattice}, {}, {total / nb}, lattice.dtype(),
                  [grad](auto g, auto, auto gin) {
                    auto &out = *gin[0];
                    for (size_t i = 0; i < out.size(); ++i) out[i] += g[0] * (*grad)[i];
                  });
}

std::vector<int> GreedySearch(int64_t num_frames, GreedyScorer *scorer,
                              int max_symbols_per_step) {
  std::vector<int> out;
  for (int64_t t = 0; t < num_frames; ++t) {
    for (int emitted = 0; emitted < max_symbols_per_step; ++emitted) {
      const std::vector<double> lp = scorer->LogProbs(t);
      int best = 0;
      for (int k = 1; k < static_cast<int>(lp.size()); ++k)
        if (lp[k] > lp[best]) best = k;
      if (best == kBlank) break;
      scorer->Emit(best);
      out.push_back(best);
    }
  }
  return out;
}

namespace {

class ModelScorer : public GreedyScorer {
 public:
  ModelScorer(const Tensor &enc, const DecoderConfig &config, const ParameterSet &params)
      : config_(config), params_(params) {
    enc_proj_ = Contract(enc, params.Get("joint.enc"), "btd,dj->btj");
    const DType dt = enc.dtype();
    h_.resize(config.lstm_layers);
    c_.resize(config.lstm_layers);
    for (int l = 0; l < config.lstm_layers; ++l)
      h_[l] = c_[l] = Tensor::Zeros({1, config.lstm_units}, dt);
    Emit(kBlank);
  }

  std::vector<double> LogProbs(int64_t t) override {
    Tensor z = Tanh(Add(Select(enc_proj_, 1, t), pred_proj_));
    Tensor lp = LogSoftmaxLastDim(
        AddLastDim(Contract(z, params_.Get("joint.out"), "bj,jv->bv"),
                   params_.Get("joint.out_bias")));
    return {lp.data().begin(), lp.data().end()};
  }

  void Emit(int token) override {
    Tensor x = EmbedTokens(params_.Get("pred.embed"), {token}, config_.vocab_size);
    for (int l = 0; l < config_.lstm_layers; ++l) {
      std::tie(h_[l], c_[l]) = LstmCell(x, h_[l], c_[l], params_.Get(PredName(l, "w_x")),
                                        params_.Get(PredName(l, "w_h")),
                                        params_.Get(PredName(l, "bias")));
      x = h_[l];
    }
    pred_proj_ = AddLastDim(Contract(x, params_.Get("joint.pred"), "bd,dj->bj"),
                            params_.Get("joint.bias"));
  }

 private:
  const DecoderConfig &config_;
  const ParameterSet &params_;
  Tensor enc_proj_, pred_proj_;
  std::vector<Tensor> h_, c_;
};

}  // namespace

std::vector<int> GreedyDecode(const Tensor &enc, int64_t valid,
                              const DecoderConfig &config, const ParameterSet &params,
                              int max_symbols_per_step) {
  if (enc.rank() != 3 || enc.dim(0) != 1)
    throw Error("greedy decoding expects a single 1 x T x d utterance");
  if (valid < 0 || valid > enc.dim(1))
    throw Error(fmt::format("greedy decoding: {} valid frames of {}", valid, enc.dim(1)));
  NoGradScope no_grad;
  ModelScorer scorer(enc, config, params);
  return GreedySearch(valid, &scorer, max_symbols_per_step);
}

}  // namespace avmtl
