// config.cc

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


#include "avmtl/config.h"

#include <fstream>
#include <set>

#include <fmt/format.h>

#include "avmtl/eval.h"

namespace avmtl {

void EvalConfig::Validate() const {
  if (items < 1) throw Error(fmt::format("eval.items must be positive, got {}", items));
  if (min_u < 1 || max_u < min_u)
    throw Error(fmt::format("eval: bad length range [{}, {}]", min_u, max_u));
  for (int n : tracks)
    if (n < 1 || n > items)
      throw Error(fmt::format("eval: cannot build {}-track sets from {} items", n, items));
  for (const std::string &n : noise) ParseNoiseLevel(n);
}

RunConfig RunConfig::Toy() { return RunConfig(); }

RunConfig RunConfig::Paper() {
  RunConfig c;
  c.model.frontend = FrontendConfig::Paper();
  c.model.synth.height = c.model.synth.width = 128;
  c.model.synth.channels = 3;
  c.model.synth.vocab_size = 127;
  c.model.encoder.num_layers = 14;
  c.model.encoder.num_heads = 8;
  c.model.encoder.head_dim = 64;
  c.model.encoder.model_dim = 1024;
  c.model.encoder.context_radius = 100;
  c.model.encoder.ff_dim = 4096;
  c.model.decoder.lstm_layers = 2;
  c.model.decoder.lstm_units = 2048;
  c.model.decoder.vocab_size = 128;
  c.model.decoder.joint_dim = 1024;
  c.train.steps = 200000;
  return c;
}

void RunConfig::Validate() const {
  model.Validate();
  train.Validate();
  eval.Validate();
  if (train.max_u > 170 || eval.max_u > 170)
    throw Error("utterances longer than 170 tokens exceed the 512-frame limit");
}

Json RunConfigToJson(const RunConfig &c) {
  Json j;
  const LogMelOptions &f = c.model.features;
  j["features"] = {{"window", f.window},     {"hop", f.hop},
                   {"fft_size", f.fft_size}, {"num_mel", f.num_mel},
                   {"low_hz", f.low_hz},     {"high_hz", f.high_hz},
                   {"log_floor", f.log_floor}, {"stack", f.stack}};
  const SynthOptions &s = c.model.synth;
  j["synth"] = {{"vocab_size", s.vocab_size},
                {"token_samples", s.token_samples},
                {"audio_noise", s.audio_noise},
                {"video_noise", s.video_noise},
                {"frames_per_token", s.frames_per_token},
                {"height", s.height},
                {"width", s.width},
                {"channels", s.channels},
                {"video_fps", s.video_fps},
                {"template_seed", s.template_seed}};
  Json layers = Json::array();
  for (const ConvLayerSpec &l : c.model.frontend.layers)
    layers.push_back({{"kt", l.kt},
                      {"kh", l.kh},
                      {"kw", l.kw},
                      {"out_channels", l.out_channels},
                      {"spatial_pool", l.spatial_pool},
                      {"norm_groups", l.norm_groups},
                      {"spatial_stride", l.spatial_stride}});
  j["frontend"] = {{"height", c.model.frontend.height},
                   {"width", c.model.frontend.width},
                   {"channels", c.model.frontend.channels},
                   {"layers", layers}};
  j["attention"] = {{"channels", c.model.query.channels},
                    {"kernel", c.model.query.kernel},
                    {"norm_groups", c.model.query.norm_groups}};
  const EncoderConfig &e = c.model.encoder;
  j["encoder"] = {{"num_layers", e.num_layers},   {"num_heads", e.num_heads},
                  {"head_dim", e.head_dim},       {"model_dim", e.model_dim},
                  {"context_radius", e.context_radius}, {"ff_dim", e.ff_dim}};
  const DecoderConfig &d = c.model.decoder;
  j["decoder"] = {{"lstm_layers", d.lstm_layers},
                  {"lstm_units", d.lstm_units},
                  {"vocab_size", d.vocab_size},
                  {"joint_dim", d.joint_dim}};
  const TrainConfig &t = c.train;
  j["train"] = {{"stage", StageName(t.stage)}, {"gamma", t.gamma},
                {"lr", t.lr},                  {"steps", t.steps},
                {"batch_size", t.batch_size},  {"seed", t.seed},
                {"dtype", DTypeName(t.dtype)}, {"min_u", t.min_u},
                {"max_u", t.max_u},            {"log_every", t.log_every}};
  j["eval"] = {{"dataset", c.eval.dataset}, {"items", c.eval.items},
               {"seed", c.eval.seed},       {"min_u", c.eval.min_u},
               {"max_u", c.eval.max_u},     {"tracks", c.eval.tracks},
               {"noise", c.eval.noise}};
  return j;
}

namespace {

// Reads the fields of one JSON object, then rejects whatever was not read.
class ObjectReader {
 public:
  ObjectReader(const Json &j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw Error(fmt::format("config: '{}' must be an object", path_));
  }

  template <typename T>
  void Read(const std::string &key, T *value) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      *value = it->template get<T>();
    } catch (const nlohmann::json::exception &) {
      throw Error(fmt::format("config: bad value for '{}': {}", Name(key), it->dump()));
    }
  }

  const Json *Child(const std::string &key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string Name(const std::string &key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void Finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key()))
        throw Error(fmt::format("config: unknown key '{}'", Name(it.key())));
  }

 private:
  const Json &j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename F>
void Section(ObjectReader &root, const std::string &key, F read) {
  if (const Json *j = root.Child(key)) {
    ObjectReader r(*j, key);
    read(r);
    r.Finish();
  }
}

}  // namespace

RunConfig RunConfigFromJson(const Json &doc) {
  ObjectReader root(doc, "");
  std::string preset = "toy";
  root.Read("preset", &preset);
  RunConfig c;
  if (preset == "paper")
    c = RunConfig::Paper();
  else if (preset != "toy")
    throw Error(fmt::format("config: unknown preset '{}'", preset));

  Section(root, "features", [&](ObjectReader &r) {
    LogMelOptions &f = c.model.features;
    r.Read("window", &f.window);
    r.Read("hop", &f.hop);
    r.Read("fft_size", &f.fft_size);
    r.Read("num_mel", &f.num_mel);
    r.Read("low_hz", &f.low_hz);
    r.Read("high_hz", &f.high_hz);
    r.Read("log_floor", &f.log_floor);
    r.Read("stack", &f.stack);
  });
  Section(root, "synth", [&](ObjectReader &r) {
    SynthOptions &s = c.model.synth;
    r.Read("vocab_size", &s.vocab_size);
    r.Read("token_samples", &s.token_samples);
    r.Read("audio_noise", &s.audio_noise);
    r.Read("video_noise", &s.video_noise);
    r.Read("frames_per_token", &s.frames_per_token);
    r.Read("height", &s.height);
    r.Read("width", &s.width);
    r.Read("channels", &s.channels);
    r.Read("video_fps", &s.video_fps);
    r.Read("template_seed", &s.template_seed);
  });
  Section(root, "frontend", [&](ObjectReader &r) {
    FrontendConfig &fe = c.model.frontend;
    r.Read("height", &fe.height);
    r.Read("width", &fe.width);
    r.Read("channels", &fe.channels);
    if (const Json *layers = r.Child("layers")) {
      if (!layers->is_array()) throw Error("config: 'frontend.layers' must be an array");
      fe.layers.clear();
      for (size_t i = 0; i < layers->size(); ++i) {
        ObjectReader lr((*layers)[i], fmt::format("frontend.layers[{}]", i));
        ConvLayerSpec l;
        lr.Read("kt", &l.kt);
        lr.Read("kh", &l.kh);
        lr.Read("kw", &l.kw);
        lr.Read("out_channels", &l.out_channels);
        lr.Read("spatial_pool", &l.spatial_pool);
        lr.Read("norm_groups", &l.norm_groups);
        lr.Read("spatial_stride", &l.spatial_stride);
        lr.Finish();
        fe.layers.push_back(l);
      }
    }
  });
  Section(root, "attention", [&](ObjectReader &r) {
    r.Read("channels", &c.model.query.channels);
    r.Read("kernel", &c.model.query.kernel);
    r.Read("norm_groups", &c.model.query.norm_groups);
  });
  Section(root, "encoder", [&](ObjectReader &r) {
    EncoderConfig &e = c.model.encoder;
    r.Read("num_layers", &e.num_layers);
    r.Read("num_heads", &e.num_heads);
    r.Read("head_dim", &e.head_dim);
    r.Read("model_dim", &e.model_dim);
    r.Read("context_radius", &e.context_radius);
    r.Read("ff_dim", &e.ff_dim);
  });
  Section(root, "decoder", [&](ObjectReader &r) {
    DecoderConfig &d = c.model.decoder;
    r.Read("lstm_layers", &d.lstm_layers);
    r.Read("lstm_units", &d.lstm_units);
    r.Read("vocab_size", &d.vocab_size);
    r.Read("joint_dim", &d.joint_dim);
  });
  Section(root, "train", [&](ObjectReader &r) {
    TrainConfig &t = c.train;
    std::string stage = StageName(t.stage), dtype = DTypeName(t.dtype);
    r.Read("stage", &stage);
    r.Read("gamma", &t.gamma);
    r.Read("lr", &t.lr);
    r.Read("steps", &t.steps);
    r.Read("batch_size", &t.batch_size);
    r.Read("seed", &t.seed);
    r.Read("dtype", &dtype);
    r.Read("min_u", &t.min_u);
    r.Read("max_u", &t.max_u);
    r.Read("log_every", &t.log_every);
    t.stage = ParseStage(stage);
    t.dtype = ParseDType(dtype);
  });
  Section(root, "eval", [&](ObjectReader &r) {
    EvalConfig &e = c.eval;
    r.Read("dataset", &e.dataset);
    r.Read("items", &e.items);
    r.Read("seed", &e.seed);
    r.Read("min_u", &e.min_u);
    r.Read("max_u", &e.max_u);
    r.Read("tracks", &e.tracks);
    r.Read("noise", &e.noise);
  });
  root.Finish();
  c.Validate();
  return c;
}

RunConfig LoadRunConfig(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config '" + path + "'");
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const nlohmann::json::exception &e) {
    throw Error(fmt::format("{}: {}", path, e.what()));
  }
  return RunConfigFromJson(doc);
}

}  // namespace avmtl
