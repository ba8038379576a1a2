// src/checkpoint.cc

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


#include "avmtl/checkpoint.h"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace avmtl {

namespace {

using Kind = CheckpointError::Kind;

template <typename T>
void PutLe(std::string *out, T value) {
  for (size_t i = 0; i < sizeof(T); ++i)
    out->push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(const std::string &bytes, const std::string &origin)
      : bytes_(bytes), origin_(origin) {}

  template <typename T>
  T Le(const char *what) {
    Need(sizeof(T), what);
    T v = 0;
    for (size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return v;
  }

  std::string Bytes(size_t n, const char *what) {
    Need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool AtEnd() const { return pos_ == bytes_.size(); }

 private:
  void Need(size_t n, const char *what) {
    if (bytes_.size() - pos_ < n)
      throw CheckpointError(Kind::kTruncated,
                            fmt::format("checkpoint {} is truncated while reading {} "
                                        "at byte {}",
                                        origin_, what, pos_));
  }
  const std::string &bytes_;
  const std::string &origin_;
  size_t pos_ = 0;
};

}  // namespace

std::string SerializeCheckpoint(const ParameterSet &params) {
  std::string out = "AVMT";
  PutLe<uint32_t>(&out, kCheckpointVersion);
  PutLe<uint32_t>(&out, static_cast<uint32_t>(params.size()));
  for (const auto &[name, t] : params) {
    PutLe<uint32_t>(&out, static_cast<uint32_t>(name.size()));
    out += name;
    out.push_back(static_cast<char>(t.dtype()));
    out.push_back(static_cast<char>(t.rank()));
    for (int64_t d : t.shape()) PutLe<uint64_t>(&out, static_cast<uint64_t>(d));
    for (double v : t.data()) {
      if (t.dtype() == DType::kFloat32) {
        const float f = static_cast<float>(v);
        uint32_t bits;
        std::memcpy(&bits, &f, 4);
        PutLe<uint32_t>(&out, bits);
      } else {
        uint64_t bits;
        std::memcpy(&bits, &v, 8);
        PutLe<uint64_t>(&out, bits);
      }
    }
  }
  return out;
}

ParameterSet DeserializeCheckpoint(const std::string &bytes, const std::string &origin) {
  const size_t head = std::min<size_t>(bytes.size(), 4);
  if (bytes.compare(0, head, std::string("AVMT"), 0, head) != 0)
    throw CheckpointError(Kind::kBadMagic,
                          fmt::format("{} is not an avmtl checkpoint (bad magic)", origin));
  Reader r(bytes, origin);
  r.Bytes(4, "magic");
  const uint32_t version = r.Le<uint32_t>("version");
  if (version != kCheckpointVersion)
    throw CheckpointError(Kind::kBadVersion,
                          fmt::format("checkpoint {} has format version {}, expected {}",
                                      origin, version, kCheckpointVersion));
  const uint32_t count = r.Le<uint32_t>("tensor count");
  ParameterSet params;
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t len = r.Le<uint32_t>("name length");
    std::string name = r.Bytes(len, "tensor name");
    const uint8_t code = r.Le<uint8_t>("dtype");
    if (code > 1)
      throw CheckpointError(Kind::kCorrupt,
                            fmt::format("checkpoint {}: tensor '{}' has unknown dtype "
                                        "code {}",
                                        origin, name, code));
    const DType dtype = static_cast<DType>(code);
    const uint8_t rank = r.Le<uint8_t>("rank");
    Shape shape(rank);
    uint64_t n = 1;
    for (auto &d : shape) {
      const uint64_t v = r.Le<uint64_t>("dimension");
      if (v == 0 || v > (uint64_t{1} << 40))
        throw CheckpointError(Kind::kCorrupt,
                              fmt::format("checkpoint {}: tensor '{}' has dimension {}",
                                          origin, name, v));
      d = static_cast<int64_t>(v);
      n *= v;
    }
    std::vector<double> values(n);
    for (auto &v : values) {
      if (dtype == DType::kFloat32) {
        const uint32_t bits = r.Le<uint32_t>("tensor values");
        float f;
        std::memcpy(&f, &bits, 4);
        v = f;
      } else {
        const uint64_t bits = r.Le<uint64_t>("tensor values");
        std::memcpy(&v, &bits, 8);
      }
    }
    if (params.Contains(name))
      throw CheckpointError(Kind::kDuplicateName,
                            fmt::format("checkpoint {} contains tensor '{}' twice",
                                        origin, name));
    params.Add(name, Tensor(std::move(shape), std::move(values), dtype));
  }
  if (!r.AtEnd())
    throw CheckpointError(Kind::kCorrupt,
                          fmt::format("checkpoint {} has trailing bytes", origin));
  return params;
}

void SaveCheckpoint(const ParameterSet &params, const std::string &path) {
  const std::string bytes = SerializeCheckpoint(params);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError(Kind::kIo, "cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(Kind::kIo, "failed writing '" + path + "'");
}

ParameterSet LoadCheckpoint(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(Kind::kIo, "cannot open checkpoint '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return DeserializeCheckpoint(ss.str(), "'" + path + "'");
}

void CheckCompatible(const ParameterSet &expected, const ParameterSet &loaded) {
  std::vector<std::string> problems;
  for (const auto &[name, t] : loaded) {
    if (!expected.Contains(name)) {
      problems.push_back(fmt::format("unknown tensor '{}'", name));
    } else if (expected.Get(name).shape() != t.shape()) {
      problems.push_back(fmt::format("tensor '{}' has shape {}, expected {}", name,
                                     ShapeString(t.shape()),
                                     ShapeString(expected.Get(name).shape())));
    }
  }
  for (const auto &[name, t] : expected)
    if (!loaded.Contains(name)) problems.push_back(fmt::format("missing tensor '{}'", name));
  if (!problems.empty())
    throw CheckpointError(Kind::kIncompatible,
                          fmt::format("checkpoint does not match the model: {}",
                                      fmt::join(problems, "; ")));
}

}  // namespace avmtl
