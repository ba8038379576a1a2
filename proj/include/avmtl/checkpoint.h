// avmtl/checkpoint.h

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


// Binary checkpoint format (all integers little-endian):
//
//   "AVMT" | version u32 | count u32 |
//   count × { name_len u32 | name bytes | dtype u8 (0 f32, 1 f64) |
//             rank u8 | dims u64 × rank | values }
//
// Tensors are written in name order, so saving a loaded checkpoint
// reproduces the file byte for byte.

#ifndef AVMTL_CHECKPOINT_H_
#define AVMTL_CHECKPOINT_H_

#include <string>
#include <vector>

#include "avmtl/params.h"

namespace avmtl {

inline constexpr uint32_t kCheckpointVersion = 1;

class CheckpointError : public Error {
 public:
  enum class Kind { kIo, kBadMagic, kBadVersion, kTruncated, kDuplicateName,
                    kCorrupt, kIncompatible };
  CheckpointError(Kind kind, const std::string &what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

std::string SerializeCheckpoint(const ParameterSet &params);
ParameterSet DeserializeCheckpoint(const std::string &bytes,
                                   const std::string &origin = "<memory>");

void SaveCheckpoint(const ParameterSet &params, const std::string &path);
ParameterSet LoadCheckpoint(const std::string &path);

/// Throws kIncompatible listing every unknown, missing or mis-shaped tensor
/// of `loaded` relative to `expected`.
void CheckCompatible(const ParameterSet &expected, const ParameterSet &loaded);

}  // namespace avmtl

#endif  // AVMTL_CHECKPOINT_H_
