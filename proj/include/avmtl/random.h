// avmtl/random.h

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

#ifndef AVMTL_RANDOM_H_
#define AVMTL_RANDOM_H_

#include <cstdint>
#include <initializer_list>

namespace avmtl {

/// SplitMix64 finalizer.
inline uint64_t MixBits(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a base seed and a path of
/// integers (step, item, role...), so any item can be regenerated alone.
inline uint64_t DeriveSeed(uint64_t base, std::initializer_list<uint64_t> path) {
  uint64_t s = MixBits(base);
  for (uint64_t p : path) s = MixBits(s ^ MixBits(p + 0x632be59bd9b4e019ULL));
  return s;
}

}  // namespace avmtl

#endif  // AVMTL_RANDOM_H_
