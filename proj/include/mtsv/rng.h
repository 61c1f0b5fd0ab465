// include/mtsv/rng.h

// Copyright 2026  The mtsv Authors

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

#ifndef MTSV_RNG_H_
#define MTSV_RNG_H_

#include <cstdint>

namespace mtsv {

/// splitmix64 finalizer.
inline std::uint64_t Mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives a child seed; used wherever a stream must depend only on a key
/// (speaker, utterance, step) rather than on draw order.
inline std::uint64_t MixSeed(std::uint64_t a, std::uint64_t b) {
  return Mix(Mix(a) ^ (b + 0x632be59bd9b4e019ULL));
}

inline std::uint64_t MixSeed(std::uint64_t a, std::uint64_t b,
                             std::uint64_t c) {
  return MixSeed(MixSeed(a, b), c);
}

}  // namespace mtsv

#endif  // MTSV_RNG_H_
