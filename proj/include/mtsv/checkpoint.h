// include/mtsv/checkpoint.h

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

#ifndef MTSV_CHECKPOINT_H_
#define MTSV_CHECKPOINT_H_

#include <cstdint>
#include <string>

#include "mtsv/model.h"
#include "mtsv/trainer.h"

namespace mtsv {

/// Container layout: the 5 magic bytes "MTSV1", a little-endian uint64
/// manifest length, the JSON manifest, then every tensor as little-endian
/// float64 in manifest order.  The manifest records the payload length and
/// an FNV-1a hash of it, so truncation and bit rot are detected on load.
inline constexpr char kCheckpointMagic[] = "MTSV1";

struct Checkpoint {
  TrainState state;
  ModelConfig model;
  /// Training seed; batches and dropout are keyed by (seed, step).
  std::uint64_t seed = 0;
};

void SaveCheckpoint(const std::string &path, const TrainState &state,
                    const ModelConfig &model, const TrainConfig &train);
/// Throws IoError when unreadable, FormatError when the magic, version,
/// manifest or payload hash do not check out.
Checkpoint LoadCheckpoint(const std::string &path);

std::uint64_t Fnv1a(const unsigned char *data, std::size_t n,
                    std::uint64_t h = 0xcbf29ce484222325ULL);

}  // namespace mtsv

#endif  // MTSV_CHECKPOINT_H_
