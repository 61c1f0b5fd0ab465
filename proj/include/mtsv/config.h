// include/mtsv/config.h

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

#ifndef MTSV_CONFIG_H_
#define MTSV_CONFIG_H_

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mtsv/corpus.h"
#include "mtsv/eval.h"
#include "mtsv/losses.h"
#include "mtsv/model.h"
#include "mtsv/trainer.h"

namespace mtsv {

/// One named training system of the ablation table.
struct SystemPreset {
  std::string name;   // "proposed"
  std::string label;  // "#7-Proposed"
  ConsistencyKind consistency;
  bool negative_pairs;
  BatchMode batch_mode;
  LearningTarget learning_target;
};

/// The seven systems, in table order (#1 .. #7).
const std::vector<SystemPreset> &SystemPresets();
const SystemPreset &FindPreset(const std::string &name);
/// Overwrites the loss and batch-mode keys with the preset's row.
void ApplyPreset(const SystemPreset &preset, TrainConfig *cfg);

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  CorpusConfig data;
  EvalConfig eval;
  std::optional<std::string> system_preset;

  /// Applies system_preset (if any) and checks cross-section consistency.
  void Finalize();
  void Validate() const;
};

nlohmann::ordered_json ToJson(const ModelConfig &c);
nlohmann::ordered_json ToJson(const TrainConfig &c);
nlohmann::ordered_json ToJson(const CorpusConfig &c);
nlohmann::ordered_json ToJson(const EvalConfig &c);
nlohmann::ordered_json ToJson(const RunConfig &c);

/// Each reader starts from the existing values and overrides the keys
/// present; unknown keys are a FormatError naming the key.
void FromJson(const nlohmann::json &j, ModelConfig *c);
void FromJson(const nlohmann::json &j, TrainConfig *c);
void FromJson(const nlohmann::json &j, CorpusConfig *c);
void FromJson(const nlohmann::json &j, EvalConfig *c);
void FromJson(const nlohmann::json &j, RunConfig *c);

/// TOML subset: [table] and [a.b] headers, dotted keys, strings, integers,
/// floats (including inf/nan), booleans, arrays of those, and comments.
/// Inline tables and arrays of tables are rejected.
nlohmann::json ParseToml(const std::string &text);

/// Reads a .json or .toml file over the defaults and finalizes it.
RunConfig LoadRunConfig(const std::string &path);

/// The default configuration rendered as TOML.
std::string DefaultConfigToml();

}  // namespace mtsv

#endif  // MTSV_CONFIG_H_
