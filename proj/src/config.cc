// src/config.cc

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

#include "mtsv/config.h"

#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "mtsv/error.h"

namespace mtsv {

using nlohmann::json;
using nlohmann::ordered_json;

const std::vector<SystemPreset> &SystemPresets() {
  using CK = ConsistencyKind;
  using LT = LearningTarget;
  static const std::vector<SystemPreset> presets = {
      {"org_mt", "#1-Org_MT", CK::kMse, false, BatchMode::kSameNoised,
       LT::kPrediction},
      {"s2", "#2", CK::kMse, false, BatchMode::kSameNoised, LT::kEmbedding},
      {"s3", "#3", CK::kMse, false, BatchMode::kDifferent, LT::kEmbedding},
      {"s4", "#4", CK::kMse, true, BatchMode::kDifferent, LT::kEmbedding},
      {"ge2e", "#5", CK::kGe2e, true, BatchMode::kDifferent, LT::kEmbedding},
      {"ap", "#6", CK::kAp, true, BatchMode::kDifferent, LT::kEmbedding},
      {"proposed", "#7-Proposed", CK::kGe2eH, true, BatchMode::kDifferent,
       LT::kEmbedding},
  };
  return presets;
}

const SystemPreset &FindPreset(const std::string &name) {
  for (const auto &p : SystemPresets())
    if (p.name == name) return p;
  std::string known;
  for (const auto &p : SystemPresets()) known += (known.empty() ? "" : ", ") + p.name;
  throw ContractError("unknown preset '" + name + "' (known: " + known + ")");
}

void ApplyPreset(const SystemPreset &p, TrainConfig *cfg) {
  cfg->loss.consistency = p.consistency;
  cfg->loss.negative_pairs = p.negative_pairs;
  cfg->loss.learning_target = p.learning_target;
  cfg->loss.use_cce = true;
  cfg->batch_mode = p.batch_mode;
}

void RunConfig::Finalize() {
  if (system_preset) ApplyPreset(FindPreset(*system_preset), &train);
  Validate();
}

void RunConfig::Validate() const {
  model.Validate();
  train.Validate();
  data.Validate();
  eval.Validate();
  if (data.sample_len != model.input_samples)
    throw ContractError("config: data.sample_len (" +
                        std::to_string(data.sample_len) +
                        ") must equal model.input_samples (" +
                        std::to_string(model.input_samples) + ")");
  if (model.class_count < data.n_train_speakers)
    throw ContractError("config: model.class_count must cover every "
                        "training speaker");
  std::size_t crop = eval.crop_len ? eval.crop_len : model.input_samples;
  if (crop != model.input_samples)
    throw ContractError("config: eval.crop_len must equal the model input");
  if (data.eval_sample_len < crop)
    throw ContractError("config: data.eval_sample_len is shorter than a crop");
  if (train.speakers > data.n_train_speakers)
    throw ContractError("config: train.speakers exceeds training speakers");
}

// ------------------------------------------------------------------- to json

namespace {

ordered_json Real(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  return v;
}

}  // namespace

ordered_json ToJson(const ModelConfig &c) {
  ordered_json j;
  j["input_samples"] = c.input_samples;
  j["conv_channels"] = c.conv_channels;
  j["res_blocks"] = c.res_blocks;
  j["attention_hidden"] = c.attention_hidden;
  j["embedding_dim"] = c.embedding_dim;
  j["projector_hidden"] = c.projector_hidden;
  j["class_count"] = c.class_count;
  j["dropout_rate"] = c.dropout_rate;
  return j;
}

ordered_json ToJson(const TrainConfig &c) {
  ordered_json j;
  j["steps"] = c.steps;
  j["lr_max"] = c.lr_max;
  j["warmup_steps"] = c.warmup_steps ? ordered_json(*c.warmup_steps)
                                     : ordered_json("auto");
  j["momentum"] = c.momentum;
  j["weight_decay"] = c.weight_decay;
  j["speakers"] = c.speakers;
  j["utterances"] = c.utterances;
  j["batch_mode"] = ToString(c.batch_mode);
  j["seed"] = c.seed;
  j["eval_every"] = c.eval_every;
  j["consistency_weight"] = c.consistency_weight;
  j["bn_momentum"] = c.bn_momentum;
  j["stop_eer"] = c.stop_eer ? ordered_json(*c.stop_eer) : ordered_json();
  j["loss"] = {{"consistency", ToString(c.loss.consistency)},
               {"negative_pairs", c.loss.negative_pairs},
               {"learning_target", ToString(c.loss.learning_target)},
               {"use_cce", c.loss.use_cce}};
  j["ema"] = {{"alpha", c.ema.alpha},
              {"include_running_stats", c.ema.include_running_stats}};
  j["noise"] = {{"snr_db_min", Real(c.noise.snr_db_min)},
                {"snr_db_max", Real(c.noise.snr_db_max)},
                {"gain_min", c.noise.gain_min},
                {"gain_max", c.noise.gain_max}};
  return j;
}

ordered_json ToJson(const CorpusConfig &c) {
  ordered_json j;
  j["n_train_speakers"] = c.n_train_speakers;
  j["n_eval_speakers"] = c.n_eval_speakers;
  j["utterances_per_speaker"] = c.utterances_per_speaker;
  j["sample_len"] = c.sample_len;
  j["eval_sample_len"] = c.eval_sample_len;
  j["snr_db"] = Real(c.snr_db);
  j["jitter_hz"] = c.jitter_hz;
  j["sample_rate"] = c.sample_rate;
  j["seed"] = c.seed;
  return j;
}

ordered_json ToJson(const EvalConfig &c) {
  ordered_json j;
  j["n_crops"] = c.n_crops;
  j["crop_len"] = c.crop_len;
  j["trial_seed"] = c.trial_seed;
  j["chunk"] = c.chunk;
  j["threads"] = c.threads;
  return j;
}

ordered_json ToJson(const RunConfig &c) {
  ordered_json j;
  j["system_preset"] =
      c.system_preset ? ordered_json(*c.system_preset) : ordered_json();
  j["model"] = ToJson(c.model);
  j["train"] = ToJson(c.train);
  j["data"] = ToJson(c.data);
  j["eval"] = ToJson(c.eval);
  return j;
}

// ----------------------------------------------------------------- from json

namespace {

[[noreturn]] void Bad(const std::string &key, const std::string &why) {
  throw FormatError("config key '" + key + "': " + why);
}

const json &Object(const json &j, const std::string &where) {
  if (!j.is_object()) Bad(where, "expected a table");
  return j;
}

double GetReal(const json &v, const std::string &key) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  Bad(key, "expected a number");
}

std::uint64_t GetUint(const json &v, const std::string &key) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  Bad(key, "expected a non-negative integer");
}

bool GetBool(const json &v, const std::string &key) {
  if (!v.is_boolean()) Bad(key, "expected true or false");
  return v.get<bool>();
}

std::string GetString(const json &v, const std::string &key) {
  if (!v.is_string()) Bad(key, "expected a string");
  return v.get<std::string>();
}

std::vector<std::size_t> GetSizes(const json &v, const std::string &key) {
  if (!v.is_array()) Bad(key, "expected an array of integers");
  std::vector<std::size_t> out;
  for (const auto &e : v) out.push_back(GetUint(e, key));
  return out;
}

template <typename Fn>
void ForEach(const json &j, const std::string &where, Fn fn) {
  for (const auto &[k, v] : Object(j, where).items()) {
    std::string key = where.empty() ? k : where + "." + k;
    try {
      if (!fn(k, v, key)) Bad(key, "unknown key");
    } catch (const json::exception &e) {
      Bad(key, e.what());
    } catch (const ContractError &e) {
      Bad(key, e.what());
    }
  }
}

}  // namespace

void FromJson(const json &j, ModelConfig *c) {
  ForEach(j, "model", [&](const std::string &k, const json &v,
                          const std::string &key) {
    if (k == "input_samples") c->input_samples = GetUint(v, key);
    else if (k == "conv_channels") c->conv_channels = GetSizes(v, key);
    else if (k == "res_blocks") c->res_blocks = GetSizes(v, key);
    else if (k == "attention_hidden") c->attention_hidden = GetUint(v, key);
    else if (k == "embedding_dim") c->embedding_dim = GetUint(v, key);
    else if (k == "projector_hidden") c->projector_hidden = GetUint(v, key);
    else if (k == "class_count") c->class_count = GetUint(v, key);
    else if (k == "dropout_rate") c->dropout_rate = GetReal(v, key);
    else return false;
    return true;
  });
}

void FromJson(const json &j, TrainConfig *c) {
  ForEach(j, "train", [&](const std::string &k, const json &v,
                          const std::string &key) {
    if (k == "steps") c->steps = GetUint(v, key);
    else if (k == "lr_max") c->lr_max = GetReal(v, key);
    else if (k == "warmup_steps") {
      if (v.is_string() && v.get<std::string>() == "auto") c->warmup_steps.reset();
      else c->warmup_steps = GetUint(v, key);
    } else if (k == "momentum") c->momentum = GetReal(v, key);
    else if (k == "weight_decay") c->weight_decay = GetReal(v, key);
    else if (k == "speakers") c->speakers = GetUint(v, key);
    else if (k == "utterances") c->utterances = GetUint(v, key);
    else if (k == "batch_mode") c->batch_mode = ParseBatchMode(GetString(v, key));
    else if (k == "seed") c->seed = GetUint(v, key);
    else if (k == "eval_every") c->eval_every = GetUint(v, key);
    else if (k == "consistency_weight") c->consistency_weight = GetReal(v, key);
    else if (k == "bn_momentum") c->bn_momentum = GetReal(v, key);
    else if (k == "stop_eer") {
      if (v.is_null()) c->stop_eer.reset();
      else c->stop_eer = GetReal(v, key);
    } else if (k == "loss") {
      ForEach(v, key, [&](const std::string &k2, const json &v2,
                          const std::string &key2) {
        if (k2 == "consistency") c->loss.consistency = ParseConsistency(GetString(v2, key2));
        else if (k2 == "negative_pairs") c->loss.negative_pairs = GetBool(v2, key2);
        else if (k2 == "learning_target") c->loss.learning_target = ParseLearningTarget(GetString(v2, key2));
        else if (k2 == "use_cce") c->loss.use_cce = GetBool(v2, key2);
        else return false;
        return true;
      });
    } else if (k == "ema") {
      ForEach(v, key, [&](const std::string &k2, const json &v2,
                          const std::string &key2) {
        if (k2 == "alpha") c->ema.alpha = GetReal(v2, key2);
        else if (k2 == "include_running_stats") c->ema.include_running_stats = GetBool(v2, key2);
        else return false;
        return true;
      });
    } else if (k == "noise") {
      ForEach(v, key, [&](const std::string &k2, const json &v2,
                          const std::string &key2) {
        if (k2 == "snr_db_min") c->noise.snr_db_min = GetReal(v2, key2);
        else if (k2 == "snr_db_max") c->noise.snr_db_max = GetReal(v2, key2);
        else if (k2 == "gain_min") c->noise.gain_min = GetReal(v2, key2);
        else if (k2 == "gain_max") c->noise.gain_max = GetReal(v2, key2);
        else return false;
        return true;
      });
    } else {
      return false;
    }
    return true;
  });
}

void FromJson(const json &j, CorpusConfig *c) {
  ForEach(j, "data", [&](const std::string &k, const json &v,
                         const std::string &key) {
    if (k == "n_train_speakers") c->n_train_speakers = GetUint(v, key);
    else if (k == "n_eval_speakers") c->n_eval_speakers = GetUint(v, key);
    else if (k == "utterances_per_speaker") c->utterances_per_speaker = GetUint(v, key);
    else if (k == "sample_len") c->sample_len = GetUint(v, key);
    else if (k == "eval_sample_len") c->eval_sample_len = GetUint(v, key);
    else if (k == "snr_db") c->snr_db = GetReal(v, key);
    else if (k == "jitter_hz") c->jitter_hz = GetReal(v, key);
    else if (k == "sample_rate") c->sample_rate = GetReal(v, key);
    else if (k == "seed") c->seed = GetUint(v, key);
    else return false;
    return true;
  });
}

void FromJson(const json &j, EvalConfig *c) {
  ForEach(j, "eval", [&](const std::string &k, const json &v,
                         const std::string &key) {
    if (k == "n_crops") c->n_crops = GetUint(v, key);
    else if (k == "crop_len") c->crop_len = GetUint(v, key);
    else if (k == "trial_seed") c->trial_seed = GetUint(v, key);
    else if (k == "chunk") c->chunk = GetUint(v, key);
    else if (k == "threads") c->threads = GetUint(v, key);
    else return false;
    return true;
  });
}

void FromJson(const json &j, RunConfig *c) {
  ForEach(j, "", [&](const std::string &k, const json &v,
                     const std::string &key) {
    if (k == "model") FromJson(v, &c->model);
    else if (k == "train") FromJson(v, &c->train);
    else if (k == "data") FromJson(v, &c->data);
    else if (k == "eval") FromJson(v, &c->eval);
    else if (k == "system_preset") {
      if (v.is_null()) c->system_preset.reset();
      else c->system_preset = GetString(v, key);
    } else {
      return false;
    }
    return true;
  });
}

// ---------------------------------------------------------------------- toml

namespace {

class TomlParser {
 public:
  explicit TomlParser(const std::string &text) : s_(text) {}

  json Parse() {
    json root = json::object();
    json *table = &root;
    while (!AtEnd()) {
      SkipBlankAndComments();
      if (AtEnd()) break;
      if (Peek() == '[') {
        ++pos_;
        if (Peek() == '[') Fail("arrays of tables are not supported");
        SkipSpace();
        auto path = KeyPath();
        SkipSpace();
        Expect(']');
        table = &root;
        for (const auto &k : path) {
          json &next = (*table)[k];
          if (next.is_null()) next = json::object();
          if (!next.is_object()) Fail("'" + k + "' is not a table");
          table = &next;
        }
      } else {
        auto path = KeyPath();
        SkipSpace();
        Expect('=');
        SkipSpace();
        json value = Value();
        json *t = table;
        for (std::size_t i = 0; i + 1 < path.size(); ++i) {
          json &next = (*t)[path[i]];
          if (next.is_null()) next = json::object();
          if (!next.is_object()) Fail("'" + path[i] + "' is not a table");
          t = &next;
        }
        if (t->contains(path.back())) Fail("duplicate key '" + path.back() + "'");
        (*t)[path.back()] = std::move(value);
      }
      EndOfLine();
    }
    return root;
  }

 private:
  bool AtEnd() const { return pos_ >= s_.size(); }
  char Peek() const { return AtEnd() ? '\0' : s_[pos_]; }

  [[noreturn]] void Fail(const std::string &why) const {
    std::size_t line = 1;
    for (std::size_t i = 0; i < pos_ && i < s_.size(); ++i) line += s_[i] == '\n';
    throw FormatError("toml line " + std::to_string(line) + ": " + why);
  }

  void Expect(char c) {
    if (Peek() != c) Fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  void SkipSpace() {
    while (Peek() == ' ' || Peek() == '\t') ++pos_;
  }

  void SkipBlankAndComments() {
    for (;;) {
      SkipSpace();
      if (Peek() == '#') {
        while (!AtEnd() && Peek() != '\n') ++pos_;
      }
      if (Peek() == '\n' || Peek() == '\r') {
        ++pos_;
        continue;
      }
      return;
    }
  }

  void EndOfLine() {
    SkipSpace();
    if (Peek() == '#')
      while (!AtEnd() && Peek() != '\n') ++pos_;
    if (Peek() == '\r') ++pos_;
    if (!AtEnd() && Peek() != '\n') Fail("unexpected trailing characters");
    if (!AtEnd()) ++pos_;
  }

  std::string BareKey() {
    if (Peek() == '"') return String();
    std::size_t start = pos_;
    while (std::isalnum(static_cast<unsigned char>(Peek())) || Peek() == '_' ||
           Peek() == '-')
      ++pos_;
    if (pos_ == start) Fail("expected a key");
    return s_.substr(start, pos_ - start);
  }

  std::vector<std::string> KeyPath() {
    std::vector<std::string> path{BareKey()};
    for (;;) {
      SkipSpace();
      if (Peek() != '.') return path;
      ++pos_;
      SkipSpace();
      path.push_back(BareKey());
    }
  }

  std::string String() {
    Expect('"');
    std::string out;
    while (Peek() != '"') {
      if (AtEnd() || Peek() == '\n') Fail("unterminated string");
      char c = s_[pos_++];
      if (c == '\\') {
        char e = s_[pos_++];
        switch (e) {
          case 'n': out.push_back('\n'); break;
          case 't': out.push_back('\t'); break;
          case '"': out.push_back('"'); break;
          case '\\': out.push_back('\\'); break;
          default: Fail(std::string("unsupported escape \\") + e);
        }
      } else {
        out.push_back(c);
      }
    }
    ++pos_;
    return out;
  }

  json Value() {
    char c = Peek();
    if (c == '"') return String();
    if (c == '\'') {
      ++pos_;
      std::size_t start = pos_;
      while (!AtEnd() && Peek() != '\'' && Peek() != '\n') ++pos_;
      if (Peek() != '\'') Fail("unterminated literal string");
      return s_.substr(start, pos_++ - start);
    }
    if (c == '{') Fail("inline tables are not supported");
    if (c == '[') {
      ++pos_;
      json arr = json::array();
      for (;;) {
        SkipBlankAndComments();
        if (Peek() == ']') {
          ++pos_;
          return arr;
        }
        arr.push_back(Value());
        SkipBlankAndComments();
        if (Peek() == ',') {
          ++pos_;
          continue;
        }
        SkipBlankAndComments();
        Expect(']');
        return arr;
      }
    }
    std::size_t start = pos_;
    while (!AtEnd() && !std::isspace(static_cast<unsigned char>(Peek())) &&
           Peek() != ',' && Peek() != ']' && Peek() != '#')
      ++pos_;
    std::string tok = s_.substr(start, pos_ - start);
    if (tok == "true") return true;
    if (tok == "false") return false;
    if (tok == "inf" || tok == "+inf") return std::numeric_limits<double>::infinity();
    if (tok == "-inf") return -std::numeric_limits<double>::infinity();
    if (tok == "nan" || tok == "+nan" || tok == "-nan")
      return std::numeric_limits<double>::quiet_NaN();
    std::string clean;
    for (char ch : tok)
      if (ch != '_') clean.push_back(ch);
    if (clean.empty()) Fail("expected a value");
    bool is_float = clean.find_first_of(".eE") != std::string::npos;
    try {
      std::size_t used = 0;
      if (is_float) {
        double d = std::stod(clean, &used);
        if (used == clean.size()) return d;
      } else {
        long long v = std::stoll(clean, &used, 10);
        if (used == clean.size()) return v;
      }
    } catch (const std::exception &) {
    }
    Fail("bad value '" + tok + "'");
  }

  const std::string &s_;
  std::size_t pos_ = 0;
};

std::string TomlScalar(const ordered_json &v) {
  if (v.is_string()) return json(v.get<std::string>()).dump();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_float()) {
    std::string s = v.dump();
    if (s.find_first_of(".eE") == std::string::npos) s += ".0";
    return s;
  }
  if (v.is_array()) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i)
      out += (i ? ", " : "") + TomlScalar(v[i]);
    return out + "]";
  }
  return v.dump();
}

void EmitToml(const ordered_json &j, const std::string &prefix,
              std::ostringstream &out) {
  for (const auto &[k, v] : j.items()) {
    if (v.is_null() || v.is_object()) continue;
    // Infinity is written bare; TOML has it natively.
    if (v.is_string() && (v == "inf" || v == "-inf"))
      out << k << " = " << v.get<std::string>() << "\n";
    else
      out << k << " = " << TomlScalar(v) << "\n";
  }
  for (const auto &[k, v] : j.items()) {
    if (!v.is_object()) continue;
    std::string name = prefix.empty() ? k : prefix + "." + k;
    out << "\n[" << name << "]\n";
    EmitToml(v, name, out);
  }
}

}  // namespace

json ParseToml(const std::string &text) { return TomlParser(text).Parse(); }

RunConfig LoadRunConfig(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  json j;
  bool is_json = path.size() >= 5 && path.substr(path.size() - 5) == ".json";
  if (is_json) {
    try {
      j = json::parse(text);
    } catch (const json::exception &e) {
      throw FormatError("config '" + path + "': " + e.what());
    }
  } else {
    j = ParseToml(text);
  }
  RunConfig c;
  FromJson(j, &c);
  c.Finalize();
  return c;
}

std::string DefaultConfigToml() {
  RunConfig c;
  std::ostringstream out;
  out << "# mtsv run configuration (defaults)\n";
  out << "# system_preset = \"proposed\"\n";
  EmitToml(ToJson(c), "", out);
  return out.str();
}

}  // namespace mtsv
