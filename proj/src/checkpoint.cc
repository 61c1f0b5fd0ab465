// src/checkpoint.cc

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

#include "mtsv/checkpoint.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "json.hpp"
#include "mtsv/config.h"
#include "mtsv/error.h"

namespace mtsv {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr int kVersion = 1;
constexpr std::size_t kMagicLen = 5;

const char *KindName(ParamKind k) {
  switch (k) {
    case ParamKind::kWeight: return "weight";
    case ParamKind::kNoDecay: return "no_decay";
    default: return "running_stat";
  }
}

ParamKind KindFromName(const std::string &s) {
  if (s == "weight") return ParamKind::kWeight;
  if (s == "no_decay") return ParamKind::kNoDecay;
  if (s == "running_stat") return ParamKind::kRunningStat;
  throw FormatError("checkpoint: unknown parameter kind '" + s + "'");
}

void AppendLe(std::string *out, const Tensor &t) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    std::uint64_t bits;
    double v = t[i];
    std::memcpy(&bits, &v, 8);
    for (int k = 0; k < 8; ++k)
      out->push_back(static_cast<char>((bits >> (8 * k)) & 0xff));
  }
}

ordered_json Section(const std::vector<std::pair<std::string, const Tensor *>>
                         &items,
                     const ParamSet *params, std::string *payload) {
  ordered_json arr = ordered_json::array();
  for (const auto &[name, t] : items) {
    ordered_json e;
    e["name"] = name;
    if (params) e["kind"] = KindName(params->entry(name).kind);
    e["shape"] = t->shape();
    e["offset"] = payload->size();
    arr.push_back(e);
    AppendLe(payload, *t);
  }
  return arr;
}

ordered_json ParamSection(const ParamSet &p, std::string *payload) {
  std::vector<std::pair<std::string, const Tensor *>> items;
  for (const auto &e : p.entries()) items.emplace_back(e.name, &e.value);
  return Section(items, &p, payload);
}

Tensor ReadTensor(const json &e, const std::string &payload) {
  Shape shape = e.at("shape").get<Shape>();
  std::size_t offset = e.at("offset").get<std::size_t>();
  std::size_t n = NumElements(shape);
  if (offset % 8 != 0 || offset + n * 8 > payload.size())
    throw FormatError("checkpoint: entry '" +
                      e.at("name").get<std::string>() +
                      "' lies outside the payload");
  std::vector<double> v(n);
  const auto *p = reinterpret_cast<const unsigned char *>(payload.data()) + offset;
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k)
      bits |= static_cast<std::uint64_t>(p[8 * i + k]) << (8 * k);
    std::memcpy(&v[i], &bits, 8);
  }
  return Tensor(std::move(shape), std::move(v));
}

ParamSet ReadParams(const json &arr, Role role, const std::string &payload) {
  ParamSet p(role);
  for (const auto &e : arr)
    p.Add(e.at("name").get<std::string>(), ReadTensor(e, payload),
          KindFromName(e.at("kind").get<std::string>()));
  return p;
}

}  // namespace

std::uint64_t Fnv1a(const unsigned char *data, std::size_t n, std::uint64_t h) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

void SaveCheckpoint(const std::string &path, const TrainState &state,
                    const ModelConfig &model, const TrainConfig &train) {
  std::string payload;
  ordered_json m;
  m["format"] = "mtsv-checkpoint";
  m["version"] = kVersion;
  m["step"] = state.step;
  m["seed"] = train.seed;
  m["rng"] = "keyed-splitmix64(seed, step)";
  m["best_eer"] = state.best_eer;
  m["best_step"] = state.best_step ? ordered_json(*state.best_step)
                                   : ordered_json();
  m["model"] = ToJson(model);
  m["student"] = ParamSection(state.student, &payload);
  m["teacher"] = ParamSection(state.teacher, &payload);
  std::vector<std::pair<std::string, const Tensor *>> vel;
  for (const auto &[name, t] : state.optimizer.velocity) vel.emplace_back(name, &t);
  m["velocity"] = Section(vel, nullptr, &payload);
  m["payload_bytes"] = payload.size();
  m["payload_fnv1a"] = Fnv1a(
      reinterpret_cast<const unsigned char *>(payload.data()), payload.size());

  const std::string manifest = m.dump();
  // Write to a sibling file first so a crash never leaves a torn checkpoint.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("checkpoint: cannot write '" + tmp + "'");
    out.write(kCheckpointMagic, kMagicLen);
    std::uint64_t len = manifest.size();
    for (int k = 0; k < 8; ++k) out.put(static_cast<char>((len >> (8 * k)) & 0xff));
    out.write(manifest.data(), static_cast<std::streamsize>(manifest.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw IoError("checkpoint: write failed for '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("checkpoint: cannot move into '" + path + "': " + ec.message());
}

Checkpoint LoadCheckpoint(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot read '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  if (bytes.size() < kMagicLen + 8 ||
      bytes.compare(0, kMagicLen, kCheckpointMagic, kMagicLen) != 0)
    throw FormatError("checkpoint '" + path + "': not an MTSV1 checkpoint");
  std::uint64_t len = 0;
  for (int k = 0; k < 8; ++k)
    len |= static_cast<std::uint64_t>(
               static_cast<unsigned char>(bytes[kMagicLen + k]))
           << (8 * k);
  const std::size_t head = kMagicLen + 8;
  if (len > bytes.size() - head)
    throw FormatError("checkpoint '" + path + "': truncated manifest");

  Checkpoint c;
  try {
    json m = json::parse(bytes.substr(head, len));
    if (m.at("format") != "mtsv-checkpoint" || m.at("version") != kVersion)
      throw FormatError("checkpoint '" + path + "': unsupported version");
    std::string payload = bytes.substr(head + len);
    if (payload.size() != m.at("payload_bytes").get<std::size_t>())
      throw FormatError("checkpoint '" + path + "': payload is " +
                        std::to_string(payload.size()) + " bytes, expected " +
                        m.at("payload_bytes").dump());
    std::uint64_t h = Fnv1a(
        reinterpret_cast<const unsigned char *>(payload.data()), payload.size());
    if (h != m.at("payload_fnv1a").get<std::uint64_t>())
      throw FormatError("checkpoint '" + path + "': payload hash mismatch");

    FromJson(m.at("model"), &c.model);
    c.seed = m.at("seed").get<std::uint64_t>();
    c.state.step = m.at("step").get<std::size_t>();
    c.state.best_eer = m.at("best_eer").get<double>();
    if (!m.at("best_step").is_null())
      c.state.best_step = m.at("best_step").get<std::size_t>();
    c.state.student = ReadParams(m.at("student"), Role::kStudent, payload);
    c.state.teacher = ReadParams(m.at("teacher"), Role::kTeacher, payload);
    for (const auto &e : m.at("velocity"))
      c.state.optimizer.velocity.emplace(e.at("name").get<std::string>(),
                                         ReadTensor(e, payload));
  } catch (const json::exception &e) {
    throw FormatError("checkpoint '" + path + "': bad manifest: " + e.what());
  } catch (const ShapeError &e) {
    throw FormatError("checkpoint '" + path + "': " + e.what());
  }
  return c;
}

}  // namespace mtsv
