// tests/test_cli.cc

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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "mtsv/checkpoint.h"
#include "mtsv/config.h"
#include "mtsv/error.h"

using namespace mtsv;
namespace fs = std::filesystem;

namespace {

const std::string kCli = MTSV_CLI_PATH;

// Tiny but complete run configuration used by the end-to-end commands.
const char *kTinyToml = R"(
[model]
input_samples = 729
conv_channels = [4, 4, 8, 8]
res_blocks = [1, 1, 1]
attention_hidden = 8
embedding_dim = 8
projector_hidden = 8
class_count = 6

[train]
steps = 4
speakers = 3
utterances = 4
eval_every = 2

[data]
n_train_speakers = 6
n_eval_speakers = 3
utterances_per_speaker = 6
sample_len = 729
eval_sample_len = 1458

[eval]
n_crops = 2
)";

fs::path Fresh(const std::string &name) {
  fs::path p = fs::temp_directory_path() / ("mtsv_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string Slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int Run(const std::string &args, const fs::path &log) {
  const std::string cmd = kCli + " " + args + " > " + log.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

fs::path WriteTiny(const fs::path &dir) {
  fs::path p = dir / "tiny.toml";
  std::ofstream(p) << kTinyToml;
  return p;
}

}  // namespace

TEST_CASE("toml and json configs agree with the defaults") {
  nlohmann::json toml = ParseToml(DefaultConfigToml());
  RunConfig from_toml, defaults;
  FromJson(toml, &from_toml);
  CHECK(ToJson(from_toml).dump() == ToJson(defaults).dump());
  RunConfig from_json;
  FromJson(nlohmann::json::parse(ToJson(defaults).dump()), &from_json);
  CHECK(ToJson(from_json).dump() == ToJson(defaults).dump());
  CHECK(defaults.data.n_train_speakers + defaults.data.n_eval_speakers == 28);
  CHECK_FALSE(defaults.train.warmup_steps.has_value());
}

TEST_CASE("toml parser handles tables, arrays, comments and errors") {
  nlohmann::json j = ParseToml(
      "# comment\ntop = \"x\" # trailing\n[a.b]\nv = [1, 2, 3]\nf = -2.5e-1\n"
      "ok = false\n");
  CHECK(j["top"] == "x");
  CHECK(j["a"]["b"]["v"] == nlohmann::json::array({1, 2, 3}));
  CHECK(j["a"]["b"]["f"].get<double>() == -0.25);
  CHECK(j["a"]["b"]["ok"] == false);
  CHECK_THROWS_AS(ParseToml("[broken\n"), FormatError);
  CHECK_THROWS_AS(ParseToml("novalue =\n"), FormatError);
}

TEST_CASE("unknown keys are rejected by name") {
  RunConfig c;
  try {
    FromJson(nlohmann::json::parse(R"({"train": {"stepz": 3}})"), &c);
    FAIL("expected a format error");
  } catch (const FormatError &e) {
    CHECK(std::string(e.what()).find("stepz") != std::string::npos);
  }
}

TEST_CASE("presets map onto the seven ablation rows") {
  struct Row {
    const char *name, *label;
    ConsistencyKind c;
    bool np;
    BatchMode bc;
    LearningTarget lt;
  };
  using CK = ConsistencyKind;
  using LT = LearningTarget;
  const Row rows[] = {
      {"org_mt", "#1-Org_MT", CK::kMse, false, BatchMode::kSameNoised, LT::kPrediction},
      {"s2", "#2", CK::kMse, false, BatchMode::kSameNoised, LT::kEmbedding},
      {"s3", "#3", CK::kMse, false, BatchMode::kDifferent, LT::kEmbedding},
      {"s4", "#4", CK::kMse, true, BatchMode::kDifferent, LT::kEmbedding},
      {"ge2e", "#5", CK::kGe2e, true, BatchMode::kDifferent, LT::kEmbedding},
      {"ap", "#6", CK::kAp, true, BatchMode::kDifferent, LT::kEmbedding},
      {"proposed", "#7-Proposed", CK::kGe2eH, true, BatchMode::kDifferent, LT::kEmbedding},
  };
  REQUIRE(SystemPresets().size() == 7);
  for (std::size_t i = 0; i < 7; ++i) {
    const SystemPreset &p = SystemPresets()[i];
    CHECK(p.name == rows[i].name);
    CHECK(p.label == rows[i].label);
    CHECK(p.consistency == rows[i].c);
    CHECK(p.negative_pairs == rows[i].np);
    CHECK(p.batch_mode == rows[i].bc);
    CHECK(p.learning_target == rows[i].lt);
    RunConfig rc;
    rc.train.loss.consistency = CK::kAp;
    rc.train.batch_mode = BatchMode::kSameNoised;
    rc.system_preset = p.name;
    rc.Finalize();
    CHECK(rc.train.loss.consistency == p.consistency);
    CHECK(rc.train.loss.negative_pairs == p.negative_pairs);
    CHECK(rc.train.batch_mode == p.batch_mode);
    CHECK(rc.train.loss.learning_target == p.learning_target);
    CHECK(rc.train.loss.use_cce);
  }
  CHECK_THROWS_AS(FindPreset("nope"), ContractError);
}

TEST_CASE("cross-section validation") {
  RunConfig c;
  c.data.sample_len = 2187;
  CHECK_THROWS(c.Validate());
  RunConfig d;
  d.model.class_count = 5;
  CHECK_THROWS(d.Validate());
  RunConfig ok;
  CHECK_NOTHROW(ok.Validate());
}

TEST_CASE("config command prints loadable defaults") {
  fs::path dir = Fresh("config");
  CHECK(Run("config --dump-defaults", dir / "d.toml") == 0);
  CHECK(Run("config --dump-defaults --format json", dir / "d.json") == 0);
  RunConfig a = LoadRunConfig((dir / "d.toml").string());
  RunConfig b = LoadRunConfig((dir / "d.json").string());
  CHECK(ToJson(a).dump() == ToJson(RunConfig{}).dump());
  CHECK(ToJson(b).dump() == ToJson(RunConfig{}).dump());
  fs::remove_all(dir);
}

TEST_CASE("gen writes the default roster deterministically") {
  fs::path dir = Fresh("gen");
  REQUIRE(Run("gen --out " + (dir / "a").string(), dir / "a.log") == 0);
  REQUIRE(Run("gen --out " + (dir / "b").string(), dir / "b.log") == 0);
  const std::string ma = Slurp(dir / "a" / "manifest.json");
  CHECK(ma == Slurp(dir / "b" / "manifest.json"));
  auto j = nlohmann::json::parse(ma);
  CHECK(j["speakers"].size() == 28);
  std::size_t held = 0;
  for (const auto &s : j["speakers"]) held += s["held_out"].get<bool>();
  CHECK(held == 8);

  const std::string missing = (dir / "no" / "such" / "parent" / "x").string();
  fs::path log = dir / "missing.log";
  // Make the parent unreachable by turning it into a file.
  std::ofstream(dir / "no") << "file";
  CHECK(Run("gen --out " + missing, log) != 0);
  CHECK(Slurp(log).find((dir / "no").string()) != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("train, eval and metrics conversion on a tiny config") {
  fs::path dir = Fresh("train");
  const std::string cfg = WriteTiny(dir).string();
  REQUIRE(Run("gen --config " + cfg + " --out " + (dir / "corpus").string(),
              dir / "gen.log") == 0);

  CHECK(Run("train --config " + cfg + " --steps 0 --out " + (dir / "zero").string() +
                " --corpus " + (dir / "corpus").string(),
            dir / "zero.log") == 0);

  REQUIRE(Run("train --config " + cfg + " --preset proposed --quiet --out " +
                  (dir / "run").string() + " --corpus " + (dir / "corpus").string(),
              dir / "train.log") == 0);
  CHECK(fs::exists(dir / "run" / "metrics.jsonl"));
  CHECK(fs::exists(dir / "run" / "final.ckpt"));
  CHECK(fs::exists(dir / "run" / "config.json"));
  CHECK(fs::exists(dir / "run" / "timing.log"));
  RunConfig saved = LoadRunConfig((dir / "run" / "config.json").string());
  CHECK(saved.system_preset.value_or("") == "proposed");

  const std::string eval = "eval --config " + cfg + " --corpus " +
                           (dir / "corpus").string() + " --checkpoint " +
                           (dir / "run" / "final.ckpt").string() + " --which both --out ";
  REQUIRE(Run(eval + (dir / "e1").string(), dir / "e1.log") == 0);
  REQUIRE(Run(eval + (dir / "e2").string(), dir / "e2.log") == 0);
  const std::string r1 = Slurp(dir / "e1" / "eval_report.json");
  CHECK(r1 == Slurp(dir / "e2" / "eval_report.json"));
  auto rep = nlohmann::json::parse(r1);
  CHECK(rep["results"].size() == 3);
  for (const auto &[path, entry] : rep["results"].items()) {
    const double e = entry["eer"].get<double>();
    CHECK(e >= 0.0);
    CHECK(e <= 0.5);
  }

  REQUIRE(Run("metrics-to-csv " + (dir / "run" / "metrics.jsonl").string() +
                  " -o " + (dir / "m.csv").string(),
              dir / "m.log") == 0);
  std::istringstream csv(Slurp(dir / "m.csv"));
  std::string header, line;
  std::getline(csv, header);
  CHECK(header.rfind("step,lr,loss_total", 0) == 0);
  std::size_t rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 4);

  // A corrupted checkpoint is reported as a format error with exit code 1.
  std::string bytes = Slurp(dir / "run" / "final.ckpt");
  bytes[bytes.size() - 1] ^= 1;
  std::ofstream(dir / "bad.ckpt", std::ios::binary) << bytes;
  fs::path bad_log = dir / "bad.log";
  CHECK(Run("eval --config " + cfg + " --corpus " + (dir / "corpus").string() +
                " --checkpoint " + (dir / "bad.ckpt").string() + " --out " +
                (dir / "e3").string(),
            bad_log) == 1);
  CHECK(Slurp(bad_log).find("error:") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("step-zero checkpoint scores student and teacher alike") {
  fs::path dir = Fresh("t0");
  const std::string cfg = WriteTiny(dir).string();
  REQUIRE(Run("train --config " + cfg + " --steps 0 --quiet --out " + (dir / "run").string(),
              dir / "train.log") == 0);
  REQUIRE(Run("eval --config " + cfg + " --checkpoint " +
                  (dir / "run" / "final.ckpt").string() + " --which both --out " +
                  (dir / "ev").string(),
              dir / "eval.log") == 0);
  auto rep = nlohmann::json::parse(Slurp(dir / "ev" / "eval_report.json"));
  const double s = rep["results"]["student_g_f"]["eer"].get<double>();
  const double t = rep["results"]["teacher_g_f"]["eer"].get<double>();
  CHECK(std::abs(s - t) <= 1e-12);
  CHECK(rep["results"].contains("student_q_g_f"));
  fs::remove_all(dir);
}

TEST_CASE("unknown commands and bad presets exit non-zero") {
  fs::path dir = Fresh("bad");
  CHECK(Run("frobnicate", dir / "a.log") != 0);
  CHECK(Run("train --preset nope --steps 0 --out " + (dir / "x").string(),
            dir / "b.log") == 1);
  fs::remove_all(dir);
}

TEST_CASE("ablate emits seven finite rows and reruns identically") {
  fs::path dir = Fresh("ablate");
  const std::string cfg = WriteTiny(dir).string();
  const std::string base = "ablate --config " + cfg + " --out ";
  REQUIRE(Run(base + (dir / "a").string(), dir / "a.log") == 0);
  REQUIRE(Run(base + (dir / "b").string(), dir / "b.log") == 0);
  const std::string csv = Slurp(dir / "a" / "ablation.csv");
  CHECK(csv == Slurp(dir / "b" / "ablation.csv"));
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "System,Consistency loss,NP,BC,LT,EER,status");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    REQUIRE(cells.size() == 7);
    const double eer = std::stod(cells[5]);
    CHECK(eer >= 0.0);
    CHECK(eer <= 0.5);
    CHECK(cells[6] == "ok");
  }
  CHECK(rows == 7);
  fs::remove_all(dir);
}
