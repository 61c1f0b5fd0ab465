// tools/mtsv.cc

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

// Command-line front end: corpus generation, training, evaluation and the
// seven-system ablation.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "mtsv/checkpoint.h"
#include "mtsv/config.h"
#include "mtsv/corpus.h"
#include "mtsv/error.h"
#include "mtsv/eval.h"
#include "mtsv/runtime.h"
#include "mtsv/trainer.h"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct CommonFlags {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> steps;
  std::string out;
  std::string corpus;
};

mtsv::RunConfig ResolveConfig(const CommonFlags &f) {
  mtsv::RunConfig c;
  if (!f.config.empty()) c = mtsv::LoadRunConfig(f.config);
  if (!f.preset.empty()) c.system_preset = f.preset;
  if (f.seed) c.train.seed = *f.seed;
  if (f.steps) c.train.steps = *f.steps;
  if (c.train.warmup_steps && *c.train.warmup_steps >= c.train.steps)
    c.train.warmup_steps.reset();
  c.eval.threads = mtsv::ThreadsFromEnv();
  c.Finalize();
  return c;
}

mtsv::Corpus ObtainCorpus(const CommonFlags &f, const mtsv::RunConfig &c) {
  if (!f.corpus.empty()) return mtsv::LoadCorpus(f.corpus);
  return mtsv::GenerateCorpus(c.data, mtsv::ThreadsFromEnv());
}

void EnsureParent(const std::string &dir) {
  fs::path p = fs::path(dir).lexically_normal();
  fs::path parent = p.parent_path();
  if (!parent.empty() && !fs::is_directory(parent))
    throw mtsv::IoError("output parent directory '" + parent.string() +
                        "' does not exist");
}

std::string Fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

int CmdGen(const CommonFlags &f) {
  auto c = ResolveConfig(f);
  if (f.seed) c.data.seed = *f.seed;
  if (f.out.empty()) throw mtsv::ContractError("gen: --out is required");
  EnsureParent(f.out);
  auto corpus = mtsv::GenerateCorpus(c.data, mtsv::ThreadsFromEnv());
  mtsv::SaveCorpus(corpus, f.out);
  std::cout << "wrote " << corpus.speakers.size() << " speakers ("
            << corpus.TrainSpeakerIds().size() << " train, "
            << corpus.EvalSpeakerIds().size() << " held out) to " << f.out
            << "\n";
  return 0;
}

struct TrainOutcome {
  mtsv::TrainResult result;
  std::optional<double> final_eer;
};

TrainOutcome RunTraining(const mtsv::RunConfig &c, const mtsv::Corpus &corpus,
                         const std::string &out, const std::string &resume,
                         bool verbose) {
  mtsv::TrainState state = mtsv::InitTrainState(c.model, c.train);
  if (!resume.empty()) {
    auto ck = mtsv::LoadCheckpoint(resume);
    state = std::move(ck.state);
  }
  mtsv::TrainOptions opts;
  opts.out_dir = out;
  opts.eval = c.eval;
  if (verbose)
    opts.hooks.on_metrics = [](const mtsv::StepMetrics &m) {
      if (m.eer_student || m.step % 100 == 0) std::cerr << m.ToJsonLine() << "\n";
    };
  TrainOutcome o;
  o.result = mtsv::Train(c.model, c.train, corpus, std::move(state), opts);
  for (auto it = o.result.metrics.rbegin(); it != o.result.metrics.rend(); ++it)
    if (it->eer_student) {
      o.final_eer = it->eer_student;
      break;
    }
  return o;
}

int CmdTrain(const CommonFlags &f, const std::string &resume, bool quiet) {
  auto c = ResolveConfig(f);
  if (f.out.empty()) throw mtsv::ContractError("train: --out is required");
  EnsureParent(f.out);
  auto corpus = ObtainCorpus(f, c);
  fs::create_directories(f.out);
  {
    std::ofstream cfg(fs::path(f.out) / "config.json");
    cfg << mtsv::ToJson(c).dump(2) << "\n";
  }
  auto t0 = std::chrono::steady_clock::now();
  auto o = RunTraining(c, corpus, f.out, resume, !quiet);
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  {
    // Wall-clock time lives in a sidecar so the other outputs stay
    // byte-identical across reruns.
    std::ofstream log(fs::path(f.out) / "timing.log", std::ios::app);
    log << "train steps=" << o.result.metrics.size() << " seconds=" << secs << "\n";
  }
  std::cout << "steps completed: " << o.result.state.step << "\n";
  if (o.final_eer) std::cout << "student EER: " << Fmt(*o.final_eer) << "\n";
  if (o.result.state.best_step)
    std::cout << "best student EER: " << Fmt(o.result.state.best_eer)
              << " at step " << *o.result.state.best_step << "\n";
  return 0;
}

int CmdEval(const CommonFlags &f, const std::string &checkpoint,
            const std::string &which) {
  if (checkpoint.empty()) throw mtsv::ContractError("eval: --checkpoint is required");
  if (which != "student" && which != "teacher" && which != "both")
    throw mtsv::ContractError("eval: --which must be student, teacher or both");
  auto c = ResolveConfig(f);
  auto ck = mtsv::LoadCheckpoint(checkpoint);
  c.model = ck.model;
  c.data.sample_len = c.model.input_samples;
  auto corpus = ObtainCorpus(f, c);
  auto trials = mtsv::BuildTrialList(corpus, c.eval.trial_seed);

  struct Row {
    std::string name;
    const mtsv::ParamSet *params;
    mtsv::EmbeddingPath path;
  };
  std::vector<Row> rows;
  if (which != "teacher") {
    rows.push_back({"student_q_g_f", &ck.state.student, mtsv::EmbeddingPath::kStudent});
    rows.push_back({"student_g_f", &ck.state.student, mtsv::EmbeddingPath::kProjected});
  }
  if (which != "student")
    rows.push_back({"teacher_g_f", &ck.state.teacher, mtsv::EmbeddingPath::kProjected});

  ordered_json report;
  report["checkpoint"] = checkpoint;
  report["step"] = ck.state.step;
  report["trials"] = trials.size();
  for (const auto &r : rows) {
    auto res = mtsv::EvaluateModel(*r.params, c.model, r.path, corpus, trials, c.eval);
    report["results"][r.name] = {{"eer", res.eer.eer},
                                 {"threshold", res.eer.threshold}};
    std::cout << r.name << ": EER " << Fmt(res.eer.eer) << " threshold "
              << res.eer.threshold << "\n";
    if (!f.out.empty()) {
      fs::create_directories(f.out);
      mtsv::WriteScores(trials, res.scores,
                        (fs::path(f.out) / (r.name + ".scores")).string());
    }
  }
  if (!f.out.empty()) {
    mtsv::WriteTrialList(trials, (fs::path(f.out) / "trials.txt").string());
    std::ofstream out(fs::path(f.out) / "eval_report.json");
    out << report.dump(2) << "\n";
  }
  return 0;
}

int CmdAblate(const CommonFlags &f) {
  CommonFlags base = f;
  base.preset.clear();
  auto c = ResolveConfig(base);
  if (f.out.empty()) throw mtsv::ContractError("ablate: --out is required");
  EnsureParent(f.out);
  fs::create_directories(f.out);
  auto corpus = ObtainCorpus(f, c);
  if (c.train.eval_every == 0) c.train.eval_every = c.train.steps;

  std::ostringstream csv;
  csv << "System,Consistency loss,NP,BC,LT,EER,status\n";
  bool any_failed = false;
  for (const auto &p : mtsv::SystemPresets()) {
    std::string status = "ok", eer = "";
    try {
      mtsv::RunConfig rc = c;
      rc.system_preset = p.name;
      rc.train.stop_eer.reset();
      rc.Finalize();
      auto o = RunTraining(rc, corpus, (fs::path(f.out) / p.name).string(), "", false);
      if (!o.final_eer || !std::isfinite(*o.final_eer))
        throw mtsv::NumericError("no finite EER produced");
      eer = Fmt(*o.final_eer);
    } catch (const std::exception &e) {
      any_failed = true;
      status = std::string("failed: ") + e.what();
      for (char &ch : status)
        if (ch == ',' || ch == '\n') ch = ';';
    }
    csv << p.label << ',' << mtsv::ToString(p.consistency) << ','
        << (p.negative_pairs ? "yes" : "no") << ','
        << mtsv::ToString(p.batch_mode) << ','
        << mtsv::ToString(p.learning_target) << ',' << eer << ',' << status
        << "\n";
    std::cerr << p.label << " " << (eer.empty() ? status : eer) << "\n";
  }
  std::ofstream out(fs::path(f.out) / "ablation.csv");
  out << csv.str();
  if (!out) throw mtsv::IoError("ablate: cannot write ablation.csv");
  std::cout << csv.str();
  return any_failed ? 1 : 0;
}

int CmdConfig(const CommonFlags &f, bool dump_defaults, const std::string &format) {
  if (!dump_defaults && f.config.empty() && f.preset.empty())
    throw mtsv::ContractError("config: pass --dump-defaults or --config");
  if (dump_defaults && f.config.empty() && f.preset.empty()) {
    if (format == "json")
      std::cout << mtsv::ToJson(mtsv::RunConfig{}).dump(2) << "\n";
    else
      std::cout << mtsv::DefaultConfigToml();
    return 0;
  }
  std::cout << mtsv::ToJson(ResolveConfig(f)).dump(2) << "\n";
  return 0;
}

int CmdMetricsToCsv(const std::string &in_path, const std::string &out_path) {
  std::ifstream in(in_path);
  if (!in) throw mtsv::IoError("cannot read '" + in_path + "'");
  const char *cols[] = {"step", "lr", "loss_total", "loss_consistency",
                        "loss_cce", "eer_student", "eer_teacher"};
  std::ostringstream out;
  for (std::size_t i = 0; i < std::size(cols); ++i) out << (i ? "," : "") << cols[i];
  out << "\n";
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception &e) {
      throw mtsv::FormatError(in_path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    for (std::size_t i = 0; i < std::size(cols); ++i) {
      out << (i ? "," : "");
      if (j.contains(cols[i])) out << j[cols[i]].dump();
    }
    out << "\n";
  }
  if (out_path.empty() || out_path == "-") {
    std::cout << out.str();
  } else {
    std::ofstream f(out_path);
    f << out.str();
    if (!f) throw mtsv::IoError("cannot write '" + out_path + "'");
  }
  return 0;
}

void AddCommon(CLI::App *app, CommonFlags *f, bool with_preset = true) {
  app->add_option("--config", f->config, "Run config (.toml or .json)");
  if (with_preset)
    app->add_option("--preset", f->preset,
                    "System preset: org_mt, s2, s3, s4, ge2e, ap, proposed");
  app->add_option("--seed", f->seed, "Override the seed");
  app->add_option("--steps", f->steps, "Override the training step count");
  app->add_option("--out", f->out, "Output directory");
  app->add_option("--corpus", f->corpus,
                  "Corpus directory (generated from the config if omitted)");
}

}  // namespace

int main(int argc, char **argv) {
  mtsv::TuneAllocator();
  CLI::App app{"mtsv: mean-teacher speaker verification lab"};
  app.require_subcommand(1);

  CommonFlags gen_f, train_f, eval_f, ablate_f, config_f;
  std::string resume, checkpoint, which = "both", format = "toml";
  std::string metrics_in, metrics_out;
  bool quiet = false, dump_defaults = false;

  auto *gen = app.add_subcommand("gen", "Generate the synthetic corpus");
  AddCommon(gen, &gen_f, false);
  auto *train = app.add_subcommand("train", "Train one system");
  AddCommon(train, &train_f);
  train->add_option("--resume", resume, "Continue from a checkpoint");
  train->add_flag("--quiet", quiet, "Suppress progress lines");
  auto *eval = app.add_subcommand("eval", "Score held-out trials");
  AddCommon(eval, &eval_f, false);
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("--which", which, "student, teacher or both");
  auto *ablate = app.add_subcommand("ablate", "Train and score all seven systems");
  AddCommon(ablate, &ablate_f, false);
  auto *config = app.add_subcommand("config", "Print configuration");
  AddCommon(config, &config_f);
  config->add_flag("--dump-defaults", dump_defaults, "Print every default");
  config->add_option("--format", format, "toml or json")
      ->check(CLI::IsMember({"toml", "json"}));
  auto *m2c = app.add_subcommand("metrics-to-csv", "Convert metrics.jsonl to CSV");
  m2c->add_option("input", metrics_in, "metrics.jsonl")->required();
  m2c->add_option("-o,--output", metrics_out, "CSV path (stdout if omitted)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen) return CmdGen(gen_f);
    if (*train) return CmdTrain(train_f, resume, quiet);
    if (*eval) return CmdEval(eval_f, checkpoint, which);
    if (*ablate) return CmdAblate(ablate_f);
    if (*config) return CmdConfig(config_f, dump_defaults, format);
    if (*m2c) return CmdMetricsToCsv(metrics_in, metrics_out);
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
