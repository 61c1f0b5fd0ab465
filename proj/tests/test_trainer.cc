// tests/test_trainer.cc

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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "mtsv/checkpoint.h"
#include "mtsv/error.h"
#include "mtsv/trainer.h"
#include "oracles.h"

using namespace mtsv;
namespace fs = std::filesystem;

namespace {

CorpusConfig TinyCorpus() {
  CorpusConfig c;
  c.n_train_speakers = 6;
  c.n_eval_speakers = 3;
  c.utterances_per_speaker = 6;
  c.sample_len = 729;
  c.eval_sample_len = 1458;
  return c;
}

ModelConfig TinyModel() {
  ModelConfig m;
  m.input_samples = 729;
  m.conv_channels = {4, 4, 8, 8};
  m.res_blocks = {1, 1, 1};
  m.attention_hidden = 8;
  m.embedding_dim = 8;
  m.projector_hidden = 8;
  m.class_count = 6;
  return m;
}

TrainConfig TinyTrain(std::size_t steps) {
  TrainConfig t;
  t.steps = steps;
  t.speakers = 3;
  t.utterances = 4;
  t.eval_every = 0;
  return t;
}

const Corpus &SharedCorpus() {
  static const Corpus c = GenerateCorpus(TinyCorpus());
  return c;
}

std::string Slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path TempDir(const std::string &name) {
  fs::path p = fs::temp_directory_path() / ("mtsv_trainer_" + name);
  fs::remove_all(p);
  return p;
}

bool SameParams(const ParamSet &a, const ParamSet &b) {
  if (a.Names() != b.Names()) return false;
  for (const auto &e : a.entries())
    if (!BitwiseEqual(e.value, b.at(e.name))) return false;
  return true;
}

}  // namespace

TEST_CASE("learning-rate schedule") {
  const std::size_t steps = 110, warm = 10;
  const double lr = 0.05;
  CHECK(LrAt(0, steps, warm, lr) == doctest::Approx(lr / warm));
  CHECK(LrAt(warm - 1, steps, warm, lr) == doctest::Approx(lr));
  CHECK(LrAt(warm + 50, steps, warm, lr) == doctest::Approx(lr / 2));
  const double last = lr * 0.5 * (1 + std::cos(M_PI * (1 - 1.0 / (steps - warm))));
  CHECK(LrAt(steps - 1, steps, warm, lr) == doctest::Approx(last));
  CHECK(last < 1e-3 * lr);
  for (std::size_t s = warm; s + 1 < steps; ++s)
    CHECK(LrAt(s + 1, steps, warm, lr) <= LrAt(s, steps, warm, lr));
  CHECK_THROWS_AS(LrAt(steps, steps, warm, lr), ContractError);
  CHECK(LrAt(0, 5, 0, lr) == doctest::Approx(lr));
}

TEST_CASE("warm-up spans three passes over the training utterances") {
  TrainConfig t = TinyTrain(1000);
  // 6 speakers x 6 utterances over batches of 3 x 4.
  CHECK(t.WarmupSteps(SharedCorpus()) == 9);
  t.steps = 5;
  CHECK(t.WarmupSteps(SharedCorpus()) == 4);
  t.warmup_steps = 2;
  CHECK(t.WarmupSteps(SharedCorpus()) == 2);
}

TEST_CASE("sgd step degenerate cases") {
  ParamSet p;
  p.Add("a", Tensor({3}, std::vector<double>{1, -2, 3}), ParamKind::kWeight);
  p.Add(kSimilarityScale, Tensor({1}, 10.0), ParamKind::kNoDecay);
  p.Add("bn.mean", Tensor({2}, 0.5), ParamKind::kRunningStat);
  OptimizerState st;

  GradientMap g{{"a", Tensor({3}, std::vector<double>{0.5, 0.5, -1})},
                {kSimilarityScale, Tensor({1}, 0.0)}};
  SgdStep(&p, g, 0.1, 0.0, 0.0, &st);
  CHECK(p.at("a")[0] == doctest::Approx(0.95));
  CHECK(p.at("a")[2] == doctest::Approx(3.1));

  ParamSet before = p;
  GradientMap zero{{"a", Tensor({3}, 0.0)}};
  OptimizerState fresh;
  SgdStep(&p, zero, 0.1, 0.9, 0.0, &fresh);
  CHECK(SameParams(p, before));

  // Decay skips no-decay entries.
  SgdStep(&p, GradientMap{{kSimilarityScale, Tensor({1}, 0.0)}}, 0.1, 0.0, 0.5,
          &fresh);
  CHECK(p.at(kSimilarityScale)[0] == 10.0);

  // The similarity scale stays positive.
  SgdStep(&p, GradientMap{{kSimilarityScale, Tensor({1}, 1e6)}}, 0.1, 0.0, 0.0,
          &fresh);
  CHECK(p.at(kSimilarityScale)[0] == kMinSimilarityScale);

  GradientMap stat{{"bn.mean", Tensor({2}, 1.0)}};
  CHECK_THROWS_AS(SgdStep(&p, stat, 0.1, 0.9, 0.0, &fresh), ContractError);

  before = p;
  GradientMap bad{{"a", Tensor({3}, std::vector<double>{0, NAN, 0})}};
  CHECK_THROWS_AS(SgdStep(&p, bad, 0.1, 0.9, 0.0, &fresh), NumericError);
  CHECK(SameParams(p, before));
}

TEST_CASE("sgd momentum and decay follow the update rule") {
  ParamSet p;
  p.Add("x", Tensor({1}, 2.0), ParamKind::kWeight);
  OptimizerState st;
  const double lr = 0.1, mu = 0.9, wd = 0.01;
  double x = 2.0, v = 0.0;
  for (int k = 0; k < 5; ++k) {
    const double g = 0.3 * (k + 1);
    SgdStep(&p, GradientMap{{"x", Tensor({1}, g)}}, lr, mu, wd, &st);
    v = mu * v + g + wd * x;
    x -= lr * v;
    CHECK(p.at("x")[0] == doctest::Approx(x).epsilon(1e-14));
  }
}

TEST_CASE("sgd descends a quadratic bowl") {
  ParamSet p;
  p.Add("x", Tensor({4}, std::vector<double>{1, -2, 0.5, 3}), ParamKind::kWeight);
  OptimizerState st;
  double prev = std::sqrt(oracle::Dot(p.at("x").values(), p.at("x").values()));
  for (int k = 0; k < 10; ++k) {
    Tensor g = p.at("x");
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= 2.0;
    SgdStep(&p, GradientMap{{"x", g}}, 0.01, 0.9, 0.0, &st);
    const double now = std::sqrt(oracle::Dot(p.at("x").values(), p.at("x").values()));
    CHECK(now < prev);
    prev = now;
  }
}

TEST_CASE("equal halves make both directions agree and swapping is free") {
  const ModelConfig model = TinyModel();
  ParamSet student = InitStudentParams(model, 4);
  for (const auto &preset :
       {LossConfig{}, LossConfig{ConsistencyKind::kMse, false,
                                 LearningTarget::kPrediction, true}}) {
    ParamSet teacher = InitTeacher(
        student, preset.learning_target == LearningTarget::kPrediction);
    MiniBatchPair b =
        SampleMiniBatch(SharedCorpus(), 3, 4, BatchMode::kDifferent, 5);
    MiniBatchPair same = b;
    same.m_prime = same.m;
    same.m_prime_sources = same.m_sources;
    Objective obj(model, preset, same, student, teacher);
    const double total = obj.Evaluate();
    const double ls = obj.Value(obj.student_loss());
    const double lt = obj.Value(obj.mirrored_loss());
    CHECK(std::abs(ls - lt) <= 1e-12);
    CHECK(std::abs(total - ls) <= 1e-12);

    const double fwd = TotalLoss(model, preset, b, student, teacher);
    const double rev = TotalLoss(model, preset, b.Swapped(), student, teacher);
    CHECK(std::abs(fwd - rev) <= 1e-12);
  }
}

TEST_CASE("total equals separately computed terms averaged over directions") {
  const ModelConfig model = TinyModel();
  ParamSet student = InitStudentParams(model, 6);
  ParamSet teacher = InitTeacher(student);
  for (auto &e : teacher.entries())
    for (double &v : e.value.data()) v *= 0.9;  // teacher differs from student
  MiniBatchPair b = SampleMiniBatch(SharedCorpus(), 3, 4, BatchMode::kDifferent, 8);
  const LossConfig loss;
  const double w = student.at(kSimilarityScale)[0];
  const double bias = student.at(kSimilarityBias)[0];

  auto direction = [&](const Tensor &mine, const Tensor &other) {
    Graph g;
    NetBuilder net(&g, model, Role::kStudent, true, true);
    Var x = g.Input("x", false);
    Var f = net.Encoder(x);
    Var z = net.Head(HeadKind::kPredictor, net.Head(HeadKind::kProjector, f));
    Var logits = net.Classifier(f);
    student.BindInto(&g);
    g.Bind("x", mine.Reshaped({12 / 2, 729}));
    g.Evaluate(z);
    Tensor zt = g.Value(z).Reshaped({3, 2, 8});
    Tensor y = TeacherForward(teacher, model, other, TeacherOutput::kEmbedding);
    return Ge2eHLossValue(zt, y.Reshaped({3, 2, 8}), w, bias) +
           CceValue(g.Value(logits), b.RowLabels());
  };
  const double expected = 0.5 * (direction(b.m, b.m_prime) + direction(b.m_prime, b.m));
  CHECK(std::abs(TotalLoss(model, loss, b, student, teacher) - expected) <= 1e-12);
}

TEST_CASE("ema always sees the post-update student") {
  const ModelConfig model = TinyModel();
  TrainConfig cfg = TinyTrain(6);
  TrainState init = InitTrainState(model, cfg);
  ParamSet teacher_before, student_after_sgd;
  std::vector<StepPhase> order;
  TrainOptions opts;
  std::size_t checked = 0;
  opts.hooks.on_phase = [&](std::size_t, StepPhase phase, const TrainState &s) {
    order.push_back(phase);
    if (phase == StepPhase::kAfterSgd) {
      teacher_before = s.teacher;
      student_after_sgd = s.student;
      return;
    }
    for (const auto &e : s.teacher.entries()) {
      const Tensor &t0 = teacher_before.at(e.name);
      const Tensor &st = student_after_sgd.at(e.name);
      for (std::size_t i = 0; i < t0.size(); ++i) {
        const double want = cfg.ema.alpha * t0[i] + (1 - cfg.ema.alpha) * st[i];
        if (std::abs(e.value[i] - want) > 1e-15 * (1 + std::abs(want))) {
          FAIL("teacher entry " << e.name << " is not the EMA of the "
                                << "post-update student");
        }
      }
    }
    ++checked;
  };
  Train(model, cfg, SharedCorpus(), init, opts);
  CHECK(checked == 6);
  REQUIRE(order.size() == 12);
  for (std::size_t i = 0; i < order.size(); ++i)
    CHECK(order[i] == (i % 2 ? StepPhase::kAfterEma : StepPhase::kAfterSgd));
}

TEST_CASE("teacher replays the recorded student trajectory") {
  const ModelConfig model = TinyModel();
  TrainConfig cfg = TinyTrain(8);
  cfg.consistency_weight = 0.0;
  TrainState init = InitTrainState(model, cfg);
  std::vector<ParamSet> trajectory;
  TrainOptions opts;
  opts.hooks.on_phase = [&](std::size_t, StepPhase phase, const TrainState &s) {
    if (phase == StepPhase::kAfterSgd) trajectory.push_back(s.student);
  };
  TrainResult r = Train(model, cfg, SharedCorpus(), init, opts);
  REQUIRE(trajectory.size() == 8);
  ParamSet replay = init.teacher;
  for (const ParamSet &s : trajectory)
    for (auto &e : replay.entries()) {
      const Tensor &th = s.at(e.name);
      for (std::size_t i = 0; i < e.value.size(); ++i)
        e.value[i] = cfg.ema.alpha * e.value[i] + (1 - cfg.ema.alpha) * th[i];
    }
  double worst = 0.0;
  for (const auto &e : replay.entries()) {
    const Tensor &got = r.state.teacher.at(e.name);
    for (std::size_t i = 0; i < got.size(); ++i)
      worst = std::max(worst, std::abs(got[i] - e.value[i]));
  }
  CHECK(worst <= 1e-12);
  CHECK_FALSE(r.metrics.back().loss_consistency.has_value());
}

TEST_CASE("zero steps is a no-op") {
  const ModelConfig model = TinyModel();
  TrainConfig cfg = TinyTrain(0);
  TrainState init = InitTrainState(model, cfg);
  TrainResult r = Train(model, cfg, SharedCorpus(), init);
  CHECK(r.metrics.empty());
  CHECK(r.state.step == 0);
  CHECK(SameParams(r.state.student, init.student));
  CHECK(SameParams(r.state.teacher, init.teacher));
}

TEST_CASE("training is deterministic and the log is monotone") {
  const ModelConfig model = TinyModel();
  TrainConfig cfg = TinyTrain(50);
  cfg.eval_every = 25;
  cfg.batch_mode = BatchMode::kSameNoised;  // exercises dropout and noise
  fs::path a = TempDir("det_a"), b = TempDir("det_b");
  TrainOptions oa, ob;
  oa.out_dir = a.string();
  ob.out_dir = b.string();
  oa.eval.n_crops = ob.eval.n_crops = 2;
  Train(model, cfg, SharedCorpus(), InitTrainState(model, cfg), oa);
  Train(model, cfg, SharedCorpus(), InitTrainState(model, cfg), ob);
  const std::string la = Slurp(a / "metrics.jsonl");
  CHECK(!la.empty());
  CHECK(la == Slurp(b / "metrics.jsonl"));
  std::istringstream lines(la);
  std::string line;
  long prev = -1;
  std::size_t evals = 0;
  while (std::getline(lines, line)) {
    auto j = nlohmann::json::parse(line);
    CHECK(j["step"].get<long>() == prev + 1);
    prev = j["step"].get<long>();
    evals += j.contains("eer_student");
  }
  CHECK(prev == 49);
  CHECK(evals == 2);
  CHECK(fs::exists(a / "final.ckpt"));
  CHECK(fs::exists(a / "best.ckpt"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("checkpoint resume matches an uninterrupted run") {
  const ModelConfig model = TinyModel();
  TrainConfig cfg = TinyTrain(10);
  fs::path dir = TempDir("resume");
  fs::create_directories(dir);
  TrainResult first = Train(model, cfg, SharedCorpus(), InitTrainState(model, cfg));
  SaveCheckpoint((dir / "s10.ckpt").string(), first.state, model, cfg);
  Checkpoint loaded = LoadCheckpoint((dir / "s10.ckpt").string());
  CHECK(loaded.state.step == 10);
  CHECK(loaded.seed == cfg.seed);
  CHECK(SameParams(loaded.state.student, first.state.student));
  CHECK(SameParams(loaded.state.teacher, first.state.teacher));

  TrainConfig more = cfg;
  more.steps = 20;
  TrainResult resumed = Train(model, more, SharedCorpus(), loaded.state);
  TrainResult straight = Train(model, more, SharedCorpus(), first.state);
  CHECK(SameParams(resumed.state.student, straight.state.student));
  CHECK(SameParams(resumed.state.teacher, straight.state.teacher));
  REQUIRE(resumed.metrics.size() == 10);
  for (std::size_t i = 0; i < 10; ++i)
    CHECK(resumed.metrics[i].ToJsonLine() == straight.metrics[i].ToJsonLine());
  fs::remove_all(dir);
}

TEST_CASE("corrupt checkpoints are rejected") {
  const ModelConfig model = TinyModel();
  TrainConfig cfg = TinyTrain(1);
  fs::path dir = TempDir("corrupt");
  fs::create_directories(dir);
  const fs::path good = dir / "good.ckpt";
  SaveCheckpoint(good.string(), InitTrainState(model, cfg), model, cfg);
  const std::string bytes = Slurp(good);

  auto write = [&](const std::string &name, const std::string &data) {
    std::ofstream(dir / name, std::ios::binary) << data;
    return (dir / name).string();
  };
  std::string flipped = bytes;
  flipped[flipped.size() - 3] ^= 0x40;
  CHECK_THROWS_AS(LoadCheckpoint(write("flip.ckpt", flipped)), FormatError);
  CHECK_THROWS_AS(LoadCheckpoint(write("short.ckpt", bytes.substr(0, bytes.size() / 2))),
                  FormatError);
  std::string magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(LoadCheckpoint(write("magic.ckpt", magic)), FormatError);
  CHECK_THROWS_AS(LoadCheckpoint((dir / "missing.ckpt").string()), IoError);
  fs::remove_all(dir);
}

TEST_CASE("numeric failure names the step and keeps the last good state") {
  const ModelConfig model = TinyModel();
  TrainConfig cfg = TinyTrain(20);
  cfg.lr_max = 1e200;
  cfg.warmup_steps = 0;
  fs::path dir = TempDir("blowup");
  TrainOptions opts;
  opts.out_dir = dir.string();
  std::string message;
  try {
    Train(model, cfg, SharedCorpus(), InitTrainState(model, cfg), opts);
  } catch (const NumericError &e) {
    message = e.what();
  }
  CHECK(message.find("numeric failure at step") != std::string::npos);
  REQUIRE(fs::exists(dir / "last_good.ckpt"));
  Checkpoint last = LoadCheckpoint((dir / "last_good.ckpt").string());
  for (const auto &e : last.state.student.entries()) CHECK(e.value.AllFinite());
  fs::remove_all(dir);
}
