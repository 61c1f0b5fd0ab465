// src/trainer.cc

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

#include "mtsv/trainer.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "json.hpp"
#include "mtsv/checkpoint.h"
#include "mtsv/error.h"
#include "mtsv/ops.h"
#include "mtsv/rng.h"

namespace mtsv {

namespace {

constexpr std::uint64_t kBatchStream = 0xba7c4;
constexpr std::uint64_t kStudentDropStream = 0xd40b;
constexpr std::uint64_t kTeacherDropStream = 0x7ead;

}  // namespace

std::size_t TrainConfig::WarmupSteps(const Corpus &corpus) const {
  if (warmup_steps) return *warmup_steps;
  std::size_t utts = 0;
  for (int id : corpus.TrainSpeakerIds()) utts += corpus.waveforms.at(id).size();
  const std::size_t per_step = speakers * utterances;
  std::size_t w = 3 * ((utts + per_step - 1) / per_step);
  return steps == 0 ? 0 : std::min(w, steps - 1);
}

void TrainConfig::Validate() const {
  if (!(lr_max > 0.0) || !std::isfinite(lr_max))
    throw ContractError("train: lr_max must be positive");
  if (warmup_steps && steps > 0 && *warmup_steps >= steps)
    throw ContractError("train: warmup_steps must be < steps");
  if (!(weight_decay >= 0.0)) throw ContractError("train: weight_decay < 0");
  if (!(momentum >= 0.0 && momentum < 1.0))
    throw ContractError("train: momentum must lie in [0, 1)");
  if (speakers < 1) throw ContractError("train: speakers must be >= 1");
  if (utterances < 2 || utterances % 2)
    throw ContractError("train: utterances per speaker must be even >= 2");
  if (!(consistency_weight >= 0.0))
    throw ContractError("train: consistency_weight < 0");
  if (!(bn_momentum >= 0.0 && bn_momentum <= 1.0))
    throw ContractError("train: bn_momentum must lie in [0, 1]");
  loss.Validate();
  ema.Validate();
  noise.Validate();
  BatchGeometry{speakers, utterances / 2}.Validate(
      loss.negative_pairs && loss.consistency != ConsistencyKind::kMse);
}

double LrAt(std::size_t step, std::size_t steps, std::size_t warmup,
            double lr_max) {
  if (step >= steps)
    throw ContractError("lr: step " + std::to_string(step) +
                        " outside [0, " + std::to_string(steps) + ")");
  if (warmup >= steps) throw ContractError("lr: warmup must be < steps");
  if (step < warmup)
    return lr_max * static_cast<double>(step + 1) / static_cast<double>(warmup);
  double phase = static_cast<double>(step - warmup) /
                 static_cast<double>(steps - warmup);
  return lr_max * 0.5 * (1.0 + std::cos(std::numbers::pi * phase));
}

std::vector<std::string> TrainableNames(const ParamSet &params) {
  std::vector<std::string> names;
  for (const auto &e : params.entries())
    if (e.kind != ParamKind::kRunningStat) names.push_back(e.name);
  return names;
}

void SgdStep(ParamSet *params, const GradientMap &grads, double lr,
             double momentum, double weight_decay, OptimizerState *state) {
  for (const auto &[name, g] : grads) {
    if (!params->Contains(name))
      throw ContractError("sgd: gradient for unknown parameter '" + name + "'");
    const auto &e = params->entry(name);
    if (e.kind == ParamKind::kRunningStat)
      throw ContractError("sgd: gradient for running statistic '" + name + "'");
    if (g.shape() != e.value.shape())
      throw ShapeError("sgd: gradient for '" + name + "' has shape " +
                       ShapeToString(g.shape()) + ", parameter has " +
                       ShapeToString(e.value.shape()));
    if (!g.AllFinite())
      throw NumericError("sgd: non-finite gradient for '" + name + "'");
  }
  for (const auto &[name, g] : grads) {
    Tensor &p = params->at(name);
    const double decay =
        params->entry(name).kind == ParamKind::kNoDecay ? 0.0 : weight_decay;
    auto it = state->velocity.find(name);
    if (it == state->velocity.end())
      it = state->velocity.emplace(name, Tensor(p.shape(), 0.0)).first;
    double *v = it->second.ptr();
    double *pv = p.ptr();
    const double *gv = g.ptr();
    for (std::size_t i = 0; i < p.size(); ++i) {
      v[i] = momentum * v[i] + gv[i] + decay * pv[i];
      pv[i] -= lr * v[i];
    }
  }
  if (params->Contains(kSimilarityScale)) {
    Tensor &w = params->at(kSimilarityScale);
    for (std::size_t i = 0; i < w.size(); ++i)
      w[i] = std::max(w[i], kMinSimilarityScale);
  }
}

// ------------------------------------------------------------------ objective

Objective::Objective(const ModelConfig &model, const LossConfig &loss,
                     const MiniBatchPair &batch, const ParamSet &student,
                     const ParamSet &teacher, const ObjectiveOptions &opts)
    : graph_(std::make_unique<Graph>()) {
  loss.Validate();
  if (batch.m.shape() != batch.m_prime.shape() || batch.m.rank() != 3)
    throw ShapeError("objective: m and m' must share a [S x H x T] shape");
  const BatchGeometry geo{batch.speakers(), batch.per_half()};
  const bool prediction = loss.learning_target == LearningTarget::kPrediction;
  const bool with_consistency = opts.consistency_weight > 0.0;
  if (!with_consistency && !loss.use_cce)
    throw ContractError("objective: every loss term is disabled");
  const std::size_t rows = geo.speakers * geo.per_half;
  const std::size_t t = batch.m.dim(2);
  const std::vector<int> labels = batch.RowLabels();

  // Teacher references for each half, computed outside the graph.
  TeacherForwardOptions topts;
  topts.training = true;
  topts.dropout_rate = opts.dropout_rate;
  const TeacherOutput tmode =
      prediction ? TeacherOutput::kPrediction : TeacherOutput::kEmbedding;
  Graph &g = *graph_;
  Tensor y_m_prime, y_m;
  if (with_consistency) {
    topts.dropout_seed = MixSeed(opts.dropout_seed, kTeacherDropStream, 0);
    y_m_prime = TeacherForward(teacher, model, batch.m_prime, tmode, topts);
    topts.dropout_seed = MixSeed(opts.dropout_seed, kTeacherDropStream, 1);
    y_m = TeacherForward(teacher, model, batch.m, tmode, topts);
  }

  NetBuilder net(&g, model, Role::kStudent, /*training=*/true,
                 /*trainable=*/true);
  if (opts.dropout_rate > 0.0)
    net.EnableDropout(opts.dropout_rate,
                      MixSeed(opts.dropout_seed, kStudentDropStream));
  Var w = with_consistency && !prediction ? net.Param(kSimilarityScale) : Var{};
  Var b = with_consistency && !prediction ? net.Param(kSimilarityBias) : Var{};

  struct Terms {
    Var consistency, cce, total;
  };
  auto direction = [&](const std::string &input, const std::string &ref) {
    Var x = g.Input(input, false);
    Var f = net.Encoder(x);
    Terms out;
    Var logits;
    if (loss.use_cce || prediction) logits = net.Classifier(f);
    if (with_consistency) {
      Var y = g.Input(ref, false);
      if (prediction) {
        Var p = Reshape(Softmax(logits), {geo.speakers, geo.per_half, 0});
        out.consistency = MseConsistency(p, y);
      } else {
        Var z = net.Head(HeadKind::kPredictor, net.Head(HeadKind::kProjector, f));
        z = Reshape(z, {geo.speakers, geo.per_half, 0});
        out.consistency = ConsistencyLoss(loss, z, y, w, b, geo);
      }
      out.total = opts.consistency_weight == 1.0
                      ? out.consistency
                      : Scale(out.consistency, opts.consistency_weight);
    }
    if (loss.use_cce) {
      out.cce = CceLoss(logits, labels);
      out.total = out.total.valid() ? Add(out.total, out.cce) : out.cce;
    }
    return out;
  };
  Terms fwd = direction("input.m", "teacher.y_m_prime");
  Terms rev = direction("input.m_prime", "teacher.y_m");
  ls_ = fwd.total;
  ls_tilde_ = rev.total;
  total_ = Scale(Add(ls_, ls_tilde_), 0.5);
  if (fwd.consistency.valid())
    consistency_ = Scale(Add(fwd.consistency, rev.consistency), 0.5);
  if (fwd.cce.valid()) cce_ = Scale(Add(fwd.cce, rev.cce), 0.5);

  student.BindInto(&g);
  g.Bind("input.m", batch.m.Reshaped({rows, t}));
  g.Bind("input.m_prime", batch.m_prime.Reshaped({rows, t}));
  if (with_consistency) {
    g.Bind("teacher.y_m_prime", std::move(y_m_prime));
    g.Bind("teacher.y_m", std::move(y_m));
  }
}

double Objective::Evaluate() { return graph_->Evaluate(total_)[0]; }

double Objective::Value(Var v) const { return graph_->Value(v)[0]; }

GradientMap Objective::Gradients(const ParamSet &student) {
  std::vector<std::string> wrt;
  for (const auto &name : TrainableNames(student))
    if (graph_->HasLeaf(name)) wrt.push_back(name);
  return graph_->Gradients(total_, wrt);
}

double TotalLoss(const ModelConfig &model, const LossConfig &loss,
                 const MiniBatchPair &batch, const ParamSet &student,
                 const ParamSet &teacher, const ObjectiveOptions &opts) {
  Objective obj(model, loss, batch, student, teacher, opts);
  return obj.Evaluate();
}

// ---------------------------------------------------------------- training

TrainState InitTrainState(const ModelConfig &model, const TrainConfig &cfg) {
  model.Validate();
  TrainState s;
  s.student = InitStudentParams(model, MixSeed(cfg.seed, 0x1417));
  s.teacher = InitTeacher(
      s.student,
      /*keep_classifier=*/cfg.loss.learning_target ==
          LearningTarget::kPrediction);
  return s;
}

std::string StepMetrics::ToJsonLine() const {
  nlohmann::ordered_json j;
  j["step"] = step;
  j["lr"] = lr;
  j["loss_total"] = loss_total;
  if (loss_consistency) j["loss_consistency"] = *loss_consistency;
  if (loss_cce) j["loss_cce"] = *loss_cce;
  if (eer_student) j["eer_student"] = *eer_student;
  if (eer_teacher) j["eer_teacher"] = *eer_teacher;
  return j.dump();
}

EmbeddingPath StudentEvalPath(const LossConfig &loss) {
  return loss.learning_target == LearningTarget::kPrediction
             ? EmbeddingPath::kEncoder
             : EmbeddingPath::kStudent;
}

EmbeddingPath TeacherEvalPath(const LossConfig &loss) {
  return loss.learning_target == LearningTarget::kPrediction
             ? EmbeddingPath::kEncoder
             : EmbeddingPath::kProjected;
}

TrainResult Train(const ModelConfig &model, const TrainConfig &cfg,
                  const Corpus &corpus, TrainState state,
                  const TrainOptions &opts) {
  namespace fs = std::filesystem;
  model.Validate();
  cfg.Validate();
  if (corpus.config.sample_len != model.input_samples)
    throw ContractError("train: corpus sample_len " +
                        std::to_string(corpus.config.sample_len) +
                        " differs from model input_samples " +
                        std::to_string(model.input_samples));
  if (corpus.TrainSpeakerIds().size() > model.class_count)
    throw ContractError("train: class_count is smaller than the number of "
                        "training speakers");
  if (state.step > cfg.steps)
    throw ContractError("train: state is past the configured step count");

  const std::size_t warmup = cfg.WarmupSteps(corpus);
  const bool write = !opts.out_dir.empty();
  std::ofstream metrics_out;
  if (write) {
    std::error_code ec;
    fs::create_directories(opts.out_dir, ec);
    if (ec)
      throw IoError("train: cannot create '" + opts.out_dir +
                    "': " + ec.message());
    auto mode = state.step == 0 ? std::ios::trunc : std::ios::app;
    metrics_out.open(fs::path(opts.out_dir) / "metrics.jsonl",
                     std::ios::out | mode);
    if (!metrics_out)
      throw IoError("train: cannot open metrics in '" + opts.out_dir + "'");
  }
  auto ckpt = [&](const std::string &file, const TrainState &s) {
    if (write)
      SaveCheckpoint((fs::path(opts.out_dir) / file).string(), s, model, cfg);
  };

  TrainResult result;
  TrialList trials;
  if (cfg.eval_every > 0 && state.step < cfg.steps)
    trials = BuildTrialList(corpus, opts.eval.trial_seed);

  const double dropout =
      cfg.batch_mode == BatchMode::kSameNoised ? model.dropout_rate : 0.0;
  const auto &hooks = opts.hooks;
  while (state.step < cfg.steps) {
    const std::size_t step = state.step;
    StepMetrics m;
    m.step = step;
    m.lr = LrAt(step, cfg.steps, warmup, cfg.lr_max);
    std::vector<AuxRecord> aux;
    try {
      MiniBatchPair batch =
          SampleMiniBatch(corpus, cfg.speakers, cfg.utterances, cfg.batch_mode,
                          MixSeed(cfg.seed, kBatchStream, step), cfg.noise);
      if (hooks.on_batch) hooks.on_batch(step, batch);
      ObjectiveOptions oo;
      oo.consistency_weight = cfg.consistency_weight;
      oo.dropout_rate = dropout;
      oo.dropout_seed = MixSeed(cfg.seed, step);
      Objective obj(model, cfg.loss, batch, state.student, state.teacher, oo);
      m.loss_total = obj.Evaluate();
      if (obj.consistency().valid())
        m.loss_consistency = obj.Value(obj.consistency());
      if (obj.cce().valid()) m.loss_cce = obj.Value(obj.cce());
      GradientMap grads = obj.Gradients(state.student);
      aux = obj.aux();
      SgdStep(&state.student, grads, m.lr, cfg.momentum, cfg.weight_decay,
              &state.optimizer);
    } catch (const NumericError &e) {
      ckpt("last_good.ckpt", state);
      throw NumericError("train: numeric failure at step " +
                         std::to_string(step) + ": " + e.what());
    }
    UpdateRunningStats(&state.student, aux, cfg.bn_momentum);
    if (hooks.on_phase) hooks.on_phase(step, StepPhase::kAfterSgd, state);
    EmaUpdate(&state.teacher, state.student, cfg.ema);
    if (hooks.on_phase) hooks.on_phase(step, StepPhase::kAfterEma, state);
    state.step = step + 1;

    const bool eval_now =
        cfg.eval_every > 0 &&
        (state.step % cfg.eval_every == 0 || state.step == cfg.steps);
    if (eval_now) {
      m.eer_student = EvaluateModel(state.student, model,
                                    StudentEvalPath(cfg.loss), corpus, trials,
                                    opts.eval)
                          .eer.eer;
      if (opts.eval_teacher)
        m.eer_teacher = EvaluateModel(state.teacher, model,
                                      TeacherEvalPath(cfg.loss), corpus,
                                      trials, opts.eval)
                            .eer.eer;
      if (!state.best_step || *m.eer_student < state.best_eer) {
        state.best_eer = *m.eer_student;
        state.best_step = state.step;
        ckpt("best.ckpt", state);
      }
    }
    if (write) {
      metrics_out << m.ToJsonLine() << '\n';
      metrics_out.flush();
      if (!metrics_out) throw IoError("train: metrics write failed");
    }
    if (hooks.on_metrics) hooks.on_metrics(m);
    result.metrics.push_back(m);
    if (cfg.stop_eer && m.eer_student && *m.eer_student <= *cfg.stop_eer) {
      result.stopped_at = state.step;
      break;
    }
  }
  ckpt("final.ckpt", state);
  result.state = std::move(state);
  return result;
}

}  // namespace mtsv
