// include/mtsv/trainer.h

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

#ifndef MTSV_TRAINER_H_
#define MTSV_TRAINER_H_

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mtsv/corpus.h"
#include "mtsv/eval.h"
#include "mtsv/graph.h"
#include "mtsv/losses.h"
#include "mtsv/mean_teacher.h"
#include "mtsv/model.h"

namespace mtsv {

struct TrainConfig {
  std::size_t steps = 2000;
  double lr_max = 0.05;
  /// Unset means three passes over the training utterances, capped so that
  /// at least one cosine step remains.
  std::optional<std::size_t> warmup_steps;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::size_t speakers = 4;    // S
  std::size_t utterances = 4;  // U, split evenly into m and m'
  BatchMode batch_mode = BatchMode::kDifferent;
  LossConfig loss;
  EmaConfig ema;
  std::uint64_t seed = 1;
  /// Held-out evaluation period in steps; 0 disables periodic evaluation.
  std::size_t eval_every = 250;
  /// Multiplies the consistency term of each student loss.
  double consistency_weight = 1.0;
  /// Momentum of the student's running normalization statistics.
  double bn_momentum = 0.9;
  NoiseConfig noise;
  /// Stop once a periodic evaluation reaches this student EER.
  std::optional<double> stop_eer;

  /// Resolved warm-up length for a corpus.
  std::size_t WarmupSteps(const Corpus &corpus) const;
  void Validate() const;
};

/// Linear warm-up to lr_max over `warmup` steps, then cosine annealing
/// over the remaining steps.
double LrAt(std::size_t step, std::size_t steps, std::size_t warmup,
            double lr_max);

/// Momentum buffers keyed by parameter name.
struct OptimizerState {
  std::map<std::string, Tensor> velocity;
};

/// v <- momentum * v + g + decay * p;  p <- p - lr * v.
/// Decay skips kNoDecay entries; running statistics never receive updates.
/// Every gradient must name a trainable entry.  A non-finite gradient
/// throws NumericError before any parameter changes.  The similarity
/// scale is clamped to kMinSimilarityScale afterwards.
void SgdStep(ParamSet *params, const GradientMap &grads, double lr,
             double momentum, double weight_decay, OptimizerState *state);

/// Names of entries that take gradients (everything but running stats).
std::vector<std::string> TrainableNames(const ParamSet &params);

struct ObjectiveOptions {
  double consistency_weight = 1.0;
  /// Dropout after each residual stage, in both networks; 0 disables.
  double dropout_rate = 0.0;
  std::uint64_t dropout_seed = 0;
};

/// One step's symmetric objective.  Student graphs run on m and on m';
/// the teacher's outputs for the opposite half are bound as constant
/// leaves.  L_S pairs student(m) with teacher(m'), the mirrored term pairs
/// student(m') with teacher(m), and the total is their mean.  Each student
/// term is weight * consistency + CCE (when enabled), with the classifier
/// on the encoder output.
class Objective {
 public:
  Objective(const ModelConfig &model, const LossConfig &loss,
            const MiniBatchPair &batch, const ParamSet &student,
            const ParamSet &teacher, const ObjectiveOptions &opts = {});

  Graph &graph() { return *graph_; }
  Var total() const { return total_; }
  Var student_loss() const { return ls_; }
  Var mirrored_loss() const { return ls_tilde_; }
  /// Mean of the two directions' consistency (resp. CCE) terms; invalid
  /// when the term is disabled.
  Var consistency() const { return consistency_; }
  Var cce() const { return cce_; }

  /// Evaluates the whole graph and returns the total.
  double Evaluate();
  double Value(Var v) const;
  /// d(total)/d(p) for every trainable student entry in the graph.
  GradientMap Gradients(const ParamSet &student);
  /// Batch statistics from both student passes, in evaluation order.
  const std::vector<AuxRecord> &aux() const { return graph_->aux(); }

 private:
  std::unique_ptr<Graph> graph_;
  Var total_, ls_, ls_tilde_, consistency_, cce_;
};

/// Convenience: the symmetric total for one batch.
double TotalLoss(const ModelConfig &model, const LossConfig &loss,
                 const MiniBatchPair &batch, const ParamSet &student,
                 const ParamSet &teacher, const ObjectiveOptions &opts = {});

struct TrainState {
  ParamSet student;
  ParamSet teacher{Role::kTeacher};
  OptimizerState optimizer;
  /// Number of completed steps.
  std::size_t step = 0;
  double best_eer = 1.0;
  std::optional<std::size_t> best_step;
};

TrainState InitTrainState(const ModelConfig &model, const TrainConfig &cfg);

struct StepMetrics {
  std::size_t step = 0;
  double lr = 0.0;
  double loss_total = 0.0;
  std::optional<double> loss_consistency, loss_cce;
  std::optional<double> eer_student, eer_teacher;

  /// One JSON object on one line, keys in a fixed order.
  std::string ToJsonLine() const;
};

enum class StepPhase { kAfterSgd, kAfterEma };

struct TrainHooks {
  /// Sees every sampled batch before the forward pass.
  std::function<void(std::size_t step, const MiniBatchPair &)> on_batch;
  std::function<void(std::size_t step, StepPhase, const TrainState &)>
      on_phase;
  std::function<void(const StepMetrics &)> on_metrics;
};

struct TrainOptions {
  /// When set: metrics.jsonl plus final/best/last_good checkpoints.
  std::string out_dir;
  EvalConfig eval;
  TrainHooks hooks;
  /// Evaluate the teacher alongside the student.
  bool eval_teacher = true;
};

struct TrainResult {
  TrainState state;
  std::vector<StepMetrics> metrics;
  /// Step at which periodic evaluation first met stop_eer, if it did.
  std::optional<std::size_t> stopped_at;
};

/// Runs steps state.step .. cfg.steps-1.  Batches, dropout masks and noise
/// are keyed by (seed, step), so a resumed run continues exactly where an
/// uninterrupted one would.  A numeric failure writes last_good.ckpt (the
/// state before the failing step) when out_dir is set and rethrows with the
/// step index.
TrainResult Train(const ModelConfig &model, const TrainConfig &cfg,
                  const Corpus &corpus, TrainState state,
                  const TrainOptions &opts = {});

/// Student embedding path for held-out scoring: q(g(f)) for embedding
/// targets, f for prediction targets (no projector is trained there).
EmbeddingPath StudentEvalPath(const LossConfig &loss);
EmbeddingPath TeacherEvalPath(const LossConfig &loss);

}  // namespace mtsv

#endif  // MTSV_TRAINER_H_
