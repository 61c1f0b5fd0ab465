// src/losses.cc

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

#include "mtsv/losses.h"

#include <algorithm>
#include <cctype>

#include "mtsv/error.h"
#include "mtsv/ops.h"

namespace mtsv {

void LossConfig::Validate() const {
  if (learning_target == LearningTarget::kPrediction &&
      consistency != ConsistencyKind::kMse)
    throw ContractError(
        "loss: the prediction learning target is only defined for MSE "
        "consistency");
  if (learning_target == LearningTarget::kPrediction && negative_pairs)
    throw ContractError(
        "loss: negative pairs are not defined between class predictions");
}

std::string ToString(ConsistencyKind k) {
  switch (k) {
    case ConsistencyKind::kMse: return "MSE";
    case ConsistencyKind::kGe2e: return "GE2E";
    case ConsistencyKind::kAp: return "AP";
    default: return "GE2E-H";
  }
}

std::string ToString(LearningTarget t) {
  return t == LearningTarget::kPrediction ? "P" : "E";
}

static std::string Normalized(std::string s) {
  std::string out;
  for (char c : s)
    if (c != '-' && c != '_') out.push_back(std::tolower(c));
  return out;
}

ConsistencyKind ParseConsistency(const std::string &s) {
  const std::string n = Normalized(s);
  if (n == "mse") return ConsistencyKind::kMse;
  if (n == "ge2e") return ConsistencyKind::kGe2e;
  if (n == "ap") return ConsistencyKind::kAp;
  if (n == "ge2eh") return ConsistencyKind::kGe2eH;
  throw ContractError("unknown consistency loss '" + s +
                      "' (expected mse, ge2e, ap or ge2e_h)");
}

LearningTarget ParseLearningTarget(const std::string &s) {
  const std::string n = Normalized(s);
  if (n == "p" || n == "prediction") return LearningTarget::kPrediction;
  if (n == "e" || n == "embedding") return LearningTarget::kEmbedding;
  throw ContractError("unknown learning target '" + s +
                      "' (expected prediction or embedding)");
}

void BatchGeometry::Validate(bool needs_negatives) const {
  if (per_half == 0)
    throw ContractError("loss: at least 2 utterances per speaker required");
  if (speakers == 0 || (needs_negatives && speakers < 2))
    throw ContractError("loss: at least 2 speakers required for negatives");
}

namespace {

Graph &G(Var v) { return *v.graph; }

// [S x Q x S] constant with ones where the last index equals the speaker.
Tensor OwnSpeakerMask(std::size_t speakers, std::size_t queries) {
  Tensor m({speakers, queries, speakers}, 0.0);
  for (std::size_t j = 0; j < speakers; ++j)
    for (std::size_t i = 0; i < queries; ++i)
      m[(j * queries + i) * speakers + j] = 1.0;
  return m;
}

std::vector<int> SpeakerLabels(std::size_t speakers, std::size_t queries) {
  std::vector<int> labels;
  labels.reserve(speakers * queries);
  for (std::size_t j = 0; j < speakers; ++j)
    for (std::size_t i = 0; i < queries; ++i)
      labels.push_back(static_cast<int>(j));
  return labels;
}

// Sum over both halves per speaker, [S x D].
Var SpeakerSums(Var z, Var y_stopped) {
  return Add(SumAxis(z, 1), SumAxis(y_stopped, 1));
}

// Cosine logits of queries [S x Q x D] against centroids formed from the
// union sums; a query's own centroid excludes the query itself.
Var Ge2eLogits(Var queries, Var sums, Var w, Var b, std::size_t speakers,
               std::size_t q, std::size_t utterances) {
  const double u = static_cast<double>(utterances);
  Var full = Scale(sums, 1.0 / u);
  Var own = Scale(Sub(BroadcastAxis(sums, 1, q), queries), 1.0 / (u - 1.0));
  Var qn = L2Normalize(queries);
  Var cos_all = MatMul(qn, Transpose(L2Normalize(full)));  // [S x Q x S]
  Var cos_own = RowDot(qn, L2Normalize(own));               // [S x Q]
  Graph &g = G(queries);
  Tensor diag = OwnSpeakerMask(speakers, q);
  Tensor off(diag.shape());
  for (std::size_t i = 0; i < off.size(); ++i) off[i] = 1.0 - diag[i];
  Var cos = Add(Mul(cos_all, g.Constant(std::move(off), "off_diagonal_mask")),
                Mul(BroadcastAxis(cos_own, 2, speakers),
                    g.Constant(std::move(diag), "diagonal_mask")));
  return ShiftBy(ScaleBy(cos, w), b);
}

Var SoftmaxOverSpeakers(Var logits, std::size_t speakers, std::size_t q) {
  return CrossEntropy(Reshape(logits, {speakers * q, speakers}),
                      SpeakerLabels(speakers, q));
}

}  // namespace

Var Centroids(Var z, Var y_teacher, const BatchGeometry &geo) {
  geo.Validate(false);
  return Scale(SpeakerSums(z, StopGradient(y_teacher)),
               1.0 / static_cast<double>(geo.utterances()));
}

Var ExclusionCentroids(Var z, Var y_teacher, const BatchGeometry &geo) {
  geo.Validate(false);
  Var sums = SpeakerSums(z, StopGradient(y_teacher));
  return Scale(Sub(BroadcastAxis(sums, 1, geo.per_half), z),
               1.0 / static_cast<double>(geo.utterances() - 1));
}

Var SimilarityMatrix(Var z, Var y_teacher, Var w, Var b,
                     const BatchGeometry &geo) {
  geo.Validate(false);
  Var sums = SpeakerSums(z, StopGradient(y_teacher));
  return Ge2eLogits(z, sums, w, b, geo.speakers, geo.per_half,
                    geo.utterances());
}

Var Ge2eHLoss(Var z, Var y_teacher, Var w, Var b, const BatchGeometry &geo) {
  geo.Validate(true);
  return SoftmaxOverSpeakers(SimilarityMatrix(z, y_teacher, w, b, geo),
                             geo.speakers, geo.per_half);
}

Var Ge2eLoss(Var z, Var y_teacher, Var w, Var b, const BatchGeometry &geo) {
  geo.Validate(true);
  Var y = StopGradient(y_teacher);
  Var all = Concat({z, y}, 1);
  Var logits = Ge2eLogits(all, SpeakerSums(z, y), w, b, geo.speakers,
                          geo.utterances(), geo.utterances());
  return SoftmaxOverSpeakers(logits, geo.speakers, geo.utterances());
}

Var ApLoss(Var z, Var y_teacher, Var w, Var b, const BatchGeometry &geo) {
  geo.Validate(true);
  Var y = StopGradient(y_teacher);
  Var query = SumAxis(Slice(z, 1, 0, 1), 1);  // [S x D]
  Var proto =
      Scale(SumAxis(y, 1), 1.0 / static_cast<double>(geo.per_half));
  Var cos = MatMul(L2Normalize(query), Transpose(L2Normalize(proto)));
  Var logits = ShiftBy(ScaleBy(cos, w), b);
  return CrossEntropy(logits, SpeakerLabels(geo.speakers, 1));
}

Var PositiveCosineLoss(Var z, Var y_teacher, const BatchGeometry &geo) {
  Var own = ExclusionCentroids(z, y_teacher, geo);
  return AddScalar(Scale(Mean(CosineSimilarity(z, own)), -1.0), 1.0);
}

Var MseConsistency(Var student, Var teacher) {
  return Mean(Square(Sub(student, StopGradient(teacher))));
}

Var EmbeddingMseLoss(Var z, Var y_teacher, bool negative_pairs,
                     const BatchGeometry &geo) {
  geo.Validate(negative_pairs);
  Var zn = L2Normalize(z);
  Var yn = L2Normalize(StopGradient(y_teacher));
  Var loss = MseConsistency(zn, yn);
  if (!negative_pairs) return loss;
  const std::size_t n = geo.speakers * geo.per_half;
  Var cos = MatMul(Reshape(zn, {n, 0}), Transpose(Reshape(yn, {n, 0})));
  Tensor mask({n, n}, 0.0);
  std::size_t count = 0;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c)
      if (r / geo.per_half != c / geo.per_half) {
        mask[r * n + c] = 1.0;
        ++count;
      }
  Var neg = Sum(Mul(Square(cos), G(z).Constant(std::move(mask),
                                                "negative_pair_mask")));
  return Add(loss, Scale(neg, 1.0 / static_cast<double>(count)));
}

Var CceLoss(Var logits, const std::vector<int> &labels) {
  return CrossEntropy(logits, labels);
}

Var ConsistencyLoss(const LossConfig &cfg, Var z, Var y_teacher, Var w,
                    Var b, const BatchGeometry &geo) {
  cfg.Validate();
  if (cfg.learning_target != LearningTarget::kEmbedding)
    throw ContractError("ConsistencyLoss handles embedding targets only");
  if (cfg.consistency == ConsistencyKind::kMse)
    return EmbeddingMseLoss(z, y_teacher, cfg.negative_pairs, geo);
  if (!cfg.negative_pairs) return PositiveCosineLoss(z, y_teacher, geo);
  switch (cfg.consistency) {
    case ConsistencyKind::kGe2e: return Ge2eLoss(z, y_teacher, w, b, geo);
    case ConsistencyKind::kAp: return ApLoss(z, y_teacher, w, b, geo);
    default: return Ge2eHLoss(z, y_teacher, w, b, geo);
  }
}

// -------------------------------------------------------------- value level

namespace {

BatchGeometry GeometryOf(const Tensor &z, const Tensor &y) {
  if (z.rank() != 3 || y.rank() != 3 || z.shape() != y.shape())
    throw ShapeError("embedding batches must share a [S x H x D] shape, got " +
                     ShapeToString(z.shape()) + " and " +
                     ShapeToString(y.shape()));
  return BatchGeometry{z.dim(0), z.dim(1)};
}

void RequirePositiveScale(double w) {
  if (!(w > 0.0))
    throw ContractError("similarity scale w must be positive");
}

template <typename Build>
Tensor EvaluatePair(const Tensor &z, const Tensor &y, double w, double b,
                    Build build) {
  Graph g;
  Var zv = g.Input("z", true);
  Var yv = g.Input("y", false);
  Var wv = g.Input("w", true);
  Var bv = g.Input("b", true);
  Var out = build(zv, yv, wv, bv);
  g.Bind("z", z);
  g.Bind("y", y);
  g.Bind("w", Tensor::Scalar(w));
  g.Bind("b", Tensor::Scalar(b));
  return g.Evaluate(out);
}

}  // namespace

double Ge2eHLossValue(const Tensor &z, const Tensor &y, double w, double b) {
  const BatchGeometry geo = GeometryOf(z, y);
  RequirePositiveScale(w);
  return EvaluatePair(z, y, w, b, [&](Var zv, Var yv, Var wv, Var bv) {
    return Ge2eHLoss(zv, yv, wv, bv, geo);
  })[0];
}

double Ge2eLossValue(const Tensor &z, const Tensor &y, double w, double b) {
  const BatchGeometry geo = GeometryOf(z, y);
  RequirePositiveScale(w);
  return EvaluatePair(z, y, w, b, [&](Var zv, Var yv, Var wv, Var bv) {
    return Ge2eLoss(zv, yv, wv, bv, geo);
  })[0];
}

double ApLossValue(const Tensor &z, const Tensor &y, double w, double b) {
  const BatchGeometry geo = GeometryOf(z, y);
  RequirePositiveScale(w);
  return EvaluatePair(z, y, w, b, [&](Var zv, Var yv, Var wv, Var bv) {
    return ApLoss(zv, yv, wv, bv, geo);
  })[0];
}

double PositiveCosineLossValue(const Tensor &z, const Tensor &y) {
  const BatchGeometry geo = GeometryOf(z, y);
  return EvaluatePair(z, y, 1.0, 0.0, [&](Var zv, Var yv, Var, Var) {
    return PositiveCosineLoss(zv, yv, geo);
  })[0];
}

double EmbeddingMseLossValue(const Tensor &z, const Tensor &y,
                             bool negative_pairs) {
  const BatchGeometry geo = GeometryOf(z, y);
  return EvaluatePair(z, y, 1.0, 0.0, [&](Var zv, Var yv, Var, Var) {
    return EmbeddingMseLoss(zv, yv, negative_pairs, geo);
  })[0];
}

double MseValue(const Tensor &student, const Tensor &teacher) {
  Graph g;
  Var out = MseConsistency(g.Constant(student), g.Constant(teacher));
  return g.Evaluate(out)[0];
}

double CceValue(const Tensor &logits, const std::vector<int> &labels) {
  Graph g;
  Var out = CceLoss(g.Constant(logits), labels);
  return g.Evaluate(out)[0];
}

Tensor CentroidValue(const Tensor &z, const Tensor &y, std::size_t speaker,
                     int exclude) {
  const BatchGeometry geo = GeometryOf(z, y);
  if (speaker >= geo.speakers)
    throw ContractError("centroid: speaker index out of range");
  if (exclude >= static_cast<int>(geo.per_half))
    throw ContractError("centroid: excluded utterance out of range");
  const std::size_t d = z.dim(2);
  Tensor c = EvaluatePair(z, y, 1.0, 0.0, [&](Var zv, Var yv, Var, Var) {
    return exclude < 0 ? Centroids(zv, yv, geo)
                       : ExclusionCentroids(zv, yv, geo);
  });
  const std::size_t row =
      exclude < 0 ? speaker : speaker * geo.per_half + exclude;
  Tensor out({d});
  std::copy_n(c.ptr() + row * d, d, out.ptr());
  return out;
}

Tensor SimilarityMatrixValue(const Tensor &z, const Tensor &y, double w,
                             double b) {
  const BatchGeometry geo = GeometryOf(z, y);
  RequirePositiveScale(w);
  return EvaluatePair(z, y, w, b, [&](Var zv, Var yv, Var wv, Var bv) {
    return SimilarityMatrix(zv, yv, wv, bv, geo);
  });
}

}  // namespace mtsv
