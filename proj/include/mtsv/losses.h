// include/mtsv/losses.h

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

#ifndef MTSV_LOSSES_H_
#define MTSV_LOSSES_H_

#include <string>
#include <vector>

#include "mtsv/graph.h"
#include "mtsv/tensor.h"

namespace mtsv {

enum class ConsistencyKind { kMse, kGe2e, kAp, kGe2eH };
enum class LearningTarget { kPrediction, kEmbedding };

struct LossConfig {
  ConsistencyKind consistency = ConsistencyKind::kGe2eH;
  bool negative_pairs = true;
  LearningTarget learning_target = LearningTarget::kEmbedding;
  bool use_cce = true;

  void Validate() const;
};

std::string ToString(ConsistencyKind k);
std::string ToString(LearningTarget t);
ConsistencyKind ParseConsistency(const std::string &s);
LearningTarget ParseLearningTarget(const std::string &s);

/// Minimum value the similarity scale is clamped to after each update.
inline constexpr double kMinSimilarityScale = 1e-4;

/// Extents of an embedding batch: S speakers, H utterances per speaker in
/// each half (U = 2H).
struct BatchGeometry {
  std::size_t speakers = 0;
  std::size_t per_half = 0;
  std::size_t utterances() const { return 2 * per_half; }
  void Validate(bool needs_negatives) const;
};

// All embedding-batch losses take student embeddings Z and teacher
// embeddings Y' shaped [S x H x D].  Y' is wrapped in StopGradient
// internally: no gradient ever reaches the teacher side.  `w` and `b` are
// the [1]-shaped similarity scale and bias.

/// Full centroids c_k = (sum_l Z_kl + sum_l Y'_kl) / U, shape [S x D].
Var Centroids(Var z, Var y_teacher, const BatchGeometry &geo);
/// Exclusion centroids c_j^(-i) = (sum_{l != i} Z_jl + sum_l Y'_jl) / (U-1)
/// for every student utterance, shape [S x H x D].
Var ExclusionCentroids(Var z, Var y_teacher, const BatchGeometry &geo);

/// Scaled cosine similarities [S x H x S]: entry (j, i, k) compares Z_ji
/// with the exclusion centroid when k == j and the full centroid otherwise.
Var SimilarityMatrix(Var z, Var y_teacher, Var w, Var b,
                     const BatchGeometry &geo);

/// Mean over student queries of -log softmax_k(similarity)[own speaker].
Var Ge2eHLoss(Var z, Var y_teacher, Var w, Var b,
              const BatchGeometry &geo);
/// Classic GE2E over the union batch: every Z and Y' utterance acts as a
/// query against exclusion/full centroids of the union.
Var Ge2eLoss(Var z, Var y_teacher, Var w, Var b,
             const BatchGeometry &geo);
/// Angular prototypical: query Z_j1 against prototypes mean_l Y'_kl.
Var ApLoss(Var z, Var y_teacher, Var w, Var b,
           const BatchGeometry &geo);
/// Positive-pair-only cosine loss: mean over (j, i) of
/// 1 - cos(Z_ji, c_j^(-i)).
Var PositiveCosineLoss(Var z, Var y_teacher, const BatchGeometry &geo);

/// Mean squared difference, teacher side gradient-constant.
Var MseConsistency(Var student, Var teacher);
/// MSE between unit-normalized embeddings [S x H x D] of matching
/// positions; with `negative_pairs` adds the mean squared cosine between
/// each student embedding and every other speaker's teacher embeddings.
Var EmbeddingMseLoss(Var z, Var y_teacher, bool negative_pairs,
                     const BatchGeometry &geo);

/// Mean cross-entropy of logits [B x K].
Var CceLoss(Var logits, const std::vector<int> &labels);

/// Dispatches on the config for an embedding learning target.
Var ConsistencyLoss(const LossConfig &cfg, Var z, Var y_teacher, Var w,
                    Var b, const BatchGeometry &geo);

// Value-level helpers that build a throwaway graph; geometry comes from the
// [S x H x D] tensor shapes.
double Ge2eHLossValue(const Tensor &z, const Tensor &y, double w, double b);
double Ge2eLossValue(const Tensor &z, const Tensor &y, double w, double b);
double ApLossValue(const Tensor &z, const Tensor &y, double w, double b);
double PositiveCosineLossValue(const Tensor &z, const Tensor &y);
double EmbeddingMseLossValue(const Tensor &z, const Tensor &y,
                             bool negative_pairs);
double MseValue(const Tensor &student, const Tensor &teacher);
double CceValue(const Tensor &logits, const std::vector<int> &labels);
/// exclude < 0 gives the full centroid of speaker `speaker`.
Tensor CentroidValue(const Tensor &z, const Tensor &y, std::size_t speaker,
                     int exclude);
Tensor SimilarityMatrixValue(const Tensor &z, const Tensor &y, double w,
                             double b);

}  // namespace mtsv

#endif  // MTSV_LOSSES_H_
