// include/mtsv/mean_teacher.h

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

#ifndef MTSV_MEAN_TEACHER_H_
#define MTSV_MEAN_TEACHER_H_

#include <cstdint>

#include "mtsv/model.h"
#include "mtsv/tensor.h"

namespace mtsv {

struct EmaConfig {
  double alpha = 0.99;
  bool include_running_stats = true;

  void Validate() const;
};

/// Value copy of the student without predictor entries (and without the
/// classifier unless `keep_classifier`), tagged as a teacher.
ParamSet InitTeacher(const ParamSet &student, bool keep_classifier = false);

/// xi <- alpha * xi + (1 - alpha) * theta for every teacher entry.
/// Running statistics are skipped unless cfg.include_running_stats.
/// Throws ContractError listing every teacher entry with no same-shaped
/// student counterpart; the teacher is untouched in that case.
void EmaUpdate(ParamSet *teacher, const ParamSet &student,
               const EmaConfig &cfg);

enum class TeacherOutput { kEmbedding, kPrediction };

struct TeacherForwardOptions {
  /// Batch-statistics normalization (as in training) vs running statistics.
  bool training = true;
  double dropout_rate = 0.0;
  std::uint64_t dropout_seed = 0;
};

/// Teacher outputs for a batch [S x H x T] (or [B x T]): projected
/// embeddings g(f(x)) or softmax class probabilities.  The result is a
/// plain tensor; no gradient graph survives the call.
Tensor TeacherForward(const ParamSet &teacher, const ModelConfig &cfg,
                      const Tensor &batch, TeacherOutput mode,
                      const TeacherForwardOptions &opts = {});

}  // namespace mtsv

#endif  // MTSV_MEAN_TEACHER_H_
