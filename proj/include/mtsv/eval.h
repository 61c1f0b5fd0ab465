// include/mtsv/eval.h

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

#ifndef MTSV_EVAL_H_
#define MTSV_EVAL_H_

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mtsv/corpus.h"
#include "mtsv/model.h"
#include "mtsv/tensor.h"

namespace mtsv {

/// Start offsets of n windows spread evenly over [0, total - crop_len];
/// a single crop is centered.
std::vector<std::size_t> CropOffsets(std::size_t total, std::size_t n,
                                     std::size_t crop_len);

/// [n x crop_len] windows of a 1-D waveform.
Tensor Crops(const Tensor &waveform, std::size_t n, std::size_t crop_len);

/// Mean cosine similarity over all crop pairs of two [n x D] sets.
double ScoreTrial(const Tensor &emb_a, const Tensor &emb_b);

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

/// Equal error rate with linear interpolation of the FAR/FRR crossing.
/// A trial is accepted when score >= threshold.  Thresholds are swept over
/// midpoints of the sorted distinct scores plus one sentinel on each side;
/// the interpolation weight is computed from error counts only, so the EER
/// is unchanged by any strictly increasing transform of the scores.
EerResult ComputeEer(const std::vector<double> &scores,
                     const std::vector<bool> &targets);

/// "spk0020-utt003".
std::string UtteranceId(int speaker, std::size_t utterance);
std::pair<int, std::size_t> ParseUtteranceId(const std::string &id);

struct Trial {
  std::string utt_a, utt_b;
  bool target = false;
};

struct TrialList {
  std::vector<Trial> trials;

  std::size_t size() const { return trials.size(); }
  std::size_t CountTargets() const;
  /// Both classes present, no self-pairs, ids well formed.
  void Validate() const;
};

/// Every within-speaker pair of the held-out speakers as targets plus an
/// equal number of distinct cross-speaker pairs drawn without replacement.
TrialList BuildTrialList(const Corpus &corpus, std::uint64_t seed);

/// Text lines "<utt_a> <utt_b> <0|1>".
void WriteTrialList(const TrialList &list, const std::string &path);
TrialList ReadTrialList(const std::string &path);
/// Trial lines with the score appended as a fourth column.
void WriteScores(const TrialList &list, const std::vector<double> &scores,
                 const std::string &path);

struct EvalConfig {
  std::size_t n_crops = 10;
  /// 0 means the model input length.
  std::size_t crop_len = 0;
  std::uint64_t trial_seed = 7;
  /// Crops embedded per forward pass.
  std::size_t chunk = 40;
  std::size_t threads = 1;

  void Validate() const;
};

/// Maps [B x crop_len] waveforms to [B x D] embeddings.
using EmbeddingFn = std::function<Tensor(const Tensor &)>;

struct EvalResult {
  EerResult eer;
  std::vector<double> scores;
};

EvalResult EvaluateModel(const EmbeddingFn &embed, const Corpus &corpus,
                         const TrialList &trials, const EvalConfig &cfg);

/// Convenience wrapper: eval-mode network embeddings along `path`.
EvalResult EvaluateModel(const ParamSet &params, const ModelConfig &model,
                         EmbeddingPath path, const Corpus &corpus,
                         const TrialList &trials, const EvalConfig &cfg);

}  // namespace mtsv

#endif  // MTSV_EVAL_H_
