// include/mtsv/model.h

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

#ifndef MTSV_MODEL_H_
#define MTSV_MODEL_H_

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "mtsv/graph.h"
#include "mtsv/tensor.h"

namespace mtsv {

/// Encoder topology: one strided 1-D conv (kernel 3, stride 3) followed by
/// residual stages.  Each residual block ends in a stride-3 max-pool, so the
/// time axis shrinks by 3^(1 + total blocks) before attentive statistics
/// pooling and the final linear layer.
struct ModelConfig {
  std::size_t input_samples = 6561;
  /// Initial conv channels followed by one entry per residual stage.
  std::vector<std::size_t> conv_channels = {16, 16, 32, 64};
  std::vector<std::size_t> res_blocks = {2, 2, 2};
  std::size_t attention_hidden = 32;
  std::size_t embedding_dim = 32;
  std::size_t projector_hidden = 32;
  std::size_t class_count = 20;
  /// Applied after each residual stage by training graphs that need
  /// per-network noise (same-batch mode); evaluation never drops.
  double dropout_rate = 0.2;

  /// Full-size topology (8 residual blocks, 128/256/512 channels).
  static ModelConfig FullScale();

  std::size_t DownsampleFactor() const;
  std::size_t PooledFrames(std::size_t samples) const;
  void Validate() const;
};

/// Per-utterance intermediate shapes, as (time, channels) pairs.
struct EncoderShapes {
  std::size_t first_conv_frames = 0, first_conv_channels = 0;
  std::vector<std::pair<std::size_t, std::size_t>> stage_outputs;
  std::size_t pooled_width = 0;
  std::size_t embedding_dim = 0;
};
EncoderShapes ComputeEncoderShapes(const ModelConfig &cfg,
                                   std::size_t samples);

enum class Role { kStudent, kTeacher };
enum class ParamKind { kWeight, kNoDecay, kRunningStat };

/// Ordered name -> tensor store for one network.  Iteration order is the
/// insertion order, which InitStudentParams fixes.
class ParamSet {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    ParamKind kind;
  };

  explicit ParamSet(Role role = Role::kStudent) : role_(role) {}

  void Add(std::string name, Tensor value, ParamKind kind);
  bool Contains(const std::string &name) const;
  Tensor &at(const std::string &name);
  const Tensor &at(const std::string &name) const;
  const Entry &entry(const std::string &name) const;

  std::vector<Entry> &entries() { return entries_; }
  const std::vector<Entry> &entries() const { return entries_; }
  std::vector<std::string> Names() const;
  std::size_t size() const { return entries_.size(); }

  Role role() const { return role_; }
  void set_role(Role role) { role_ = role; }

  /// Binds every entry the graph declares as a leaf.
  void BindInto(Graph *graph) const;

 private:
  Role role_;
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

bool IsPredictorName(const std::string &name);
bool IsClassifierName(const std::string &name);

inline constexpr const char *kSimilarityScale = "loss.w";
inline constexpr const char *kSimilarityBias = "loss.b";

/// Student parameters: encoder, projector, predictor, classifier and the
/// learnable similarity scale/bias (10, -5).
ParamSet InitStudentParams(const ModelConfig &cfg, std::uint64_t seed);

/// running <- momentum * running + (1 - momentum) * batch for every
/// "<bn>.mean" / "<bn>.var" record present in the set.
void UpdateRunningStats(ParamSet *params, const std::vector<AuxRecord> &aux,
                        double momentum = 0.9);

enum class HeadKind { kProjector, kPredictor };

/// Appends network fragments to a graph.  Parameters become named leaves
/// (differentiable when `trainable`), bound later from a ParamSet.
class NetBuilder {
 public:
  NetBuilder(Graph *graph, const ModelConfig &cfg, Role role, bool training,
             bool trainable);

  /// Dropout after each residual stage; seeds derive from `seed`.
  void EnableDropout(double rate, std::uint64_t seed);

  /// waveforms [B x T] -> embeddings [B x D].
  Var Encoder(Var waveforms);
  /// frames [B x T' x C] -> [B x 2C].
  Var AttentivePool(Var frames);
  /// FC -> BN -> ReLU -> FC, width preserved.
  Var Head(HeadKind kind, Var x);
  /// Affine speaker logits [B x class_count].
  Var Classifier(Var embedding);

  Var Param(const std::string &name);

 private:
  Var Norm(Var x, const std::string &prefix);
  Var ResBlock(Var x, const std::string &prefix, std::size_t cin,
               std::size_t cout);

  Graph *g_;
  const ModelConfig &cfg_;
  Role role_;
  bool training_, trainable_;
  double dropout_rate_ = 0.0;
  std::uint64_t dropout_seed_ = 0;
  std::uint64_t dropout_count_ = 0;
};

/// Which network path produces an embedding.
enum class EmbeddingPath {
  kEncoder,    // f
  kProjected,  // g(f)
  kStudent,    // q(g(f))
};

/// Evaluation-mode embeddings (running statistics, no dropout) for a batch
/// of waveforms [B x T].
Tensor Embed(const ParamSet &params, const ModelConfig &cfg,
             const Tensor &waveforms, EmbeddingPath path);

}  // namespace mtsv

#endif  // MTSV_MODEL_H_
