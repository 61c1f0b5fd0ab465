// src/model.cc

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

#include "mtsv/model.h"

#include <cmath>
#include <memory>
#include <random>

#include "mtsv/error.h"
#include "mtsv/ops.h"
#include "mtsv/rng.h"

namespace mtsv {

ModelConfig ModelConfig::FullScale() {
  ModelConfig c;
  c.input_samples = 59049;
  c.conv_channels = {128, 128, 256, 512};
  c.res_blocks = {2, 3, 3};
  c.attention_hidden = 128;
  c.embedding_dim = 512;
  c.projector_hidden = 512;
  c.class_count = 5994;
  return c;
}

std::size_t ModelConfig::DownsampleFactor() const {
  std::size_t f = 3;
  for (std::size_t b : res_blocks)
    for (std::size_t i = 0; i < b; ++i) f *= 3;
  return f;
}

std::size_t ModelConfig::PooledFrames(std::size_t samples) const {
  return samples / DownsampleFactor();
}

void ModelConfig::Validate() const {
  if (res_blocks.empty())
    throw ContractError("model: at least one residual stage is required");
  if (conv_channels.size() != res_blocks.size() + 1)
    throw ContractError(
        "model: conv_channels needs one entry for the initial conv plus one "
        "per residual stage");
  for (std::size_t c : conv_channels)
    if (c == 0) throw ContractError("model: channel counts must be positive");
  if (embedding_dim == 0 || projector_hidden == 0 || class_count == 0 ||
      attention_hidden == 0)
    throw ContractError("model: widths and class count must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw ContractError("model: dropout_rate must lie in [0, 1)");
  if (input_samples % DownsampleFactor() != 0)
    throw ShapeError("model: input length " + std::to_string(input_samples) +
                     " is not divisible by the downsampling factor " +
                     std::to_string(DownsampleFactor()));
  if (PooledFrames(input_samples) < 2)
    throw ContractError("model: fewer than 2 frames reach the pooling layer");
}

EncoderShapes ComputeEncoderShapes(const ModelConfig &cfg,
                                   std::size_t samples) {
  if (samples % cfg.DownsampleFactor() != 0)
    throw ShapeError("encoder: input length " + std::to_string(samples) +
                     " is not divisible by " +
                     std::to_string(cfg.DownsampleFactor()));
  EncoderShapes s;
  std::size_t t = samples / 3;
  s.first_conv_frames = t;
  s.first_conv_channels = cfg.conv_channels[0];
  for (std::size_t st = 0; st < cfg.res_blocks.size(); ++st) {
    for (std::size_t b = 0; b < cfg.res_blocks[st]; ++b) t /= 3;
    s.stage_outputs.emplace_back(t, cfg.conv_channels[st + 1]);
  }
  s.pooled_width = 2 * cfg.conv_channels.back();
  s.embedding_dim = cfg.embedding_dim;
  return s;
}

// ------------------------------------------------------------------ ParamSet

void ParamSet::Add(std::string name, Tensor value, ParamKind kind) {
  if (index_.count(name))
    throw ContractError("parameter '" + name + "' already exists");
  index_[name] = entries_.size();
  entries_.push_back({std::move(name), std::move(value), kind});
}

bool ParamSet::Contains(const std::string &name) const {
  return index_.count(name) > 0;
}

const ParamSet::Entry &ParamSet::entry(const std::string &name) const {
  auto it = index_.find(name);
  if (it == index_.end())
    throw ContractError("no parameter named '" + name + "'");
  return entries_[it->second];
}

Tensor &ParamSet::at(const std::string &name) {
  auto it = index_.find(name);
  if (it == index_.end())
    throw ContractError("no parameter named '" + name + "'");
  return entries_[it->second].value;
}

const Tensor &ParamSet::at(const std::string &name) const {
  return entry(name).value;
}

std::vector<std::string> ParamSet::Names() const {
  std::vector<std::string> names;
  names.reserve(entries_.size());
  for (const Entry &e : entries_) names.push_back(e.name);
  return names;
}

void ParamSet::BindInto(Graph *graph) const {
  for (const Entry &e : entries_)
    if (graph->HasLeaf(e.name)) graph->Bind(e.name, e.value);
}

bool IsPredictorName(const std::string &name) {
  return name.rfind("pred.", 0) == 0;
}

bool IsClassifierName(const std::string &name) {
  return name.rfind("cls.", 0) == 0;
}

namespace {

class Initializer {
 public:
  Initializer(ParamSet *p, std::uint64_t seed) : p_(p), rng_(seed) {}

  void Normal(const std::string &name, Shape shape, double stddev) {
    Tensor t(std::move(shape));
    std::normal_distribution<double> n(0.0, stddev);
    for (double &v : t.data()) v = n(rng_);
    p_->Add(name, std::move(t), ParamKind::kWeight);
  }
  void Const(const std::string &name, Shape shape, double v,
             ParamKind kind = ParamKind::kWeight) {
    p_->Add(name, Tensor(std::move(shape), v), kind);
  }
  void Norm(const std::string &prefix, std::size_t c) {
    Const(prefix + ".gamma", {c}, 1.0);
    Const(prefix + ".beta", {c}, 0.0);
    Const(prefix + ".mean", {c}, 0.0, ParamKind::kRunningStat);
    Const(prefix + ".var", {c}, 1.0, ParamKind::kRunningStat);
  }
  // He initialization for layers followed by ReLU.
  void Conv(const std::string &name, std::size_t k, std::size_t cin,
            std::size_t cout) {
    Normal(name, {k * cin, cout}, std::sqrt(2.0 / static_cast<double>(k * cin)));
  }
  void Dense(const std::string &prefix, std::size_t in, std::size_t out) {
    Normal(prefix + ".w", {in, out}, std::sqrt(1.0 / static_cast<double>(in)));
    Const(prefix + ".b", {out}, 0.0);
  }

 private:
  ParamSet *p_;
  std::mt19937_64 rng_;
};

std::string BlockPrefix(std::size_t stage, std::size_t block) {
  return "enc.s" + std::to_string(stage + 1) + ".b" + std::to_string(block + 1);
}

}  // namespace

ParamSet InitStudentParams(const ModelConfig &cfg, std::uint64_t seed) {
  cfg.Validate();
  ParamSet p(Role::kStudent);
  Initializer init(&p, seed);
  init.Conv("enc.conv0.w", 3, 1, cfg.conv_channels[0]);
  std::size_t cin = cfg.conv_channels[0];
  for (std::size_t s = 0; s < cfg.res_blocks.size(); ++s) {
    const std::size_t cout = cfg.conv_channels[s + 1];
    for (std::size_t b = 0; b < cfg.res_blocks[s]; ++b) {
      const std::string pre = BlockPrefix(s, b);
      init.Norm(pre + ".bn1", cin);
      init.Conv(pre + ".conv1.w", 3, cin, cout);
      init.Norm(pre + ".bn2", cout);
      init.Conv(pre + ".conv2.w", 3, cout, cout);
      if (cin != cout) init.Conv(pre + ".skip.w", 1, cin, cout);
      cin = cout;
    }
  }
  init.Norm("enc.bn_out", cin);
  init.Dense("enc.att", cin, cfg.attention_hidden);
  init.Normal("enc.att.v", {cfg.attention_hidden, 1},
              std::sqrt(1.0 / static_cast<double>(cfg.attention_hidden)));
  init.Dense("enc.fc", 2 * cin, cfg.embedding_dim);
  for (const char *head : {"proj", "pred"}) {
    const std::string h = head;
    init.Dense(h + ".fc1", cfg.embedding_dim, cfg.projector_hidden);
    init.Norm(h + ".bn", cfg.projector_hidden);
    init.Dense(h + ".fc2", cfg.projector_hidden, cfg.embedding_dim);
  }
  init.Dense("cls", cfg.embedding_dim, cfg.class_count);
  init.Const(kSimilarityScale, {1}, 10.0, ParamKind::kNoDecay);
  init.Const(kSimilarityBias, {1}, -5.0, ParamKind::kNoDecay);
  return p;
}

void UpdateRunningStats(ParamSet *params, const std::vector<AuxRecord> &aux,
                        double momentum) {
  for (const AuxRecord &r : aux) {
    if (!params->Contains(r.key)) continue;
    Tensor &run = params->at(r.key);
    if (run.size() != r.value.size())
      throw ShapeError("running statistic '" + r.key + "' size mismatch");
    for (std::size_t i = 0; i < run.size(); ++i)
      run[i] = momentum * run[i] + (1.0 - momentum) * r.value[i];
  }
}

// ---------------------------------------------------------------- NetBuilder

namespace {

// Identity that rejects time lengths the encoder cannot downsample evenly.
class RequireDivisibleOp : public Op {
 public:
  explicit RequireDivisibleOp(std::size_t factor) : factor_(factor) {}
  std::string Kind() const override { return "require_divisible"; }
  Tensor Forward(const std::vector<const Tensor *> &in) override {
    const Tensor &x = *in[0];
    if (x.rank() != 2)
      throw ShapeError("encoder: waveforms must be [B x T], got " +
                       ShapeToString(x.shape()));
    if (x.dim(1) % factor_ != 0)
      throw ShapeError("encoder: input length " + std::to_string(x.dim(1)) +
                       " is not divisible by " + std::to_string(factor_));
    return x;
  }
  void Backward(const std::vector<const Tensor *> &, const Tensor &,
                const Tensor &g, const std::vector<Tensor *> &gi) override {
    if (!gi[0]) return;
    for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i];
  }

 private:
  std::size_t factor_;
};

}  // namespace

NetBuilder::NetBuilder(Graph *graph, const ModelConfig &cfg, Role role,
                       bool training, bool trainable)
    : g_(graph), cfg_(cfg), role_(role), training_(training),
      trainable_(trainable) {
  cfg_.Validate();
}

void NetBuilder::EnableDropout(double rate, std::uint64_t seed) {
  dropout_rate_ = rate;
  dropout_seed_ = seed;
  dropout_count_ = 0;
}

Var NetBuilder::Param(const std::string &name) {
  return g_->Input(name, trainable_);
}

Var NetBuilder::Norm(Var x, const std::string &prefix) {
  Var gamma = Param(prefix + ".gamma");
  Var beta = Param(prefix + ".beta");
  if (training_) return BatchNormTrain(x, gamma, beta, prefix);
  return BatchNormEval(x, gamma, beta, g_->Input(prefix + ".mean", false),
                       g_->Input(prefix + ".var", false));
}

Var NetBuilder::ResBlock(Var x, const std::string &prefix, std::size_t cin,
                         std::size_t cout) {
  Var y = Relu(Norm(x, prefix + ".bn1"));
  y = Conv1d(y, Param(prefix + ".conv1.w"), 3, 1, 1);
  y = Relu(Norm(y, prefix + ".bn2"));
  y = Conv1d(y, Param(prefix + ".conv2.w"), 3, 1, 1);
  Var skip = cin == cout ? x : Conv1d(x, Param(prefix + ".skip.w"), 1, 1, 0);
  return MaxPool1d(Add(y, skip), 3, 3);
}

Var NetBuilder::Encoder(Var waveforms) {
  Var x = g_->Apply(std::make_unique<RequireDivisibleOp>(cfg_.DownsampleFactor()),
                    {waveforms});
  Var h = Conv1d(BroadcastAxis(x, 2, 1), Param("enc.conv0.w"), 3, 3, 0);
  std::size_t cin = cfg_.conv_channels[0];
  for (std::size_t s = 0; s < cfg_.res_blocks.size(); ++s) {
    const std::size_t cout = cfg_.conv_channels[s + 1];
    for (std::size_t b = 0; b < cfg_.res_blocks[s]; ++b) {
      h = ResBlock(h, BlockPrefix(s, b), cin, cout);
      cin = cout;
    }
    if (dropout_rate_ > 0.0)
      h = Dropout(h, dropout_rate_, Mix(dropout_seed_ ^ Mix(dropout_count_++)));
  }
  h = Relu(Norm(h, "enc.bn_out"));
  Var pooled = AttentivePool(h);
  return Linear(pooled, Param("enc.fc.w"), Param("enc.fc.b"));
}

Var NetBuilder::AttentivePool(Var frames) {
  Var hidden =
      Tanh(Linear(frames, Param("enc.att.w"), Param("enc.att.b")));
  Var scores = SumAxis(MatMul(hidden, Param("enc.att.v")), 2);
  return AttentiveStats(frames, Softmax(scores));
}

Var NetBuilder::Head(HeadKind kind, Var x) {
  if (kind == HeadKind::kPredictor && role_ == Role::kTeacher)
    throw ContractError("the teacher network has no predictor head");
  const std::string h = kind == HeadKind::kProjector ? "proj" : "pred";
  Var y = Linear(x, Param(h + ".fc1.w"), Param(h + ".fc1.b"));
  y = Relu(Norm(y, h + ".bn"));
  return Linear(y, Param(h + ".fc2.w"), Param(h + ".fc2.b"));
}

Var NetBuilder::Classifier(Var embedding) {
  return Linear(embedding, Param("cls.w"), Param("cls.b"));
}

Tensor Embed(const ParamSet &params, const ModelConfig &cfg,
             const Tensor &waveforms, EmbeddingPath path) {
  if (waveforms.rank() != 2)
    throw ShapeError("embed: waveforms must be [B x T], got " +
                     ShapeToString(waveforms.shape()));
  if (waveforms.dim(1) % cfg.DownsampleFactor() != 0)
    throw ShapeError("embed: input length " +
                     std::to_string(waveforms.dim(1)) +
                     " is not divisible by " +
                     std::to_string(cfg.DownsampleFactor()));
  Graph g;
  NetBuilder net(&g, cfg, params.role(), /*training=*/false,
                 /*trainable=*/false);
  Var x = g.Input("input.waveforms", false);
  Var out = net.Encoder(x);
  if (path != EmbeddingPath::kEncoder) out = net.Head(HeadKind::kProjector, out);
  if (path == EmbeddingPath::kStudent) out = net.Head(HeadKind::kPredictor, out);
  params.BindInto(&g);
  g.Bind("input.waveforms", waveforms);
  return g.Evaluate(out);
}

}  // namespace mtsv
