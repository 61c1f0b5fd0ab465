// src/mean_teacher.cc

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

#include "mtsv/mean_teacher.h"

#include <sstream>

#include "mtsv/error.h"
#include "mtsv/ops.h"

namespace mtsv {

void EmaConfig::Validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw ContractError("ema.alpha must lie in [0, 1]");
}

ParamSet InitTeacher(const ParamSet &student, bool keep_classifier) {
  ParamSet teacher(Role::kTeacher);
  for (const ParamSet::Entry &e : student.entries()) {
    if (IsPredictorName(e.name)) continue;
    if (IsClassifierName(e.name) && !keep_classifier) continue;
    teacher.Add(e.name, e.value, e.kind);
  }
  return teacher;
}

void EmaUpdate(ParamSet *teacher, const ParamSet &student,
               const EmaConfig &cfg) {
  cfg.Validate();
  std::vector<std::string> bad;
  for (const ParamSet::Entry &e : teacher->entries())
    if (!student.Contains(e.name) ||
        student.at(e.name).shape() != e.value.shape())
      bad.push_back(e.name);
  if (!bad.empty()) {
    std::ostringstream os;
    os << "teacher/student parameter mismatch:";
    for (const std::string &n : bad) os << ' ' << n;
    throw ContractError(os.str());
  }
  const double a = cfg.alpha, b = 1.0 - cfg.alpha;
  for (ParamSet::Entry &e : teacher->entries()) {
    if (e.kind == ParamKind::kRunningStat && !cfg.include_running_stats)
      continue;
    const Tensor &theta = student.at(e.name);
    for (std::size_t i = 0; i < e.value.size(); ++i)
      e.value[i] = a * e.value[i] + b * theta[i];
  }
}

Tensor TeacherForward(const ParamSet &teacher, const ModelConfig &cfg,
                      const Tensor &batch, TeacherOutput mode,
                      const TeacherForwardOptions &opts) {
  if (batch.rank() != 2 && batch.rank() != 3)
    throw ShapeError("teacher: batch must be [S x H x T] or [B x T], got " +
                     ShapeToString(batch.shape()));
  if (mode == TeacherOutput::kPrediction && !teacher.Contains("cls.w"))
    throw ContractError(
        "teacher has no classifier; prediction outputs are unavailable");
  const std::size_t t = batch.shape().back();
  const std::size_t rows = batch.size() / t;
  Graph g;
  NetBuilder net(&g, cfg, teacher.role(), opts.training, /*trainable=*/false);
  if (opts.dropout_rate > 0.0) net.EnableDropout(opts.dropout_rate, opts.dropout_seed);
  Var x = g.Input("input.waveforms", false);
  Var f = net.Encoder(x);
  Var out = mode == TeacherOutput::kEmbedding
                ? net.Head(HeadKind::kProjector, f)
                : Softmax(net.Classifier(f));
  teacher.BindInto(&g);
  g.Bind("input.waveforms", batch.Reshaped({rows, t}));
  Tensor y = g.Evaluate(out);
  Shape s(batch.shape().begin(), batch.shape().end() - 1);
  s.push_back(y.shape().back());
  return y.Reshaped(std::move(s));
}

}  // namespace mtsv
