// include/mtsv/ops.h

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

#ifndef MTSV_OPS_H_
#define MTSV_OPS_H_

#include <cstdint>
#include <string>
#include <vector>

#include "mtsv/graph.h"

namespace mtsv {

// Graph-building operations.  Every function appends one node (composite
// helpers append several) to the graph owning its first operand.  Operand
// shapes are validated at evaluation time; broadcasting is limited to what
// each op documents.

// Elementwise, identical shapes.
Var Add(Var a, Var b);
Var Sub(Var a, Var b);
Var Mul(Var a, Var b);

Var Scale(Var x, double c);
Var AddScalar(Var x, double c);
/// x * s where s has shape [1].
Var ScaleBy(Var x, Var s);
/// x + s where s has shape [1].
Var ShiftBy(Var x, Var s);
/// x[..., C] + b[C].
Var AddBias(Var x, Var b);

Var Relu(Var x);
Var Tanh(Var x);
Var Exp(Var x);
Var Log(Var x);
Var Square(Var x);
Var Sqrt(Var x);

/// a[..., K] * b[K x M] -> [..., M]; leading axes of `a` are flattened.
Var MatMul(Var a, Var b);
Var Transpose(Var a);
/// x[..., in] * w[in x out] + b[out].
Var Linear(Var x, Var w, Var b);

/// One extent may be 0, meaning "inferred from the element count".
Var Reshape(Var x, Shape shape);
Var Concat(const std::vector<Var> &xs, std::size_t axis);
Var Slice(Var x, std::size_t axis, std::size_t begin, std::size_t end);
/// Removes `axis` by summation (a rank-1 input yields shape [1]).
Var SumAxis(Var x, std::size_t axis);
/// Inserts a new axis of extent n at position `axis` by repetition.
Var BroadcastAxis(Var x, std::size_t axis, std::size_t n);
Var Sum(Var x);
Var Mean(Var x);

/// Along the last axis, max-subtracted.
Var Softmax(Var x);
Var LogSoftmax(Var x);

/// Unit-normalizes along the last axis; a zero-norm row is a contract error.
Var L2Normalize(Var x);
/// Dot product along the last axis: [..., D] x [..., D] -> [...].
Var RowDot(Var a, Var b);
/// Cosine similarity along the last axis.
Var CosineSimilarity(Var a, Var b);

/// Mean categorical cross-entropy of logits [N x K] against class ids,
/// computed with log-sum-exp.
Var CrossEntropy(Var logits, std::vector<int> labels);

/// Normalizes x[..., C] per channel over all leading positions using the
/// batch statistics.  Publishes "<key>.mean" and "<key>.var" (unbiased) as
/// aux records so callers can update running statistics.
Var BatchNormTrain(Var x, Var gamma, Var beta, std::string key,
                   double eps = 1e-5);
/// Normalizes with fixed statistics (evaluation mode).
Var BatchNormEval(Var x, Var gamma, Var beta, Var mean, Var var,
                  double eps = 1e-5);

/// x[B x L x Cin] convolved with w[(K*Cin) x Cout] (tap-major rows), zero
/// padding `pad` on both ends.  Output [B x Lout x Cout].
Var Conv1d(Var x, Var w, std::size_t kernel, std::size_t stride,
           std::size_t pad);
/// Max over non-overlapping windows when kernel == stride.
Var MaxPool1d(Var x, std::size_t kernel, std::size_t stride);

/// frames[B x T x C] weighted by attention[B x T] (rows summing to one):
/// returns [B x 2C] = concat(mean, sqrt(max(second moment - mean^2, 0) +
/// 1e-9)).
Var AttentiveStats(Var frames, Var attention);

/// Inverted dropout with a mask fixed by `seed` for the lifetime of the node.
Var Dropout(Var x, double rate, std::uint64_t seed);
/// Identity forward, blocks gradient flow.
Var StopGradient(Var x);

}  // namespace mtsv

#endif  // MTSV_OPS_H_
