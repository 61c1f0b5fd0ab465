// tests/test_losses.cc

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

#include <cmath>
#include <random>

#include "doctest.h"
#include "mtsv/error.h"
#include "mtsv/graph.h"
#include "mtsv/losses.h"
#include "mtsv/ops.h"
#include "oracles.h"

using namespace mtsv;

namespace {

using LossFn = Var (*)(Var, Var, Var, Var, const BatchGeometry &);

struct Built {
  Graph g;
  Var z, y, w, b, loss;
};

void Build(Built *out, LossFn fn, const Tensor &z, const Tensor &y, double w,
           double b) {
  Graph &g = out->g;
  out->z = g.Input("z");
  out->y = g.Input("y");
  out->w = g.Input("w");
  out->b = g.Input("b");
  out->loss = fn(out->z, out->y, out->w, out->b, {z.dim(0), z.dim(1)});
  g.Bind("z", z);
  g.Bind("y", y);
  g.Bind("w", Tensor::Scalar(w));
  g.Bind("b", Tensor::Scalar(b));
}

double Value(LossFn fn, const Tensor &z, const Tensor &y, double w, double b) {
  Built bt;
  Build(&bt, fn, z, y, w, b);
  return bt.g.Evaluate(bt.loss)[0];
}

Var PosCos(Var z, Var y, Var, Var, const BatchGeometry &geo) {
  return PositiveCosineLoss(z, y, geo);
}
Var MseE(Var z, Var y, Var, Var, const BatchGeometry &geo) {
  return EmbeddingMseLoss(z, y, false, geo);
}
Var MseENeg(Var z, Var y, Var, Var, const BatchGeometry &geo) {
  return EmbeddingMseLoss(z, y, true, geo);
}

}  // namespace

TEST_CASE("loss config invariants") {
  LossConfig c;
  c.Validate();
  c.learning_target = LearningTarget::kPrediction;
  CHECK_THROWS_AS(c.Validate(), ContractError);
  c.consistency = ConsistencyKind::kMse;
  CHECK_THROWS_AS(c.Validate(), ContractError);  // P requires NP off
  c.negative_pairs = false;
  c.Validate();
  CHECK(ParseConsistency("ge2e_h") == ConsistencyKind::kGe2eH);
  CHECK(ParseConsistency("GE2E-H") == ConsistencyKind::kGe2eH);
  CHECK(ParseLearningTarget("P") == LearningTarget::kPrediction);
  CHECK_THROWS_AS(ParseConsistency("triplet"), ContractError);
}

TEST_CASE("centroids and similarity match triple-loop oracles") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t S = 2 + trial % 4, H = 1 + trial % 3, D = 3 + trial % 5;
    Tensor z = oracle::Gaussian({S, H, D}, rng), y = oracle::Gaussian({S, H, D}, rng);
    double w = 0.5 + trial, b = -0.3 * trial;
    Tensor sim = SimilarityMatrixValue(z, y, w, b);
    auto want = oracle::Similarity(z, y, w, b);
    for (std::size_t j = 0; j < S; ++j)
      for (std::size_t i = 0; i < H; ++i)
        for (std::size_t k = 0; k < S; ++k)
          CHECK(std::abs(sim[(j * H + i) * S + k] - want[j][i][k]) < 1e-10);
    for (std::size_t j = 0; j < S; ++j) {
      Tensor c = CentroidValue(z, y, j, -1);
      auto cw = oracle::Centroid(z, y, j);
      for (std::size_t k = 0; k < D; ++k) CHECK(std::abs(c[k] - cw[k]) < 1e-10);
      Tensor ce = CentroidValue(z, y, j, 0);
      auto cew = oracle::ExclusionCentroid(z, y, j, 0);
      for (std::size_t k = 0; k < D; ++k) CHECK(std::abs(ce[k] - cew[k]) < 1e-10);
    }
  }
}

TEST_CASE("loss values match brute-force oracles") {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor z = oracle::Gaussian({3, 2, 8}, rng), y = oracle::Gaussian({3, 2, 8}, rng);
    CHECK(Ge2eHLossValue(z, y, 10, -5) == doctest::Approx(oracle::Ge2eH(z, y, 10, -5)).epsilon(1e-12));
    CHECK(Ge2eLossValue(z, y, 10, -5) == doctest::Approx(oracle::Ge2e(z, y, 10, -5)).epsilon(1e-12));
    CHECK(ApLossValue(z, y, 10, -5) == doctest::Approx(oracle::Ap(z, y, 10, -5)).epsilon(1e-12));
    CHECK(PositiveCosineLossValue(z, y) == doctest::Approx(oracle::PositiveCosine(z, y)).epsilon(1e-12));
    CHECK(EmbeddingMseLossValue(z, y, false) == doctest::Approx(oracle::EmbeddingMse(z, y, false)).epsilon(1e-12));
    CHECK(EmbeddingMseLossValue(z, y, true) == doctest::Approx(oracle::EmbeddingMse(z, y, true)).epsilon(1e-12));
    CHECK(Value(Ge2eHLoss, z, y, 10, -5) == doctest::Approx(Ge2eHLossValue(z, y, 10, -5)).epsilon(1e-12));
    CHECK(Value(ApLoss, z, y, 10, -5) == doctest::Approx(ApLossValue(z, y, 10, -5)).epsilon(1e-12));
  }
}

TEST_CASE("loss gradients match finite differences") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 rng(seed);
    Tensor z = oracle::Gaussian({3, 2, 8}, rng), y = oracle::Gaussian({3, 2, 8}, rng);
    for (LossFn fn : {LossFn(Ge2eHLoss), LossFn(Ge2eLoss), LossFn(ApLoss),
                      LossFn(PosCos), LossFn(MseE), LossFn(MseENeg)}) {
      Built bt;
      Build(&bt, fn, z, y, 10.0, -5.0);
      CHECK(FiniteDifferenceCheck(&bt.g, bt.loss, "z", 1e-5) < 1e-4);
      if (bt.g.RequiresGrad("w")) {
        bt.g.Evaluate(bt.loss);
        auto gr = bt.g.Gradients(bt.loss, {"w", "b"});
        if (gr.at("w")[0] != 0.0) CHECK(FiniteDifferenceCheck(&bt.g, bt.loss, "w", 1e-5) < 1e-4);
        if (gr.at("b")[0] != 0.0) CHECK(FiniteDifferenceCheck(&bt.g, bt.loss, "b", 1e-5) < 1e-4);
      }
    }
  }
}

TEST_CASE("teacher inputs never receive gradient") {
  std::mt19937_64 rng(47);
  Tensor z = oracle::Gaussian({3, 2, 8}, rng), y = oracle::Gaussian({3, 2, 8}, rng);
  for (LossFn fn : {LossFn(Ge2eHLoss), LossFn(Ge2eLoss), LossFn(ApLoss),
                    LossFn(PosCos), LossFn(MseE), LossFn(MseENeg)}) {
    Built bt;
    Build(&bt, fn, z, y, 10.0, -5.0);
    bt.g.Evaluate(bt.loss);
    auto gr = bt.g.Gradients(bt.loss, {"y"});
    for (double v : gr.at("y").values()) CHECK(v == 0.0);
  }
}

TEST_CASE("separated orthogonal batch gives the closed-form loss") {
  // Speaker j's embeddings all equal e_j: own exclusion centroid has cosine 1,
  // other centroids cosine 0, so every row is -log(e^5 / (e^5 + (S-1) e^-5)).
  const std::size_t S = 2, H = 2, D = 4;
  Tensor z({S, H, D}, 0.0);
  for (std::size_t j = 0; j < S; ++j)
    for (std::size_t i = 0; i < H; ++i) z[(j * H + i) * D + j] = 1.0;
  double want = -std::log(std::exp(5.0) / (std::exp(5.0) + std::exp(-5.0)));
  CHECK(std::abs(Ge2eHLossValue(z, z, 10, -5) - want) < 1e-10);
}

TEST_CASE("identical embeddings give ln S") {
  for (std::size_t S : {2, 3, 5}) {
    Tensor z({S, 2, 4}, 0.25);
    CHECK(std::abs(Ge2eHLossValue(z, z, 10, -5) - std::log(double(S))) < 1e-10);
  }
}

TEST_CASE("ge2e family is scale and rotation invariant") {
  std::mt19937_64 rng(53);
  Tensor z = oracle::Gaussian({3, 2, 8}, rng), y = oracle::Gaussian({3, 2, 8}, rng);
  auto rot = oracle::RandomRotation(8, rng);
  Tensor zr = oracle::Rotate(z, rot), yr = oracle::Rotate(y, rot);
  Tensor zs = z, ys = y;
  for (std::size_t i = 0; i < z.size(); ++i) {
    zs[i] *= 3.7;
    ys[i] *= 3.7;
  }
  for (auto fn : {Ge2eHLossValue, Ge2eLossValue, ApLossValue}) {
    double base = fn(z, y, 10, -5);
    CHECK(std::abs(fn(zs, ys, 10, -5) - base) < 1e-10);
    CHECK(std::abs(fn(zr, yr, 10, -5) - base) < 1e-10);
  }
}

TEST_CASE("positive-only cosine loss bounds") {
  std::mt19937_64 rng(59);
  Tensor z = oracle::Gaussian({3, 2, 8}, rng), y = oracle::Gaussian({3, 2, 8}, rng);
  CHECK(PositiveCosineLossValue(z, y) >= 0.0);
  Tensor same({3, 2, 8}, 0.0);
  for (std::size_t j = 0; j < 3; ++j)
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t k = 0; k < 8; ++k) same[(j * 2 + i) * 8 + k] = double(j + k + 1);
  CHECK(std::abs(PositiveCosineLossValue(same, same)) < 1e-12);
}

TEST_CASE("speaker reindexing leaves ge2e-h unchanged") {
  std::mt19937_64 rng(61);
  Tensor z = oracle::Gaussian({3, 2, 4}, rng), y = oracle::Gaussian({3, 2, 4}, rng);
  Tensor zp(z.shape()), yp(y.shape());
  const std::size_t perm[3] = {2, 0, 1}, blk = 2 * 4;
  for (std::size_t j = 0; j < 3; ++j)
    for (std::size_t k = 0; k < blk; ++k) {
      zp[perm[j] * blk + k] = z[j * blk + k];
      yp[perm[j] * blk + k] = y[j * blk + k];
    }
  CHECK(Ge2eHLossValue(zp, yp, 10, -5) == doctest::Approx(Ge2eHLossValue(z, y, 10, -5)).epsilon(1e-12));
}

TEST_CASE("mse and cce closed forms") {
  CHECK(MseValue(Tensor({2}, {1, 0}), Tensor({2}, {0, 1})) == 1.0);
  CHECK(MseValue(Tensor({3}, 0.4), Tensor({3}, 0.4)) == 0.0);
  std::mt19937_64 rng(67);
  Tensor a = oracle::Random({4, 3}, rng), b = oracle::Random({4, 3}, rng);
  double want = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) want += (a[i] - b[i]) * (a[i] - b[i]) / 12.0;
  CHECK(std::abs(MseValue(a, b) - want) < 1e-12);
  CHECK(CceValue(Tensor({2, 20}, 0.0), {4, 19}) == doctest::Approx(std::log(20.0)).epsilon(1e-12));
  Tensor sat({1, 3}, 0.0);
  sat[1] = 50.0;
  CHECK(CceValue(sat, {1}) < 1e-12);
  CHECK_THROWS_AS(CceValue(sat, {3}), ContractError);
}

TEST_CASE("geometry preconditions") {
  Tensor z({1, 2, 4}, 1.0);
  CHECK_THROWS_AS(Ge2eHLossValue(z, z, 10, -5), ContractError);  // one speaker
  CHECK_THROWS_AS(Ge2eHLossValue(Tensor({2, 2, 4}, 1.0), Tensor({2, 2, 4}, 1.0), 0.0, -5),
                  ContractError);
  CHECK_THROWS_AS(Ge2eHLossValue(Tensor({2, 2, 4}, 1.0), Tensor({2, 1, 4}, 1.0), 10, -5),
                  ShapeError);
}
