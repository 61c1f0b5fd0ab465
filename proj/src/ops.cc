// src/ops.cc

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

#include "mtsv/ops.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <random>

#include <Eigen/Core>

#include "mtsv/error.h"

namespace mtsv {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using StridedConstMap =
    Eigen::Map<const RowMat, Eigen::Unaligned, Eigen::OuterStride<>>;

Var Make(std::unique_ptr<Op> op, std::vector<Var> inputs) {
  Graph *g = inputs.front().graph;
  if (g == nullptr) throw ContractError("operand is not attached to a graph");
  return g->Apply(std::move(op), std::move(inputs));
}

void RequireSame(const Tensor &a, const Tensor &b, const char *what) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(what) + ": operand shapes differ, " +
                     ShapeToString(a.shape()) + " vs " +
                     ShapeToString(b.shape()));
}

void RequireRank(const Tensor &t, std::size_t rank, const char *what) {
  if (t.rank() != rank)
    throw ShapeError(std::string(what) + ": expected rank " +
                     std::to_string(rank) + ", got " +
                     ShapeToString(t.shape()));
}

void RequireScalar(const Tensor &t, const char *what) {
  if (t.size() != 1 || t.rank() != 1)
    throw ShapeError(std::string(what) + ": expected shape [1], got " +
                     ShapeToString(t.shape()));
}

Shape DropLast(const Shape &s) {
  if (s.size() <= 1) return Shape{1};
  return Shape(s.begin(), s.end() - 1);
}

// ---------------------------------------------------------------- elementwise

enum class Binary { kAdd, kSub, kMul };

class BinaryOp : public Op {
 public:
  explicit BinaryOp(Binary kind) : kind_(kind) {}
  std::string Kind() const override {
    switch (kind_) {
      case Binary::kAdd: return "add";
      case Binary::kSub: return "sub";
      default: return "mul";
    }
  }
  Tensor Forward(const std::vector<const Tensor *> &in) override {
    const Tensor &a = *in[0], &b = *in[1];
    RequireSame(a, b, "elementwise");
    Tensor y = Tensor::Uninitialized(a.shape());
    const double *pa = a.ptr(), *pb = b.ptr();
    double *py = y.ptr();
    const std::size_t n = a.size();
    switch (kind_) {
      case Binary::kAdd:
        for (std::size_t i = 0; i < n; ++i) py[i] = pa[i] + pb[i];
        break;
      case Binary::kSub:
        for (std::size_t i = 0; i < n; ++i) py[i] = pa[i] - pb[i];
        break;
      case Binary::kMul:
        for (std::size_t i = 0; i < n; ++i) py[i] = pa[i] * pb[i];
        break;
    }
    return y;
  }
  void Backward(const std::vector<const Tensor *> &in, const Tensor &,
                const Tensor &g, const std::vector<Tensor *> &gi) override {
    const double *pa = in[0]->ptr(), *pb = in[1]->ptr(), *pg = g.ptr();
    double *da = gi[0] ? gi[0]->ptr() : nullptr;
    double *db = gi[1] ? gi[1]->ptr() : nullptr;
    const std::size_t n = g.size();
    const double sign = kind_ == Binary::kSub ? -1.0 : 1.0;
    if (kind_ == Binary::kMul) {
      if (da)
        for (std::size_t i = 0; i < n; ++i) da[i] += pg[i] * pb[i];
      if (db)
        for (std::size_t i = 0; i < n; ++i) db[i] += pg[i] * pa[i];
      return;
    }
    if (da)
      for (std::size_t i = 0; i < n; ++i) da[i] += pg[i];
    if (db)
      for (std::size_t i = 0; i < n; ++i) db[i] += sign * pg[i];
  }

 private:
  Binary kind_;
};

class AffineConstOp : public Op {
 public:
  AffineConstOp(double scale, double shift) : scale_(scale), shift_(shift) {}
  std::string Kind() const override { return "affine_const"; }
  Tensor Forward(const std::vector<const Tensor *> &in) override {
    Tensor y = Tensor::Uninitialized(in[0]->shape());
    for (std::size_t i = 0; i < y.size(); ++i)
      y[i] = scale_ * (*in[0])[i] + shift_;
    return y;
  }
  void Backward(const std::vector<const Tensor *> &, const Tensor &,
                const Tensor &g, const std::vector<Tensor *> &gi) override {
    if (!gi[0]) return;
    for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += scale_ * g[i];
  }

 private:
  double scale_, shift_;
};

class ScaleByOp : public Op {
 public:
  std::string Kind() const override { return "scale_by"; }
  Tensor Forward(const std::vector<const Tensor *> &in) override {
    RequireScalar(*in[1], "scale_by");
    const double s = (*in[1])[0];
    Tensor y = Tensor::Uninitialized(in[0]->shape());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = s * (*in[0])[i];
    return y;
  }
  void Backward(const std::vector<const Tensor *> &in, const Tensor &,
                const Tensor &g, const std::vector<Tensor *> &gi) override {
    const double s = (*in[1])[0];
    double acc = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (gi[0]) (*gi[0])[i] += s * g[i];
      acc += g[i] * (*in[0])[i];
    }
    if (gi[1]) (*gi[1])[0] += acc;
  }
};

class ShiftByOp : public Op {
 public:
  std::string Kind() const override { return "shift_by"; }
  Tensor Forward(const std::vector<const Tensor *> &in) override {
    RequireScalar(*in[1], "shift_by");
    const double s = (*in[1])[0];
    Tensor y = Tensor::Uninitialized(in[0]->shape());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = (*in[0])[i] + s;
    return y;
  }
  void Backward(const std::vector<const Tensor *> &, const Tensor &,
                const Tensor &g, const std::vector<Tensor *> &gi) override {
    double acc = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (gi[0]) (*gi[0])[i] += g[i];
      acc += g[i];
    }
    if (gi[1]) (*gi[1])[0] += acc;
  }
};

class AddBiasOp : public Op {
 public:
  std::string Kind() const override { return "add_bias"; }
  Tensor Forward(const std::vector<const Tensor *> &in) override {
    const Tensor &x = *in[0], &b = *in[1];
    RequireRank(b, 1, "add_bias");
    if (x.shape().back() != b.size())
      throw ShapeError("add_bias: bias of " + ShapeToString(b.shape()) +
                       " does not match last axis of " +
                       ShapeToString(x.shape()));
    Tensor y = x;
    const std::size_t c = b.size();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += b[i % c];
    return y;
  }
  void Backward(const std::vector<const Tensor *> &in, const Tensor &,
                const Tensor &g, const std::vector<Tensor *> &gi) override {
    const std::size_t c = in[1]->size();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (gi[0]) (*gi[0])[i] += g[i];
      if (gi[1]) (*gi[1])[i % c] += g[i];
    }
  }
};

enum class Unary { kRelu, kTanh, kExp, kLog, kSquare, kSqrt };

class UnaryOp : public Op {
 public:
  bool PreservesFinite() const override { return kind_ == Unary::kRelu; }
  void AppendBranches(const std::vector<const Tensor *> &in,
                      std::vector<std::size_t> *out) const override {
    if (kind_ != Unary::kRelu) return;
    const double *px = in[0]->ptr();
    for (std::size_t i = 0; i < in[0]->size(); ++i) out->push_back(px[i] > 0.0);
  }
  explicit UnaryOp(Unary kind) : kind_(kind) {}
  std::string Kind() const override {
    switch (kind_) {
      case Unary::kRelu: return "relu";
      case Unary::kTanh: return "tanh";
      case Unary::kExp: return "exp";
      case Unary::kLog: return "log";
      case Unary::kSquare: return "square";
      default: return "sqrt";
    }
  }
  Tensor Forward(const std::vector<const Tensor *> &in) override {
    const Tensor &x = *in[0];
    Tensor y = Tensor::Uninitialized(x.shape());
    const double *px = x.ptr();
    double *py = y.ptr();
    const std::size_t n = x.size();
    switch (kind_) {
      case Unary::kRelu:
        for (std::size_t i = 0; i < n; ++i) py[i] = px[i] > 0.0 ? px[i] : 0.0;
        break;
      case Unary::kTanh:
        for (std::size_t i = 0; i < n; ++i) py[i] = std::tanh(px[i]);
        break;
      case Unary::kExp:
        for (std::size_t i = 0; i < n; ++i) py[i] = std::exp(px[i]);
        break;
      case Unary::kLog:
        for (std::size_t i = 0; i < n; ++i) py[i] = std::log(px[i]);
        break;
      case Unary::kSquare:
        for (std::size_t i = 0; i < n; ++i) py[i] = px[i] * px[i];
        break;
      case Unary::kSqrt:
        for (std::size_t i = 0; i < n; ++i) py[i] = std::sqrt(px[i]);
        break;
    }
    return y;
  }
  void Backward(const std::vector<const Tensor *> &in, const Tensor &y,
                const Tensor &g, const std::vector<Tensor *> &gi) override {
    if (!gi[0]) return;
    const double *px = in[0]->ptr(), *py = y.ptr(), *pg = g.ptr();
    double *dx = gi[0]->ptr();
    const std::size_t n = g.size();
    switch (kind_) {
      case Unary::kRelu:
        for (std::size_t i = 0; i < n; ++i) dx[i] += px[i] > 0.0 ? pg[i] : 0.0;
        break;
      case Unary::kTanh:
        for (std::size_t i = 0; i < n; ++i)
          dx[i] += (1.0 - py[i] * py[i]) * pg[i];
        break;
      case Unary::kExp:
        for (std::size_t i = 0; i < n; ++i) dx[i] += py[i] * pg[i];
        break;
      case Unary::kLog:
        for (std::size_t i = 0; i < n; ++i) dx[i] += (1.0 / px[i]) * pg[i];
        break;
      case Unary::kSquare:
        for (std::size_t i = 0; i < n; ++i) dx[i] += 2.0 * px[i] * pg[i];
        break;
      case Unary::kSqrt:
        for (std::size_t i = 0; i < n; ++i) dx[i] += 0.5 / py[i] * pg[i];
        break;
    }
  }

 private:
  Unary kind_;
};

// ------------------------------------------------------------- linear algebra

class MatMulOp : public Op {
 public:
  std::string Kind() const override { return "matmul"; }
  Tensor Forward(const std::vector<const Tensor *> &in) override {
    const Tensor &a = *in[0], &b = *in[1];
    if (a.rank() < 2)
      throw ShapeError("matmul: left operand needs rank >= 2, got " +
                       ShapeToString(a.shape()));
    RequireRank(b, 2, "matmul");
    const std::size_t k = a.shape().back();
    if (k != b.dim(0))
      throw ShapeError("matmul: inner extents differ, " +
                       ShapeToString(a.shape()) + " * " +
                       ShapeToString(b.shape()));
    const std::size_t rows = a.size() / k;
    Shape out = a.shape();
    out.back() = b.dim(1);
    Tensor y = Tensor::Uninitialized(out);
    MatMap(y.ptr(), rows, b.dim(1)).noalias() =
        ConstMatMap(a.ptr(), rows, k) * ConstMatMap(b.ptr(), k, b.dim(1));
    return y;
  }
  void Backward(const std::vector<const Tensor *> &in, const Tensor &,
                const Tensor &g, const std::vector<Tensor *> &gi) override {
    const Tensor &a = *in[0], &b = *in[1];
    const std::size_t k = b.dim(0), m = b.dim(1), rows = a.size() / k;
    ConstMatMap A(a.ptr(), rows, k);
    ConstMatMap B(b.ptr(), k, m);
    ConstMatMap G(g.ptr(), rows, m);
    if (gi[0]) MatMap(gi[0]->ptr(), rows, k).noalias() += G * B.transpose();
    if (gi[1]) MatMap(gi[1]->ptr(), k, m).noalias() += A.transpose() * G;
  }
};

class TransposeOp : public Op {
 public:
  bool PreservesFinite() const override { return true; }
  std::string Kind() const override { return "transpose"; }
  Tensor Forward(const std::vector<const Tensor *> &in) override {
    const Tensor &a = *in[0];
    RequireRank(a, 2, "transpose");
    Tensor y = Tensor::Uninitialized({a.dim(1), a.dim(0)});
    MatMap(y.ptr(), a.dim(1), a.dim(0)) =
        ConstMatMap(a.ptr(), a.dim(0), a.dim(1)).transpose();
    return y;
  }
  void Backward(const std::vector<const Tensor *> &in, const Tensor &,
                const Tensor &g, const std::vector<Tensor *> &gi) override {
    if (!gi[0]) return;
    const Tensor &a = *in[0];
    MatMap(gi[0]->ptr(), a.dim(0), a.dim(1)) +=
        ConstMatMap(g.ptr(), a.dim(1), a.dim(0)).transpose();
  }
};

// ------------------------------------------------------------------- shaping

class ReshapeOp : public Op {
 public:
  bool PreservesFinite() const override { return true; }
  explicit ReshapeOp(Shape shape) : shape_(std::move(shape)) {}
  std::string Kind() const override { return "reshape"; }
  Tensor Forward(const std::vector<const Tensor *> &in) override {
    Shape s = shape_;
    std::size_t known = 1, infer = s.size();
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == 0) {
        if (infer != s.size())
          throw ShapeError("reshape: at most one extent may be inferred");
        infer = i;
      } else {
        known *= s[i];
      }
    }
    if (infer != s.size()) {
      if (known == 0 || in[0]->size() % known != 0)
        throw ShapeError("reshape: cannot infer extent of " +
                         ShapeToString(shape_) + " from " +
                         ShapeToString(in[0]->shape()));
      s[infer] = in[0]->size() / known;
    }
    return in[0]->Reshaped(std::move(s));
  }
  void Backward(const std::vector<const Tensor *> &, const Tensor &,
                const Tensor &g, const std::vector<Tensor *> &gi) override {
    if (!gi[0]) return;
    for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i];
  }

 private:
  Shape shape_;
};

// Splits a shape around `axis` into (outer, extent, inner).
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit SplitAt(const Shape &s, std::size_t axis) {
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.extent = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

class ConcatOp : public Op {
 public:
  bool PreservesFinite() const override { return true; }
  explicit ConcatOp(std::size_t axis) : axis_(axis) {}
  std::string Kind() const override { return "concat"; }
  Tensor Forward(const std::vector<const Tensor *> &in) override {
    Shape out = in[0]->shape();
    if (axis_ >= out.size()) throw ShapeError("concat: axis out of range");
    out[axis_] = 0;
    for (const Tensor *t : in) {
      Shape s = t->shape();
      if (s.size() != out.size())
        throw ShapeError("concat: operand ranks differ");
      for (std::size_t d = 0; d < s.size(); ++d)
        if (d != axis_ && s[d] != in[0]->dim(d))
          throw ShapeError("concat: " + ShapeToString(s) + " vs " +
                           ShapeToString(in[0]->shape()));
      out[axis_] += s[axis_];
    }
    Tensor y = Tensor::Uninitialized(out);
    const AxisSplit o = SplitAt(out, axis_);
    std::size_t offset = 0;
    for (const Tensor *t : in) {
      const std::size_t chunk = t->dim(axis_) * o.inner;
      for (std::size_t a = 0; a < o.outer; ++a)
        std::copy_n(t->ptr() + a * chunk, chunk,
                    y.ptr() + a * o.extent * o.inner + offset);
      offset += chunk;
    }
    return y;
  }
  void Backward(const std::vector<const Tensor *> &in, const Tensor &y,
                const Tensor &g, const std::vector<Tensor *> &gi) override {
    const AxisSplit o = SplitAt(y.shape(), axis_);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < in.size(); ++k) {
      const std::size_t chunk = in[k]->dim(axis_) * o.inner;
      if (gi[k]) {
        for (std::size_t a = 0; a < o.outer; ++a) {
          const double *src = g.ptr() + a * o.extent * o.inner + offset;
          double *dst = gi[k]->ptr() + a * chunk;
          for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
        }
      }
      offset += chunk;
    }
  }

 private:
  std::size_t axis_;
};

class SliceOp : public Op {
 public:
  bool PreservesFinite() const override { return true; }
  SliceOp(std::size_t axis, std::size_t begin, std::size_t end)
      : axis_(axis), begin_(begin), end_(end) {}
  std::string Kind() const override { return "slice"; }
  Tensor Forward(const std::vector<const Tensor *> &in) override {
    const Tensor &x = *in[0];
    if (axis_ >= x.rank() || begin_ >= end_ || end_ > x.dim(axis_))
      throw ShapeError("slice: range [" + std::to_string(begin_) + ", " +
                       std::to_string(end_) + ") invalid for axis " +
                       std::to_string(axis_) + " of " +
                       ShapeToString(x.shape()));
    Shape out = x.shape();
    out[axis_] = end_ - begin_;
    Tensor y = Tensor::Uninitialized(out);
    const AxisSplit s = SplitAt(x.shape(), axis_);
    const std::size_t chunk = (end_ - begin_) * s.inner;
    for (std::size_t a = 0; a < s.outer; ++a)
      std::copy_n(x.ptr() + (a * s.extent + begin_) * s.inner, chunk,
                  y.ptr() + a * chunk);
    return y;
  }
  void Backward(const std::vector<const Tensor *> &in, const Tensor &,
                const Tensor &g, const std::vector<Tensor *> &gi) override {
    if (!gi[0]) return;
    const AxisSplit s = SplitAt(in[0]->shape(), axis_);
    const std::size_t chunk = (end_ - begin_) * s.inner;
    for (std::size_t a = 0; a < s.outer; ++a) {
      double *dst = gi[0]->ptr() + (a * s.extent + begin_) * s.inner;
      const double *src = g.ptr() + a * chunk;
      for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
    }
  }

 private:
  std::size_t axis_, begin_, end_;
};

class SumAxisOp : public Op {
 public:
  explicit SumAxisOp(std::size_t axis) : axis_(axis) {}
  std::string Kind() const override { return "sum_axis"; }
  Tensor Forward(const std::vector<const Tensor *> &in) override {
    const Tensor &x = *in[0];
    if (axis_ >= x.rank()) throw ShapeError("sum_axis: axis out of range");
    Shape out = x.shape();
    out.erase(out.begin() + axis_);
    if (out.empty()) out = {1};
    Tensor y(out);
    const AxisSplit s = SplitAt(x.shape(), axis_);
    for (std::size_t a = 0; a < s.outer; ++a)
      for (std::size_t e = 0; e < s.extent; ++e)
        for (std::size_t i = 0; i < s.inner; ++i)
          y[a * s.inner + i] += x[(a * s.extent + e) * s.inner + i];
    return y;
  }
  void Backward(const std::vector<const Tensor *> &in, const Tensor &,
                const Tensor &g, const std::vector<Tensor *> &gi) override {
    if (!gi[0]) return;
    const AxisSplit s = SplitAt(in[0]->shape(), axis_);
    for (std::size_t a = 0; a < s.outer; ++a)
      for (std::size_t e = 0; e < s.extent; ++e)
        for (std::size_t i = 0; i < s.inner; ++i)
          (*gi[0])[(a * s.extent + e) * s.inner + i] += g[a * s.inner + i];
  }

 private:
  std::size_t axis_;
};

class BroadcastAxisOp : public Op {
 public:
  bool PreservesFinite() const override { return true; }
  BroadcastAxisOp(std::size_t axis, std::size_t n) : axis_(axis), n_(n) {}
  std::string Kind() const override { return "broadcast_axis"; }
  Tensor Forward(const std::vector<const Tensor *> &in) override {
    const Tensor &x = *in[0];
    if (axis_ > x.rank() || n_ == 0)
      throw ShapeError("broadcast_axis: invalid axis or extent");
    Shape out = x.shape();
    out.insert(out.begin() + axis_, n_);
    Tensor y = Tensor::Uninitialized(out);
    const AxisSplit s = SplitAt(out, axis_);
    for (std::size_t a = 0; a < s.outer; ++a)
      for (std::size_t e = 0; e < n_; ++e)
        std::copy_n(x.ptr() + a * s.inner, s.inner,
                    y.ptr() + (a * n_ + e) * s.inner);
    return y;
  }
  void Backward(const std::vector<const Tensor *> &, const Tensor &y,
                const Tensor &g, const std::vector<Tensor *> &gi) override {
    if (!gi[0]) return;
    const AxisSplit s = SplitAt(y.shape(), axis_);
    for (std::size_t a = 0; a < s.outer; ++a)
      for (std::size_t e = 0; e < n_; ++e)
        for (std::size_t i = 0; i < s.inner; ++i)
          (*gi[0])[a * s.inner + i] += g[(a * n_ + e) * s.inner + i];
  }

 private:
  std::size_t axis_, n_;
};

class ReduceOp : public Op {
 public:
  explicit ReduceOp(bool mean) : mean_(mean) {}
  std::string Kind() const override { return mean_ ? "mean" : "sum"; }
  Tensor Forward(const std::vector<const Tensor *> &in) override {
    double acc = 0.0;
    for (double v : in[0]->data()) acc += v;
    if (mean_) acc /= static_cast<double>(in[0]->size());
    return Tensor::Scalar(acc);
  }
  void Backward(const std::vector<const Tensor *> &in, const Tensor &,
                const Tensor &g, const std::vector<Tensor *> &gi) override {
    if (!gi[0]) return;
    const double d =
        mean_ ? g[0] / static_cast<double>(in[0]->size()) : g[0];
    for (double &v : gi[0]->data()) v += d;
  }

 private:
  bool mean_;
};

// ------------------------------------------------------------------- softmax

class SoftmaxOp : public Op {
 public:
  explicit SoftmaxOp(bool log) : log_(log) {}
  std::string Kind() const override {
    return log_ ? "log_softmax" : "softmax";
  }
  Tensor Forward(const std::vector<const Tensor *> &in) override {
    const Tensor &x = *in[0];
    const std::size_t k = x.shape().back(), rows = x.size() / k;
    Tensor y = Tensor::Uninitialized(x.shape());
    for (std::size_t r = 0; r < rows; ++r) {
      const double *xr = x.ptr() + r * k;
      double *yr = y.ptr() + r * k;
      const double mx = *std::max_element(xr, xr + k);
      double z = 0.0;
      for (std::size_t i = 0; i < k; ++i) z += std::exp(xr[i] - mx);
      const double lse = mx + std::log(z);
      for (std::size_t i = 0; i < k; ++i)
        yr[i] = log_ ? xr[i] - lse : std::exp(xr[i] - lse);
    }
    return y;
  }
  void Backward(const std::vector<const Tensor *> &, const Tensor &y,
                const Tensor &g, const std::vector<Tensor *> &gi) override {
    if (!gi[0]) return;
    const std::size_t k = y.shape().back(), rows = y.size() / k;
    for (std::size_t r = 0; r < rows; ++r) {
      const double *yr = y.ptr() + r * k, *gr = g.ptr() + r * k;
      double *dr = gi[0]->ptr() + r * k;
      if (log_) {
        double gs = 0.0;
        for (std::size_t i = 0; i < k; ++i) gs += gr[i];
        for (std::size_t i = 0; i < k; ++i) dr[i] += gr[i] - std::exp(yr[i]) * gs;
      } else {
        double dot = 0.0;
        for (std::size_t i = 0; i < k; ++i) dot += gr[i] * yr[i];
        for (std::size_t i = 0; i < k; ++i) dr[i] += yr[i] * (gr[i] - dot);
      }
    }
  }

 private:
  bool log_;
};

class L2NormalizeOp : public Op {
 public:
  std::string Kind() const override { return "l2_normalize"; }
  Tensor Forward(const std::vector<const Tensor *> &in) override {
    const Tensor &x = *in[0];
    const std::size_t d = x.shape().back(), rows = x.size() / d;
    norms_.assign(rows, 0.0);
    Tensor y(x.shape());
    for (std::size_t r = 0; r < rows; ++r) {
      double ss = 0.0;
      for (std::size_t i = 0; i < d; ++i) ss += x[r * d + i] * x[r * d + i];
      const double n = std::sqrt(ss);
      if (!(n > 0.0))
        throw ContractError("cosine undefined: row " + std::to_string(r) +
                            " has zero norm");
      norms_[r] = n;
      for (std::size_t i = 0; i < d; ++i) y[r * d + i] = x[r * d + i] / n;
    }
    return y;
  }
  void Backward(const std::vector<const Tensor *> &, const Tensor &y,
                const Tensor &g, const std::vector<Tensor *> &gi) override {
    if (!gi[0]) return;
    const std::size_t d = y.shape().back(), rows = y.size() / d;
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t i = 0; i < d; ++i) dot += y[r * d + i] * g[r * d + i];
      for (std::size_t i = 0; i < d; ++i)
        (*gi[0])[r * d + i] += (g[r * d + i] - y[r * d + i] * dot) / norms_[r];
    }
  }

 private:
  std::vector<double> norms_;
};

class RowDotOp : public Op {
 public:
  std::string Kind() const override { return "row_dot"; }
  Tensor Forward(const std::vector<const Tensor *> &in) override {
    const Tensor &a = *in[0], &b = *in[1];
    RequireSame(a, b, "row_dot");
    const std::size_t d = a.shape().back(), rows = a.size() / d;
    Tensor y = Tensor::Uninitialized(DropLast(a.shape()));
    for (std::size_t r = 0; r < rows; ++r) {
      double s = 0.0;
      for (std::size_t i = 0; i < d; ++i) s += a[r * d + i] * b[r * d + i];
      y[r] = s;
    }
    return y;
  }
  void Backward(const std::vector<const Tensor *> &in, const Tensor &,
                const Tensor &g, const std::vector<Tensor *> &gi) override {
    const Tensor &a = *in[0], &b = *in[1];
    const std::size_t d = a.shape().back(), rows = a.size() / d;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t i = 0; i < d; ++i) {
        if (gi[0]) (*gi[0])[r * d + i] += g[r] * b[r * d + i];
        if (gi[1]) (*gi[1])[r * d + i] += g[r] * a[r * d + i];
      }
  }
};

class CrossEntropyOp : public Op {
 public:
  explicit CrossEntropyOp(std::vector<int> labels)
      : labels_(std::move(labels)) {}
  std::string Kind() const override { return "cross_entropy"; }
  Tensor Forward(const std::vector<const Tensor *> &in) override {
    const Tensor &x = *in[0];
    RequireRank(x, 2, "cross_entropy");
    const std::size_t n = x.dim(0), k = x.dim(1);
    if (labels_.size() != n)
      throw ShapeError("cross_entropy: " + std::to_string(labels_.size()) +
                       " labels for " + std::to_string(n) + " rows");
    probs_ = Tensor(x.shape());
    double loss = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const int label = labels_[r];
      if (label < 0 || static_cast<std::size_t>(label) >= k)
        throw ContractError("cross_entropy: label " + std::to_string(label) +
                            " outside [0, " + std::to_string(k) + ")");
      const double *xr = x.ptr() + r * k;
      const double mx = *std::max_element(xr, xr + k);
      double z = 0.0;
      for (std::size_t i = 0; i < k; ++i) z += std::exp(xr[i] - mx);
      const double lse = mx + std::log(z);
      for (std::size_t i = 0; i < k; ++i)
        probs_[r * k + i] = std::exp(xr[i] - lse);
      loss += lse - xr[label];
    }
    return Tensor::Scalar(loss / static_cast<double>(n));
  }
  void Backward(const std::vector<const Tensor *> &in, const Tensor &,
                const Tensor &g, const std::vector<Tensor *> &gi) override {
    if (!gi[0]) return;
    const std::size_t n = in[0]->dim(0), k = in[0]->dim(1);
    const double s = g[0] / static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t i = 0; i < k; ++i)
        (*gi[0])[r * k + i] +=
            s * (probs_[r * k + i] -
                 (static_cast<int>(i) == labels_[r] ? 1.0 : 0.0));
  }

 private:
  std::vector<int> labels_;
  Tensor probs_;
};

// ----------------------------------------------------------------- batch norm

class BatchNormOp : public Op {
 public:
  BatchNormOp(bool train, std::string key, double eps)
      : train_(train), key_(std::move(key)), eps_(eps) {}
  std::string Kind() const override {
    return train_ ? "batch_norm_train" : "batch_norm_eval";
  }
  Tensor Forward(const std::vector<const Tensor *> &in) override {
    const Tensor &x = *in[0], &gamma = *in[1], &beta = *in[2];
    const std::size_t c = x.shape().back(), rows = x.size() / c;
    if (gamma.size() != c || beta.size() != c)
      throw ShapeError("batch_norm: scale/shift of " +
                       ShapeToString(gamma.shape()) + " for " +
                       std::to_string(c) + " channels");
    mean_.assign(c, 0.0);
    var_.assign(c, 0.0);
    const double *px = x.ptr();
    double *mean = mean_.data(), *var = var_.data();
    if (train_) {
      if (rows < 2)
        throw ContractError("batch_norm: training mode needs >= 2 rows");
      for (std::size_t r = 0; r < rows; ++r) {
        const double *xr = px + r * c;
        for (std::size_t i = 0; i < c; ++i) mean[i] += xr[i];
      }
      for (std::size_t i = 0; i < c; ++i) mean[i] /= static_cast<double>(rows);
      for (std::size_t r = 0; r < rows; ++r) {
        const double *xr = px + r * c;
        for (std::size_t i = 0; i < c; ++i) {
          const double d = xr[i] - mean[i];
          var[i] += d * d;
        }
      }
      for (std::size_t i = 0; i < c; ++i) var[i] /= static_cast<double>(rows);
      rows_ = rows;
    } else {
      const Tensor &rm = *in[3], &rv = *in[4];
      if (rm.size() != c || rv.size() != c)
        throw ShapeError("batch_norm: running statistics do not match");
      std::copy_n(rm.ptr(), c, mean);
      std::copy_n(rv.ptr(), c, var);
    }
    inv_std_.resize(c);
    for (std::size_t i = 0; i < c; ++i)
      inv_std_[i] = 1.0 / std::sqrt(var[i] + eps_);
    xhat_ = Tensor::Uninitialized(x.shape());
    Tensor y = Tensor::Uninitialized(x.shape());
    const double *inv = inv_std_.data(), *pg = gamma.ptr(), *pb = beta.ptr();
    double *ph = xhat_.ptr(), *py = y.ptr();
    for (std::size_t r = 0; r < rows; ++r) {
      const double *xr = px + r * c;
      double *hr = ph + r * c, *yr = py + r * c;
      for (std::size_t i = 0; i < c; ++i) {
        const double h = (xr[i] - mean[i]) * inv[i];
        hr[i] = h;
        yr[i] = pg[i] * h + pb[i];
      }
    }
    return y;
  }
  void Backward(const std::vector<const Tensor *> &in, const Tensor &,
                const Tensor &g, const std::vector<Tensor *> &gi) override {
    const Tensor &gamma = *in[1];
    const std::size_t c = gamma.size(), rows = g.size() / c;
    std::vector<double> sum_g(c, 0.0), sum_gx(c, 0.0);
    const double *pg = g.ptr(), *ph = xhat_.ptr();
    double *sg = sum_g.data(), *sgx = sum_gx.data();
    for (std::size_t r = 0; r < rows; ++r) {
      const double *gr = pg + r * c, *hr = ph + r * c;
      for (std::size_t i = 0; i < c; ++i) {
        sg[i] += gr[i];
        sgx[i] += gr[i] * hr[i];
      }
    }
    if (gi[1])
      for (std::size_t i = 0; i < c; ++i) (*gi[1])[i] += sum_gx[i];
    if (gi[2])
      for (std::size_t i = 0; i < c; ++i) (*gi[2])[i] += sum_g[i];
    if (!gi[0]) return;
    const double n = static_cast<double>(rows);
    std::vector<double> k(c), mg(c), mgx(c);
    for (std::size_t i = 0; i < c; ++i) {
      k[i] = gamma[i] * inv_std_[i];
      mg[i] = sum_g[i] / n;
      mgx[i] = sum_gx[i] / n;
    }
    double *dx = gi[0]->ptr();
    for (std::size_t r = 0; r < rows; ++r) {
      const double *gr = pg + r * c, *hr = ph + r * c;
      double *dr = dx + r * c;
      if (train_) {
        for (std::size_t i = 0; i < c; ++i)
          dr[i] += k[i] * (gr[i] - mg[i] - hr[i] * mgx[i]);
      } else {
        for (std::size_t i = 0; i < c; ++i) dr[i] += k[i] * gr[i];
      }
    }
  }
  void CollectAux(std::vector<AuxRecord> *aux) const override {
    if (!train_ || key_.empty()) return;
    const double n = static_cast<double>(rows_);
    std::vector<double> unbiased(var_);
    for (double &v : unbiased) v *= n / (n - 1.0);
    aux->push_back({key_ + ".mean", Tensor::FromVector(mean_)});
    aux->push_back({key_ + ".var", Tensor::FromVector(std::move(unbiased))});
  }

 private:
  bool train_;
  std::string key_;
  double eps_;
  std::size_t rows_ = 0;
  std::vector<double> mean_, var_, inv_std_;
  Tensor xhat_;
};

// -------------------------------------------------------------- convolution

class Conv1dOp : public Op {
 public:
  Conv1dOp(std::size_t kernel, std::size_t stride, std::size_t pad)
      : kernel_(kernel), stride_(stride), pad_(pad) {}
  std::string Kind() const override { return "conv1d"; }

  Tensor Forward(const std::vector<const Tensor *> &in) override {
    const Tensor &x = *in[0], &w = *in[1];
    RequireRank(x, 3, "conv1d");
    RequireRank(w, 2, "conv1d");
    const std::size_t b = x.dim(0), l = x.dim(1), cin = x.dim(2);
    if (w.dim(0) != kernel_ * cin)
      throw ShapeError("conv1d: weight " + ShapeToString(w.shape()) +
                       " does not match kernel " + std::to_string(kernel_) +
                       " x " + std::to_string(cin) + " input channels");
    const std::size_t lp = l + 2 * pad_;
    if (lp < kernel_) throw ShapeError("conv1d: input shorter than kernel");
    const std::size_t lout = (lp - kernel_) / stride_ + 1;
    const std::size_t cout = w.dim(1);
    Tensor y = Tensor::Uninitialized({b, lout, cout});
    ConstMatMap W(w.ptr(), w.dim(0), cout);
    std::vector<double> padded(pad_ > 0 ? lp * cin : 0, 0.0);
    for (std::size_t s = 0; s < b; ++s) {
      const double *src = x.ptr() + s * l * cin;
      if (pad_ > 0) {
        std::copy_n(src, l * cin, padded.begin() + pad_ * cin);
        src = padded.data();
      }
      StridedConstMap cols(src, lout, kernel_ * cin,
                           Eigen::OuterStride<>(stride_ * cin));
      MatMap(y.ptr() + s * lout * cout, lout, cout).noalias() = cols * W;
    }
    return y;
  }

  void Backward(const std::vector<const Tensor *> &in, const Tensor &y,
                const Tensor &g, const std::vector<Tensor *> &gi) override {
    const Tensor &x = *in[0], &w = *in[1];
    const std::size_t b = x.dim(0), l = x.dim(1), cin = x.dim(2);
    const std::size_t lp = l + 2 * pad_, lout = y.dim(1), cout = y.dim(2);
    const std::size_t kc = kernel_ * cin;
    ConstMatMap W(w.ptr(), kc, cout);
    std::vector<double> padded(pad_ > 0 ? lp * cin : 0, 0.0);
    RowMat dcols;
    std::vector<double> dpad(lp * cin);
    for (std::size_t s = 0; s < b; ++s) {
      ConstMatMap G(g.ptr() + s * lout * cout, lout, cout);
      if (gi[1]) {
        const double *src = x.ptr() + s * l * cin;
        if (pad_ > 0) {
          std::copy_n(src, l * cin, padded.begin() + pad_ * cin);
          src = padded.data();
        }
        StridedConstMap cols(src, lout, kc,
                             Eigen::OuterStride<>(stride_ * cin));
        MatMap(gi[1]->ptr(), kc, cout).noalias() += cols.transpose() * G;
      }
      if (gi[0]) {
        dcols.noalias() = G * W.transpose();
        std::fill(dpad.begin(), dpad.end(), 0.0);
        for (std::size_t t = 0; t < lout; ++t) {
          double *dst = dpad.data() + t * stride_ * cin;
          const double *row = dcols.data() + t * kc;
          for (std::size_t j = 0; j < kc; ++j) dst[j] += row[j];
        }
        double *dx = gi[0]->ptr() + s * l * cin;
        const double *src = dpad.data() + pad_ * cin;
        for (std::size_t j = 0; j < l * cin; ++j) dx[j] += src[j];
      }
    }
  }

 private:
  std::size_t kernel_, stride_, pad_;
};

class MaxPool1dOp : public Op {
 public:
  bool PreservesFinite() const override { return true; }
  MaxPool1dOp(std::size_t kernel, std::size_t stride)
      : kernel_(kernel), stride_(stride) {}
  std::string Kind() const override { return "max_pool1d"; }
  void AppendBranches(const std::vector<const Tensor *> &,
                      std::vector<std::size_t> *out) const override {
    out->insert(out->end(), argmax_.begin(), argmax_.end());
  }
  Tensor Forward(const std::vector<const Tensor *> &in) override {
    const Tensor &x = *in[0];
    RequireRank(x, 3, "max_pool1d");
    const std::size_t b = x.dim(0), l = x.dim(1), c = x.dim(2);
    if (l < kernel_) throw ShapeError("max_pool1d: input shorter than kernel");
    const std::size_t lout = (l - kernel_) / stride_ + 1;
    Tensor y = Tensor::Uninitialized({b, lout, c});
    argmax_.assign(y.size(), 0);
    for (std::size_t s = 0; s < b; ++s)
      for (std::size_t t = 0; t < lout; ++t)
        for (std::size_t i = 0; i < c; ++i) {
          std::size_t best = (s * l + t * stride_) * c + i;
          for (std::size_t k = 1; k < kernel_; ++k) {
            const std::size_t idx = (s * l + t * stride_ + k) * c + i;
            if (x[idx] > x[best]) best = idx;
          }
          const std::size_t o = (s * lout + t) * c + i;
          y[o] = x[best];
          argmax_[o] = best;
        }
    return y;
  }
  void Backward(const std::vector<const Tensor *> &, const Tensor &,
                const Tensor &g, const std::vector<Tensor *> &gi) override {
    if (!gi[0]) return;
    for (std::size_t o = 0; o < g.size(); ++o) (*gi[0])[argmax_[o]] += g[o];
  }

 private:
  std::size_t kernel_, stride_;
  std::vector<std::size_t> argmax_;
};

class AttentiveStatsOp : public Op {
 public:
  static constexpr double kEps = 1e-9;
  std::string Kind() const override { return "attentive_stats"; }
  Tensor Forward(const std::vector<const Tensor *> &in) override {
    const Tensor &h = *in[0], &a = *in[1];
    RequireRank(h, 3, "attentive_stats");
    RequireRank(a, 2, "attentive_stats");
    const std::size_t b = h.dim(0), t = h.dim(1), c = h.dim(2);
    if (a.dim(0) != b || a.dim(1) != t)
      throw ShapeError("attentive_stats: attention " +
                       ShapeToString(a.shape()) + " for frames " +
                       ShapeToString(h.shape()));
    if (t < 2)
      throw ContractError("attentive_stats: need at least 2 frames, got " +
                          std::to_string(t));
    Tensor y({b, 2 * c});
    mu_ = Tensor({b, c});
    sigma_ = Tensor({b, c});
    for (std::size_t s = 0; s < b; ++s) {
      for (std::size_t i = 0; i < c; ++i) {
        double m = 0.0, m2 = 0.0;
        for (std::size_t k = 0; k < t; ++k) {
          const double w = a[s * t + k], v = h[(s * t + k) * c + i];
          m += w * v;
          m2 += w * v * v;
        }
        const double var = std::max(m2 - m * m, 0.0);
        const double sd = std::sqrt(var + kEps);
        mu_[s * c + i] = m;
        sigma_[s * c + i] = sd;
        y[s * 2 * c + i] = m;
        y[s * 2 * c + c + i] = sd;
      }
    }
    return y;
  }
  void Backward(const std::vector<const Tensor *> &in, const Tensor &,
                const Tensor &g, const std::vector<Tensor *> &gi) override {
    const Tensor &h = *in[0], &a = *in[1];
    const std::size_t b = h.dim(0), t = h.dim(1), c = h.dim(2);
    for (std::size_t s = 0; s < b; ++s)
      for (std::size_t i = 0; i < c; ++i) {
        const double gm = g[s * 2 * c + i], gs = g[s * 2 * c + c + i];
        const double m = mu_[s * c + i], sd = sigma_[s * c + i];
        for (std::size_t k = 0; k < t; ++k) {
          const double w = a[s * t + k], v = h[(s * t + k) * c + i];
          // sigma^2 = sum_k a_k v_k^2 - mu^2 + eps
          if (gi[0])
            (*gi[0])[(s * t + k) * c + i] += gm * w + gs * w * (v - m) / sd;
          if (gi[1])
            (*gi[1])[s * t + k] += gm * v + gs * (v * v - 2.0 * m * v) /
                                                 (2.0 * sd);
        }
      }
  }

 private:
  Tensor mu_, sigma_;
};

class DropoutOp : public Op {
 public:
  DropoutOp(double rate, std::uint64_t seed) : rate_(rate), seed_(seed) {}
  std::string Kind() const override { return "dropout"; }
  Tensor Forward(const std::vector<const Tensor *> &in) override {
    const Tensor &x = *in[0];
    if (mask_.size() != x.size()) {
      std::mt19937_64 rng(seed_);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      mask_.resize(x.size());
      const double keep = 1.0 / (1.0 - rate_);
      for (double &m : mask_) m = u(rng) < rate_ ? 0.0 : keep;
    }
    Tensor y = Tensor::Uninitialized(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * mask_[i];
    return y;
  }
  void Backward(const std::vector<const Tensor *> &, const Tensor &,
                const Tensor &g, const std::vector<Tensor *> &gi) override {
    if (!gi[0]) return;
    for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i] * mask_[i];
  }

 private:
  double rate_;
  std::uint64_t seed_;
  std::vector<double> mask_;
};

class StopGradientOp : public Op {
 public:
  bool PreservesFinite() const override { return true; }
  std::string Kind() const override { return "stop_gradient"; }
  Tensor Forward(const std::vector<const Tensor *> &in) override {
    return *in[0];
  }
  void Backward(const std::vector<const Tensor *> &, const Tensor &,
                const Tensor &, const std::vector<Tensor *> &) override {}
  bool PassesGradient() const override { return false; }
};

}  // namespace

Var Add(Var a, Var b) { return Make(std::make_unique<BinaryOp>(Binary::kAdd), {a, b}); }
Var Sub(Var a, Var b) { return Make(std::make_unique<BinaryOp>(Binary::kSub), {a, b}); }
Var Mul(Var a, Var b) { return Make(std::make_unique<BinaryOp>(Binary::kMul), {a, b}); }

Var Scale(Var x, double c) {
  return Make(std::make_unique<AffineConstOp>(c, 0.0), {x});
}
Var AddScalar(Var x, double c) {
  return Make(std::make_unique<AffineConstOp>(1.0, c), {x});
}
Var ScaleBy(Var x, Var s) { return Make(std::make_unique<ScaleByOp>(), {x, s}); }
Var ShiftBy(Var x, Var s) { return Make(std::make_unique<ShiftByOp>(), {x, s}); }
Var AddBias(Var x, Var b) { return Make(std::make_unique<AddBiasOp>(), {x, b}); }

Var Relu(Var x) { return Make(std::make_unique<UnaryOp>(Unary::kRelu), {x}); }
Var Tanh(Var x) { return Make(std::make_unique<UnaryOp>(Unary::kTanh), {x}); }
Var Exp(Var x) { return Make(std::make_unique<UnaryOp>(Unary::kExp), {x}); }
Var Log(Var x) { return Make(std::make_unique<UnaryOp>(Unary::kLog), {x}); }
Var Square(Var x) { return Make(std::make_unique<UnaryOp>(Unary::kSquare), {x}); }
Var Sqrt(Var x) { return Make(std::make_unique<UnaryOp>(Unary::kSqrt), {x}); }

Var MatMul(Var a, Var b) { return Make(std::make_unique<MatMulOp>(), {a, b}); }
Var Transpose(Var a) { return Make(std::make_unique<TransposeOp>(), {a}); }

Var Linear(Var x, Var w, Var b) { return AddBias(MatMul(x, w), b); }

Var Reshape(Var x, Shape shape) {
  return Make(std::make_unique<ReshapeOp>(std::move(shape)), {x});
}
Var Concat(const std::vector<Var> &xs, std::size_t axis) {
  if (xs.empty()) throw ContractError("concat of zero operands");
  return Make(std::make_unique<ConcatOp>(axis), xs);
}
Var Slice(Var x, std::size_t axis, std::size_t begin, std::size_t end) {
  return Make(std::make_unique<SliceOp>(axis, begin, end), {x});
}
Var SumAxis(Var x, std::size_t axis) {
  return Make(std::make_unique<SumAxisOp>(axis), {x});
}
Var BroadcastAxis(Var x, std::size_t axis, std::size_t n) {
  return Make(std::make_unique<BroadcastAxisOp>(axis, n), {x});
}
Var Sum(Var x) { return Make(std::make_unique<ReduceOp>(false), {x}); }
Var Mean(Var x) { return Make(std::make_unique<ReduceOp>(true), {x}); }

Var Softmax(Var x) { return Make(std::make_unique<SoftmaxOp>(false), {x}); }
Var LogSoftmax(Var x) { return Make(std::make_unique<SoftmaxOp>(true), {x}); }

Var L2Normalize(Var x) { return Make(std::make_unique<L2NormalizeOp>(), {x}); }
Var RowDot(Var a, Var b) { return Make(std::make_unique<RowDotOp>(), {a, b}); }
Var CosineSimilarity(Var a, Var b) {
  return RowDot(L2Normalize(a), L2Normalize(b));
}

Var CrossEntropy(Var logits, std::vector<int> labels) {
  return Make(std::make_unique<CrossEntropyOp>(std::move(labels)), {logits});
}

Var BatchNormTrain(Var x, Var gamma, Var beta, std::string key, double eps) {
  return Make(std::make_unique<BatchNormOp>(true, std::move(key), eps),
              {x, gamma, beta});
}
Var BatchNormEval(Var x, Var gamma, Var beta, Var mean, Var var, double eps) {
  return Make(std::make_unique<BatchNormOp>(false, "", eps),
              {x, gamma, beta, mean, var});
}

Var Conv1d(Var x, Var w, std::size_t kernel, std::size_t stride,
           std::size_t pad) {
  if (kernel == 0 || stride == 0)
    throw ContractError("conv1d: kernel and stride must be positive");
  return Make(std::make_unique<Conv1dOp>(kernel, stride, pad), {x, w});
}
Var MaxPool1d(Var x, std::size_t kernel, std::size_t stride) {
  if (kernel == 0 || stride == 0)
    throw ContractError("max_pool1d: kernel and stride must be positive");
  return Make(std::make_unique<MaxPool1dOp>(kernel, stride), {x});
}
Var AttentiveStats(Var frames, Var attention) {
  return Make(std::make_unique<AttentiveStatsOp>(), {frames, attention});
}
Var Dropout(Var x, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw ContractError("dropout rate must lie in [0, 1)");
  return Make(std::make_unique<DropoutOp>(rate, seed), {x});
}
Var StopGradient(Var x) { return Make(std::make_unique<StopGradientOp>(), {x}); }

}  // namespace mtsv
