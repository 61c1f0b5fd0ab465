// src/tensor.cc

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

#include "mtsv/tensor.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "mtsv/error.h"

namespace mtsv {

std::size_t NumElements(const Shape &shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string ShapeToString(const Shape &shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << " x ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

static void CheckExtents(const Shape &shape) {
  if (shape.empty())
    throw ShapeError("tensor shape must have at least one extent");
  for (std::size_t d : shape)
    if (d == 0)
      throw ShapeError("tensor extents must be positive, got " +
                       ShapeToString(shape));
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  CheckExtents(shape_);
  data_.assign(NumElements(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(data.begin(), data.end()) {
  CheckExtents(shape_);
  if (NumElements(shape_) != data_.size())
    throw ShapeError("shape " + ShapeToString(shape_) + " holds " +
                     std::to_string(NumElements(shape_)) + " values, got " +
                     std::to_string(data_.size()));
}

Tensor Tensor::FromVector(std::vector<double> v) {
  Shape s{v.size()};
  return Tensor(std::move(s), std::move(v));
}

Tensor Tensor::Uninitialized(Shape shape) {
  CheckExtents(shape);
  Tensor t;
  t.data_.resize(NumElements(shape));
  t.shape_ = std::move(shape);
  return t;
}

Tensor Tensor::Reshaped(Shape shape) const {
  if (NumElements(shape) != data_.size())
    throw ShapeError("cannot reshape " + ShapeToString(shape_) + " to " +
                     ShapeToString(shape));
  CheckExtents(shape);
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = data_;
  return t;
}

void Tensor::Fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::AllFinite() const {
  // x * 0 is NaN exactly when x is not finite, and NaN survives the sum.
  // Four lanes keep the loop vectorizable without reassociation.
  const double *p = data_.data();
  const std::size_t n = data_.size();
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    for (std::size_t k = 0; k < 4; ++k) acc[k] += p[i + k] * 0.0;
  for (; i < n; ++i) acc[0] += p[i] * 0.0;
  return acc[0] + acc[1] + acc[2] + acc[3] == 0.0;
}

double Tensor::MaxAbs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

bool BitwiseEqual(const Tensor &a, const Tensor &b) {
  return a.shape() == b.shape() &&
         (a.size() == 0 ||
          std::memcmp(a.ptr(), b.ptr(), a.size() * sizeof(double)) == 0);
}

}  // namespace mtsv
