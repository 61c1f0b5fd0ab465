// include/mtsv/tensor.h

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

#ifndef MTSV_TENSOR_H_
#define MTSV_TENSOR_H_

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mtsv {

using Shape = std::vector<std::size_t>;

std::size_t NumElements(const Shape &shape);
std::string ShapeToString(const Shape &shape);

/// Dense row-major array of doubles.  The product of the extents always
/// equals the number of stored values.
/// Allocator that leaves doubles uninitialized on resize, so kernels that
/// overwrite every element skip a zero-fill pass.
template <typename T>
struct DefaultInitAllocator : std::allocator<T> {
  template <typename U>
  struct rebind {
    using other = DefaultInitAllocator<U>;
  };
  using std::allocator<T>::allocator;
  template <typename U>
  void construct(U *p) {
    ::new (static_cast<void *>(p)) U;
  }
  template <typename U, typename... Args>
  void construct(U *p, Args &&...args) {
    ::new (static_cast<void *>(p)) U(std::forward<Args>(args)...);
  }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor Scalar(double v) { return Tensor({1}, {v}); }
  static Tensor FromVector(std::vector<double> v);
  /// Element values are indeterminate; callers must write every element.
  static Tensor Uninitialized(Shape shape);

  const Shape &shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double *ptr() { return data_.data(); }
  const double *ptr() const { return data_.data(); }
  std::vector<double> values() const { return {data_.begin(), data_.end()}; }

  double &operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  /// Same data, new extents; the element count must not change.
  Tensor Reshaped(Shape shape) const;
  void Fill(double v);

  bool AllFinite() const;
  double MaxAbs() const;

  bool operator==(const Tensor &other) const = default;

 private:
  Shape shape_;
  std::vector<double, DefaultInitAllocator<double>> data_;
};

/// Bitwise comparison of two tensors (shape and every value).
bool BitwiseEqual(const Tensor &a, const Tensor &b);

}  // namespace mtsv

#endif  // MTSV_TENSOR_H_
