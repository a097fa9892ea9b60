// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sqish/errors.hpp"

namespace sqish {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

template <typename T>
using VectorX = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Index numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>{});
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ')';
  return os.str();
}

/// Dense row-major n-dimensional array. The buffer is an Eigen vector so
/// that whole-tensor arithmetic stays in expression form.
template <typename T>
class Tensor {
 public:
  using Scalar = T;

  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(VectorX<T>::Zero(numel(shape_))) {}

  Tensor(Shape shape, VectorX<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (numel(shape_) != data_.size()) {
      throw StructuralError("tensor: shape " + shape_str(shape_) + " does not match buffer length " +
                            std::to_string(data_.size()));
    }
  }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index dim(std::size_t i) const { return shape_.at(i); }
  Index size() const { return data_.size(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  VectorX<T>& vec() { return data_; }
  const VectorX<T>& vec() const { return data_; }

  auto array() { return data_.array(); }
  auto array() const { return data_.array(); }

  T& operator[](Index i) { return data_[i]; }
  const T& operator[](Index i) const { return data_[i]; }

  /// The buffer viewed as a rows x cols row-major matrix.
  Eigen::Map<RowMatrix<T>> matrix(Index rows, Index cols) {
    check_matrix(rows, cols);
    return {data_.data(), rows, cols};
  }
  Eigen::Map<const RowMatrix<T>> matrix(Index rows, Index cols) const {
    check_matrix(rows, cols);
    return {data_.data(), rows, cols};
  }

  Tensor reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

  template <typename U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, data_.template cast<U>());
  }

  bool all_finite() const { return data_.allFinite(); }

  void set_zero() { data_.setZero(); }

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && data_ == other.data_;
  }

 private:
  void check_matrix(Index rows, Index cols) const {
    if (rows * cols != data_.size()) {
      throw StructuralError("tensor: cannot view " + shape_str(shape_) + " as " +
                            std::to_string(rows) + "x" + std::to_string(cols));
    }
  }

  Shape shape_;
  VectorX<T> data_;
};

}  // namespace sqish
