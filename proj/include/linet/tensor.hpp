#pragma once

#include <array>
#include <cstddef>
#include <string>

#include <Eigen/Core>

#include "linet/errors.hpp"

namespace linet {

/// Batch-first 4-D shape (N, C, H, W). Vectors are stored as (N, F, 1, 1).
struct Shape {
  int n = 0, c = 0, h = 0, w = 0;

  Eigen::Index size() const { return Eigen::Index(n) * c * h * w; }
  Eigen::Index sample_size() const { return Eigen::Index(c) * h * w; }
  Eigen::Index plane() const { return Eigen::Index(h) * w; }
  bool operator==(const Shape&) const = default;

  std::string str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
           std::to_string(w) + ")";
  }
};

inline void check_same_shape(const Shape& a, const Shape& b, const char* where) {
  if (!(a == b)) throw ShapeMismatch(std::string(where) + ": " + a.str() + " vs " + b.str());
}

/// Dense NCHW tensor over a contiguous Eigen array.
template <typename Scalar>
class Tensor {
 public:
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MatrixMap = Eigen::Map<RowMatrix>;
  using ConstMatrixMap = Eigen::Map<const RowMatrix>;

  Tensor() = default;
  explicit Tensor(Shape shape) : shape_(shape), data_(Array::Zero(shape.size())) {}
  Tensor(Shape shape, Scalar fill) : shape_(shape), data_(Array::Constant(shape.size(), fill)) {}
  Tensor(Shape shape, Array data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.size()) throw ShapeMismatch("tensor data size " + shape_.str());
  }

  static Tensor scalar(Scalar v) { return Tensor(Shape{1, 1, 1, 1}, v); }

  const Shape& shape() const { return shape_; }
  Eigen::Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  Array& array() { return data_; }
  const Array& array() const { return data_; }
  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  Scalar& operator()(int n, int c, int y, int x) {
    return data_[((Eigen::Index(n) * shape_.c + c) * shape_.h + y) * shape_.w + x];
  }
  Scalar operator()(int n, int c, int y, int x) const {
    return data_[((Eigen::Index(n) * shape_.c + c) * shape_.h + y) * shape_.w + x];
  }
  Scalar item() const { return data_[0]; }

  /// Sample n viewed as a (C, H*W) row-major matrix.
  MatrixMap sample(int n) {
    return MatrixMap(data_.data() + n * shape_.sample_size(), shape_.c, shape_.plane());
  }
  ConstMatrixMap sample(int n) const {
    return ConstMatrixMap(data_.data() + n * shape_.sample_size(), shape_.c, shape_.plane());
  }
  /// Whole tensor viewed as (N, C*H*W).
  MatrixMap rows() { return MatrixMap(data_.data(), shape_.n, shape_.sample_size()); }
  ConstMatrixMap rows() const { return ConstMatrixMap(data_.data(), shape_.n, shape_.sample_size()); }

  Tensor reshaped(Shape s) const {
    if (s.size() != size()) throw ShapeMismatch("reshape " + shape_.str() + " -> " + s.str());
    return Tensor(s, data_);
  }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, data_.template cast<Other>());
  }

  void set_zero() { data_.setZero(); }

 private:
  Shape shape_;
  Array data_;
};

}  // namespace linet
