#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "ctct/error.hpp"

namespace ctct {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Dense N-d float array, row-major. The currency of all nn ops.
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(numel_of(shape), T(0)) {}
  Tensor(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != numel_of(shape))
      throw Error(ErrorKind::ShapeError, "tensor data length does not match shape");
  }

  static size_t numel_of(const std::vector<int>& s) {
    size_t n = 1;
    for (int e : s) {
      if (e < 1) throw Error(ErrorKind::ShapeError, "non-positive tensor extent");
      n *= static_cast<size_t>(e);
    }
    return n;
  }

  size_t numel() const { return data.size(); }

  T& operator[](size_t i) { return data[i]; }
  T operator[](size_t i) const { return data[i]; }

  // [C,H,W] indexing
  T& at3(int c, int y, int x) {
    return data[(static_cast<size_t>(c) * shape[1] + y) * shape[2] + x];
  }
  T at3(int c, int y, int x) const {
    return data[(static_cast<size_t>(c) * shape[1] + y) * shape[2] + x];
  }

  Eigen::Map<Mat<T>> as_matrix(int rows, int cols) {
    if (static_cast<size_t>(rows) * cols != numel())
      throw Error(ErrorKind::ShapeError, "matrix view size mismatch");
    return Eigen::Map<Mat<T>>(data.data(), rows, cols);
  }
  Eigen::Map<const Mat<T>> as_matrix(int rows, int cols) const {
    if (static_cast<size_t>(rows) * cols != numel())
      throw Error(ErrorKind::ShapeError, "matrix view size mismatch");
    return Eigen::Map<const Mat<T>>(data.data(), rows, cols);
  }

  bool all_finite() const {
    for (T v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  std::string shape_str() const {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
    return s + "]";
  }
};

// Enabled in 64-bit / checked runs; NaN or Inf anywhere is a hard error.
template <typename T>
void check_finite(const Tensor<T>& t, const char* what) {
  if (!t.all_finite())
    throw Error(ErrorKind::NumericError, std::string("non-finite values in ") + what);
}

}  // namespace ctct
