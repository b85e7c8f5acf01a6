#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace modalsav {

using Vec = std::vector<double>;

// Dense row-major matrix. Only the DCT and the GradNet weights are stored
// this way; every other operator in the library is diagonal.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// out = A x
inline void matvec(const Matrix& a, std::span<const double> x, std::span<double> out) {
  assert(x.size() == a.cols && out.size() == a.rows);
  for (std::size_t r = 0; r < a.rows; ++r) {
    const double* row = a.data.data() + r * a.cols;
    double s = 0.0;
    for (std::size_t c = 0; c < a.cols; ++c) s += row[c] * x[c];
    out[r] = s;
  }
}

// out = A^T y
inline void matvec_transposed(const Matrix& a, std::span<const double> y, std::span<double> out) {
  assert(y.size() == a.rows && out.size() == a.cols);
  for (std::size_t c = 0; c < a.cols; ++c) out[c] = 0.0;
  for (std::size_t r = 0; r < a.rows; ++r) {
    const double* row = a.data.data() + r * a.cols;
    const double yr = y[r];
    for (std::size_t c = 0; c < a.cols; ++c) out[c] += row[c] * yr;
  }
}

}  // namespace modalsav
