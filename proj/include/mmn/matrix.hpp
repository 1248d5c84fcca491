#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace mmn {

// Dense row-major matrix of 64-bit floats. Frame sequences are matrices
// whose rows are frames.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::int64_t rows, std::int64_t cols, double fill = 0.0);

  std::int64_t rows() const { return rows_; }
  std::int64_t cols() const { return cols_; }
  std::int64_t size() const { return rows_ * cols_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }

  double& operator()(std::int64_t r, std::int64_t c) {
    return v_[static_cast<std::size_t>(r * cols_ + c)];
  }
  double operator()(std::int64_t r, std::int64_t c) const {
    return v_[static_cast<std::size_t>(r * cols_ + c)];
  }

  std::span<double> row(std::int64_t r) {
    return {v_.data() + r * cols_, static_cast<std::size_t>(cols_)};
  }
  std::span<const double> row(std::int64_t r) const {
    return {v_.data() + r * cols_, static_cast<std::size_t>(cols_)};
  }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }

  bool all_finite() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::int64_t rows_ = 0;
  std::int64_t cols_ = 0;
  std::vector<double> v_;
};

// A T-by-D sequence of D-dimensional frames.
using FrameSequence = Matrix;

Matrix matmul(const Matrix& a, const Matrix& b);     // a(m,k) * b(k,n)
Matrix matmul_nt(const Matrix& a, const Matrix& b);  // a(m,k) * b(n,k)^T
Matrix matmul_tn(const Matrix& a, const Matrix& b);  // a(k,m)^T * b(k,n)
Matrix transpose(const Matrix& a);
Matrix hcat(const Matrix& a, const Matrix& b);

double frobenius_norm(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);
double squared_distance(std::span<const double> a, std::span<const double> b);

}  // namespace mmn
