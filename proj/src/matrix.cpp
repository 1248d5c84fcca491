#include "mmn/matrix.hpp"

#include <cmath>
#include <cstdlib>

#include "mmn/error.hpp"
#include "mmn/threading.hpp"

namespace mmn {

Matrix::Matrix(std::int64_t rows, std::int64_t cols, double fill)
    : rows_(rows), cols_(cols) {
  if (rows < 0 || cols < 0) throw InvalidArgument("Matrix: negative shape");
  v_.assign(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols),
            fill);
}

bool Matrix::all_finite() const {
  for (double x : v_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows())
    throw DimensionMismatch("matmul: inner dimensions differ");
  Matrix out(a.rows(), b.cols());
  const std::int64_t k = a.cols(), n = b.cols();
  parallel_for(a.rows(), [&](std::int64_t r0, std::int64_t r1) {
    for (std::int64_t i = r0; i < r1; ++i) {
      double* oi = out.data() + i * n;
      for (std::int64_t p = 0; p < k; ++p) {
        const double aip = a(i, p);
        const double* bp = b.data() + p * n;
        for (std::int64_t j = 0; j < n; ++j) oi[j] += aip * bp[j];
      }
    }
  });
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols())
    throw DimensionMismatch("matmul_nt: inner dimensions differ");
  Matrix out(a.rows(), b.rows());
  const std::int64_t k = a.cols();
  parallel_for(a.rows(), [&](std::int64_t r0, std::int64_t r1) {
    for (std::int64_t i = r0; i < r1; ++i) {
      const double* ai = a.data() + i * k;
      for (std::int64_t j = 0; j < b.rows(); ++j) {
        const double* bj = b.data() + j * k;
        double s = 0.0;
        for (std::int64_t p = 0; p < k; ++p) s += ai[p] * bj[p];
        out(i, j) = s;
      }
    }
  });
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows())
    throw DimensionMismatch("matmul_tn: inner dimensions differ");
  Matrix out(a.cols(), b.cols());
  const std::int64_t k = a.rows(), n = b.cols();
  parallel_for(a.cols(), [&](std::int64_t r0, std::int64_t r1) {
    for (std::int64_t i = r0; i < r1; ++i) {
      double* oi = out.data() + i * n;
      for (std::int64_t p = 0; p < k; ++p) {
        const double api = a(p, i);
        const double* bp = b.data() + p * n;
        for (std::int64_t j = 0; j < n; ++j) oi[j] += api * bp[j];
      }
    }
  });
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::int64_t i = 0; i < a.rows(); ++i)
    for (std::int64_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

Matrix hcat(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw DimensionMismatch("hcat: row counts differ");
  Matrix out(a.rows(), a.cols() + b.cols());
  for (std::int64_t i = 0; i < a.rows(); ++i) {
    for (std::int64_t j = 0; j < a.cols(); ++j) out(i, j) = a(i, j);
    for (std::int64_t j = 0; j < b.cols(); ++j) out(i, a.cols() + j) = b(i, j);
  }
  return out;
}

double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  const double* p = a.data();
  for (std::int64_t i = 0; i < a.size(); ++i) s += p[i] * p[i];
  return std::sqrt(s);
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionMismatch("max_abs_diff: shapes differ");
  double m = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw DimensionMismatch("squared_distance: lengths differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace mmn
