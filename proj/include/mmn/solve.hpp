#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mmn/matrix.hpp"

namespace mmn {

// Lower Cholesky factor L with L * L^T = a. Only the lower triangle of a
// is read. Throws NotPositiveDefinite on a nonpositive or non-finite pivot.
Matrix cholesky_lower(const Matrix& a);

// Solves a * X = b for symmetric positive definite a via Cholesky.
// b may have any number of right-hand-side columns.
Matrix spd_solve_dense(const Matrix& a, const Matrix& b);

// Symmetric banded matrix; only the lower band is stored.
// Element (i, j) with j in [i - halfband, i] lives at
// values[i * (halfband + 1) + (j - i + halfband)].
class SymmetricBandedMatrix {
 public:
  SymmetricBandedMatrix(std::int64_t dim, std::int64_t halfband);

  std::int64_t dim() const { return n_; }
  std::int64_t halfband() const { return hb_; }

  double at(std::int64_t i, std::int64_t j) const;
  void add(std::int64_t i, std::int64_t j, double v);  // requires j <= i
  void set(std::int64_t i, std::int64_t j, double v);  // requires j <= i

  Matrix to_dense() const;

 private:
  std::int64_t n_;
  std::int64_t hb_;
  std::vector<double> v_;
};

// Banded Cholesky factorization; reusable across right-hand sides.
class BandedCholesky {
 public:
  explicit BandedCholesky(const SymmetricBandedMatrix& a);
  std::vector<double> solve(std::span<const double> rhs) const;

 private:
  std::int64_t n_;
  std::int64_t hb_;
  std::vector<double> l_;  // same band layout as the input
};

std::vector<double> spd_solve_banded(const SymmetricBandedMatrix& a,
                                     std::span<const double> b);

}  // namespace mmn
