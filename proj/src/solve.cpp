#include "mmn/solve.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mmn/error.hpp"
#include "mmn/threading.hpp"

namespace mmn {

Matrix cholesky_lower(const Matrix& a) {
  if (a.rows() != a.cols()) throw DimensionMismatch("cholesky: not square");
  const std::int64_t n = a.rows();
  Matrix l(n, n);
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j <= i; ++j) {
      double s = a(i, j);
      const double* li = l.data() + i * n;
      const double* lj = l.data() + j * n;
      for (std::int64_t k = 0; k < j; ++k) s -= li[k] * lj[k];
      if (i == j) {
        if (!(s > 0.0) || !std::isfinite(s))
          throw NotPositiveDefinite("cholesky: pivot " + std::to_string(i) +
                                    " is not positive");
        l(i, i) = std::sqrt(s);
      } else {
        l(i, j) = s / l(j, j);
      }
    }
  }
  return l;
}

namespace {

// Forward then backward substitution on a column block [c0, c1) of x.
// Per-column arithmetic is independent, so blocking does not change any
// result bit.
void chol_substitute_block(const Matrix& l, Matrix& x, std::int64_t c0,
                           std::int64_t c1) {
  const std::int64_t n = l.rows();
  const std::int64_t m = x.cols();
  for (std::int64_t i = 0; i < n; ++i) {
    double* xi = x.data() + i * m;
    const double* li = l.data() + i * n;
    for (std::int64_t k = 0; k < i; ++k) {
      const double lik = li[k];
      if (lik == 0.0) continue;
      const double* xk = x.data() + k * m;
      for (std::int64_t j = c0; j < c1; ++j) xi[j] -= lik * xk[j];
    }
    const double d = l(i, i);
    for (std::int64_t j = c0; j < c1; ++j) xi[j] /= d;
  }
  for (std::int64_t i = n - 1; i >= 0; --i) {
    double* xi = x.data() + i * m;
    for (std::int64_t k = i + 1; k < n; ++k) {
      const double lki = l(k, i);
      if (lki == 0.0) continue;
      const double* xk = x.data() + k * m;
      for (std::int64_t j = c0; j < c1; ++j) xi[j] -= lki * xk[j];
    }
    const double d = l(i, i);
    for (std::int64_t j = c0; j < c1; ++j) xi[j] /= d;
  }
}

}  // namespace

Matrix spd_solve_dense(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows())
    throw DimensionMismatch("spd_solve_dense: rhs row count differs");
  const Matrix l = cholesky_lower(a);
  Matrix x = b;
  parallel_for(x.cols(), [&](std::int64_t c0, std::int64_t c1) {
    chol_substitute_block(l, x, c0, c1);
  });
  return x;
}

SymmetricBandedMatrix::SymmetricBandedMatrix(std::int64_t dim,
                                             std::int64_t halfband)
    : n_(dim), hb_(halfband) {
  if (dim < 1 || halfband < 0 || halfband >= dim)
    throw InvalidArgument("SymmetricBandedMatrix: bad dim/halfband");
  v_.assign(static_cast<std::size_t>(n_ * (hb_ + 1)), 0.0);
}

double SymmetricBandedMatrix::at(std::int64_t i, std::int64_t j) const {
  if (j > i) std::swap(i, j);
  if (i - j > hb_) return 0.0;
  return v_[static_cast<std::size_t>(i * (hb_ + 1) + (j - i + hb_))];
}

void SymmetricBandedMatrix::add(std::int64_t i, std::int64_t j, double v) {
  v_[static_cast<std::size_t>(i * (hb_ + 1) + (j - i + hb_))] += v;
}

void SymmetricBandedMatrix::set(std::int64_t i, std::int64_t j, double v) {
  v_[static_cast<std::size_t>(i * (hb_ + 1) + (j - i + hb_))] = v;
}

Matrix SymmetricBandedMatrix::to_dense() const {
  Matrix out(n_, n_);
  for (std::int64_t i = 0; i < n_; ++i)
    for (std::int64_t j = std::max<std::int64_t>(0, i - hb_); j <= i; ++j) {
      out(i, j) = at(i, j);
      out(j, i) = at(i, j);
    }
  return out;
}

BandedCholesky::BandedCholesky(const SymmetricBandedMatrix& a)
    : n_(a.dim()), hb_(a.halfband()) {
  const std::int64_t w = hb_ + 1;
  l_.assign(static_cast<std::size_t>(n_ * w), 0.0);
  auto lat = [&](std::int64_t i, std::int64_t j) -> double& {
    return l_[static_cast<std::size_t>(i * w + (j - i + hb_))];
  };
  for (std::int64_t i = 0; i < n_; ++i) {
    const std::int64_t j0 = std::max<std::int64_t>(0, i - hb_);
    for (std::int64_t j = j0; j <= i; ++j) {
      double s = a.at(i, j);
      const std::int64_t k0 = std::max<std::int64_t>(j0, j - hb_);
      for (std::int64_t k = k0; k < j; ++k) s -= lat(i, k) * lat(j, k);
      if (i == j) {
        if (!(s > 0.0) || !std::isfinite(s))
          throw NotPositiveDefinite("banded cholesky: pivot " +
                                    std::to_string(i) + " is not positive");
        lat(i, i) = std::sqrt(s);
      } else {
        lat(i, j) = s / lat(j, j);
      }
    }
  }
}

std::vector<double> BandedCholesky::solve(std::span<const double> rhs) const {
  if (static_cast<std::int64_t>(rhs.size()) != n_)
    throw DimensionMismatch("banded solve: rhs length differs");
  const std::int64_t w = hb_ + 1;
  auto lat = [&](std::int64_t i, std::int64_t j) -> double {
    return l_[static_cast<std::size_t>(i * w + (j - i + hb_))];
  };
  std::vector<double> x(rhs.begin(), rhs.end());
  for (std::int64_t i = 0; i < n_; ++i) {
    double s = x[static_cast<std::size_t>(i)];
    for (std::int64_t k = std::max<std::int64_t>(0, i - hb_); k < i; ++k)
      s -= lat(i, k) * x[static_cast<std::size_t>(k)];
    x[static_cast<std::size_t>(i)] = s / lat(i, i);
  }
  for (std::int64_t i = n_ - 1; i >= 0; --i) {
    double s = x[static_cast<std::size_t>(i)];
    const std::int64_t kmax = std::min<std::int64_t>(n_ - 1, i + hb_);
    for (std::int64_t k = i + 1; k <= kmax; ++k)
      s -= lat(k, i) * x[static_cast<std::size_t>(k)];
    x[static_cast<std::size_t>(i)] = s / lat(i, i);
  }
  return x;
}

std::vector<double> spd_solve_banded(const SymmetricBandedMatrix& a,
                                     std::span<const double> b) {
  return BandedCholesky(a).solve(b);
}

}  // namespace mmn
