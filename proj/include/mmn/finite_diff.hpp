#pragma once

#include <utility>

#include "mmn/error.hpp"
#include "mmn/matrix.hpp"

namespace mmn {

// Central-difference gradient of a scalar function of a matrix:
// g(i,j) = (f(X + h e_ij) - f(X - h e_ij)) / (2h).
template <typename F>
Matrix finite_diff_gradient(F&& f, Matrix x, double h) {
  if (!(h > 0.0)) throw InvalidArgument("finite_diff_gradient: h must be > 0");
  Matrix g(x.rows(), x.cols());
  for (std::int64_t i = 0; i < x.rows(); ++i) {
    for (std::int64_t j = 0; j < x.cols(); ++j) {
      const double saved = x(i, j);
      x(i, j) = saved + h;
      const double fp = f(static_cast<const Matrix&>(x));
      x(i, j) = saved - h;
      const double fm = f(static_cast<const Matrix&>(x));
      x(i, j) = saved;
      g(i, j) = (fp - fm) / (2.0 * h);
    }
  }
  return g;
}

}  // namespace mmn
