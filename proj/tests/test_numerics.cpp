#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mmn/error.hpp"
#include "mmn/finite_diff.hpp"
#include "mmn/matrix.hpp"
#include "mmn/rng.hpp"
#include "mmn/solve.hpp"

using namespace mmn;

namespace {

Matrix random_matrix(std::int64_t r, std::int64_t c, Rng& rng) {
  Matrix m(r, c);
  for (std::int64_t i = 0; i < m.size(); ++i)
    m.data()[i] = rng.next_gaussian();
  return m;
}

// SPD by construction: A = B B^T + n I.
Matrix random_spd(std::int64_t n, Rng& rng) {
  const Matrix b = random_matrix(n, n, rng);
  Matrix a = matmul_nt(b, b);
  for (std::int64_t i = 0; i < n; ++i) a(i, i) += static_cast<double>(n);
  return a;
}

}  // namespace

TEST_CASE("rng: same seed gives identical draws") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(42), d(42);
  const auto ga = c.gaussian_draws(1000);
  const auto gb = d.gaussian_draws(1000);
  CHECK(ga == gb);
}

TEST_CASE("rng: different seeds diverge") {
  Rng a(1), b(2);
  const auto ga = a.gaussian_draws(100);
  const auto gb = b.gaussian_draws(100);
  bool any_diff = false;
  for (int i = 0; i < 100; ++i) any_diff |= (ga[i] != gb[i]);
  CHECK(any_diff);
}

TEST_CASE("rng: zero seed is valid") {
  Rng r(0);
  const auto v = r.gaussian_draws(10);
  for (double x : v) CHECK(std::isfinite(x));
}

TEST_CASE("rng: integer stream is frozen") {
  // Pinned once from this implementation; any platform must reproduce them.
  Rng r(0);
  CHECK(r.next_u64() == 16294208416658607535ULL);
  CHECK(r.next_u64() == 7960286522194355700ULL);
  CHECK(r.next_u64() == 487617019471545679ULL);
  Rng s(42);
  CHECK(s.next_u64() == 13679457532755275413ULL);
}

TEST_CASE("rng: gaussian moments at n=1e6") {
  Rng r(7);
  const auto v = r.gaussian_draws(1000000);
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  CHECK(std::abs(mean) < 0.005);
  CHECK(std::abs(var - 1.0) < 0.01);
}

TEST_CASE("rng: empty request and consumption accounting") {
  Rng r(3);
  CHECK(r.gaussian_draws(0).empty());
  // Odd-length requests consume a whole pair.
  Rng a(5), b(5);
  (void)a.gaussian_draws(1);
  (void)b.gaussian_draws(2);
  CHECK(a.state() == b.state());
}

TEST_CASE("rng: derived streams differ from parent and siblings") {
  Rng root(9);
  Rng c0 = root.derive(0);
  Rng c1 = root.derive(1);
  CHECK(c0.next_u64() != c1.next_u64());
  // Derivation is stable: same index, same stream.
  Rng c0b = root.derive(0);
  Rng c0c = root.derive(0);
  CHECK(c0b.next_u64() == c0c.next_u64());
}

TEST_CASE("cholesky reconstructs SPD matrices") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::int64_t n = 1 + static_cast<std::int64_t>(rng.next_below(12));
    const Matrix a = random_spd(n, rng);
    const Matrix l = cholesky_lower(a);
    const Matrix rec = matmul_nt(l, l);
    CHECK(max_abs_diff(rec, a) <= 1e-10 * frobenius_norm(a));
  }
}

TEST_CASE("spd_solve_dense: identity solve returns rhs") {
  Matrix eye(3, 3);
  for (int i = 0; i < 3; ++i) eye(i, i) = 1.0;
  Rng rng(4);
  const Matrix b = random_matrix(3, 2, rng);
  const Matrix x = spd_solve_dense(eye, b);
  CHECK(max_abs_diff(x, b) == 0.0);
}

TEST_CASE("spd_solve_dense: hand-checked 2x2") {
  Matrix a(2, 2);
  a(0, 0) = 4;
  a(0, 1) = 2;
  a(1, 0) = 2;
  a(1, 1) = 3;
  Matrix b(2, 1);
  b(0, 0) = 1;
  b(1, 0) = 1;
  const Matrix x = spd_solve_dense(a, b);
  CHECK(x(0, 0) == doctest::Approx(0.125).epsilon(1e-12));
  CHECK(x(1, 0) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("spd_solve_dense: indefinite input is rejected") {
  Matrix a(2, 2);
  a(0, 0) = 1;
  a(0, 1) = 2;
  a(1, 0) = 2;
  a(1, 1) = 1;
  Matrix b(2, 1, 1.0);
  CHECK_THROWS_AS(spd_solve_dense(a, b), NotPositiveDefinite);
}

TEST_CASE("spd_solve_dense: residual on well-conditioned systems") {
  Rng rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const std::int64_t n = 2 + static_cast<std::int64_t>(rng.next_below(14));
    const Matrix a = random_spd(n, rng);
    const Matrix b = random_matrix(n, 3, rng);
    const Matrix x = spd_solve_dense(a, b);
    const Matrix r = matmul(a, x);
    CHECK(max_abs_diff(r, b) <= 1e-10 * frobenius_norm(b));
  }
}

TEST_CASE("banded: diagonal solve") {
  SymmetricBandedMatrix a(4, 0);
  for (int i = 0; i < 4; ++i) a.set(i, i, 2.0);
  std::vector<double> b(4, 1.0);
  const auto x = spd_solve_banded(a, b);
  for (double v : x) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("banded matches dense expansion on random SPD bands") {
  Rng rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    const std::int64_t n = 2 + static_cast<std::int64_t>(rng.next_below(15));
    const std::int64_t hb =
        std::min<std::int64_t>(n - 1, rng.next_below(5));
    SymmetricBandedMatrix a(n, hb);
    for (std::int64_t i = 0; i < n; ++i) {
      a.set(i, i, 4.0 + static_cast<double>(hb) + rng.next_unit());
      for (std::int64_t j = std::max<std::int64_t>(0, i - hb); j < i; ++j)
        a.set(i, j, rng.next_gaussian() * 0.5);
    }
    std::vector<double> b(static_cast<std::size_t>(n));
    for (auto& v : b) v = rng.next_gaussian();
    const auto x = spd_solve_banded(a, b);

    Matrix rhs(n, 1);
    for (std::int64_t i = 0; i < n; ++i) rhs(i, 0) = b[static_cast<std::size_t>(i)];
    const Matrix xd = spd_solve_dense(a.to_dense(), rhs);
    double scale = 0.0, err = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      scale = std::max(scale, std::abs(xd(i, 0)));
      err = std::max(err, std::abs(xd(i, 0) - x[static_cast<std::size_t>(i)]));
    }
    CHECK(err <= 1e-8 * std::max(1.0, scale));
  }
}

TEST_CASE("banded: full bandwidth degenerates to dense") {
  Rng rng(23);
  const std::int64_t n = 6;
  const Matrix ad = random_spd(n, rng);
  SymmetricBandedMatrix a(n, n - 1);
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j <= i; ++j) a.set(i, j, ad(i, j));
  std::vector<double> b(static_cast<std::size_t>(n), 1.0);
  const auto x = spd_solve_banded(a, b);
  Matrix rhs(n, 1, 1.0);
  const Matrix xd = spd_solve_dense(ad, rhs);
  for (std::int64_t i = 0; i < n; ++i)
    CHECK(x[static_cast<std::size_t>(i)] ==
          doctest::Approx(xd(i, 0)).epsilon(1e-10));
}

TEST_CASE("banded: indefinite is rejected") {
  SymmetricBandedMatrix a(3, 1);
  a.set(0, 0, 1.0);
  a.set(1, 0, 2.0);
  a.set(1, 1, 1.0);
  a.set(2, 1, 0.0);
  a.set(2, 2, 1.0);
  std::vector<double> b(3, 1.0);
  CHECK_THROWS_AS(spd_solve_banded(a, b), NotPositiveDefinite);
}

TEST_CASE("finite_diff_gradient: linear, quadratic, constant") {
  auto sum_f = [](const Matrix& m) {
    double s = 0.0;
    for (std::int64_t i = 0; i < m.size(); ++i) s += m.data()[i];
    return s;
  };
  Matrix x(2, 3);
  Rng rng(31);
  for (std::int64_t i = 0; i < x.size(); ++i) x.data()[i] = rng.next_gaussian();
  const Matrix g1 = finite_diff_gradient(sum_f, x, 1e-5);
  for (std::int64_t i = 0; i < g1.size(); ++i)
    CHECK(g1.data()[i] == doctest::Approx(1.0).epsilon(1e-7));

  auto norm2 = [](const Matrix& m) {
    double s = 0.0;
    for (std::int64_t i = 0; i < m.size(); ++i) s += m.data()[i] * m.data()[i];
    return s;
  };
  Matrix x2(1, 2);
  x2(0, 0) = 1.0;
  x2(0, 1) = 2.0;
  const Matrix g2 = finite_diff_gradient(norm2, x2, 1e-5);
  CHECK(g2(0, 0) == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(g2(0, 1) == doctest::Approx(4.0).epsilon(1e-6));

  auto const_f = [](const Matrix&) { return 3.5; };
  const Matrix g3 = finite_diff_gradient(const_f, x, 1e-5);
  for (std::int64_t i = 0; i < g3.size(); ++i) CHECK(g3.data()[i] == 0.0);
}

TEST_CASE("matrix: shape errors") {
  Matrix a(2, 3), b(2, 3);
  CHECK_THROWS_AS(matmul(a, b), DimensionMismatch);
  CHECK_NOTHROW(matmul_nt(a, b));
}
