#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "mmn/error.hpp"
#include "mmn/finite_diff.hpp"
#include "mmn/losses.hpp"
#include "mmn/rng.hpp"
#include "test_util.hpp"

using namespace mmn;
using test::random_matrix;
using test::rel_err;

TEST_CASE("mmd_sq: zero on identical sets") {
  Rng rng(201);
  for (int trial = 0; trial < 100; ++trial) {
    const std::int64_t t = 1 + static_cast<std::int64_t>(rng.next_below(8));
    const std::int64_t d = 1 + static_cast<std::int64_t>(rng.next_below(4));
    const Matrix y = random_matrix(t, d, rng);
    KernelConfig cfg;
    cfg.sigma2 = 0.5 + rng.next_unit() * 4.0;
    CHECK(std::abs(mmd_sq(y, y, cfg).value) <= 1e-12);
  }
}

TEST_CASE("mmd_sq: hand-expanded T=1 value") {
  Matrix y(1, 1), h(1, 1);
  y(0, 0) = 0.0;
  h(0, 0) = 1.0;
  KernelConfig cfg;
  cfg.sigma2 = 1.0;
  const auto lv = mmd_sq(y, h, cfg);
  CHECK(lv.value ==
        doctest::Approx(2.0 * (1.0 - std::exp(-1.0))).epsilon(1e-12));
  CHECK(lv.value == doctest::Approx(1.264241).epsilon(1e-6));
}

TEST_CASE("mmd_sq: symmetry and nonnegativity on random pairs") {
  Rng rng(202);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::int64_t t1 = 1 + static_cast<std::int64_t>(rng.next_below(6));
    const std::int64_t t2 = 1 + static_cast<std::int64_t>(rng.next_below(6));
    const std::int64_t d = 1 + static_cast<std::int64_t>(rng.next_below(3));
    const Matrix y = random_matrix(t1, d, rng);
    const Matrix h = random_matrix(t2, d, rng);
    KernelConfig cfg;
    cfg.sigma2 = 0.5 + rng.next_unit() * 4.0;
    const double a = mmd_sq(y, h, cfg).value;
    const double b = mmd_sq(h, y, cfg).value;
    CHECK(a == b);
    CHECK(a >= -1e-9);
  }
}

TEST_CASE("mmd_sq: permutation oracle separates shifted distributions") {
  Rng rng(203);
  const std::int64_t n = 200;
  Matrix y(n, 1), h(n, 1);
  for (std::int64_t i = 0; i < n; ++i) {
    y(i, 0) = rng.next_gaussian();
    h(i, 0) = 5.0 + rng.next_gaussian();
  }
  const FrameSequence pool[] = {y, h};
  KernelConfig cfg;
  cfg.sigma2 = bandwidth_from_data(pool).sigma2;
  const double observed = mmd_sq(y, h, cfg).value;

  // Null distribution: pooled relabelings.
  Matrix all(2 * n, 1);
  for (std::int64_t i = 0; i < n; ++i) {
    all(i, 0) = y(i, 0);
    all(n + i, 0) = h(i, 0);
  }
  std::vector<std::int64_t> idx(static_cast<std::size_t>(2 * n));
  for (std::size_t i = 0; i < idx.size(); ++i)
    idx[i] = static_cast<std::int64_t>(i);
  double null_max = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    for (std::size_t i = idx.size(); i > 1; --i)
      std::swap(idx[i - 1], idx[rng.next_below(i)]);
    Matrix a(n, 1), b(n, 1);
    for (std::int64_t i = 0; i < n; ++i) {
      a(i, 0) = all(idx[static_cast<std::size_t>(i)], 0);
      b(i, 0) = all(idx[static_cast<std::size_t>(n + i)], 0);
    }
    null_max = std::max(null_max, mmd_sq(a, b, cfg).value);
  }
  CHECK(observed > null_max);
}

TEST_CASE("mmd_sq_grad: hand value at T=1") {
  Matrix y(1, 1), h(1, 1);
  y(0, 0) = 0.0;
  h(0, 0) = 1.0;
  KernelConfig cfg;
  cfg.sigma2 = 1.0;
  const Matrix g = mmd_sq_grad(y, h, cfg);
  CHECK(g(0, 0) == doctest::Approx(4.0 * std::exp(-1.0)).epsilon(1e-12));
  CHECK(g(0, 0) == doctest::Approx(1.471518).epsilon(1e-6));
}

TEST_CASE("mmd_sq_grad: finite-difference agreement") {
  Rng rng(204);
  for (int trial = 0; trial < 25; ++trial) {
    const std::int64_t ty = 1 + static_cast<std::int64_t>(rng.next_below(6));
    const std::int64_t th = 1 + static_cast<std::int64_t>(rng.next_below(6));
    const std::int64_t d = 1 + static_cast<std::int64_t>(rng.next_below(4));
    const Matrix y = random_matrix(ty, d, rng);
    const Matrix h = random_matrix(th, d, rng);
    // Bandwidth rule keeps kernel exponents in [-1, 0]; training always
    // runs in this regime.
    const FrameSequence pool[] = {y, h};
    KernelConfig cfg;
    cfg.sigma2 = bandwidth_from_data(pool).sigma2;
    const Matrix analytic = mmd_sq_grad(y, h, cfg);
    const Matrix numeric = finite_diff_gradient(
        [&](const Matrix& m) { return mmd_sq(y, m, cfg).value; }, h, 1e-5);
    CHECK(rel_err(analytic, numeric) <= 1e-4);
  }
}

TEST_CASE("mmd_sq_grad: huge sigma2 flattens the gradient") {
  Rng rng(205);
  const Matrix y = random_matrix(4, 2, rng);
  const Matrix h = random_matrix(4, 2, rng);
  KernelConfig cfg;
  cfg.sigma2 = 1e12;
  const Matrix g = mmd_sq_grad(y, h, cfg);
  for (std::int64_t i = 0; i < g.size(); ++i)
    CHECK(std::abs(g.data()[i]) < 1e-9);
}

TEST_CASE("cmmd: zero on identical sets for arbitrary G") {
  Rng rng(206);
  for (int trial = 0; trial < 100; ++trial) {
    const std::int64_t t = 1 + static_cast<std::int64_t>(rng.next_below(6));
    const std::int64_t d = 1 + static_cast<std::int64_t>(rng.next_below(3));
    const Matrix y = random_matrix(t, d, rng);
    const Matrix g = random_matrix(t, t, rng);
    KernelConfig cfg;
    cfg.sigma2 = 1.0 + rng.next_unit();
    CHECK(std::abs(cmmd(g, y, y, cfg).value) <= 1e-12);
  }
}

TEST_CASE("cmmd: all-ones G reproduces mmd_sq bit for bit") {
  Rng rng(207);
  for (int trial = 0; trial < 50; ++trial) {
    const std::int64_t t = 1 + static_cast<std::int64_t>(rng.next_below(8));
    const std::int64_t d = 1 + static_cast<std::int64_t>(rng.next_below(4));
    const Matrix y = random_matrix(t, d, rng);
    const Matrix h = random_matrix(t, d, rng);
    const Matrix ones(t, t, 1.0);
    KernelConfig cfg;
    cfg.sigma2 = 0.5 + rng.next_unit() * 2.0;
    const auto via_cmmd = cmmd(ones, y, h, cfg);
    const auto via_mmd = mmd_sq(y, h, cfg);
    CHECK(via_cmmd.value == via_mmd.value);
    CHECK(via_cmmd.term_yy == via_mmd.term_yy);
    CHECK(via_cmmd.term_hh == via_mmd.term_hh);
    CHECK(via_cmmd.term_yh == via_mmd.term_yh);
  }
}

TEST_CASE("cmmd: scalar composition with the G of the T=1 gram") {
  Matrix y(1, 1), h(1, 1);
  y(0, 0) = 0.0;
  h(0, 0) = 1.0;
  Matrix g(1, 1, 0.980296);
  KernelConfig cfg;
  cfg.sigma2 = 1.0;
  const auto lv = cmmd(g, y, h, cfg);
  CHECK(lv.value ==
        doctest::Approx(0.980296 * 2.0 * (1.0 - std::exp(-1.0))).epsilon(1e-9));
  CHECK(lv.value == doctest::Approx(1.2393304).epsilon(1e-6));
}

TEST_CASE("cmmd_grad: zero G, scalar scale, finite differences") {
  Rng rng(208);
  const Matrix y0 = random_matrix(3, 2, rng);
  const Matrix h0 = random_matrix(3, 2, rng);
  KernelConfig cfg0;
  cfg0.sigma2 = 2.0;
  const Matrix zero_g(3, 3, 0.0);
  const Matrix gz = cmmd_grad(zero_g, y0, h0, cfg0);
  for (std::int64_t i = 0; i < gz.size(); ++i) CHECK(gz.data()[i] == 0.0);

  Matrix y(1, 1), h(1, 1);
  y(0, 0) = 0.0;
  h(0, 0) = 1.0;
  Matrix g(1, 1, 0.980296);
  KernelConfig cfg;
  cfg.sigma2 = 1.0;
  const Matrix grad = cmmd_grad(g, y, h, cfg);
  CHECK(grad(0, 0) ==
        doctest::Approx(0.980296 * 4.0 * std::exp(-1.0)).epsilon(1e-9));
  CHECK(grad(0, 0) == doctest::Approx(1.4425206).epsilon(1e-6));

  for (int trial = 0; trial < 25; ++trial) {
    const std::int64_t t = 1 + static_cast<std::int64_t>(rng.next_below(4));
    const std::int64_t d = 1 + static_cast<std::int64_t>(rng.next_below(3));
    const Matrix yy = random_matrix(t, d, rng);
    const Matrix hh = random_matrix(t, d, rng);
    const Matrix gg = random_matrix(t, t, rng);
    const FrameSequence pool[] = {yy, hh};
    KernelConfig kc;
    kc.sigma2 = bandwidth_from_data(pool).sigma2;
    const Matrix analytic = cmmd_grad(gg, yy, hh, kc);
    const Matrix numeric = finite_diff_gradient(
        [&](const Matrix& m) { return cmmd(gg, yy, m, kc).value; }, hh, 1e-5);
    CHECK(rel_err(analytic, numeric) <= 1e-4);
  }
}

TEST_CASE("cmmd: duplicated frame pair does not create loss at y=yhat") {
  Rng rng(209);
  const Matrix base = random_matrix(3, 2, rng);
  Matrix extended(4, 2);
  for (std::int64_t j = 0; j < 2; ++j) {
    for (std::int64_t i = 0; i < 3; ++i) extended(i, j) = base(i, j);
    extended(3, j) = base(1, j);
  }
  KernelConfig cfg;
  cfg.sigma2 = 1.5;
  CHECK(std::abs(mmd_sq(extended, extended, cfg).value) <= 1e-12);
}

TEST_CASE("cmmd_pair: reduces to cmmd when the copies coincide") {
  Rng rng(211);
  for (int trial = 0; trial < 20; ++trial) {
    const std::int64_t t = 1 + static_cast<std::int64_t>(rng.next_below(5));
    const std::int64_t d = 1 + static_cast<std::int64_t>(rng.next_below(3));
    const Matrix y = random_matrix(t, d, rng);
    const Matrix h = random_matrix(t, d, rng);
    const Matrix g = random_matrix(t, t, rng);
    KernelConfig cfg;
    cfg.sigma2 = 1.0 + rng.next_unit() * 2.0;
    const auto split = cmmd_pair(g, y, h, h, cfg);
    const auto plain = cmmd(g, y, h, cfg);
    CHECK(split.value == plain.value);
    // And the two-copy gradients sum to the single-draw gradient.
    const auto pg = cmmd_pair_grad(g, y, h, h, cfg);
    Matrix total = pg.da;
    for (std::int64_t i = 0; i < total.size(); ++i)
      total.data()[i] += pg.db.data()[i];
    CHECK(rel_err(total, cmmd_grad(g, y, h, cfg)) <= 1e-12);
  }
}

TEST_CASE("cmmd_pair / cmmd_multi: finite-difference gradients") {
  Rng rng(212);
  for (int trial = 0; trial < 10; ++trial) {
    const std::int64_t t = 2 + static_cast<std::int64_t>(rng.next_below(3));
    const std::int64_t d = 1 + static_cast<std::int64_t>(rng.next_below(3));
    const Matrix y = random_matrix(t, d, rng);
    std::vector<FrameSequence> copies;
    for (int c = 0; c < 3; ++c) copies.push_back(random_matrix(t, d, rng));
    const Matrix g = random_matrix(t, t, rng);
    const FrameSequence pool[] = {y, copies[0]};
    KernelConfig cfg;
    cfg.sigma2 = bandwidth_from_data(pool).sigma2;

    const auto grads = cmmd_multi_grad(g, y, copies, cfg);
    for (std::size_t which = 0; which < copies.size(); ++which) {
      const Matrix numeric = finite_diff_gradient(
          [&](const Matrix& m) {
            auto mod = copies;
            mod[which] = m;
            return cmmd_multi(g, y, mod, cfg).value;
          },
          copies[which], 1e-5);
      CHECK(rel_err(grads[which], numeric) <= 1e-4);
    }

    // K = 2 multi matches the pair form.
    const std::vector<FrameSequence> two{copies[0], copies[1]};
    const auto via_multi = cmmd_multi(g, y, two, cfg);
    const auto via_pair = cmmd_pair(g, y, copies[0], copies[1], cfg);
    CHECK(via_multi.value == doctest::Approx(via_pair.value).epsilon(1e-12));
  }
}

TEST_CASE("mse: hand arithmetic, zero, homogeneity") {
  Matrix y(1, 2), h(1, 2);
  y(0, 0) = 0.0;
  y(0, 1) = 0.0;
  h(0, 0) = 1.0;
  h(0, 1) = 3.0;
  CHECK(mse(y, h) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(mse(y, y) == 0.0);
  Matrix y2 = y, h2 = h;
  for (std::int64_t i = 0; i < y2.size(); ++i) {
    y2.data()[i] *= 2.0;
    h2.data()[i] *= 2.0;
  }
  CHECK(mse(y2, h2) == doctest::Approx(4.0 * mse(y, h)).epsilon(1e-12));
}

TEST_CASE("mse_grad: finite-difference agreement") {
  Rng rng(210);
  const Matrix y = random_matrix(4, 3, rng);
  const Matrix h = random_matrix(4, 3, rng);
  const Matrix analytic = mse_grad(y, h);
  const Matrix numeric = finite_diff_gradient(
      [&](const Matrix& m) { return mse(y, m); }, h, 1e-5);
  CHECK(rel_err(analytic, numeric) <= 1e-4);
}

TEST_CASE("losses: error paths") {
  Matrix y(2, 2), h(2, 3), empty;
  KernelConfig cfg;
  CHECK_THROWS_AS(mmd_sq(y, h, cfg), DimensionMismatch);
  CHECK_THROWS_AS(mmd_sq(empty, y, cfg), InvalidArgument);
  Matrix g(3, 3);
  CHECK_THROWS_AS(cmmd(g, y, y, cfg), DimensionMismatch);
  CHECK_THROWS_AS(mse(y, h), DimensionMismatch);
}
