#include "mmn/losses.hpp"

#include <cmath>
#include <bit>
#include <cstdint>

#include "mmn/error.hpp"

namespace mmn {

namespace {

void check_pair(const FrameSequence& y, const FrameSequence& yhat) {
  if (y.rows() == 0 || yhat.rows() == 0)
    throw InvalidArgument("loss: empty sequence");
  if (y.cols() != yhat.cols())
    throw DimensionMismatch("loss: feature dimensions differ");
}

// Sum over (t, tau) of w(tau, t) * k(t, tau); w omitted means all-ones.
// Row-major order over k keeps the summation order shared between the
// weighted and unweighted paths.
double gram_sum(const Matrix& k, const Matrix* w) {
  double s = 0.0;
  for (std::int64_t t = 0; t < k.rows(); ++t) {
    for (std::int64_t u = 0; u < k.cols(); ++u)
      s += w ? (*w)(u, t) * k(t, u) : k(t, u);
  }
  return s;
}

// IEEE total-order key; gives a deterministic tiebreak for signed zeros.
std::uint64_t order_key(double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  return (bits & 0x8000000000000000ULL) ? ~bits
                                        : (bits | 0x8000000000000000ULL);
}

bool lex_less(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) return a.rows() < b.rows();
  for (std::int64_t i = 0; i < a.size(); ++i) {
    const auto ka = order_key(a.data()[i]);
    const auto kb = order_key(b.data()[i]);
    if (ka != kb) return ka < kb;
  }
  return false;
}

// The cross-term addends are summed in an order canonicalized by a total
// order on the operands, so swapping the two sequences reproduces the
// exact same floating-point sum.
double cross_sum(const FrameSequence& y, const FrameSequence& yhat,
                 const KernelConfig& cfg, const Matrix* w) {
  if (lex_less(yhat, y)) {
    const Matrix k = gram(yhat, y, cfg);  // k(u, t) = kernel(yhat_u, y_t)
    double s = 0.0;
    for (std::int64_t u = 0; u < k.rows(); ++u) {
      for (std::int64_t t = 0; t < k.cols(); ++t)
        s += w ? (*w)(u, t) * k(u, t) : k(u, t);
    }
    return s;
  }
  return gram_sum(gram(y, yhat, cfg), w);
}

LossValue two_sample_terms(const FrameSequence& y, const FrameSequence& yhat,
                           const KernelConfig& cfg, const Matrix* w) {
  LossValue lv;
  lv.term_yy = gram_sum(gram(y, y, cfg), w);
  lv.term_hh = gram_sum(gram(yhat, yhat, cfg), w);
  lv.term_yh = cross_sum(y, yhat, cfg, w);
  return lv;
}

}  // namespace

LossValue mmd_sq(const FrameSequence& y, const FrameSequence& yhat,
                 const KernelConfig& cfg) {
  check_pair(y, yhat);
  LossValue lv = two_sample_terms(y, yhat, cfg, nullptr);
  const auto ty = static_cast<double>(y.rows());
  const auto th = static_cast<double>(yhat.rows());
  if (y.rows() == yhat.rows()) {
    lv.value = (lv.term_yy + lv.term_hh - 2.0 * lv.term_yh) / (ty * ty);
  } else {
    lv.value = lv.term_yy / (ty * ty) + lv.term_hh / (th * th) -
               2.0 * lv.term_yh / (ty * th);
  }
  return lv;
}

Matrix mmd_sq_grad(const FrameSequence& y, const FrameSequence& yhat,
                   const KernelConfig& cfg) {
  check_pair(y, yhat);
  const Matrix khh = gram(yhat, yhat, cfg);
  const Matrix kyh = gram(y, yhat, cfg);
  const std::int64_t ty = y.rows(), th = yhat.rows(), d = yhat.cols();
  const double c = -4.0 / cfg.sigma2;
  const double wh = 1.0 / (static_cast<double>(th) * static_cast<double>(th));
  const double wc = 1.0 / (static_cast<double>(ty) * static_cast<double>(th));
  Matrix grad(th, d);
  for (std::int64_t u = 0; u < th; ++u) {
    auto gu = grad.row(u);
    const auto hu = yhat.row(u);
    for (std::int64_t v = 0; v < th; ++v) {
      const double k = c * wh * khh(u, v);
      const auto hv = yhat.row(v);
      for (std::int64_t j = 0; j < d; ++j) gu[j] += k * (hu[j] - hv[j]);
    }
    for (std::int64_t t = 0; t < ty; ++t) {
      const double k = c * wc * kyh(t, u);
      const auto yt = y.row(t);
      for (std::int64_t j = 0; j < d; ++j) gu[j] -= k * (hu[j] - yt[j]);
    }
  }
  return grad;
}

LossValue cmmd(const Matrix& g, const FrameSequence& y,
               const FrameSequence& yhat, const KernelConfig& cfg) {
  check_pair(y, yhat);
  if (g.rows() != g.cols() || g.rows() != y.rows() || y.rows() != yhat.rows())
    throw DimensionMismatch("cmmd: G must be T x T matching both sequences");
  LossValue lv = two_sample_terms(y, yhat, cfg, &g);
  const auto t = static_cast<double>(y.rows());
  lv.value = (lv.term_yy + lv.term_hh - 2.0 * lv.term_yh) / (t * t);
  return lv;
}

Matrix cmmd_grad(const Matrix& g, const FrameSequence& y,
                 const FrameSequence& yhat, const KernelConfig& cfg) {
  check_pair(y, yhat);
  if (g.rows() != g.cols() || g.rows() != y.rows() || y.rows() != yhat.rows())
    throw DimensionMismatch("cmmd_grad: G must be T x T matching both sequences");
  const Matrix khh = gram(yhat, yhat, cfg);
  const Matrix kyh = gram(y, yhat, cfg);
  const std::int64_t t_len = y.rows(), d = yhat.cols();
  const double norm =
      1.0 / (static_cast<double>(t_len) * static_cast<double>(t_len));
  const double c = -4.0 / cfg.sigma2 * norm;
  Matrix grad(t_len, d);
  for (std::int64_t u = 0; u < t_len; ++u) {
    auto gu = grad.row(u);
    const auto hu = yhat.row(u);
    for (std::int64_t v = 0; v < t_len; ++v) {
      // 0.5 (G(u,v) + G(v,u)) is exact for the symmetric G produced by
      // cmmd_weights and makes the gradient correct for any G.
      const double k = c * (0.5 * (g(u, v) + g(v, u))) * khh(u, v);
      const auto hv = yhat.row(v);
      for (std::int64_t j = 0; j < d; ++j) gu[j] += k * (hu[j] - hv[j]);
    }
    for (std::int64_t t = 0; t < t_len; ++t) {
      const double k = c * g(u, t) * kyh(t, u);
      const auto yt = y.row(t);
      for (std::int64_t j = 0; j < d; ++j) gu[j] -= k * (hu[j] - yt[j]);
    }
  }
  return grad;
}

LossValue cmmd_pair(const Matrix& g, const FrameSequence& y,
                    const FrameSequence& yhat_a, const FrameSequence& yhat_b,
                    const KernelConfig& cfg) {
  check_pair(y, yhat_a);
  check_pair(y, yhat_b);
  if (g.rows() != g.cols() || g.rows() != y.rows() ||
      y.rows() != yhat_a.rows() || y.rows() != yhat_b.rows())
    throw DimensionMismatch("cmmd_pair: G must be T x T matching all sequences");
  LossValue lv;
  lv.term_yy = gram_sum(gram(y, y, cfg), &g);
  lv.term_hh = gram_sum(gram(yhat_a, yhat_b, cfg), &g);
  const double cross_a = gram_sum(gram(y, yhat_a, cfg), &g);
  const double cross_b = gram_sum(gram(y, yhat_b, cfg), &g);
  lv.term_yh = 0.5 * (cross_a + cross_b);
  const auto t = static_cast<double>(y.rows());
  lv.value = (lv.term_yy + lv.term_hh - (cross_a + cross_b)) / (t * t);
  return lv;
}

PairGrads cmmd_pair_grad(const Matrix& g, const FrameSequence& y,
                         const FrameSequence& yhat_a,
                         const FrameSequence& yhat_b,
                         const KernelConfig& cfg) {
  check_pair(y, yhat_a);
  check_pair(y, yhat_b);
  if (g.rows() != g.cols() || g.rows() != y.rows() ||
      y.rows() != yhat_a.rows() || y.rows() != yhat_b.rows())
    throw DimensionMismatch(
        "cmmd_pair_grad: G must be T x T matching all sequences");
  const Matrix kab = gram(yhat_a, yhat_b, cfg);
  const Matrix kya = gram(y, yhat_a, cfg);
  const Matrix kyb = gram(y, yhat_b, cfg);
  const std::int64_t t_len = y.rows(), d = y.cols();
  const double norm =
      1.0 / (static_cast<double>(t_len) * static_cast<double>(t_len));
  const double c = -2.0 / cfg.sigma2 * norm;
  PairGrads out{Matrix(t_len, d), Matrix(t_len, d)};
  for (std::int64_t u = 0; u < t_len; ++u) {
    auto da = out.da.row(u);
    auto db = out.db.row(u);
    const auto au = yhat_a.row(u);
    const auto bu = yhat_b.row(u);
    for (std::int64_t v = 0; v < t_len; ++v) {
      const double ka = c * g(v, u) * kab(u, v);
      const auto bv = yhat_b.row(v);
      for (std::int64_t j = 0; j < d; ++j) da[j] += ka * (au[j] - bv[j]);
      const double kb = c * g(u, v) * kab(v, u);
      const auto av = yhat_a.row(v);
      for (std::int64_t j = 0; j < d; ++j) db[j] += kb * (bu[j] - av[j]);
    }
    for (std::int64_t t = 0; t < t_len; ++t) {
      const auto yt = y.row(t);
      const double ka = c * g(u, t) * kya(t, u);
      for (std::int64_t j = 0; j < d; ++j) da[j] -= ka * (au[j] - yt[j]);
      const double kb = c * g(u, t) * kyb(t, u);
      for (std::int64_t j = 0; j < d; ++j) db[j] -= kb * (bu[j] - yt[j]);
    }
  }
  return out;
}

LossValue cmmd_multi(const Matrix& g, const FrameSequence& y,
                     std::span<const FrameSequence> copies,
                     const KernelConfig& cfg) {
  if (copies.size() < 2)
    throw InvalidArgument("cmmd_multi: need at least two copies");
  const auto k_count = static_cast<double>(copies.size());
  for (const auto& c : copies) {
    check_pair(y, c);
    if (c.rows() != y.rows())
      throw DimensionMismatch("cmmd_multi: copy length differs");
  }
  if (g.rows() != g.cols() || g.rows() != y.rows())
    throw DimensionMismatch("cmmd_multi: G must be T x T");
  LossValue lv;
  lv.term_yy = gram_sum(gram(y, y, cfg), &g);
  double hh = 0.0;
  for (std::size_t i = 0; i < copies.size(); ++i)
    for (std::size_t j = i + 1; j < copies.size(); ++j)
      hh += gram_sum(gram(copies[i], copies[j], cfg), &g);
  lv.term_hh = hh * 2.0 / (k_count * (k_count - 1.0));
  double cross = 0.0;
  for (const auto& c : copies) cross += gram_sum(gram(y, c, cfg), &g);
  lv.term_yh = cross / k_count;
  const auto t = static_cast<double>(y.rows());
  lv.value = (lv.term_yy + lv.term_hh - 2.0 * lv.term_yh) / (t * t);
  return lv;
}

std::vector<Matrix> cmmd_multi_grad(const Matrix& g, const FrameSequence& y,
                                    std::span<const FrameSequence> copies,
                                    const KernelConfig& cfg) {
  if (copies.size() < 2)
    throw InvalidArgument("cmmd_multi_grad: need at least two copies");
  for (const auto& c : copies) {
    check_pair(y, c);
    if (c.rows() != y.rows())
      throw DimensionMismatch("cmmd_multi_grad: copy length differs");
  }
  if (g.rows() != g.cols() || g.rows() != y.rows())
    throw DimensionMismatch("cmmd_multi_grad: G must be T x T");
  const std::size_t k_count = copies.size();
  const std::int64_t t_len = y.rows(), d = y.cols();
  const double norm =
      1.0 / (static_cast<double>(t_len) * static_cast<double>(t_len));
  const double c_hh = norm * 2.0 /
                      (static_cast<double>(k_count) *
                       (static_cast<double>(k_count) - 1.0));
  const double c_x = norm * 2.0 / static_cast<double>(k_count);
  std::vector<Matrix> grads(k_count, Matrix(t_len, d));
  const double s = -2.0 / cfg.sigma2;
  for (std::size_t i = 0; i < k_count; ++i) {
    for (std::size_t j = i + 1; j < k_count; ++j) {
      const Matrix kij = gram(copies[i], copies[j], cfg);
      for (std::int64_t u = 0; u < t_len; ++u) {
        auto gi = grads[i].row(u);
        auto gj = grads[j].row(u);
        const auto iu = copies[i].row(u);
        const auto ju = copies[j].row(u);
        for (std::int64_t v = 0; v < t_len; ++v) {
          const double wi = s * c_hh * g(v, u) * kij(u, v);
          const auto jv = copies[j].row(v);
          for (std::int64_t q = 0; q < d; ++q)
            gi[q] += wi * (iu[q] - jv[q]);
          const double wj = s * c_hh * g(u, v) * kij(v, u);
          const auto iv = copies[i].row(v);
          for (std::int64_t q = 0; q < d; ++q)
            gj[q] += wj * (ju[q] - iv[q]);
        }
      }
    }
    const Matrix kyi = gram(y, copies[i], cfg);
    for (std::int64_t u = 0; u < t_len; ++u) {
      auto gi = grads[i].row(u);
      const auto iu = copies[i].row(u);
      for (std::int64_t t = 0; t < t_len; ++t) {
        const double w = s * c_x * g(u, t) * kyi(t, u);
        const auto yt = y.row(t);
        for (std::int64_t q = 0; q < d; ++q) gi[q] -= w * (iu[q] - yt[q]);
      }
    }
  }
  return grads;
}

double mse(const FrameSequence& y, const FrameSequence& yhat) {
  if (y.rows() != yhat.rows() || y.cols() != yhat.cols())
    throw DimensionMismatch("mse: shapes differ");
  if (y.rows() == 0) throw InvalidArgument("mse: empty sequence");
  double s = 0.0;
  for (std::int64_t i = 0; i < y.size(); ++i) {
    const double d = yhat.data()[i] - y.data()[i];
    s += d * d;
  }
  return s / static_cast<double>(y.size());
}

Matrix mse_grad(const FrameSequence& y, const FrameSequence& yhat) {
  if (y.rows() != yhat.rows() || y.cols() != yhat.cols())
    throw DimensionMismatch("mse_grad: shapes differ");
  Matrix g(y.rows(), y.cols());
  const double c = 2.0 / static_cast<double>(y.size());
  for (std::int64_t i = 0; i < y.size(); ++i)
    g.data()[i] = c * (yhat.data()[i] - y.data()[i]);
  return g;
}

}  // namespace mmn
