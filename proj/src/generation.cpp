#include "mmn/generation.hpp"

#include <algorithm>
#include <cmath>

#include "mmn/error.hpp"
#include "mmn/solve.hpp"

namespace mmn {

std::int64_t WindowSet::max_reach() const {
  std::int64_t r = 0;
  for (const auto& w : windows)
    r = std::max({r, w.left_reach(), w.right_reach()});
  return r;
}

void WindowSet::validate() const {
  if (windows.empty()) throw InvalidArgument("window set: empty");
  for (const auto& w : windows) {
    if (w.coeffs.empty() || w.center < 0 ||
        w.center >= static_cast<std::int64_t>(w.coeffs.size()))
      throw InvalidArgument("window set: bad coefficient layout");
  }
  const auto& s = windows.front();
  if (s.coeffs.size() != 1 || s.coeffs[0] != 1.0)
    throw InvalidArgument("window set: window 0 must be the static [1]");
}

WindowSet WindowSet::static_only() { return WindowSet{{{{1.0}, 0}}}; }

WindowSet WindowSet::static_delta_deltadelta() {
  WindowSet ws;
  ws.windows.push_back({{1.0}, 0});
  ws.windows.push_back({{-0.5, 0.0, 0.5}, 1});
  ws.windows.push_back({{1.0, -2.0, 1.0}, 1});
  return ws;
}

FrameSequence sample_noise(const NoiseSpec& spec, std::int64_t t, Rng& rng) {
  if (t < 1) throw InvalidArgument("sample_noise: need at least one frame");
  if (spec.dim < 1) throw InvalidArgument("sample_noise: dim must be >= 1");
  Matrix out(t, spec.dim);
  if (spec.zero) return out;
  const auto draws = rng.gaussian_draws(t * spec.dim);
  std::copy(draws.begin(), draws.end(), out.data());
  return out;
}

namespace {

// Window w placed at frame t, with edge replication: taps whose frame
// index falls outside [0, T) are accumulated onto the clamped frame.
// Returns (column, coefficient) pairs with unique columns.
std::vector<std::pair<std::int64_t, double>> window_row(
    const Window& w, std::int64_t t, std::int64_t total) {
  std::vector<std::pair<std::int64_t, double>> row;
  for (std::size_t i = 0; i < w.coeffs.size(); ++i) {
    if (w.coeffs[i] == 0.0) continue;
    const std::int64_t off = static_cast<std::int64_t>(i) - w.center;
    const std::int64_t col = std::clamp<std::int64_t>(t + off, 0, total - 1);
    bool merged = false;
    for (auto& [c, v] : row)
      if (c == col) {
        v += w.coeffs[i];
        merged = true;
        break;
      }
    if (!merged) row.emplace_back(col, w.coeffs[i]);
  }
  return row;
}

}  // namespace

Matrix build_window_matrix(std::int64_t t, const WindowSet& ws) {
  ws.validate();
  if (t < 1) throw InvalidArgument("build_window_matrix: need T >= 1");
  Matrix w_mat(ws.count() * t, t);
  for (std::int64_t w = 0; w < ws.count(); ++w)
    for (std::int64_t u = 0; u < t; ++u)
      for (const auto& [col, coef] :
           window_row(ws.windows[static_cast<std::size_t>(w)], u, t))
        w_mat(w * t + u, col) += coef;
  return w_mat;
}

FrameSequence apply_windows(const FrameSequence& statics,
                            const WindowSet& ws) {
  ws.validate();
  if (statics.rows() < 1) throw InvalidArgument("apply_windows: empty input");
  const std::int64_t t_len = statics.rows(), d = statics.cols();
  Matrix out(t_len, d * ws.count());
  for (std::int64_t w = 0; w < ws.count(); ++w)
    for (std::int64_t u = 0; u < t_len; ++u)
      for (const auto& [col, coef] :
           window_row(ws.windows[static_cast<std::size_t>(w)], u, t_len))
        for (std::int64_t k = 0; k < d; ++k)
          out(u, w * d + k) += coef * statics(col, k);
  return out;
}

FrameSequence mlpg(const MlpgProblem& prob) {
  prob.windows.validate();
  const std::int64_t t_len = prob.stacked_means.rows();
  const std::int64_t wc = prob.windows.count();
  if (t_len < 1) throw InvalidArgument("mlpg: empty means");
  if (prob.stacked_means.cols() % wc != 0)
    throw DimensionMismatch("mlpg: stacked dim not divisible by window count");
  const std::int64_t d = prob.stacked_means.cols() / wc;
  std::vector<double> variances = prob.variances;
  if (variances.empty())
    variances.assign(static_cast<std::size_t>(d * wc), 1.0);
  if (static_cast<std::int64_t>(variances.size()) != d * wc)
    throw DimensionMismatch("mlpg: variance count differs from stacked dim");
  for (double v : variances)
    if (!(v > 0.0)) throw InvalidArgument("mlpg: variances must be > 0");

  const std::int64_t hb =
      std::min<std::int64_t>(2 * prob.windows.max_reach(), t_len - 1);
  Matrix out(t_len, d);
  for (std::int64_t dim = 0; dim < d; ++dim) {
    SymmetricBandedMatrix normal(t_len, hb);
    std::vector<double> rhs(static_cast<std::size_t>(t_len), 0.0);
    for (std::int64_t w = 0; w < wc; ++w) {
      const double ivar = 1.0 / variances[static_cast<std::size_t>(w * d + dim)];
      for (std::int64_t u = 0; u < t_len; ++u) {
        const auto row =
            window_row(prob.windows.windows[static_cast<std::size_t>(w)], u,
                       t_len);
        const double m = prob.stacked_means(u, w * d + dim);
        for (const auto& [ci, vi] : row) {
          rhs[static_cast<std::size_t>(ci)] += vi * ivar * m;
          for (const auto& [cj, vj] : row)
            if (cj <= ci) normal.add(ci, cj, vi * vj * ivar);
        }
      }
    }
    const auto c = spd_solve_banded(normal, rhs);
    for (std::int64_t u = 0; u < t_len; ++u)
      out(u, dim) = c[static_cast<std::size_t>(u)];
  }
  return out;
}

FrameSequence mlpg_backward(const MlpgProblem& prob, const Matrix& dstatic) {
  prob.windows.validate();
  const std::int64_t t_len = prob.stacked_means.rows();
  const std::int64_t wc = prob.windows.count();
  const std::int64_t d = prob.stacked_means.cols() / wc;
  if (dstatic.rows() != t_len || dstatic.cols() != d)
    throw DimensionMismatch("mlpg_backward: dstatic shape differs");
  std::vector<double> variances = prob.variances;
  if (variances.empty())
    variances.assign(static_cast<std::size_t>(d * wc), 1.0);

  const std::int64_t hb =
      std::min<std::int64_t>(2 * prob.windows.max_reach(), t_len - 1);
  Matrix dmeans(t_len, d * wc);
  for (std::int64_t dim = 0; dim < d; ++dim) {
    SymmetricBandedMatrix normal(t_len, hb);
    for (std::int64_t w = 0; w < wc; ++w) {
      const double ivar = 1.0 / variances[static_cast<std::size_t>(w * d + dim)];
      for (std::int64_t u = 0; u < t_len; ++u) {
        const auto row =
            window_row(prob.windows.windows[static_cast<std::size_t>(w)], u,
                       t_len);
        for (const auto& [ci, vi] : row)
          for (const auto& [cj, vj] : row)
            if (cj <= ci) normal.add(ci, cj, vi * vj * ivar);
      }
    }
    std::vector<double> rhs(static_cast<std::size_t>(t_len));
    for (std::int64_t u = 0; u < t_len; ++u)
      rhs[static_cast<std::size_t>(u)] = dstatic(u, dim);
    // dL/dm = S^-1 W (W' S^-1 W)^-1 dL/dc
    const auto z = spd_solve_banded(normal, rhs);
    for (std::int64_t w = 0; w < wc; ++w) {
      const double ivar = 1.0 / variances[static_cast<std::size_t>(w * d + dim)];
      for (std::int64_t u = 0; u < t_len; ++u) {
        const auto row =
            window_row(prob.windows.windows[static_cast<std::size_t>(w)], u,
                       t_len);
        double s = 0.0;
        for (const auto& [ci, vi] : row)
          s += vi * z[static_cast<std::size_t>(ci)];
        dmeans(u, w * d + dim) = s * ivar;
      }
    }
  }
  return dmeans;
}

FrameSequence smooth_trajectory(const FrameSequence& traj, double cutoff_hz,
                                double frame_shift_s, int taps) {
  if (!(frame_shift_s > 0.0))
    throw InvalidArgument("smooth_trajectory: frame shift must be > 0");
  const double nyquist = 0.5 / frame_shift_s;
  if (!(cutoff_hz > 0.0) || cutoff_hz >= nyquist)
    throw InvalidArgument("smooth_trajectory: cutoff must lie in (0, " +
                          std::to_string(nyquist) + ") Hz");
  if (taps < 3 || taps % 2 == 0)
    throw InvalidArgument("smooth_trajectory: taps must be odd and >= 3");
  if (traj.rows() < 1) throw InvalidArgument("smooth_trajectory: empty input");

  // Windowed-sinc taps, normalized to unit DC gain.
  const double fc = cutoff_hz * frame_shift_s;  // cycles per frame
  const int m = (taps - 1) / 2;
  std::vector<double> h(static_cast<std::size_t>(taps));
  double sum = 0.0;
  for (int i = 0; i < taps; ++i) {
    const double n = i - m;
    const double x = 2.0 * fc * n;
    const double sinc =
        (n == 0) ? 1.0
                 : std::sin(3.14159265358979323846 * x) /
                       (3.14159265358979323846 * x);
    const double ham =
        0.54 - 0.46 * std::cos(2.0 * 3.14159265358979323846 * i / (taps - 1));
    h[static_cast<std::size_t>(i)] = 2.0 * fc * sinc * ham;
    sum += h[static_cast<std::size_t>(i)];
  }
  for (auto& v : h) v /= sum;

  const std::int64_t t_len = traj.rows();
  Matrix out(t_len, traj.cols());
  for (std::int64_t dim = 0; dim < traj.cols(); ++dim) {
    for (std::int64_t t = 0; t < t_len; ++t) {
      double acc = 0.0;
      for (int i = 0; i < taps; ++i) {
        const std::int64_t src =
            std::clamp<std::int64_t>(t + i - m, 0, t_len - 1);
        acc += h[static_cast<std::size_t>(i)] * traj(src, dim);
      }
      out(t, dim) = acc;
    }
  }
  return out;
}

FrameSequence generate(const NetworkParams& generator,
                       const FrameSequence& context,
                       const FrameSequence& noise, const WindowSet& ws,
                       std::span<const double> variances) {
  if (context.rows() != noise.rows())
    throw DimensionMismatch("generate: context/noise frame counts differ");
  const FrameSequence stacked = forward(generator, hcat(context, noise));
  MlpgProblem prob;
  prob.stacked_means = stacked;
  prob.variances.assign(variances.begin(), variances.end());
  prob.windows = ws;
  return mlpg(prob);
}

}  // namespace mmn
