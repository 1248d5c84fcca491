#include "mmn/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "mmn/error.hpp"
#include "mmn/rng.hpp"
#include "mmn/solve.hpp"
#include "mmn/threading.hpp"

namespace mmn {

namespace {

constexpr std::int64_t kMaxExactPairs = 1000000;
constexpr std::int64_t kSampledPairs = 1000000;
constexpr double kSampleSafety = 1.5;
constexpr std::uint64_t kScanSeed = 0x5EEDBA5EULL;

}  // namespace

double gaussian_kernel(std::span<const double> a, std::span<const double> b,
                       double sigma2) {
  if (a.size() != b.size())
    throw DimensionMismatch("gaussian_kernel: frame dimensions differ");
  if (!(sigma2 > 0.0))
    throw InvalidArgument("gaussian_kernel: sigma2 must be > 0");
  return std::exp(-squared_distance(a, b) / sigma2);
}

Matrix gram(const FrameSequence& a, const FrameSequence& b,
            const KernelConfig& cfg) {
  if (a.cols() != b.cols())
    throw DimensionMismatch("gram: feature dimensions differ");
  if (!(cfg.sigma2 > 0.0)) throw InvalidArgument("gram: sigma2 must be > 0");
  Matrix k(a.rows(), b.rows());
  const double inv_sigma2 = 1.0 / cfg.sigma2;
  parallel_for(a.rows(), [&](std::int64_t r0, std::int64_t r1) {
    for (std::int64_t t = r0; t < r1; ++t) {
      const auto at = a.row(t);
      for (std::int64_t u = 0; u < b.rows(); ++u)
        k(t, u) = std::exp(-squared_distance(at, b.row(u)) * inv_sigma2);
    }
  });
  return k;
}

BandwidthResult bandwidth_from_data(std::span<const FrameSequence> frames) {
  std::int64_t total = 0;
  std::int64_t dim = -1;
  for (const auto& f : frames) {
    if (f.empty()) continue;
    if (dim < 0) dim = f.cols();
    if (f.cols() != dim)
      throw DimensionMismatch("bandwidth_from_data: mixed frame dimensions");
    total += f.rows();
  }
  if (total < 2)
    throw InsufficientData("bandwidth_from_data: need at least 2 frames");

  // Flat index -> (sequence, row).
  std::vector<const FrameSequence*> seqs;
  std::vector<std::int64_t> offsets;
  for (const auto& f : frames) {
    if (f.empty()) continue;
    offsets.push_back(seqs.empty() ? 0 : offsets.back() + seqs.back()->rows());
    seqs.push_back(&f);
  }
  auto frame_at = [&](std::int64_t idx) {
    std::size_t s = seqs.size() - 1;
    while (offsets[s] > idx) --s;
    return seqs[s]->row(idx - offsets[s]);
  };

  const std::int64_t pair_count = total * (total - 1) / 2;
  BandwidthResult res;
  double max_sq = 0.0;
  if (pair_count <= kMaxExactPairs) {
    for (std::int64_t i = 0; i < total; ++i) {
      const auto fi = frame_at(i);
      for (std::int64_t j = i + 1; j < total; ++j)
        max_sq = std::max(max_sq, squared_distance(fi, frame_at(j)));
    }
  } else {
    res.sampled = true;
    Rng rng(kScanSeed);
    for (std::int64_t k = 0; k < kSampledPairs; ++k) {
      const auto i = static_cast<std::int64_t>(
          rng.next_below(static_cast<std::uint64_t>(total)));
      auto j = static_cast<std::int64_t>(
          rng.next_below(static_cast<std::uint64_t>(total)));
      if (i == j) continue;
      max_sq = std::max(max_sq, squared_distance(frame_at(i), frame_at(j)));
    }
    max_sq *= kSampleSafety;
  }
  if (max_sq <= 0.0) {
    res.sigma2 = 1.0;
    res.degenerate = true;
  } else {
    res.sigma2 = max_sq;
  }
  return res;
}

Matrix cmmd_weights(const Matrix& kx, const KernelConfig& cfg) {
  if (kx.rows() != kx.cols()) throw DimensionMismatch("cmmd_weights: gram not square");
  if (cfg.lambda < 0.0)
    throw InvalidArgument("cmmd_weights: lambda must be >= 0");
  const std::int64_t n = kx.rows();
  auto solve_with_boost = [&](double boost) {
    Matrix reg = kx;
    for (std::int64_t i = 0; i < n; ++i) reg(i, i) += cfg.lambda + boost;
    Matrix s = spd_solve_dense(reg, kx);             // (Kx+lI)^-1 Kx
    return spd_solve_dense(reg, transpose(s));       // (Kx+lI)^-1 Kx (Kx+lI)^-1
  };
  Matrix g;
  try {
    g = solve_with_boost(0.0);
  } catch (const NotPositiveDefinite&) {
    if (cfg.jitter <= 0.0) throw;
    g = solve_with_boost(cfg.jitter);
  }
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < i; ++j) {
      const double v = 0.5 * (g(i, j) + g(j, i));
      g(i, j) = v;
      g(j, i) = v;
    }
  return g;
}

}  // namespace mmn
