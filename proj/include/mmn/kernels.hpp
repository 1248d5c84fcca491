#pragma once

#include <span>

#include "mmn/matrix.hpp"

namespace mmn {

// Gaussian kernel settings. The kernel is exp(-||a - b||^2 / sigma2):
// the squared distance is divided by sigma2 directly, with no factor 2.
struct KernelConfig {
  double sigma2 = 1.0;   // bandwidth, in squared-distance units
  double lambda = 0.01;  // regularization added to the input-side gram
  double jitter = 1e-8;  // one-shot diagonal boost if (K + lambda I) fails
};

double gaussian_kernel(std::span<const double> a, std::span<const double> b,
                       double sigma2);

// Pairwise kernel matrix, K(t, tau) = k(a_t, b_tau). gram(A, A) is
// symmetric with unit diagonal.
Matrix gram(const FrameSequence& a, const FrameSequence& b,
            const KernelConfig& cfg);

struct BandwidthResult {
  double sigma2 = 1.0;
  bool degenerate = false;  // every scanned pair coincided; fell back to 1
  bool sampled = false;     // pair scan was subsampled
};

// Bandwidth rule: sigma2 = the largest pairwise squared distance over the
// pooled frames, so the kernel exponent stays within [-1, 0] on the data.
// All pairs are scanned when there are at most 10^6 of them; otherwise a
// fixed-seed uniform sample of 10^6 pairs is scanned and the maximum is
// inflated by 1.5 to cover unseen pairs.
BandwidthResult bandwidth_from_data(std::span<const FrameSequence> frames);

// Conditional-MMD weight matrix G = (Kx + lambda I)^-1 Kx (Kx + lambda I)^-1,
// computed via one Cholesky of (Kx + lambda I) and two multi-RHS solves,
// then symmetrized. On a factorization failure the solve is retried once
// with cfg.jitter added to the diagonal.
Matrix cmmd_weights(const Matrix& kx, const KernelConfig& cfg);

}  // namespace mmn
