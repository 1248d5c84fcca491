#pragma once

#include <span>
#include <vector>

#include "mmn/kernels.hpp"
#include "mmn/matrix.hpp"

namespace mmn {

// A kernel two-sample loss split into its three gram sums. The terms are
// the raw (unnormalized) sums; `value` carries the normalization.
struct LossValue {
  double value = 0.0;
  double term_yy = 0.0;  // data vs data
  double term_hh = 0.0;  // generated vs generated
  double term_yh = 0.0;  // data vs generated
};

// Biased squared MMD between frame sets y and yhat. For equal lengths this
// is (term_yy + term_hh - 2 term_yh) / T^2; unequal lengths use the
// per-term denominators T_y^2, T_h^2 and T_y T_h.
LossValue mmd_sq(const FrameSequence& y, const FrameSequence& yhat,
                 const KernelConfig& cfg);

// Gradient of mmd_sq with respect to yhat.
Matrix mmd_sq_grad(const FrameSequence& y, const FrameSequence& yhat,
                   const KernelConfig& cfg);

// Conditional MMD: the three gram terms weighted elementwise by G
// (tr(G K) with the convention sum_{t,tau} G(tau,t) K(t,tau)), divided by
// T^2. G must be T x T; y and yhat must both have T rows.
LossValue cmmd(const Matrix& g, const FrameSequence& y,
               const FrameSequence& yhat, const KernelConfig& cfg);

// Gradient of cmmd with respect to yhat. G is treated as a constant.
Matrix cmmd_grad(const Matrix& g, const FrameSequence& y,
                 const FrameSequence& yhat, const KernelConfig& cfg);

// Two-draw estimator of the same conditional loss, for training a
// stochastic generator: the generated-generated term is evaluated between
// two independent realizations a and b, so its diagonal estimates the
// conditional embedding norm instead of being the constant k(y, y) = 1.
// The single-draw form rewards collapsing the sampler (its self-pairs
// contribute 1 where the population value needs E k(yhat, yhat')); this
// form is unbiased for the population loss and reduces bit-exactly to
// cmmd when a == b.
//   value = (1/T^2) { tr(G Kyy) + tr(G K(a,b)) - tr(G K(y,a)) - tr(G K(y,b)) }
LossValue cmmd_pair(const Matrix& g, const FrameSequence& y,
                    const FrameSequence& yhat_a, const FrameSequence& yhat_b,
                    const KernelConfig& cfg);

struct PairGrads {
  Matrix da;
  Matrix db;
};
PairGrads cmmd_pair_grad(const Matrix& g, const FrameSequence& y,
                         const FrameSequence& yhat_a,
                         const FrameSequence& yhat_b,
                         const KernelConfig& cfg);

// K-draw generalization: the generated-generated term averages over all
// K(K-1)/2 unordered copy pairs and the cross term over the K copies.
// Reduces to cmmd_pair at K = 2; more copies cut the estimator variance.
LossValue cmmd_multi(const Matrix& g, const FrameSequence& y,
                     std::span<const FrameSequence> copies,
                     const KernelConfig& cfg);
std::vector<Matrix> cmmd_multi_grad(const Matrix& g, const FrameSequence& y,
                                    std::span<const FrameSequence> copies,
                                    const KernelConfig& cfg);

// Mean over frames and dimensions of squared differences.
double mse(const FrameSequence& y, const FrameSequence& yhat);
Matrix mse_grad(const FrameSequence& y, const FrameSequence& yhat);

}  // namespace mmn
