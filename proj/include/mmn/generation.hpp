#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mmn/matrix.hpp"
#include "mmn/network.hpp"
#include "mmn/rng.hpp"

namespace mmn {

// One regression window: taps applied at offsets
// (-center, ..., 0, ..., size - 1 - center) around the current frame.
struct Window {
  std::vector<double> coeffs;
  std::int64_t center = 0;

  std::int64_t left_reach() const { return center; }
  std::int64_t right_reach() const {
    return static_cast<std::int64_t>(coeffs.size()) - 1 - center;
  }
};

// Windows for stacking static and dynamic features. Window 0 must be the
// static identity [1].
struct WindowSet {
  std::vector<Window> windows;

  std::int64_t count() const {
    return static_cast<std::int64_t>(windows.size());
  }
  std::int64_t max_reach() const;
  void validate() const;

  static WindowSet static_only();
  // [1], delta [-0.5, 0, 0.5], delta-delta [1, -2, 1].
  static WindowSet static_delta_deltadelta();
};

struct NoiseSpec {
  std::int64_t dim = 3;
  bool zero = false;  // deterministic mode: all-zero noise
};

// T rows of standard-normal noise (or zeros in zero mode).
FrameSequence sample_noise(const NoiseSpec& spec, std::int64_t t, Rng& rng);

// Dense window matrix W of shape (count*T, T): row w*T + t holds window w
// applied at frame t, with out-of-range taps replicated onto the edge
// frames. apply_windows computes the same map directly; stacked column
// w*D + d is window w on static dimension d.
Matrix build_window_matrix(std::int64_t t, const WindowSet& ws);
FrameSequence apply_windows(const FrameSequence& statics, const WindowSet& ws);

struct MlpgProblem {
  FrameSequence stacked_means;    // T x (D * count)
  std::vector<double> variances;  // per stacked dimension; empty = all ones
  WindowSet windows;
};

// Most-likely static trajectory: per static dimension solves the banded
// normal equations (W' S^-1 W) c = W' S^-1 m by banded Cholesky.
FrameSequence mlpg(const MlpgProblem& prob);

// Gradient of a scalar loss through mlpg: given dL/dc returns dL/dm.
FrameSequence mlpg_backward(const MlpgProblem& prob, const Matrix& dstatic);

// Zero-phase low-pass: linear-phase windowed-sinc FIR (Hamming), unit DC
// gain, edge-replication padding, output length = input length.
FrameSequence smooth_trajectory(const FrameSequence& traj, double cutoff_hz,
                                double frame_shift_s, int taps = 31);

// forward([context | noise]) -> stacked features -> mlpg -> statics.
FrameSequence generate(const NetworkParams& generator,
                       const FrameSequence& context,
                       const FrameSequence& noise, const WindowSet& ws,
                       std::span<const double> variances = {});

}  // namespace mmn
