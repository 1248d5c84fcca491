#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mmn/matrix.hpp"
#include "mmn/rng.hpp"

namespace mmn {

struct DatasetMeta {
  std::vector<std::string> names;  // stream names, [context, target]
  double frame_shift_s = 0.005;
  friend bool operator==(const DatasetMeta&, const DatasetMeta&) = default;
};

struct SequencePair {
  FrameSequence context;
  FrameSequence target;
  friend bool operator==(const SequencePair&, const SequencePair&) = default;
};

// Paired context/target sequences. Values are f32-representable by
// construction (file storage is f32); math on them runs in f64.
struct Dataset {
  std::vector<SequencePair> sequences;
  DatasetMeta meta;

  std::int64_t context_dim() const;
  std::int64_t target_dim() const;
  std::int64_t total_frames() const;
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Rounds every value through f32, matching what file storage would keep.
FrameSequence quantize_f32(const FrameSequence& m);

// "MMD1" binary format, little-endian: magic, version u32, n_sequences
// u32, D_x u32, D_y u32, frame_shift f64, name count u32 + length-prefixed
// UTF-8 names; per sequence: T u32, context f32 row-major, target f32
// row-major. Round-trips are bit-exact.
void write_dataset(const Dataset& ds, const std::string& path);
Dataset read_dataset(const std::string& path);

// Numeric CSVs with one frame per row; seq_lengths partitions the rows.
Dataset import_csv(const std::string& context_path,
                   const std::string& target_path,
                   std::span<const std::int64_t> seq_lengths);

struct StreamStats {
  std::vector<double> mean;
  std::vector<double> stdev;
  std::vector<std::int64_t> clamped_dims;  // degenerate dims forced to std 1
  friend bool operator==(const StreamStats&, const StreamStats&) = default;
};

struct NormStats {
  StreamStats context;
  StreamStats target;
  friend bool operator==(const NormStats&, const NormStats&) = default;
};

// Pooled per-dimension mean and (population) standard deviation.
NormStats fit_norm_stats(const Dataset& ds);
FrameSequence apply_norm(const FrameSequence& frames, const StreamStats& s);
FrameSequence invert_norm(const FrameSequence& frames, const StreamStats& s);
Dataset apply_norm(const Dataset& ds, const NormStats& stats);

// "MMST" stats file.
void write_norm_stats(const NormStats& stats, const std::string& path);
NormStats read_norm_stats(const std::string& path);

enum class OracleFamily {
  kConditionalGaussian,
  kConditionalBimodal,
  kHeteroscedastic,
};

enum class SpreadForm { kConstant, kTanhRamp, kAbsContext };

// Synthetic conditional distribution with closed-form per-frame moments,
// standing in for a real corpus. The context is a smooth phase walk:
//   x_t = context_amp * sin(theta_t),  theta_0 ~ U[-pi, pi),
//   theta_t = theta_{t-1} + context_step * zeta_t,
// optionally followed by a one-hot condition code held fixed per
// sequence. Targets follow
//   gaussian / heteroscedastic:  y_d = mu_d(x) + s(x) eps_d
//   bimodal:                     y_d = mu_d(x) + B off + s0 eps_d
// with
//   mu_d(x) = mu_amp sin(mu_freq x + mu_phase_step d) + mu_slope x
//             + code_shift k
//   s(x)    = s0                     (kConstant)
//           | s0 + s1 tanh(x)        (kTanhRamp)
//           | s0 |x|                 (kAbsContext)
// eps_d is a per-dimension AR(1) process with coefficient noise_ar and
// unit stationary variance, and the bimodal sign B is a symmetric Markov
// coin that flips with probability (1 - noise_ar) / 2 per frame. Both
// keep the per-frame conditional moments exact while making trajectories
// smooth in time, the regime the stacked static+dynamic pipeline is
// built for. The gaussian family draws eps from a standard normal; the
// heteroscedastic and bimodal families draw it uniform on
// (-sqrt(3), sqrt(3)) (unit variance, bounded), which keeps the max-pair
// bandwidth rule from being dominated by rare tail pairs.
struct OracleSpec {
  OracleFamily family = OracleFamily::kHeteroscedastic;
  std::int64_t target_dim = 2;
  std::int64_t code_count = 0;
  double context_amp = 2.2;
  double context_step = 0.25;
  double noise_ar = 0.8;
  double mu_amp = 0.4;
  double mu_freq = 1.5;
  double mu_slope = 0.25;
  double mu_phase_step = 0.8;
  double code_shift = 0.5;
  SpreadForm spread_form = SpreadForm::kTanhRamp;
  double s0 = 0.6;
  double s1 = 0.4;
  double bimodal_offset = 1.0;

  std::int64_t context_dim() const { return 1 + code_count; }
  void validate() const;
  static OracleSpec for_family(OracleFamily family, std::int64_t target_dim = 2);
};

struct OracleMoments {
  std::vector<double> mean;
  std::vector<double> variance;
  bool bimodal = false;
  double component_offset = 0.0;  // components sit at mean +- offset
  double component_sigma = 0.0;
};

// Closed-form conditional moments at one context frame.
OracleMoments oracle_conditional_moments(const OracleSpec& spec,
                                         std::span<const double> context);

// One target draw at a fixed context frame.
std::vector<double> oracle_draw(const OracleSpec& spec,
                                std::span<const double> context, Rng& rng);

// Builds a raw context frame [x, one-hot code] for evaluation grids.
std::vector<double> oracle_context_frame(const OracleSpec& spec, double x,
                                         std::int64_t code = 0);

// Seed-deterministic synthetic dataset; sequence s uses rng.derive(s).
Dataset synth_oracle_dataset(const OracleSpec& spec, std::int64_t n_seqs,
                             std::int64_t frames, Rng& rng);

}  // namespace mmn
