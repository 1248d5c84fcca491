#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mmn/dataio.hpp"
#include "mmn/generation.hpp"
#include "mmn/network.hpp"

namespace mmn {

// Biased squared MMD between two frame sets, with the bandwidth taken
// from the pooled data by the max-pair rule.
double two_sample_mmd(const FrameSequence& a, const FrameSequence& b);

// Draws denormalized static trajectories for a raw context sequence.
class Sampler {
 public:
  virtual ~Sampler() = default;
  virtual FrameSequence draw(const FrameSequence& raw_context,
                             Rng& rng) const = 0;
  virtual bool stochastic() const = 0;
};

// MSE baseline: context -> stacked prediction -> mlpg. Deterministic.
class ConvSampler : public Sampler {
 public:
  ConvSampler(NetworkParams baseline, NormStats stats, WindowSet windows);
  FrameSequence draw(const FrameSequence& raw_context, Rng& rng) const override;
  bool stochastic() const override { return false; }

 private:
  NetworkParams baseline_;
  NormStats stats_;
  WindowSet windows_;
};

// Moment-matching generator: context -> bottleneck -> [b | n] -> stacked
// -> mlpg. zero_noise selects the deterministic system.
class GenSampler : public Sampler {
 public:
  GenSampler(NetworkParams baseline, NetworkParams generator, NormStats stats,
             WindowSet windows, std::int64_t bottleneck_layer,
             std::int64_t noise_dim, bool zero_noise);
  FrameSequence draw(const FrameSequence& raw_context, Rng& rng) const override;
  bool stochastic() const override { return !noise_.zero; }

 private:
  NetworkParams baseline_;
  NetworkParams generator_;
  NormStats stats_;
  WindowSet windows_;
  std::int64_t layer_;
  NoiseSpec noise_;
};

// Draws straight from the oracle's conditional distribution; calibrates
// the evaluation harness.
class OracleSampler : public Sampler {
 public:
  explicit OracleSampler(OracleSpec spec);
  FrameSequence draw(const FrameSequence& raw_context, Rng& rng) const override;
  bool stochastic() const override { return true; }

 private:
  OracleSpec spec_;
};

struct MomentErrorRow {
  double x = 0.0;
  std::vector<double> sample_mean;
  std::vector<double> sample_std;
  std::vector<double> oracle_mean;
  std::vector<double> oracle_std;
  double mean_err = 0.0;           // ||sample mean - mu(x)|| in normalized units
  std::vector<double> std_ratio;   // per-dim sample std / oracle std
};

// For each grid context: n_draws single-frame generations with fresh
// noise, compared against the closed-form conditional moments. Errors are
// measured in the normalized target space defined by `stats`.
std::vector<MomentErrorRow> conditional_moment_error(
    const Sampler& sampler, const OracleSpec& spec, const NormStats& stats,
    std::span<const double> context_grid, std::int64_t n_draws, Rng& rng);

// Nine equally spaced contexts in [-2, 2].
std::vector<double> default_context_grid();

// Mean over frames and dimensions of the across-realization standard
// deviation of n_realizations independently drawn trajectories.
double variation_score(const Sampler& sampler,
                       const FrameSequence& raw_context,
                       std::int64_t n_realizations, Rng& rng);

struct ReportEntry {
  std::string name;
  std::string system;
  double value = 0.0;
  std::optional<double> tolerance;
  std::optional<bool> pass;
};

struct MomentTable {
  std::string system;
  std::vector<MomentErrorRow> rows;
};

struct EvalReport {
  std::uint64_t seed = 0;
  std::string checkpoint_hash;
  std::string config_hash;
  std::vector<ReportEntry> entries;
  std::vector<MomentTable> tables;
};

enum class ReportFormat { kText, kStructured };

// Deterministic serialization; the structured (JSON) form round-trips.
void emit_report(const EvalReport& report, const std::string& path,
                 ReportFormat format);
EvalReport read_report(const std::string& path);

// FNV-1a 64 over the file's bytes, as fixed-width hex.
std::string file_hash_hex(const std::string& path);

}  // namespace mmn
