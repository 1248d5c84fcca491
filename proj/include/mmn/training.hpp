#pragma once

#include <cstdint>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "mmn/dataio.hpp"
#include "mmn/generation.hpp"
#include "mmn/network.hpp"

namespace mmn {

struct TrainConfig {
  std::int64_t epochs = 100;
  std::int64_t chunk_length = 200;  // gram/solve cost is O(T^2)/O(T^3)
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  double lambda = 0.01;
  double jitter = 1e-8;
  std::int64_t bottleneck_layer = 0;  // 1-based; 0 = last hidden layer
  std::int64_t noise_dim = 3;
  std::vector<std::int64_t> baseline_hidden = {64, 64};
  std::vector<std::int64_t> generator_hidden = {64, 64};
  WindowSet windows = WindowSet::static_delta_deltadelta();
  // Independent noise realizations per step. The generated-generated loss
  // term is evaluated across distinct copies only (unbiased for the
  // population loss; see cmmd_multi) and more copies cut the gradient
  // variance of the moment matching.
  std::int64_t noise_copies = 4;
  bool loss_after_mlpg = false;    // experimental loss placement
  // When true, the input-side gram is computed over [x | n] instead of x
  // alone. The regularized inverse in G then weights noise-contrast modes
  // most, and with fresh noise each visit their optimum is a generator
  // that ignores its noise input; conditioning the kernel on x only keeps
  // the sampler stochastic.
  bool kernel_includes_noise = false;
  double smooth_cutoff_hz = 0.0;   // 0 disables target smoothing
  double frame_shift_s = 0.005;
  std::int64_t gram_cap = 512;     // largest materialized gram side

  void validate() const;
};

struct TrainRecord {
  std::int64_t step = 0;
  std::int64_t sequence = 0;
  double loss = 0.0;
  double term_yy = 0.0;
  double term_hh = 0.0;
  double term_yh = 0.0;
  double grad_norm = 0.0;
  double wall_ms = 0.0;
  std::uint64_t noise_checksum = 0;
};

// Per-step records, optionally mirrored to a JSONL file (one object per
// line, keys matching the TrainRecord fields).
class TrainLog {
 public:
  TrainLog() = default;
  explicit TrainLog(const std::string& path);

  void append(const TrainRecord& r);
  const std::vector<TrainRecord>& records() const { return records_; }

  static std::vector<TrainRecord> read(const std::string& path);

 private:
  std::vector<TrainRecord> records_;
  std::shared_ptr<std::ofstream> sink_;
};

// Normalization, optional target smoothing, and static+dynamic stacking
// applied to a raw dataset before any training stage. Values are
// re-quantized to f32 so the prepared dataset round-trips through files
// unchanged.
struct PreparedData {
  Dataset stacked;  // context: normalized; target: stacked normalized statics
  NormStats stats;
};
PreparedData prepare_training_data(const Dataset& raw, const TrainConfig& cfg);

// Same preparation against stats fitted elsewhere (e.g. loaded from file).
Dataset prepare_with_stats(const Dataset& raw, const NormStats& stats,
                           const TrainConfig& cfg);

// Stage 1: feed-forward baseline trained with MSE on (context -> stacked).
NetworkParams train_baseline(const Dataset& prepared, const TrainConfig& cfg,
                             TrainLog* log = nullptr);

// Stage 2: replace the context stream with hidden-layer activations.
struct BottleneckResult {
  Dataset dataset;
  bool degenerate = false;  // activations were identically zero
  std::int64_t layer = 0;   // resolved 1-based layer index
};
BottleneckResult extract_bottleneck_dataset(const NetworkParams& baseline,
                                            const Dataset& prepared,
                                            std::int64_t layer_index);

// Stage 3: conditional-MMD generator on [bottleneck | noise] inputs.
// Bandwidths follow the max-pair rule: the output side over the stacked
// targets, the input side over contexts with one seeded noise draw
// appended, both fixed before the loop.
NetworkParams train_generator(const Dataset& bottleneck_ds,
                              const TrainConfig& cfg,
                              TrainLog* log = nullptr);

}  // namespace mmn
