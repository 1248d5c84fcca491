#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mmn/matrix.hpp"
#include "mmn/rng.hpp"

namespace mmn {

// Feed-forward net: ReLU on hidden layers, identity on the output layer.
struct NetworkLayout {
  std::int64_t input_dim = 0;
  std::vector<std::int64_t> hidden_dims;
  std::int64_t output_dim = 0;

  void validate() const;  // throws InvalidArgument
  std::int64_t layer_count() const {
    return static_cast<std::int64_t>(hidden_dims.size()) + 1;
  }
  friend bool operator==(const NetworkLayout&, const NetworkLayout&) = default;
};

struct Layer {
  Matrix w;               // out x in
  std::vector<double> b;  // out
  friend bool operator==(const Layer&, const Layer&) = default;
};

struct NetworkParams {
  NetworkLayout layout;
  std::vector<Layer> layers;

  std::int64_t param_count() const;
  bool all_finite() const;
  friend bool operator==(const NetworkParams&, const NetworkParams&) = default;
};

enum class InitScheme { kHeUniform, kZeros };

// He-uniform weights (uniform in +-sqrt(6 / fan_in)), zero biases.
// Weight draws consume the rng in layer order, row-major within a layer.
NetworkParams init_network(const NetworkLayout& layout, Rng& rng,
                           InitScheme scheme = InitScheme::kHeUniform);

struct ForwardCache {
  // acts[0] is the input; acts[i] for i >= 1 is hidden layer i post-ReLU.
  std::vector<Matrix> acts;
  std::vector<Matrix> preacts;  // one per hidden layer
};

FrameSequence forward(const NetworkParams& p, const FrameSequence& x,
                      ForwardCache* cache = nullptr);

struct ParamGrads {
  std::vector<Matrix> dw;
  std::vector<std::vector<double>> db;
  double squared_norm() const;
};

// Gradients of the scalar loss whose output gradient is dy, with respect
// to all parameters; optionally also with respect to the input.
ParamGrads backward(const NetworkParams& p, const ForwardCache& cache,
                    const Matrix& dy, Matrix* dx = nullptr);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

struct AdamState {
  AdamConfig cfg;
  std::int64_t step = 0;
  std::vector<Matrix> mw, vw;
  std::vector<std::vector<double>> mb, vb;

  static AdamState init(const NetworkParams& p, const AdamConfig& cfg);
  friend bool operator==(const AdamState&, const AdamState&) = default;
};

// One bias-corrected Adam update, in place.
void adam_step(NetworkParams& p, const ParamGrads& g, AdamState& s);

// Post-ReLU activations of hidden layer `layer_index` (1-based).
FrameSequence hidden_activations(const NetworkParams& p,
                                 const FrameSequence& x,
                                 std::int64_t layer_index);

// Checkpoint file: magic "MMNC", version, layout, parameters as
// little-endian 64-bit floats in layer order (weights row-major, then
// bias), then an optional Adam state behind a presence flag.
void save_checkpoint(const NetworkParams& p, const AdamState* opt,
                     const std::string& path);

struct Checkpoint {
  NetworkParams params;
  std::optional<AdamState> opt;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace mmn
