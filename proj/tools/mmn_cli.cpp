// Command-line pipeline: synthetic data, the two training stages,
// trajectory sampling, and objective evaluation.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mmn/dataio.hpp"
#include "mmn/error.hpp"
#include "mmn/evaluation.hpp"
#include "mmn/generation.hpp"
#include "mmn/kernels.hpp"
#include "mmn/losses.hpp"
#include "mmn/network.hpp"
#include "mmn/rng.hpp"
#include "mmn/threading.hpp"
#include "mmn/training.hpp"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

std::uint64_t fnv1a_str(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hash_hex(const std::string& s) {
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx",
                static_cast<unsigned long long>(fnv1a_str(s)));
  return out;
}

// Values from --config apply only where the flag was not given on the
// command line; flags win.
json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream is(path);
  if (!is) throw mmn::IoError("cannot open config: " + path);
  json j = json::parse(is, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw mmn::ParseError("config is not a JSON object: " + path);
  return j;
}

template <typename T>
void cfg_override(const json& cfg, CLI::App* cmd, const std::string& flag,
                  const std::string& key, T& value) {
  if (cfg.contains(key) && cmd->count(flag) == 0) {
    try {
      value = cfg.at(key).get<T>();
    } catch (const json::exception&) {
      throw mmn::ParseError("config key '" + key + "' has the wrong type");
    }
  }
}

void print_resolved(const std::string& sub, const json& resolved) {
  json out{{"subcommand", sub}, {"settings", resolved}};
  std::cout << out.dump() << std::endl;
}

mmn::OracleFamily parse_family(const std::string& name) {
  if (name == "heteroscedastic") return mmn::OracleFamily::kHeteroscedastic;
  if (name == "gaussian") return mmn::OracleFamily::kConditionalGaussian;
  if (name == "bimodal") return mmn::OracleFamily::kConditionalBimodal;
  throw mmn::InvalidArgument("unknown oracle family: " + name);
}

mmn::SpreadForm parse_spread(const std::string& name) {
  if (name == "constant") return mmn::SpreadForm::kConstant;
  if (name == "tanh") return mmn::SpreadForm::kTanhRamp;
  if (name == "abs") return mmn::SpreadForm::kAbsContext;
  throw mmn::InvalidArgument("unknown spread form: " + name);
}

// Oracle-spec flags shared by gen-data and eval.
struct OracleOptions {
  std::string family = "heteroscedastic";
  std::int64_t target_dim = 2;
  std::int64_t codes = 0;
  double context_amp = 2.2;
  double context_step = 0.25;
  double noise_ar = 0.8;
  std::string spread;  // empty = family default
  double s0 = -1.0;    // negative = family default
  double s1 = -1.0;
  double bimodal_offset = -1.0;
  double mu_amp = 0.4, mu_freq = 1.5, mu_slope = 0.25, mu_phase_step = 0.8;
  double code_shift = 0.5;

  void add_flags(CLI::App* cmd) {
    cmd->add_option("--family", family,
                    "oracle family: heteroscedastic|gaussian|bimodal")
        ->check(CLI::IsMember({"heteroscedastic", "gaussian", "bimodal"}));
    cmd->add_option("--target-dim", target_dim, "target dimensions")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--codes", codes, "one-hot condition code count")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--context-amp", context_amp, "context walk amplitude");
    cmd->add_option("--context-step", context_step, "context phase step");
    cmd->add_option("--noise-ar", noise_ar,
                    "target noise AR(1) coefficient (temporal smoothness)");
    cmd->add_option("--spread", spread, "spread form: constant|tanh|abs")
        ->check(CLI::IsMember({"constant", "tanh", "abs"}));
    cmd->add_option("--s0", s0, "spread parameter s0");
    cmd->add_option("--s1", s1, "spread parameter s1 (tanh ramp)");
    cmd->add_option("--bimodal-offset", bimodal_offset,
                    "bimodal component offset");
    cmd->add_option("--mu-amp", mu_amp, "mean sine amplitude");
    cmd->add_option("--mu-freq", mu_freq, "mean sine frequency");
    cmd->add_option("--mu-slope", mu_slope, "mean linear slope");
    cmd->add_option("--mu-phase-step", mu_phase_step,
                    "mean per-dimension phase step");
    cmd->add_option("--code-shift", code_shift, "per-code mean shift");
  }

  mmn::OracleSpec build() const {
    auto spec =
        mmn::OracleSpec::for_family(parse_family(family), target_dim);
    spec.code_count = codes;
    spec.context_amp = context_amp;
    spec.context_step = context_step;
    spec.noise_ar = noise_ar;
    if (!spread.empty()) spec.spread_form = parse_spread(spread);
    if (s0 >= 0.0) spec.s0 = s0;
    if (s1 >= 0.0) spec.s1 = s1;
    if (bimodal_offset >= 0.0) spec.bimodal_offset = bimodal_offset;
    spec.mu_amp = mu_amp;
    spec.mu_freq = mu_freq;
    spec.mu_slope = mu_slope;
    spec.mu_phase_step = mu_phase_step;
    spec.code_shift = code_shift;
    spec.validate();
    return spec;
  }

  json to_json() const {
    return {{"family", family},         {"target_dim", target_dim},
            {"codes", codes},           {"context_amp", context_amp},
            {"context_step", context_step}, {"noise_ar", noise_ar},
            {"spread", spread},         {"s0", s0},
            {"s1", s1},                 {"bimodal_offset", bimodal_offset},
            {"mu_amp", mu_amp},         {"mu_freq", mu_freq},
            {"mu_slope", mu_slope},     {"mu_phase_step", mu_phase_step},
            {"code_shift", code_shift}};
  }
};

void write_trajectory_csv(const mmn::Matrix& traj, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw mmn::IoError("cannot open for writing: " + path);
  char buf[64];
  for (std::int64_t t = 0; t < traj.rows(); ++t) {
    os << t;
    for (std::int64_t j = 0; j < traj.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", traj(t, j));
      os << ',' << buf;
    }
    os << '\n';
  }
  if (!os) throw mmn::IoError("write failed: " + path);
}

std::int64_t noise_dim_of(const mmn::NetworkParams& generator,
                          const mmn::NetworkParams& baseline,
                          std::int64_t layer) {
  const auto n_hidden =
      static_cast<std::int64_t>(baseline.layout.hidden_dims.size());
  const std::int64_t resolved = (layer == 0) ? n_hidden : layer;
  if (resolved < 1 || resolved > n_hidden)
    throw mmn::LayerOutOfRange("bottleneck layer out of range");
  const std::int64_t width =
      baseline.layout.hidden_dims[static_cast<std::size_t>(resolved - 1)];
  const std::int64_t nd = generator.layout.input_dim - width;
  if (nd < 1)
    throw mmn::DimensionMismatch(
        "generator input dim does not leave room for noise after a " +
        std::to_string(width) + "-wide bottleneck");
  return nd;
}

int cmd_gen_data(CLI::App* cmd, const json& cfg) {
  static OracleOptions oracle;
  static std::int64_t seqs = 64;
  static std::int64_t frames = 400;
  static std::uint64_t seed = 7;
  static double frame_shift = 0.005;
  static std::string out;
  if (!cmd->parsed()) {
    oracle.add_flags(cmd);
    cmd->add_option("--seqs", seqs, "sequence count")->check(CLI::PositiveNumber);
    cmd->add_option("--frames", frames, "frames per sequence")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--seed", seed, "dataset seed");
    cmd->add_option("--frame-shift", frame_shift, "frame shift in seconds");
    cmd->add_option("--out", out, "output dataset path")->required();
    return 0;
  }
  cfg_override(cfg, cmd, "--seqs", "seqs", seqs);
  cfg_override(cfg, cmd, "--frames", "frames", frames);
  cfg_override(cfg, cmd, "--seed", "seed", seed);

  json resolved = oracle.to_json();
  resolved["seqs"] = seqs;
  resolved["frames"] = frames;
  resolved["seed"] = seed;
  resolved["frame_shift"] = frame_shift;
  resolved["out"] = out;
  print_resolved("gen-data", resolved);

  const auto spec = oracle.build();
  mmn::Rng rng(seed);
  auto ds = mmn::synth_oracle_dataset(spec, seqs, frames, rng);
  ds.meta.frame_shift_s = frame_shift;
  mmn::write_dataset(ds, out);
  std::cout << "wrote " << ds.sequences.size() << " sequences ("
            << ds.total_frames() << " frames, D_x=" << ds.context_dim()
            << ", D_y=" << ds.target_dim() << ") to " << out << std::endl;
  return kExitOk;
}

mmn::TrainConfig train_config_from(
    CLI::App* cmd, const json& cfg, std::uint64_t seed, std::int64_t epochs,
    std::int64_t chunk, double lr, double lambda, std::int64_t noise_dim,
    const std::vector<std::int64_t>& hidden, bool baseline_side,
    double smooth_cutoff, bool loss_after_mlpg) {
  (void)cmd;
  (void)cfg;
  mmn::TrainConfig tc;
  tc.seed = seed;
  tc.epochs = epochs;
  tc.chunk_length = chunk;
  tc.learning_rate = lr;
  tc.lambda = lambda;
  tc.noise_dim = noise_dim;
  if (baseline_side)
    tc.baseline_hidden = hidden;
  else
    tc.generator_hidden = hidden;
  tc.smooth_cutoff_hz = smooth_cutoff;
  tc.loss_after_mlpg = loss_after_mlpg;
  tc.validate();
  return tc;
}

int cmd_train_baseline(CLI::App* cmd, const json& cfg) {
  static std::string data, out, stats_out, log_path;
  static std::int64_t epochs = 60;
  static std::int64_t chunk = 200;
  static double lr = 1e-3;
  static std::vector<std::int64_t> hidden = {64, 64};
  static double smooth_cutoff = 0.0;
  static std::uint64_t seed = 0;
  if (!cmd->parsed()) {
    cmd->add_option("--data", data, "training dataset (.mmd)")->required();
    cmd->add_option("--out", out, "output checkpoint (.mmnc)")->required();
    cmd->add_option("--stats-out", stats_out, "output norm stats (.mmst)")
        ->required();
    cmd->add_option("--epochs", epochs, "training epochs")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--chunk", chunk, "max frames per chunk")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--lr", lr, "Adam learning rate");
    cmd->add_option("--hidden", hidden, "hidden layer widths")
        ->delimiter(',');
    cmd->add_option("--smooth-cutoff", smooth_cutoff,
                    "target smoothing cutoff in Hz (0 = off)");
    cmd->add_option("--seed", seed, "training seed");
    cmd->add_option("--log", log_path, "JSONL training log path");
    return 0;
  }
  cfg_override(cfg, cmd, "--epochs", "baseline_epochs", epochs);
  cfg_override(cfg, cmd, "--chunk", "chunk_length", chunk);
  cfg_override(cfg, cmd, "--lr", "baseline_lr", lr);
  cfg_override(cfg, cmd, "--hidden", "baseline_hidden", hidden);
  cfg_override(cfg, cmd, "--smooth-cutoff", "smooth_cutoff_hz", smooth_cutoff);
  cfg_override(cfg, cmd, "--seed", "seed", seed);

  json resolved{{"data", data},       {"out", out},
                {"stats_out", stats_out}, {"epochs", epochs},
                {"chunk", chunk},     {"lr", lr},
                {"hidden", hidden},   {"smooth_cutoff", smooth_cutoff},
                {"seed", seed},       {"log", log_path}};
  print_resolved("train-baseline", resolved);

  const auto raw = mmn::read_dataset(data);
  auto tc = train_config_from(cmd, cfg, seed, epochs, chunk, lr, 0.01, 3,
                              hidden, true, smooth_cutoff, false);
  const auto prepared = mmn::prepare_training_data(raw, tc);
  for (auto dim : prepared.stats.context.clamped_dims)
    std::cerr << "warning: context dim " << dim
              << " is constant; std clamped to 1" << std::endl;
  for (auto dim : prepared.stats.target.clamped_dims)
    std::cerr << "warning: target dim " << dim
              << " is constant; std clamped to 1" << std::endl;
  mmn::TrainLog log = log_path.empty() ? mmn::TrainLog() : mmn::TrainLog(log_path);
  const auto params = mmn::train_baseline(prepared.stacked, tc, &log);
  mmn::save_checkpoint(params, nullptr, out);
  mmn::write_norm_stats(prepared.stats, stats_out);
  if (!log.records().empty())
    std::cout << "final baseline loss: " << log.records().back().loss
              << std::endl;
  std::cout << "wrote " << out << " and " << stats_out << std::endl;
  return kExitOk;
}

int cmd_extract_bottleneck(CLI::App* cmd, const json& cfg) {
  static std::string data, baseline, stats_path, out;
  static std::int64_t layer = 0;
  static double smooth_cutoff = 0.0;
  if (!cmd->parsed()) {
    cmd->add_option("--data", data, "raw dataset (.mmd)")->required();
    cmd->add_option("--baseline", baseline, "baseline checkpoint")->required();
    cmd->add_option("--stats", stats_path, "norm stats (.mmst)")->required();
    cmd->add_option("--layer", layer, "1-based hidden layer (0 = last)")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--smooth-cutoff", smooth_cutoff,
                    "must match the baseline run");
    cmd->add_option("--out", out, "output bottleneck dataset")->required();
    return 0;
  }
  cfg_override(cfg, cmd, "--layer", "bottleneck_layer", layer);
  cfg_override(cfg, cmd, "--smooth-cutoff", "smooth_cutoff_hz", smooth_cutoff);

  json resolved{{"data", data},
                {"baseline", baseline},
                {"stats", stats_path},
                {"layer", layer},
                {"smooth_cutoff", smooth_cutoff},
                {"out", out}};
  print_resolved("extract-bottleneck", resolved);

  const auto raw = mmn::read_dataset(data);
  const auto stats = mmn::read_norm_stats(stats_path);
  mmn::TrainConfig tc;
  tc.smooth_cutoff_hz = smooth_cutoff;
  const auto prepared = mmn::prepare_with_stats(raw, stats, tc);
  const auto ck = mmn::load_checkpoint(baseline);
  const auto res = mmn::extract_bottleneck_dataset(ck.params, prepared, layer);
  if (res.degenerate)
    std::cerr << "warning: bottleneck activations are identically zero"
              << std::endl;
  mmn::write_dataset(res.dataset, out);
  std::cout << "wrote bottleneck dataset (layer " << res.layer << ", D_x="
            << res.dataset.context_dim() << ") to " << out << std::endl;
  return kExitOk;
}

int cmd_train_generator(CLI::App* cmd, const json& cfg) {
  static std::string data, out, log_path;
  static std::int64_t epochs = 100;
  static std::int64_t chunk = 200;
  static double lr = 1e-3;
  static double lambda = 0.01;
  static double jitter = 1e-8;
  static std::int64_t noise_dim = 3;
  static std::vector<std::int64_t> hidden = {64, 64};
  static std::uint64_t seed = 0;
  static bool loss_after_mlpg = false;
  if (!cmd->parsed()) {
    cmd->add_option("--data", data, "bottleneck dataset (.mmd)")->required();
    cmd->add_option("--out", out, "output checkpoint (.mmnc)")->required();
    cmd->add_option("--epochs", epochs, "training epochs")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--chunk", chunk, "max frames per chunk")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--lr", lr, "Adam learning rate");
    cmd->add_option("--lambda", lambda, "gram regularization coefficient")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--jitter", jitter, "gram jitter retry boost");
    cmd->add_option("--noise-dim", noise_dim, "prior noise dimensions")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--hidden", hidden, "hidden layer widths")
        ->delimiter(',');
    cmd->add_option("--seed", seed, "training seed");
    cmd->add_option("--log", log_path, "JSONL training log path");
    cmd->add_flag("--loss-after-mlpg", loss_after_mlpg,
                  "experimental: match static trajectories instead of "
                  "stacked features");
    return 0;
  }
  cfg_override(cfg, cmd, "--epochs", "generator_epochs", epochs);
  cfg_override(cfg, cmd, "--chunk", "chunk_length", chunk);
  cfg_override(cfg, cmd, "--lr", "generator_lr", lr);
  cfg_override(cfg, cmd, "--lambda", "lambda", lambda);
  cfg_override(cfg, cmd, "--noise-dim", "noise_dim", noise_dim);
  cfg_override(cfg, cmd, "--hidden", "generator_hidden", hidden);
  cfg_override(cfg, cmd, "--seed", "seed", seed);

  json resolved{{"data", data},     {"out", out},
                {"epochs", epochs}, {"chunk", chunk},
                {"lr", lr},         {"lambda", lambda},
                {"jitter", jitter}, {"noise_dim", noise_dim},
                {"hidden", hidden}, {"seed", seed},
                {"log", log_path},  {"loss_after_mlpg", loss_after_mlpg}};
  print_resolved("train-generator", resolved);

  const auto bds = mmn::read_dataset(data);
  auto tc = train_config_from(cmd, cfg, seed, epochs, chunk, lr, lambda,
                              noise_dim, hidden, false, 0.0, loss_after_mlpg);
  tc.jitter = jitter;
  mmn::TrainLog log = log_path.empty() ? mmn::TrainLog() : mmn::TrainLog(log_path);
  const auto params = mmn::train_generator(bds, tc, &log);
  mmn::save_checkpoint(params, nullptr, out);
  if (!log.records().empty())
    std::cout << "final generator loss: " << log.records().back().loss
              << std::endl;
  std::cout << "wrote " << out << std::endl;
  return kExitOk;
}

int cmd_sample(CLI::App* cmd, const json& cfg) {
  static std::string data, baseline, generator, stats_path, out_dir;
  static std::string system = "pro";
  static std::int64_t realizations = 5;
  static std::int64_t layer = 0;
  static std::uint64_t seed = 0;
  static bool deterministic = false;
  if (!cmd->parsed()) {
    cmd->add_option("--data", data, "context dataset (.mmd)")->required();
    cmd->add_option("--baseline", baseline, "baseline checkpoint")->required();
    cmd->add_option("--generator", generator,
                    "generator checkpoint (pro system)");
    cmd->add_option("--stats", stats_path, "norm stats (.mmst)")->required();
    cmd->add_option("--system", system, "pro|conv")
        ->check(CLI::IsMember({"pro", "conv"}));
    cmd->add_option("--realizations", realizations, "trajectories per sequence")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--layer", layer, "bottleneck layer (0 = last)");
    cmd->add_option("--seed", seed, "sampling seed");
    cmd->add_flag("--deterministic", deterministic,
                  "fix the prior noise to zero");
    cmd->add_option("--out", out_dir, "output directory")->required();
    return 0;
  }
  cfg_override(cfg, cmd, "--realizations", "realizations", realizations);
  cfg_override(cfg, cmd, "--seed", "seed", seed);

  json resolved{{"data", data},
                {"baseline", baseline},
                {"generator", generator},
                {"stats", stats_path},
                {"system", system},
                {"realizations", realizations},
                {"layer", layer},
                {"seed", seed},
                {"deterministic", deterministic},
                {"out", out_dir}};
  print_resolved("sample", resolved);

  const auto ds = mmn::read_dataset(data);
  const auto stats = mmn::read_norm_stats(stats_path);
  const auto base_ck = mmn::load_checkpoint(baseline);
  const auto windows = mmn::WindowSet::static_delta_deltadelta();

  std::unique_ptr<mmn::Sampler> sampler;
  if (system == "conv") {
    sampler = std::make_unique<mmn::ConvSampler>(base_ck.params, stats, windows);
  } else {
    if (generator.empty())
      throw mmn::InvalidArgument("--generator is required for the pro system");
    const auto gen_ck = mmn::load_checkpoint(generator);
    const auto nd = noise_dim_of(gen_ck.params, base_ck.params, layer);
    sampler = std::make_unique<mmn::GenSampler>(base_ck.params, gen_ck.params,
                                                stats, windows, layer, nd,
                                                deterministic);
  }

  std::filesystem::create_directories(out_dir);
  const mmn::Rng root(seed);
  char name[64];
  for (std::size_t s = 0; s < ds.sequences.size(); ++s) {
    for (std::int64_t r = 0; r < realizations; ++r) {
      mmn::Rng rng = root.derive(s).derive(static_cast<std::uint64_t>(r));
      const auto traj = sampler->draw(ds.sequences[s].context, rng);
      std::snprintf(name, sizeof(name), "seq%04zu_r%02lld.csv", s,
                    static_cast<long long>(r));
      write_trajectory_csv(traj,
                           (std::filesystem::path(out_dir) / name).string());
    }
  }
  std::cout << "wrote " << ds.sequences.size() * realizations
            << " trajectories to " << out_dir << std::endl;
  return kExitOk;
}

int cmd_eval(CLI::App* cmd, const json& cfg) {
  static OracleOptions oracle;
  static std::string data, baseline, generator, stats_path, out_path;
  static std::string format = "text";
  static std::int64_t n_draws = 1000;
  static std::int64_t layer = 0;
  static std::int64_t variation_realizations = 5;
  static std::int64_t mmd_draws = 2000;
  static std::int64_t mmd_perms = 100;
  static double mmd_x = 0.0;
  static double grid_lo = -2.0, grid_hi = 2.0;
  static std::int64_t grid_points = 9;
  static std::uint64_t seed = 0;
  if (!cmd->parsed()) {
    oracle.add_flags(cmd);
    cmd->add_option("--data", data, "held-out dataset (.mmd)")->required();
    cmd->add_option("--baseline", baseline, "baseline checkpoint")->required();
    cmd->add_option("--generator", generator, "generator checkpoint")
        ->required();
    cmd->add_option("--stats", stats_path, "norm stats (.mmst)")->required();
    cmd->add_option("--n-draws", n_draws, "draws per context bin")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--layer", layer, "bottleneck layer (0 = last)");
    cmd->add_option("--variation-realizations", variation_realizations,
                    "realizations for the variation score")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--mmd-draws", mmd_draws, "draw count for two-sample MMD")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--mmd-perms", mmd_perms, "oracle-split permutations")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--mmd-x", mmd_x, "fixed context for two-sample MMD");
    cmd->add_option("--grid-lo", grid_lo, "context grid lower bound");
    cmd->add_option("--grid-hi", grid_hi, "context grid upper bound");
    cmd->add_option("--grid-points", grid_points, "context grid size")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--seed", seed, "evaluation seed");
    cmd->add_option("--out", out_path, "report path")->required();
    cmd->add_option("--format", format, "text|json")
        ->check(CLI::IsMember({"text", "json"}));
    return 0;
  }
  cfg_override(cfg, cmd, "--n-draws", "n_draws", n_draws);
  cfg_override(cfg, cmd, "--seed", "seed", seed);

  json resolved = oracle.to_json();
  resolved["data"] = data;
  resolved["baseline"] = baseline;
  resolved["generator"] = generator;
  resolved["stats"] = stats_path;
  resolved["n_draws"] = n_draws;
  resolved["layer"] = layer;
  resolved["variation_realizations"] = variation_realizations;
  resolved["mmd_draws"] = mmd_draws;
  resolved["mmd_perms"] = mmd_perms;
  resolved["mmd_x"] = mmd_x;
  resolved["grid"] = {grid_lo, grid_hi, grid_points};
  resolved["seed"] = seed;
  resolved["out"] = out_path;
  resolved["format"] = format;
  print_resolved("eval", resolved);

  const auto spec = oracle.build();
  const auto ds = mmn::read_dataset(data);
  const auto stats = mmn::read_norm_stats(stats_path);
  const auto base_ck = mmn::load_checkpoint(baseline);
  const auto gen_ck = mmn::load_checkpoint(generator);
  const auto windows = mmn::WindowSet::static_delta_deltadelta();
  const auto nd = noise_dim_of(gen_ck.params, base_ck.params, layer);

  const mmn::ConvSampler conv(base_ck.params, stats, windows);
  const mmn::GenSampler pro_rand(base_ck.params, gen_ck.params, stats, windows,
                                 layer, nd, false);
  const mmn::GenSampler pro_fixed(base_ck.params, gen_ck.params, stats,
                                  windows, layer, nd, true);

  std::vector<double> grid;
  for (std::int64_t i = 0; i < grid_points; ++i)
    grid.push_back(grid_points == 1
                       ? grid_lo
                       : grid_lo + (grid_hi - grid_lo) *
                                       static_cast<double>(i) /
                                       static_cast<double>(grid_points - 1));

  mmn::EvalReport report;
  report.seed = seed;
  report.checkpoint_hash = mmn::file_hash_hex(generator);
  report.config_hash = hash_hex(resolved.dump());

  const mmn::Rng root(seed);
  mmn::Rng moment_rng = root.derive(1);
  struct SystemRef {
    const char* name;
    const mmn::Sampler* sampler;
  };
  const SystemRef systems[] = {{"conv", &conv},
                               {"pro_with_rand", &pro_rand},
                               {"pro_without_rand", &pro_fixed}};
  for (const auto& sys : systems) {
    auto rows = mmn::conditional_moment_error(*sys.sampler, spec, stats, grid,
                                              n_draws, moment_rng);
    double worst_mean = 0.0, mean_sum = 0.0;
    for (const auto& r : rows) {
      worst_mean = std::max(worst_mean, r.mean_err);
      mean_sum += r.mean_err;
    }
    report.entries.push_back({"moment_mean_err_worst", sys.name, worst_mean,
                              std::nullopt, std::nullopt});
    report.entries.push_back({"moment_mean_err_avg", sys.name,
                              mean_sum / static_cast<double>(rows.size()),
                              std::nullopt, std::nullopt});
    report.tables.push_back({sys.name, std::move(rows)});
  }

  // Variation over repeated renditions of the first held-out sequence.
  mmn::Rng var_rng = root.derive(2);
  if (!ds.sequences.empty()) {
    const auto& ctx = ds.sequences.front().context;
    for (const auto& sys : systems)
      report.entries.push_back(
          {"variation_score", sys.name,
           mmn::variation_score(*sys.sampler, ctx, variation_realizations,
                                var_rng),
           std::nullopt, std::nullopt});
  }

  // Two-sample MMD at a fixed context against held-out oracle draws, with
  // an oracle-vs-oracle permutation null.
  mmn::Rng mmd_rng = root.derive(3);
  const mmn::OracleSampler oracle_sampler(spec);
  const auto ctx_vec = mmn::oracle_context_frame(spec, mmd_x);
  mmn::FrameSequence ctx1(1, spec.context_dim());
  for (std::int64_t j = 0; j < spec.context_dim(); ++j)
    ctx1(0, j) = ctx_vec[static_cast<std::size_t>(j)];
  auto draw_set = [&](const mmn::Sampler& s, std::int64_t n, mmn::Rng& rng) {
    mmn::Matrix out(n, spec.target_dim);
    for (std::int64_t i = 0; i < n; ++i) {
      const auto d = s.draw(ctx1, rng);
      for (std::int64_t j = 0; j < spec.target_dim; ++j) out(i, j) = d(0, j);
    }
    return out;
  };
  const auto gen_set = draw_set(pro_rand, mmd_draws, mmd_rng);
  const auto conv_set = draw_set(conv, mmd_draws, mmd_rng);
  const auto oracle_ref = draw_set(oracle_sampler, mmd_draws, mmd_rng);
  const double mmd_gen = mmn::two_sample_mmd(gen_set, oracle_ref);
  const double mmd_conv = mmn::two_sample_mmd(conv_set, oracle_ref);

  auto pool = draw_set(oracle_sampler, 2 * mmd_draws, mmd_rng);
  std::vector<std::int64_t> idx(static_cast<std::size_t>(pool.rows()));
  for (std::size_t i = 0; i < idx.size(); ++i)
    idx[i] = static_cast<std::int64_t>(i);
  std::vector<double> null_stats;
  for (std::int64_t p = 0; p < mmd_perms; ++p) {
    for (std::size_t i = idx.size(); i > 1; --i)
      std::swap(idx[i - 1], idx[mmd_rng.next_below(i)]);
    mmn::Matrix a(mmd_draws, spec.target_dim), b(mmd_draws, spec.target_dim);
    for (std::int64_t i = 0; i < mmd_draws; ++i)
      for (std::int64_t j = 0; j < spec.target_dim; ++j) {
        a(i, j) = pool(idx[static_cast<std::size_t>(i)], j);
        b(i, j) = pool(idx[static_cast<std::size_t>(mmd_draws + i)], j);
      }
    null_stats.push_back(mmn::two_sample_mmd(a, b));
  }
  std::sort(null_stats.begin(), null_stats.end());
  const double null_p95 =
      null_stats[static_cast<std::size_t>(0.95 * (null_stats.size() - 1))];

  report.entries.push_back({"two_sample_mmd", "pro_with_rand", mmd_gen,
                            null_p95, mmd_gen <= null_p95});
  report.entries.push_back({"two_sample_mmd", "conv", mmd_conv, std::nullopt,
                            std::nullopt});
  report.entries.push_back({"two_sample_mmd_null_p95", "oracle", null_p95,
                            std::nullopt, std::nullopt});

  mmn::emit_report(report, out_path,
                   format == "json" ? mmn::ReportFormat::kStructured
                                    : mmn::ReportFormat::kText);
  std::cout << "wrote report to " << out_path << std::endl;
  return kExitOk;
}

int cmd_inspect(CLI::App* cmd, const json& cfg) {
  (void)cfg;
  static std::string path;
  if (!cmd->parsed()) {
    cmd->add_option("path", path, "file to inspect")->required();
    return 0;
  }
  print_resolved("inspect", json{{"path", path}});
  std::ifstream is(path, std::ios::binary);
  if (!is) throw mmn::IoError("cannot open for reading: " + path);
  char magic[4] = {0, 0, 0, 0};
  is.read(magic, 4);
  is.close();
  const std::string tag(magic, 4);
  std::cout << "hash: " << mmn::file_hash_hex(path) << "\n";
  if (tag == "MMD1") {
    const auto ds = mmn::read_dataset(path);
    std::cout << "dataset: " << ds.sequences.size() << " sequences, "
              << ds.total_frames() << " frames, D_x=" << ds.context_dim()
              << ", D_y=" << ds.target_dim()
              << ", frame_shift=" << ds.meta.frame_shift_s << "s\n";
  } else if (tag == "MMNC") {
    const auto ck = mmn::load_checkpoint(path);
    std::cout << "checkpoint: input=" << ck.params.layout.input_dim
              << " hidden=[";
    for (std::size_t i = 0; i < ck.params.layout.hidden_dims.size(); ++i)
      std::cout << (i ? "," : "") << ck.params.layout.hidden_dims[i];
    std::cout << "] output=" << ck.params.layout.output_dim
              << " params=" << ck.params.param_count()
              << " adam=" << (ck.opt ? "yes" : "no") << "\n";
  } else if (tag == "MMST") {
    const auto stats = mmn::read_norm_stats(path);
    std::cout << "norm stats: D_x=" << stats.context.mean.size()
              << " D_y=" << stats.target.mean.size() << "\n";
  } else {
    std::cout << "unrecognized file type\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"moment-matching sequence generation pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  int threads = 1;
  std::string log_level = "info";
  app.add_option("--config", config_path, "JSON config file; flags override");
  app.add_option("--threads", threads, "worker threads for row-parallel math")
      ->check(CLI::PositiveNumber);
  app.add_option("--log-level", log_level, "quiet|info|debug")
      ->check(CLI::IsMember({"quiet", "info", "debug"}));

  struct SubEntry {
    const char* name;
    const char* help;
    int (*fn)(CLI::App*, const json&);
    CLI::App* cmd;
  };
  SubEntry subs[] = {
      {"gen-data", "synthesize an oracle dataset", cmd_gen_data, nullptr},
      {"train-baseline", "stage 1: MSE baseline", cmd_train_baseline, nullptr},
      {"extract-bottleneck", "stage 2: bottleneck features",
       cmd_extract_bottleneck, nullptr},
      {"train-generator", "stage 3: conditional-MMD generator",
       cmd_train_generator, nullptr},
      {"sample", "draw trajectories from a trained pipeline", cmd_sample,
       nullptr},
      {"eval", "objective evaluation against the oracle", cmd_eval, nullptr},
      {"inspect", "describe a dataset/checkpoint/stats file", cmd_inspect,
       nullptr},
  };
  for (auto& s : subs) {
    s.cmd = app.add_subcommand(s.name, s.help);
    (void)s.fn(s.cmd, json::object());  // registers flags only
  }

  try {
    app.parse(argc, argv);
    const json cfg = load_config(config_path);
    mmn::set_thread_count(threads);
    for (auto& s : subs)
      if (s.cmd->parsed()) return s.fn(s.cmd, cfg);
    return kExitUsage;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitUsage;
  } catch (const mmn::NotPositiveDefinite& e) {
    std::cerr << "numerical error: " << e.what() << std::endl;
    return kExitNumeric;
  } catch (const mmn::NonFiniteLoss& e) {
    std::cerr << "numerical error: " << e.what() << std::endl;
    return kExitNumeric;
  } catch (const mmn::IoError& e) {
    std::cerr << "data error: " << e.what() << std::endl;
    return kExitData;
  } catch (const mmn::FormatError& e) {
    std::cerr << "data error: " << e.what() << std::endl;
    return kExitData;
  } catch (const mmn::ParseError& e) {
    std::cerr << "data error: " << e.what() << std::endl;
    return kExitData;
  } catch (const mmn::DimensionMismatch& e) {
    std::cerr << "data error: " << e.what() << std::endl;
    return kExitData;
  } catch (const mmn::Error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitUsage;
  }
}
