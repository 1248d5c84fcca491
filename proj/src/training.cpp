#include "mmn/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "mmn/error.hpp"
#include "mmn/kernels.hpp"
#include "mmn/losses.hpp"

namespace mmn {

namespace {

// Seed-stream labels, fixed so every stage draws from its own substream.
enum : std::uint64_t {
  kStreamBaselineInit = 1,
  kStreamBaselineShuffle = 2,
  kStreamGeneratorInit = 3,
  kStreamGeneratorShuffle = 4,
  kStreamGeneratorNoise = 5,
  kStreamBandwidthProbe = 6,
};

std::uint64_t fnv1a(const void* data, std::size_t bytes) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 1469598103934665603ULL;
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

struct Chunk {
  std::int64_t seq = 0;
  std::int64_t begin = 0;
  std::int64_t len = 0;
};

// Sequences are cut into pieces of at most chunk_length; a trailing piece
// shorter than 2 frames is dropped (grams need two frames to say anything).
std::vector<Chunk> make_chunks(const Dataset& ds, std::int64_t chunk_length) {
  std::vector<Chunk> chunks;
  for (std::size_t s = 0; s < ds.sequences.size(); ++s) {
    const std::int64_t t = ds.sequences[s].context.rows();
    for (std::int64_t b = 0; b < t; b += chunk_length) {
      const std::int64_t len = std::min(chunk_length, t - b);
      if (len < 2) continue;
      chunks.push_back({static_cast<std::int64_t>(s), b, len});
    }
  }
  return chunks;
}

Matrix slice_rows(const Matrix& m, std::int64_t begin, std::int64_t len) {
  Matrix out(len, m.cols());
  for (std::int64_t i = 0; i < len; ++i)
    for (std::int64_t j = 0; j < m.cols(); ++j) out(i, j) = m(begin + i, j);
  return out;
}

// Seeded Fisher-Yates.
template <typename T>
void shuffle_order(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.next_below(i));
    std::swap(v[i - 1], v[j]);
  }
}

double now_ms() {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0) throw InvalidArgument("train config: negative epochs");
  if (chunk_length < 2)
    throw InvalidArgument("train config: chunk_length must be >= 2");
  if (noise_dim < 1) throw InvalidArgument("train config: noise_dim must be >= 1");
  if (noise_copies < 2)
    throw InvalidArgument("train config: noise_copies must be >= 2");
  if (lambda < 0.0) throw InvalidArgument("train config: lambda must be >= 0");
  if (!(learning_rate > 0.0))
    throw InvalidArgument("train config: learning rate must be > 0");
  if (chunk_length > gram_cap)
    throw InvalidArgument("train config: chunk_length exceeds gram cap");
  windows.validate();
}

TrainLog::TrainLog(const std::string& path)
    : sink_(std::make_shared<std::ofstream>(path, std::ios::trunc)) {
  if (!*sink_) throw IoError("cannot open for writing: " + path);
}

void TrainLog::append(const TrainRecord& r) {
  records_.push_back(r);
  if (!sink_) return;
  nlohmann::json j{{"step", r.step},
                   {"sequence", r.sequence},
                   {"loss", r.loss},
                   {"term_yy", r.term_yy},
                   {"term_hh", r.term_hh},
                   {"term_yh", r.term_yh},
                   {"grad_norm", r.grad_norm},
                   {"wall_ms", r.wall_ms},
                   {"noise_checksum", r.noise_checksum}};
  *sink_ << j.dump() << "\n";
}

std::vector<TrainRecord> TrainLog::read(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open for reading: " + path);
  std::vector<TrainRecord> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw ParseError("bad train log line: " + line);
    TrainRecord r;
    r.step = j.value("step", std::int64_t{0});
    r.sequence = j.value("sequence", std::int64_t{0});
    r.loss = j.value("loss", 0.0);
    r.term_yy = j.value("term_yy", 0.0);
    r.term_hh = j.value("term_hh", 0.0);
    r.term_yh = j.value("term_yh", 0.0);
    r.grad_norm = j.value("grad_norm", 0.0);
    r.wall_ms = j.value("wall_ms", 0.0);
    r.noise_checksum = j.value("noise_checksum", std::uint64_t{0});
    out.push_back(r);
  }
  return out;
}

Dataset prepare_with_stats(const Dataset& raw, const NormStats& stats,
                           const TrainConfig& cfg) {
  cfg.validate();
  if (raw.sequences.empty())
    throw InvalidArgument("prepare_with_stats: empty dataset");
  Dataset out;
  out.meta = raw.meta;
  for (const auto& seq : raw.sequences) {
    SequencePair pair;
    pair.context = quantize_f32(apply_norm(seq.context, stats.context));
    FrameSequence statics = apply_norm(seq.target, stats.target);
    if (cfg.smooth_cutoff_hz > 0.0)
      statics =
          smooth_trajectory(statics, cfg.smooth_cutoff_hz, cfg.frame_shift_s);
    pair.target = quantize_f32(apply_windows(statics, cfg.windows));
    out.sequences.push_back(std::move(pair));
  }
  return out;
}

PreparedData prepare_training_data(const Dataset& raw,
                                   const TrainConfig& cfg) {
  cfg.validate();
  if (raw.sequences.empty())
    throw InvalidArgument("prepare_training_data: empty dataset");
  PreparedData out;
  out.stats = fit_norm_stats(raw);
  out.stacked = prepare_with_stats(raw, out.stats, cfg);
  return out;
}

NetworkParams train_baseline(const Dataset& prepared, const TrainConfig& cfg,
                             TrainLog* log) {
  cfg.validate();
  if (prepared.sequences.empty())
    throw InvalidArgument("train_baseline: empty dataset");
  const Rng root(cfg.seed);
  Rng init_rng = root.derive(kStreamBaselineInit);
  Rng shuffle_rng = root.derive(kStreamBaselineShuffle);

  NetworkLayout layout{prepared.context_dim(), cfg.baseline_hidden,
                       prepared.target_dim()};
  NetworkParams params = init_network(layout, init_rng);
  AdamState opt = AdamState::init(params, {.lr = cfg.learning_rate});

  auto chunks = make_chunks(prepared, cfg.chunk_length);
  if (chunks.empty())
    throw InvalidArgument("train_baseline: no usable chunks (sequences too short)");
  std::vector<std::size_t> seq_order(prepared.sequences.size());
  for (std::size_t i = 0; i < seq_order.size(); ++i) seq_order[i] = i;

  std::int64_t step = 0;
  for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_order(seq_order, shuffle_rng);
    for (auto s : seq_order) {
      for (const auto& chunk : chunks) {
        if (chunk.seq != static_cast<std::int64_t>(s)) continue;
        const double t0 = now_ms();
        const auto& seq = prepared.sequences[s];
        const Matrix x = slice_rows(seq.context, chunk.begin, chunk.len);
        const Matrix y = slice_rows(seq.target, chunk.begin, chunk.len);
        ForwardCache cache;
        const Matrix yhat = forward(params, x, &cache);
        const double loss = mse(y, yhat);
        const ParamGrads grads = backward(params, cache, mse_grad(y, yhat));
        const double gnorm = std::sqrt(grads.squared_norm());
        if (!std::isfinite(loss) || !std::isfinite(gnorm))
          throw NonFiniteLoss("train_baseline: non-finite loss at step " +
                              std::to_string(step));
        adam_step(params, grads, opt);
        ++step;
        if (log)
          log->append({step, chunk.seq, loss, 0.0, 0.0, 0.0, gnorm,
                       now_ms() - t0, 0});
      }
    }
  }
  return params;
}

BottleneckResult extract_bottleneck_dataset(const NetworkParams& baseline,
                                            const Dataset& prepared,
                                            std::int64_t layer_index) {
  const auto n_hidden =
      static_cast<std::int64_t>(baseline.layout.hidden_dims.size());
  if (n_hidden == 0)
    throw LayerOutOfRange("extract_bottleneck: baseline has no hidden layers");
  const std::int64_t layer = (layer_index == 0) ? n_hidden : layer_index;
  BottleneckResult res;
  res.layer = layer;
  res.dataset.meta = prepared.meta;
  double max_abs = 0.0;
  for (const auto& seq : prepared.sequences) {
    SequencePair pair;
    pair.context =
        quantize_f32(hidden_activations(baseline, seq.context, layer));
    for (std::int64_t i = 0; i < pair.context.size(); ++i)
      max_abs = std::max(max_abs, std::abs(pair.context.data()[i]));
    pair.target = seq.target;
    res.dataset.sequences.push_back(std::move(pair));
  }
  res.degenerate = (max_abs == 0.0);
  return res;
}

NetworkParams train_generator(const Dataset& bottleneck_ds,
                              const TrainConfig& cfg, TrainLog* log) {
  cfg.validate();
  if (bottleneck_ds.sequences.empty())
    throw InvalidArgument("train_generator: empty dataset");
  const Rng root(cfg.seed);
  Rng init_rng = root.derive(kStreamGeneratorInit);
  Rng shuffle_rng = root.derive(kStreamGeneratorShuffle);
  Rng noise_rng = root.derive(kStreamGeneratorNoise);
  Rng probe_rng = root.derive(kStreamBandwidthProbe);

  const std::int64_t d_stacked = bottleneck_ds.target_dim();
  const std::int64_t wc = cfg.windows.count();
  if (d_stacked % wc != 0)
    throw DimensionMismatch(
        "train_generator: target dim is not a window-count multiple");
  const std::int64_t d_static = d_stacked / wc;
  const NoiseSpec noise_spec{cfg.noise_dim, false};

  // Output-side bandwidth over the training targets (static slice when the
  // loss is placed after mlpg).
  std::vector<FrameSequence> y_pool;
  for (const auto& seq : bottleneck_ds.sequences) {
    if (cfg.loss_after_mlpg) {
      Matrix statics(seq.target.rows(), d_static);
      for (std::int64_t t = 0; t < seq.target.rows(); ++t)
        for (std::int64_t j = 0; j < d_static; ++j)
          statics(t, j) = seq.target(t, j);
      y_pool.push_back(std::move(statics));
    } else {
      y_pool.push_back(seq.target);
    }
  }
  KernelConfig kcfg_y;
  kcfg_y.sigma2 = bandwidth_from_data(y_pool).sigma2;

  // Input-side bandwidth over the kernel's actual inputs: the bottleneck
  // features, with one noise draw appended when the kernel includes noise.
  std::vector<FrameSequence> x_pool;
  for (const auto& seq : bottleneck_ds.sequences) {
    if (cfg.kernel_includes_noise)
      x_pool.push_back(hcat(seq.context,
                            sample_noise(noise_spec, seq.context.rows(),
                                         probe_rng)));
    else
      x_pool.push_back(seq.context);
  }
  KernelConfig kcfg_x;
  kcfg_x.sigma2 = bandwidth_from_data(x_pool).sigma2;
  kcfg_x.lambda = cfg.lambda;
  kcfg_x.jitter = cfg.jitter;

  NetworkLayout layout{bottleneck_ds.context_dim() + cfg.noise_dim,
                       cfg.generator_hidden, d_stacked};
  NetworkParams params = init_network(layout, init_rng);
  AdamState opt = AdamState::init(params, {.lr = cfg.learning_rate});

  auto chunks = make_chunks(bottleneck_ds, cfg.chunk_length);
  if (chunks.empty())
    throw InvalidArgument("train_generator: no usable chunks");
  std::vector<std::size_t> seq_order(bottleneck_ds.sequences.size());
  for (std::size_t i = 0; i < seq_order.size(); ++i) seq_order[i] = i;

  std::int64_t step = 0;
  for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_order(seq_order, shuffle_rng);
    for (auto s : seq_order) {
      for (const auto& chunk : chunks) {
        if (chunk.seq != static_cast<std::int64_t>(s)) continue;
        const double t0 = now_ms();
        const auto& seq = bottleneck_ds.sequences[s];
        const Matrix ctx = slice_rows(seq.context, chunk.begin, chunk.len);
        const Matrix y = slice_rows(seq.target, chunk.begin, chunk.len);

        // Fresh independent noise copies at every visit. The
        // generated-generated term is evaluated across distinct copies
        // only: a single draw would put constant self-kernels on the
        // heavily G-weighted diagonal, and its optimum is a generator
        // that ignores its noise input.
        const auto n_copies = static_cast<std::size_t>(cfg.noise_copies);
        std::vector<Matrix> noises, inputs;
        std::uint64_t checksum = 0;
        for (std::size_t c = 0; c < n_copies; ++c) {
          noises.push_back(sample_noise(noise_spec, chunk.len, noise_rng));
          inputs.push_back(hcat(ctx, noises.back()));
          checksum ^= fnv1a(noises.back().data(),
                            static_cast<std::size_t>(noises.back().size()) *
                                sizeof(double));
        }
        Matrix kx;
        if (cfg.kernel_includes_noise)
          kx = gram(inputs[0], inputs[0], kcfg_x);
        else
          kx = gram(ctx, ctx, kcfg_x);
        // lambda is read relative to the gram scale (unit diagonal, trace
        // T), the usual ridge convention. An absolute 0.01 would sit at
        // the bottom of the spectrum and turn G into a high-pass filter
        // over unmatchable contrast modes.
        KernelConfig g_cfg = kcfg_x;
        g_cfg.lambda = kcfg_x.lambda * static_cast<double>(chunk.len);
        const Matrix g = cmmd_weights(kx, g_cfg);

        std::vector<ForwardCache> caches(n_copies);
        std::vector<FrameSequence> outputs;
        for (std::size_t c = 0; c < n_copies; ++c)
          outputs.push_back(forward(params, inputs[c], &caches[c]));

        LossValue lv;
        std::vector<Matrix> doutputs;
        if (cfg.loss_after_mlpg) {
          Matrix y_static(chunk.len, d_static);
          for (std::int64_t t = 0; t < chunk.len; ++t)
            for (std::int64_t j = 0; j < d_static; ++j)
              y_static(t, j) = y(t, j);
          std::vector<FrameSequence> statics;
          for (const auto& stacked : outputs)
            statics.push_back(mlpg({stacked, {}, cfg.windows}));
          lv = cmmd_multi(g, y_static, statics, kcfg_y);
          const auto dstatics = cmmd_multi_grad(g, y_static, statics, kcfg_y);
          for (std::size_t c = 0; c < n_copies; ++c)
            doutputs.push_back(
                mlpg_backward({outputs[c], {}, cfg.windows}, dstatics[c]));
        } else {
          lv = cmmd_multi(g, y, outputs, kcfg_y);
          doutputs = cmmd_multi_grad(g, y, outputs, kcfg_y);
        }

        ParamGrads grads = backward(params, caches[0], doutputs[0]);
        for (std::size_t c = 1; c < n_copies; ++c) {
          const ParamGrads more = backward(params, caches[c], doutputs[c]);
          for (std::size_t l = 0; l < grads.dw.size(); ++l) {
            for (std::int64_t i = 0; i < grads.dw[l].size(); ++i)
              grads.dw[l].data()[i] += more.dw[l].data()[i];
            for (std::size_t i = 0; i < grads.db[l].size(); ++i)
              grads.db[l][i] += more.db[l][i];
          }
        }
        const double gnorm = std::sqrt(grads.squared_norm());
        if (!std::isfinite(lv.value) || !std::isfinite(gnorm))
          throw NonFiniteLoss("train_generator: non-finite loss at step " +
                              std::to_string(step) + " (sequence " +
                              std::to_string(chunk.seq) + ")");
        adam_step(params, grads, opt);
        ++step;
        if (log)
          log->append({step, chunk.seq, lv.value, lv.term_yy, lv.term_hh,
                       lv.term_yh, gnorm, now_ms() - t0, checksum});
      }
    }
  }
  return params;
}

}  // namespace mmn
