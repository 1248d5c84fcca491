#include "mmn/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mmn/binio.hpp"
#include "mmn/error.hpp"

namespace mmn {

std::int64_t Dataset::context_dim() const {
  return sequences.empty() ? 0 : sequences.front().context.cols();
}

std::int64_t Dataset::target_dim() const {
  return sequences.empty() ? 0 : sequences.front().target.cols();
}

std::int64_t Dataset::total_frames() const {
  std::int64_t n = 0;
  for (const auto& s : sequences) n += s.context.rows();
  return n;
}

FrameSequence quantize_f32(const FrameSequence& m) {
  FrameSequence out = m;
  for (std::int64_t i = 0; i < out.size(); ++i)
    out.data()[i] = static_cast<double>(static_cast<float>(out.data()[i]));
  return out;
}

namespace {

constexpr char kMagic[4] = {'M', 'M', 'D', '1'};
constexpr std::uint32_t kVersion = 1;

void check_dataset(const Dataset& ds) {
  for (std::size_t i = 0; i < ds.sequences.size(); ++i) {
    const auto& s = ds.sequences[i];
    if (s.context.rows() != s.target.rows())
      throw InvalidArgument("dataset: sequence " + std::to_string(i) +
                            " has unpaired frame counts");
    if (s.context.cols() != ds.sequences.front().context.cols() ||
        s.target.cols() != ds.sequences.front().target.cols())
      throw InvalidArgument("dataset: sequence " + std::to_string(i) +
                            " has mismatched dims");
    if (!s.context.all_finite() || !s.target.all_finite())
      throw InvalidArgument("dataset: sequence " + std::to_string(i) +
                            " contains non-finite values");
  }
}

}  // namespace

void write_dataset(const Dataset& ds, const std::string& path) {
  check_dataset(ds);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  os.write(kMagic, 4);
  binio::write_u32(os, kVersion);
  binio::write_u32(os, static_cast<std::uint32_t>(ds.sequences.size()));
  binio::write_u32(os, static_cast<std::uint32_t>(ds.context_dim()));
  binio::write_u32(os, static_cast<std::uint32_t>(ds.target_dim()));
  binio::write_f64(os, ds.meta.frame_shift_s);
  binio::write_u32(os, static_cast<std::uint32_t>(ds.meta.names.size()));
  for (const auto& n : ds.meta.names) binio::write_string(os, n);
  for (const auto& s : ds.sequences) {
    binio::write_u32(os, static_cast<std::uint32_t>(s.context.rows()));
    for (std::int64_t i = 0; i < s.context.size(); ++i)
      binio::write_f32(os, static_cast<float>(s.context.data()[i]));
    for (std::int64_t i = 0; i < s.target.size(); ++i)
      binio::write_f32(os, static_cast<float>(s.target.data()[i]));
  }
  if (!os) throw IoError("write failed: " + path);
}

Dataset read_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path);
  char magic[4];
  is.read(magic, 4);
  if (is.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("dataset magic mismatch: " + path);
  const auto version = binio::read_u32(is, "dataset version");
  if (version != kVersion)
    throw FormatError("unsupported dataset version " + std::to_string(version));
  const auto n_seqs = binio::read_u32(is, "dataset header");
  const auto dx = binio::read_u32(is, "dataset header");
  const auto dy = binio::read_u32(is, "dataset header");
  Dataset ds;
  ds.meta.frame_shift_s = binio::read_f64(is, "dataset header");
  const auto n_names = binio::read_u32(is, "dataset names");
  if (n_names > 1024) throw FormatError("implausible name count");
  for (std::uint32_t i = 0; i < n_names; ++i)
    ds.meta.names.push_back(binio::read_string(is, "dataset names"));
  for (std::uint32_t s = 0; s < n_seqs; ++s) {
    const std::string what = "sequence " + std::to_string(s);
    const auto t = binio::read_u32(is, what.c_str());
    SequencePair pair{FrameSequence(t, dx), FrameSequence(t, dy)};
    for (std::int64_t i = 0; i < pair.context.size(); ++i)
      pair.context.data()[i] =
          static_cast<double>(binio::read_f32(is, (what + " context").c_str()));
    for (std::int64_t i = 0; i < pair.target.size(); ++i)
      pair.target.data()[i] =
          static_cast<double>(binio::read_f32(is, (what + " target").c_str()));
    ds.sequences.push_back(std::move(pair));
  }
  check_dataset(ds);
  return ds;
}

namespace {

Matrix parse_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open for reading: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    std::int64_t col = 1;
    while (p < end) {
      const char* cell_end = p;
      while (cell_end < end && *cell_end != ',') ++cell_end;
      double v = 0.0;
      auto [next, ec] = std::from_chars(p, cell_end, v);
      // from_chars leaves surrounding spaces unparsed; trim first.
      if (ec != std::errc{} || next != cell_end) {
        const char* q = p;
        while (q < cell_end && *q == ' ') ++q;
        const char* r = cell_end;
        while (r > q && r[-1] == ' ') --r;
        auto [next2, ec2] = std::from_chars(q, r, v);
        if (ec2 != std::errc{} || next2 != r || q == r)
          throw ParseError(path + ": bad numeric cell at row " +
                           std::to_string(line_no) + ", column " +
                           std::to_string(col));
      }
      row.push_back(v);
      ++col;
      p = (cell_end < end) ? cell_end + 1 : end;
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ParseError(path + ": row " + std::to_string(line_no) +
                       " has a different column count");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(path + ": no rows");
  Matrix m(static_cast<std::int64_t>(rows.size()),
           static_cast<std::int64_t>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<std::int64_t>(i), static_cast<std::int64_t>(j)) =
          rows[i][j];
  return m;
}

}  // namespace

Dataset import_csv(const std::string& context_path,
                   const std::string& target_path,
                   std::span<const std::int64_t> seq_lengths) {
  const Matrix ctx = parse_csv(context_path);
  const Matrix tgt = parse_csv(target_path);
  if (ctx.rows() != tgt.rows())
    throw InvalidArgument("import_csv: context and target row counts differ");
  std::int64_t total = 0;
  for (auto t : seq_lengths) {
    if (t < 1) throw InvalidArgument("import_csv: sequence lengths must be >= 1");
    total += t;
  }
  if (total != ctx.rows())
    throw InvalidArgument(
        "import_csv: sequence lengths sum to " + std::to_string(total) +
        " but files have " + std::to_string(ctx.rows()) + " rows");
  Dataset ds;
  ds.meta.names = {"context", "target"};
  std::int64_t at = 0;
  for (auto t : seq_lengths) {
    SequencePair pair{FrameSequence(t, ctx.cols()), FrameSequence(t, tgt.cols())};
    for (std::int64_t i = 0; i < t; ++i) {
      for (std::int64_t j = 0; j < ctx.cols(); ++j)
        pair.context(i, j) =
            static_cast<double>(static_cast<float>(ctx(at + i, j)));
      for (std::int64_t j = 0; j < tgt.cols(); ++j)
        pair.target(i, j) =
            static_cast<double>(static_cast<float>(tgt(at + i, j)));
    }
    at += t;
    ds.sequences.push_back(std::move(pair));
  }
  check_dataset(ds);
  return ds;
}

namespace {

StreamStats fit_stream(const Dataset& ds, bool context_stream) {
  const std::int64_t d =
      context_stream ? ds.context_dim() : ds.target_dim();
  StreamStats s;
  s.mean.assign(static_cast<std::size_t>(d), 0.0);
  s.stdev.assign(static_cast<std::size_t>(d), 0.0);
  std::int64_t n = 0;
  for (const auto& seq : ds.sequences) {
    const auto& m = context_stream ? seq.context : seq.target;
    for (std::int64_t t = 0; t < m.rows(); ++t, ++n)
      for (std::int64_t j = 0; j < d; ++j)
        s.mean[static_cast<std::size_t>(j)] += m(t, j);
  }
  for (auto& v : s.mean) v /= static_cast<double>(n);
  for (const auto& seq : ds.sequences) {
    const auto& m = context_stream ? seq.context : seq.target;
    for (std::int64_t t = 0; t < m.rows(); ++t)
      for (std::int64_t j = 0; j < d; ++j) {
        const double e = m(t, j) - s.mean[static_cast<std::size_t>(j)];
        s.stdev[static_cast<std::size_t>(j)] += e * e;
      }
  }
  for (std::int64_t j = 0; j < d; ++j) {
    auto& v = s.stdev[static_cast<std::size_t>(j)];
    v = std::sqrt(v / static_cast<double>(n));
    if (!(v > 0.0)) {
      v = 1.0;
      s.clamped_dims.push_back(j);
    }
  }
  return s;
}

}  // namespace

NormStats fit_norm_stats(const Dataset& ds) {
  if (ds.sequences.empty() || ds.total_frames() == 0)
    throw InvalidArgument("fit_norm_stats: empty dataset");
  return {fit_stream(ds, true), fit_stream(ds, false)};
}

FrameSequence apply_norm(const FrameSequence& frames, const StreamStats& s) {
  if (frames.cols() != static_cast<std::int64_t>(s.mean.size()))
    throw DimensionMismatch("apply_norm: dimension differs from stats");
  FrameSequence out = frames;
  for (std::int64_t t = 0; t < out.rows(); ++t)
    for (std::int64_t j = 0; j < out.cols(); ++j)
      out(t, j) = (out(t, j) - s.mean[static_cast<std::size_t>(j)]) /
                  s.stdev[static_cast<std::size_t>(j)];
  return out;
}

FrameSequence invert_norm(const FrameSequence& frames, const StreamStats& s) {
  if (frames.cols() != static_cast<std::int64_t>(s.mean.size()))
    throw DimensionMismatch("invert_norm: dimension differs from stats");
  FrameSequence out = frames;
  for (std::int64_t t = 0; t < out.rows(); ++t)
    for (std::int64_t j = 0; j < out.cols(); ++j)
      out(t, j) = out(t, j) * s.stdev[static_cast<std::size_t>(j)] +
                  s.mean[static_cast<std::size_t>(j)];
  return out;
}

Dataset apply_norm(const Dataset& ds, const NormStats& stats) {
  Dataset out = ds;
  for (auto& seq : out.sequences) {
    seq.context = apply_norm(seq.context, stats.context);
    seq.target = apply_norm(seq.target, stats.target);
  }
  return out;
}

namespace {

constexpr char kStatsMagic[4] = {'M', 'M', 'S', 'T'};

void write_stream(std::ostream& os, const StreamStats& s) {
  binio::write_u32(os, static_cast<std::uint32_t>(s.mean.size()));
  for (double v : s.mean) binio::write_f64(os, v);
  for (double v : s.stdev) binio::write_f64(os, v);
  binio::write_u32(os, static_cast<std::uint32_t>(s.clamped_dims.size()));
  for (auto j : s.clamped_dims)
    binio::write_u32(os, static_cast<std::uint32_t>(j));
}

StreamStats read_stream(std::istream& is) {
  StreamStats s;
  const auto d = binio::read_u32(is, "stats dims");
  for (std::uint32_t i = 0; i < d; ++i)
    s.mean.push_back(binio::read_f64(is, "stats mean"));
  for (std::uint32_t i = 0; i < d; ++i)
    s.stdev.push_back(binio::read_f64(is, "stats stdev"));
  const auto nc = binio::read_u32(is, "stats clamped dims");
  if (nc > d) throw FormatError("implausible clamped-dim count");
  for (std::uint32_t i = 0; i < nc; ++i)
    s.clamped_dims.push_back(binio::read_u32(is, "stats clamped dims"));
  return s;
}

}  // namespace

void write_norm_stats(const NormStats& stats, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  os.write(kStatsMagic, 4);
  binio::write_u32(os, 1);
  write_stream(os, stats.context);
  write_stream(os, stats.target);
  if (!os) throw IoError("write failed: " + path);
}

NormStats read_norm_stats(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path);
  char magic[4];
  is.read(magic, 4);
  if (is.gcount() != 4 || std::memcmp(magic, kStatsMagic, 4) != 0)
    throw FormatError("stats magic mismatch: " + path);
  if (binio::read_u32(is, "stats version") != 1)
    throw FormatError("unsupported stats version");
  NormStats stats;
  stats.context = read_stream(is);
  stats.target = read_stream(is);
  return stats;
}

void OracleSpec::validate() const {
  if (target_dim < 1) throw InvalidArgument("oracle spec: target_dim must be >= 1");
  if (code_count < 0) throw InvalidArgument("oracle spec: negative code count");
  if (!(context_amp > 0.0) || !(context_step > 0.0))
    throw InvalidArgument("oracle spec: context walk needs positive amp/step");
  if (!(noise_ar >= 0.0 && noise_ar < 1.0))
    throw InvalidArgument("oracle spec: noise_ar must lie in [0, 1)");
  if (s0 < 0.0) throw InvalidArgument("oracle spec: s0 must be >= 0");
  if (spread_form == SpreadForm::kTanhRamp && s0 < std::abs(s1))
    throw InvalidArgument("oracle spec: tanh ramp needs s0 >= |s1|");
  if (family == OracleFamily::kConditionalBimodal && bimodal_offset < 0.0)
    throw InvalidArgument("oracle spec: negative bimodal offset");
}

OracleSpec OracleSpec::for_family(OracleFamily family,
                                  std::int64_t target_dim) {
  OracleSpec spec;
  spec.family = family;
  spec.target_dim = target_dim;
  switch (family) {
    case OracleFamily::kConditionalGaussian:
      spec.spread_form = SpreadForm::kConstant;
      spec.s0 = 0.5;
      spec.s1 = 0.0;
      break;
    case OracleFamily::kHeteroscedastic:
      spec.spread_form = SpreadForm::kTanhRamp;
      spec.s0 = 0.6;
      spec.s1 = 0.4;
      break;
    case OracleFamily::kConditionalBimodal:
      spec.spread_form = SpreadForm::kConstant;
      spec.s0 = 0.25;
      spec.s1 = 0.0;
      spec.bimodal_offset = 1.0;
      break;
  }
  return spec;
}

namespace {

double spread_at(const OracleSpec& spec, double x) {
  switch (spec.spread_form) {
    case SpreadForm::kConstant:
      return spec.s0;
    case SpreadForm::kTanhRamp:
      return spec.s0 + spec.s1 * std::tanh(x);
    case SpreadForm::kAbsContext:
      return spec.s0 * std::abs(x);
  }
  return spec.s0;
}

std::int64_t code_of(const OracleSpec& spec, std::span<const double> context) {
  if (spec.code_count == 0) return 0;
  std::int64_t best = 0;
  for (std::int64_t k = 1; k < spec.code_count; ++k)
    if (context[static_cast<std::size_t>(1 + k)] >
        context[static_cast<std::size_t>(1 + best)])
      best = k;
  return best;
}

double mean_at(const OracleSpec& spec, double x, std::int64_t code,
               std::int64_t dim) {
  return spec.mu_amp *
             std::sin(spec.mu_freq * x +
                      spec.mu_phase_step * static_cast<double>(dim)) +
         spec.mu_slope * x + spec.code_shift * static_cast<double>(code);
}

bool bounded_noise(const OracleSpec& spec) {
  return spec.family != OracleFamily::kConditionalGaussian;
}

// Maps a standard normal value to uniform(-sqrt(3), sqrt(3)) (unit
// variance) through the probability integral transform; applied to an
// AR(1) Gaussian state this yields a smooth process with an exactly
// uniform marginal.
double gauss_to_uniform(double g) {
  const double u = 0.5 * (1.0 + std::erf(g / 1.4142135623730951));
  return 1.7320508075688772 * (2.0 * u - 1.0);
}

}  // namespace

OracleMoments oracle_conditional_moments(const OracleSpec& spec,
                                         std::span<const double> context) {
  spec.validate();
  if (static_cast<std::int64_t>(context.size()) != spec.context_dim())
    throw DimensionMismatch("oracle moments: context dim differs from spec");
  const double x = context[0];
  const std::int64_t code = code_of(spec, context);
  OracleMoments m;
  const double s = spread_at(spec, x);
  for (std::int64_t d = 0; d < spec.target_dim; ++d) {
    m.mean.push_back(mean_at(spec, x, code, d));
    if (spec.family == OracleFamily::kConditionalBimodal) {
      m.variance.push_back(s * s + spec.bimodal_offset * spec.bimodal_offset);
    } else {
      m.variance.push_back(s * s);
    }
  }
  if (spec.family == OracleFamily::kConditionalBimodal) {
    m.bimodal = true;
    m.component_offset = spec.bimodal_offset;
    m.component_sigma = s;
  }
  return m;
}

std::vector<double> oracle_draw(const OracleSpec& spec,
                                std::span<const double> context, Rng& rng) {
  spec.validate();
  if (static_cast<std::int64_t>(context.size()) != spec.context_dim())
    throw DimensionMismatch("oracle_draw: context dim differs from spec");
  const double x = context[0];
  const std::int64_t code = code_of(spec, context);
  const double s = spread_at(spec, x);
  double offset = 0.0;
  if (spec.family == OracleFamily::kConditionalBimodal)
    offset = (rng.next_unit() < 0.5 ? -1.0 : 1.0) * spec.bimodal_offset;
  auto eps = rng.gaussian_draws(spec.target_dim);
  if (bounded_noise(spec))
    for (auto& e : eps) e = gauss_to_uniform(e);
  std::vector<double> y(static_cast<std::size_t>(spec.target_dim));
  for (std::int64_t d = 0; d < spec.target_dim; ++d)
    y[static_cast<std::size_t>(d)] =
        mean_at(spec, x, code, d) + offset + s * eps[static_cast<std::size_t>(d)];
  return y;
}

std::vector<double> oracle_context_frame(const OracleSpec& spec, double x,
                                         std::int64_t code) {
  if (code < 0 || (spec.code_count > 0 && code >= spec.code_count))
    throw InvalidArgument("oracle_context_frame: code out of range");
  std::vector<double> ctx(static_cast<std::size_t>(spec.context_dim()), 0.0);
  ctx[0] = x;
  if (spec.code_count > 0) ctx[static_cast<std::size_t>(1 + code)] = 1.0;
  return ctx;
}

Dataset synth_oracle_dataset(const OracleSpec& spec, std::int64_t n_seqs,
                             std::int64_t frames, Rng& rng) {
  spec.validate();
  if (n_seqs < 0 || frames < 1)
    throw InvalidArgument("synth_oracle_dataset: bad sequence count or length");
  Dataset ds;
  ds.meta.names = {"context", "target"};
  const double pi = 3.14159265358979323846;
  for (std::int64_t s = 0; s < n_seqs; ++s) {
    Rng seq_rng = rng.derive(static_cast<std::uint64_t>(s));
    SequencePair pair{FrameSequence(frames, spec.context_dim()),
                      FrameSequence(frames, spec.target_dim)};
    const std::int64_t code =
        spec.code_count > 0
            ? static_cast<std::int64_t>(seq_rng.next_below(
                  static_cast<std::uint64_t>(spec.code_count)))
            : 0;
    double theta = (2.0 * seq_rng.next_unit() - 1.0) * pi;
    std::vector<double> eps(static_cast<std::size_t>(spec.target_dim));
    for (auto& e : eps) e = seq_rng.next_gaussian();
    double coin = seq_rng.next_unit() < 0.5 ? -1.0 : 1.0;
    const double innovation =
        std::sqrt(1.0 - spec.noise_ar * spec.noise_ar);
    const double flip_prob = 0.5 * (1.0 - spec.noise_ar);
    for (std::int64_t t = 0; t < frames; ++t) {
      if (t > 0) {
        theta += spec.context_step * seq_rng.next_gaussian();
        for (auto& e : eps)
          e = spec.noise_ar * e + innovation * seq_rng.next_gaussian();
        if (seq_rng.next_unit() < flip_prob) coin = -coin;
      }
      const double x = spec.context_amp * std::sin(theta);
      pair.context(t, 0) = x;
      if (spec.code_count > 0) pair.context(t, 1 + code) = 1.0;
      const double spread = spread_at(spec, x);
      const double offset =
          spec.family == OracleFamily::kConditionalBimodal
              ? coin * spec.bimodal_offset
              : 0.0;
      for (std::int64_t d = 0; d < spec.target_dim; ++d) {
        const double e = bounded_noise(spec)
                             ? gauss_to_uniform(eps[static_cast<std::size_t>(d)])
                             : eps[static_cast<std::size_t>(d)];
        pair.target(t, d) = mean_at(spec, x, code, d) + offset + spread * e;
      }
    }
    pair.context = quantize_f32(pair.context);
    pair.target = quantize_f32(pair.target);
    ds.sequences.push_back(std::move(pair));
  }
  return ds;
}

}  // namespace mmn
