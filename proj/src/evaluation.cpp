#include "mmn/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mmn/error.hpp"
#include "mmn/kernels.hpp"
#include "mmn/losses.hpp"

namespace mmn {

double two_sample_mmd(const FrameSequence& a, const FrameSequence& b) {
  if (a.rows() == 0 || b.rows() == 0)
    throw InvalidArgument("two_sample_mmd: empty set");
  if (a.cols() != b.cols())
    throw DimensionMismatch("two_sample_mmd: dimensions differ");
  const FrameSequence pool[] = {a, b};
  KernelConfig cfg;
  cfg.sigma2 = bandwidth_from_data(pool).sigma2;
  return mmd_sq(a, b, cfg).value;
}

ConvSampler::ConvSampler(NetworkParams baseline, NormStats stats,
                         WindowSet windows)
    : baseline_(std::move(baseline)),
      stats_(std::move(stats)),
      windows_(std::move(windows)) {}

FrameSequence ConvSampler::draw(const FrameSequence& raw_context,
                                Rng& rng) const {
  (void)rng;
  const Matrix stacked =
      forward(baseline_, apply_norm(raw_context, stats_.context));
  const Matrix statics = mlpg({stacked, {}, windows_});
  return invert_norm(statics, stats_.target);
}

GenSampler::GenSampler(NetworkParams baseline, NetworkParams generator,
                       NormStats stats, WindowSet windows,
                       std::int64_t bottleneck_layer, std::int64_t noise_dim,
                       bool zero_noise)
    : baseline_(std::move(baseline)),
      generator_(std::move(generator)),
      stats_(std::move(stats)),
      windows_(std::move(windows)),
      layer_(bottleneck_layer),
      noise_{noise_dim, zero_noise} {
  if (layer_ == 0)
    layer_ = static_cast<std::int64_t>(baseline_.layout.hidden_dims.size());
}

FrameSequence GenSampler::draw(const FrameSequence& raw_context,
                               Rng& rng) const {
  const Matrix ctx_n = apply_norm(raw_context, stats_.context);
  const Matrix bottleneck = hidden_activations(baseline_, ctx_n, layer_);
  const Matrix noise = sample_noise(noise_, raw_context.rows(), rng);
  const Matrix statics = generate(generator_, bottleneck, noise, windows_);
  return invert_norm(statics, stats_.target);
}

OracleSampler::OracleSampler(OracleSpec spec) : spec_(std::move(spec)) {}

FrameSequence OracleSampler::draw(const FrameSequence& raw_context,
                                  Rng& rng) const {
  Matrix out(raw_context.rows(), spec_.target_dim);
  for (std::int64_t t = 0; t < raw_context.rows(); ++t) {
    const auto y = oracle_draw(spec_, raw_context.row(t), rng);
    for (std::int64_t d = 0; d < spec_.target_dim; ++d)
      out(t, d) = y[static_cast<std::size_t>(d)];
  }
  return out;
}

std::vector<double> default_context_grid() {
  std::vector<double> grid;
  for (int i = 0; i < 9; ++i) grid.push_back(-2.0 + 0.5 * i);
  return grid;
}

std::vector<MomentErrorRow> conditional_moment_error(
    const Sampler& sampler, const OracleSpec& spec, const NormStats& stats,
    std::span<const double> context_grid, std::int64_t n_draws, Rng& rng) {
  if (n_draws < 2)
    throw InvalidArgument("conditional_moment_error: need at least 2 draws");
  std::vector<MomentErrorRow> rows;
  for (double x : context_grid) {
    const auto ctx_vec = oracle_context_frame(spec, x);
    FrameSequence ctx(1, spec.context_dim());
    for (std::int64_t j = 0; j < spec.context_dim(); ++j)
      ctx(0, j) = ctx_vec[static_cast<std::size_t>(j)];
    const auto moments = oracle_conditional_moments(spec, ctx_vec);

    const std::int64_t d = spec.target_dim;
    Matrix draws(n_draws, d);
    for (std::int64_t k = 0; k < n_draws; ++k) {
      const FrameSequence draw = sampler.draw(ctx, rng);
      for (std::int64_t j = 0; j < d; ++j) draws(k, j) = draw(0, j);
    }
    MomentErrorRow row;
    row.x = x;
    row.oracle_mean = moments.mean;
    double err2 = 0.0;
    for (std::int64_t j = 0; j < d; ++j) {
      double m = 0.0;
      for (std::int64_t k = 0; k < n_draws; ++k) m += draws(k, j);
      m /= static_cast<double>(n_draws);
      // Shifted two-pass variance: exactly zero for identical draws.
      const double ref = draws(0, j);
      double dsum = 0.0, dsq = 0.0;
      for (std::int64_t k = 0; k < n_draws; ++k) {
        const double e = draws(k, j) - ref;
        dsum += e;
        dsq += e * e;
      }
      double var = (dsq - dsum * dsum / static_cast<double>(n_draws)) /
                   static_cast<double>(n_draws - 1);
      if (var < 0.0) var = 0.0;
      const double sd = std::sqrt(var);
      const double osd =
          std::sqrt(moments.variance[static_cast<std::size_t>(j)]);
      row.sample_mean.push_back(m);
      row.sample_std.push_back(sd);
      row.oracle_std.push_back(osd);
      const double scale = stats.target.stdev[static_cast<std::size_t>(j)];
      const double e =
          (m - moments.mean[static_cast<std::size_t>(j)]) / scale;
      err2 += e * e;
      row.std_ratio.push_back(osd > 0.0 ? sd / osd
                                        : (sd == 0.0 ? 1.0 : HUGE_VAL));
    }
    row.mean_err = std::sqrt(err2);
    rows.push_back(std::move(row));
  }
  return rows;
}

double variation_score(const Sampler& sampler,
                       const FrameSequence& raw_context,
                       std::int64_t n_realizations, Rng& rng) {
  if (n_realizations < 2)
    throw InvalidArgument("variation_score: need at least 2 realizations");
  std::vector<FrameSequence> draws;
  draws.reserve(static_cast<std::size_t>(n_realizations));
  for (std::int64_t k = 0; k < n_realizations; ++k)
    draws.push_back(sampler.draw(raw_context, rng));
  const std::int64_t t_len = draws.front().rows();
  const std::int64_t d = draws.front().cols();
  double acc = 0.0;
  for (std::int64_t t = 0; t < t_len; ++t) {
    for (std::int64_t j = 0; j < d; ++j) {
      // Shifted two-pass variance: exactly zero when realizations agree.
      const double ref = draws.front()(t, j);
      double dsum = 0.0, dsq = 0.0;
      for (const auto& m : draws) {
        const double e = m(t, j) - ref;
        dsum += e;
        dsq += e * e;
      }
      double var =
          (dsq - dsum * dsum / static_cast<double>(n_realizations)) /
          static_cast<double>(n_realizations - 1);
      if (var < 0.0) var = 0.0;
      acc += std::sqrt(var);
    }
  }
  return acc / static_cast<double>(t_len * d);
}

namespace {

nlohmann::json row_to_json(const MomentErrorRow& r) {
  return {{"x", r.x},
          {"sample_mean", r.sample_mean},
          {"sample_std", r.sample_std},
          {"oracle_mean", r.oracle_mean},
          {"oracle_std", r.oracle_std},
          {"mean_err", r.mean_err},
          {"std_ratio", r.std_ratio}};
}

MomentErrorRow row_from_json(const nlohmann::json& j) {
  MomentErrorRow r;
  r.x = j.at("x").get<double>();
  r.sample_mean = j.at("sample_mean").get<std::vector<double>>();
  r.sample_std = j.at("sample_std").get<std::vector<double>>();
  r.oracle_mean = j.at("oracle_mean").get<std::vector<double>>();
  r.oracle_std = j.at("oracle_std").get<std::vector<double>>();
  r.mean_err = j.at("mean_err").get<double>();
  r.std_ratio = j.at("std_ratio").get<std::vector<double>>();
  return r;
}

}  // namespace

void emit_report(const EvalReport& report, const std::string& path,
                 ReportFormat format) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path);
  if (format == ReportFormat::kStructured) {
    nlohmann::json j;
    j["seed"] = report.seed;
    j["checkpoint_hash"] = report.checkpoint_hash;
    j["config_hash"] = report.config_hash;
    j["entries"] = nlohmann::json::array();
    for (const auto& e : report.entries) {
      nlohmann::json je{{"name", e.name}, {"system", e.system},
                        {"value", e.value}};
      if (e.tolerance) je["tolerance"] = *e.tolerance;
      if (e.pass) je["pass"] = *e.pass;
      j["entries"].push_back(je);
    }
    j["tables"] = nlohmann::json::array();
    for (const auto& t : report.tables) {
      nlohmann::json jt{{"system", t.system},
                        {"rows", nlohmann::json::array()}};
      for (const auto& r : t.rows) jt["rows"].push_back(row_to_json(r));
      j["tables"].push_back(jt);
    }
    os << j.dump(2) << "\n";
  } else {
    os << "evaluation report\n";
    os << "seed: " << report.seed << "\n";
    os << "checkpoint_hash: " << report.checkpoint_hash << "\n";
    os << "config_hash: " << report.config_hash << "\n";
    char buf[512];
    for (const auto& e : report.entries) {
      std::snprintf(buf, sizeof(buf), "%-32s %-16s % .9e", e.name.c_str(),
                    e.system.c_str(), e.value);
      os << buf;
      if (e.tolerance) {
        std::snprintf(buf, sizeof(buf), "  (tol % .3e)", *e.tolerance);
        os << buf;
      }
      if (e.pass) os << (*e.pass ? "  [pass]" : "  [FAIL]");
      os << "\n";
    }
    for (const auto& t : report.tables) {
      os << "table: " << t.system << "\n";
      for (const auto& r : t.rows) {
        std::snprintf(buf, sizeof(buf), "  x=% .3f  mean_err=% .6e",
                      r.x, r.mean_err);
        os << buf << "  std_ratio=[";
        for (std::size_t i = 0; i < r.std_ratio.size(); ++i) {
          std::snprintf(buf, sizeof(buf), "% .4f", r.std_ratio[i]);
          os << (i ? " " : "") << buf;
        }
        os << "]\n";
      }
    }
  }
  if (!os) throw IoError("write failed: " + path);
}

EvalReport read_report(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open for reading: " + path);
  nlohmann::json j = nlohmann::json::parse(is, nullptr, false);
  if (j.is_discarded())
    throw ParseError("report is not structured JSON: " + path);
  EvalReport r;
  r.seed = j.at("seed").get<std::uint64_t>();
  r.checkpoint_hash = j.at("checkpoint_hash").get<std::string>();
  r.config_hash = j.at("config_hash").get<std::string>();
  for (const auto& je : j.at("entries")) {
    ReportEntry e;
    e.name = je.at("name").get<std::string>();
    e.system = je.at("system").get<std::string>();
    e.value = je.at("value").get<double>();
    if (je.contains("tolerance")) e.tolerance = je["tolerance"].get<double>();
    if (je.contains("pass")) e.pass = je["pass"].get<bool>();
    r.entries.push_back(std::move(e));
  }
  for (const auto& jt : j.at("tables")) {
    MomentTable t;
    t.system = jt.at("system").get<std::string>();
    for (const auto& jr : jt.at("rows")) t.rows.push_back(row_from_json(jr));
    r.tables.push_back(std::move(t));
  }
  return r;
}

std::string file_hash_hex(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path);
  std::uint64_t h = 1469598103934665603ULL;
  char buf[4096];
  while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
    const auto n = is.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
    if (!is) break;
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx",
                static_cast<unsigned long long>(h));
  return std::string(out);
}

}  // namespace mmn
