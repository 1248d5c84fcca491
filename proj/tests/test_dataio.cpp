#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "mmn/dataio.hpp"
#include "mmn/error.hpp"
#include "mmn/rng.hpp"
#include "test_util.hpp"

using namespace mmn;

namespace {

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string read_bytes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

Dataset small_dataset(std::uint64_t seed) {
  Rng rng(seed);
  return synth_oracle_dataset(
      OracleSpec::for_family(OracleFamily::kConditionalGaussian), 3, 20, rng);
}

}  // namespace

TEST_CASE("dataset: write/read round-trip is exact") {
  const auto ds = small_dataset(1);
  const auto path = temp_path("mmn_ds_roundtrip.mmd");
  write_dataset(ds, path);
  const auto back = read_dataset(path);
  CHECK(back == ds);
  // And the second generation of bytes is identical.
  const auto path2 = temp_path("mmn_ds_roundtrip2.mmd");
  write_dataset(back, path2);
  CHECK(read_bytes(path) == read_bytes(path2));
  std::filesystem::remove(path);
  std::filesystem::remove(path2);
}

TEST_CASE("dataset: empty dataset round-trips") {
  Dataset ds;
  ds.meta.names = {"context", "target"};
  const auto path = temp_path("mmn_ds_empty.mmd");
  write_dataset(ds, path);
  const auto back = read_dataset(path);
  CHECK(back.sequences.empty());
  CHECK(back.meta.names == ds.meta.names);
  std::filesystem::remove(path);
}

TEST_CASE("dataset: truncation names the failing section") {
  const auto ds = small_dataset(2);
  const auto path = temp_path("mmn_ds_trunc.mmd");
  write_dataset(ds, path);
  const auto bytes = read_bytes(path);
  {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  try {
    (void)read_dataset(path);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("sequence") != std::string::npos);
  }
  {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os << "NOPE";
  }
  CHECK_THROWS_AS(read_dataset(path), FormatError);
  std::filesystem::remove(path);
}

TEST_CASE("import_csv: one sequence, parse errors, bad boundaries") {
  const auto ctx_path = temp_path("mmn_ctx.csv");
  const auto tgt_path = temp_path("mmn_tgt.csv");
  {
    std::ofstream c(ctx_path), t(tgt_path);
    c << "0.5,1.0\n-0.25,2.0\n";
    t << "1.5\n2.5\n";
  }
  const std::int64_t lens1[] = {2};
  const auto ds = import_csv(ctx_path, tgt_path, lens1);
  CHECK(ds.sequences.size() == 1);
  CHECK(ds.sequences[0].context.rows() == 2);
  CHECK(ds.sequences[0].context(1, 0) == -0.25);
  CHECK(ds.sequences[0].target(1, 0) == 2.5);

  const std::int64_t lens_bad[] = {3};
  CHECK_THROWS_AS(import_csv(ctx_path, tgt_path, lens_bad), InvalidArgument);

  {
    std::ofstream c(ctx_path);
    c << "0.5,oops\n1.0,2.0\n";
  }
  try {
    (void)import_csv(ctx_path, tgt_path, lens1);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 1") != std::string::npos);
    CHECK(msg.find("column 2") != std::string::npos);
  }
  std::filesystem::remove(ctx_path);
  std::filesystem::remove(tgt_path);
}

TEST_CASE("norm stats: apply gives zero mean unit variance; invert recovers") {
  const auto ds = small_dataset(3);
  const auto stats = fit_norm_stats(ds);
  const auto normalized = apply_norm(ds, stats);

  for (bool context : {true, false}) {
    const std::int64_t d =
        context ? ds.context_dim() : ds.target_dim();
    for (std::int64_t j = 0; j < d; ++j) {
      double mean = 0.0;
      std::int64_t n = 0;
      for (const auto& s : normalized.sequences) {
        const auto& m = context ? s.context : s.target;
        for (std::int64_t t = 0; t < m.rows(); ++t, ++n) mean += m(t, j);
      }
      mean /= static_cast<double>(n);
      double var = 0.0;
      for (const auto& s : normalized.sequences) {
        const auto& m = context ? s.context : s.target;
        for (std::int64_t t = 0; t < m.rows(); ++t)
          var += (m(t, j) - mean) * (m(t, j) - mean);
      }
      var /= static_cast<double>(n);
      CHECK(std::abs(mean) <= 1e-10);
      CHECK(std::abs(var - 1.0) <= 1e-10);
    }
  }

  for (std::size_t i = 0; i < ds.sequences.size(); ++i) {
    const auto back =
        invert_norm(normalized.sequences[i].target, stats.target);
    CHECK(max_abs_diff(back, ds.sequences[i].target) <= 1e-10);
  }
}

TEST_CASE("norm stats: constant dimension is clamped and flagged") {
  Dataset ds;
  ds.meta.names = {"context", "target"};
  SequencePair pair{FrameSequence(4, 2), FrameSequence(4, 1)};
  for (std::int64_t t = 0; t < 4; ++t) {
    pair.context(t, 0) = 7.0;  // constant dim
    pair.context(t, 1) = static_cast<double>(t);
    pair.target(t, 0) = static_cast<double>(t * t);
  }
  ds.sequences.push_back(pair);
  const auto stats = fit_norm_stats(ds);
  REQUIRE(stats.context.clamped_dims.size() == 1);
  CHECK(stats.context.clamped_dims[0] == 0);
  CHECK(stats.context.stdev[0] == 1.0);
  CHECK(stats.target.clamped_dims.empty());
  CHECK_THROWS_AS(fit_norm_stats(Dataset{}), InvalidArgument);
}

TEST_CASE("norm stats: file round-trip") {
  const auto ds = small_dataset(4);
  const auto stats = fit_norm_stats(ds);
  const auto path = temp_path("mmn_stats.mmst");
  write_norm_stats(stats, path);
  const auto back = read_norm_stats(path);
  CHECK(back == stats);
  std::filesystem::remove(path);
}

TEST_CASE("oracle moments: closed forms") {
  auto gauss = OracleSpec::for_family(OracleFamily::kConditionalGaussian);
  gauss.mu_amp = 0.0;
  gauss.mu_slope = 2.0;
  gauss.s0 = 1.0;
  const auto m = oracle_conditional_moments(gauss, std::vector<double>{3.0});
  CHECK(m.mean[0] == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(m.variance[0] == doctest::Approx(1.0).epsilon(1e-12));

  auto bimodal = OracleSpec::for_family(OracleFamily::kConditionalBimodal);
  bimodal.bimodal_offset = 1.5;
  bimodal.s0 = 0.25;
  const auto mb =
      oracle_conditional_moments(bimodal, std::vector<double>{0.7});
  for (std::int64_t dcheck = 0; dcheck < bimodal.target_dim; ++dcheck)
    CHECK(mb.variance[static_cast<std::size_t>(dcheck)] ==
          doctest::Approx(0.25 * 0.25 + 1.5 * 1.5).epsilon(1e-12));
  CHECK(mb.bimodal);
  CHECK(mb.component_offset == 1.5);

  auto hetero = OracleSpec::for_family(OracleFamily::kHeteroscedastic);
  hetero.spread_form = SpreadForm::kAbsContext;
  hetero.s0 = 1.0;
  const auto mh =
      oracle_conditional_moments(hetero, std::vector<double>{0.0});
  CHECK(mh.variance[0] == 0.0);
}

TEST_CASE("oracle: zero spread makes targets equal the mean") {
  auto spec = OracleSpec::for_family(OracleFamily::kHeteroscedastic);
  spec.spread_form = SpreadForm::kConstant;
  spec.s0 = 0.0;
  Rng rng(5);
  const auto ds = synth_oracle_dataset(spec, 2, 50, rng);
  for (const auto& seq : ds.sequences)
    for (std::int64_t t = 0; t < seq.context.rows(); ++t) {
      const auto m = oracle_conditional_moments(
          spec, seq.context.row(t));
      for (std::int64_t j = 0; j < spec.target_dim; ++j)
        CHECK(seq.target(t, j) ==
              doctest::Approx(m.mean[static_cast<std::size_t>(j)])
                  .epsilon(1e-6));
    }
}

TEST_CASE("oracle: binned sample means converge to closed-form moments") {
  auto spec = OracleSpec::for_family(OracleFamily::kConditionalGaussian);
  Rng rng(6);
  const auto ds = synth_oracle_dataset(spec, 20, 5000, rng);
  // Bin by x in [-0.4, 0.4]; compare against the moment at the bin mean.
  std::vector<double> xs;
  std::vector<std::vector<double>> ys(2);
  for (const auto& seq : ds.sequences)
    for (std::int64_t t = 0; t < seq.context.rows(); ++t) {
      const double x = seq.context(t, 0);
      if (std::abs(x) <= 0.4) {
        xs.push_back(x);
        ys[0].push_back(seq.target(t, 0));
        ys[1].push_back(seq.target(t, 1));
      }
    }
  REQUIRE(xs.size() > 3000);
  double xbar = 0.0;
  for (double x : xs) xbar += x;
  xbar /= static_cast<double>(xs.size());
  const auto m = oracle_conditional_moments(spec, std::vector<double>{xbar});
  // The AR(1) target noise correlates nearby frames; shrink the sample
  // count to the effective one before sizing the Monte-Carlo band.
  const double neff = static_cast<double>(xs.size()) *
                      (1.0 - spec.noise_ar) / (1.0 + spec.noise_ar);
  for (int j = 0; j < 2; ++j) {
    double mean = 0.0;
    for (double v : ys[static_cast<std::size_t>(j)]) mean += v;
    mean /= static_cast<double>(ys[static_cast<std::size_t>(j)].size());
    const double mc_band =
        3.0 * std::sqrt(m.variance[static_cast<std::size_t>(j)] / neff);
    const double bin_slack = 0.03;
    CHECK(std::abs(mean - m.mean[static_cast<std::size_t>(j)]) <=
          mc_band + bin_slack);
  }
}

TEST_CASE("oracle: same seed gives identical dataset files") {
  const auto a = small_dataset(7);
  const auto b = small_dataset(7);
  CHECK(a == b);
  const auto pa = temp_path("mmn_ds_a.mmd");
  const auto pb = temp_path("mmn_ds_b.mmd");
  write_dataset(a, pa);
  write_dataset(b, pb);
  CHECK(read_bytes(pa) == read_bytes(pb));
  std::filesystem::remove(pa);
  std::filesystem::remove(pb);
}

TEST_CASE("oracle: condition codes shift the mean") {
  auto spec = OracleSpec::for_family(OracleFamily::kConditionalGaussian);
  spec.code_count = 3;
  spec.code_shift = 0.5;
  const auto c0 = oracle_context_frame(spec, 0.3, 0);
  const auto c2 = oracle_context_frame(spec, 0.3, 2);
  const auto m0 = oracle_conditional_moments(spec, c0);
  const auto m2 = oracle_conditional_moments(spec, c2);
  CHECK(m2.mean[0] - m0.mean[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(oracle_context_frame(spec, 0.0, 5), InvalidArgument);
}

TEST_CASE("oracle spec validation") {
  auto spec = OracleSpec::for_family(OracleFamily::kHeteroscedastic);
  spec.s0 = 0.1;
  spec.s1 = 0.4;  // tanh ramp would go negative
  CHECK_THROWS_AS(spec.validate(), InvalidArgument);
  spec = OracleSpec::for_family(OracleFamily::kHeteroscedastic);
  spec.noise_ar = 1.0;
  CHECK_THROWS_AS(spec.validate(), InvalidArgument);
  spec = OracleSpec::for_family(OracleFamily::kHeteroscedastic);
  Rng rng(8);
  CHECK_THROWS_AS(synth_oracle_dataset(spec, 1, 0, rng), InvalidArgument);
}

TEST_CASE("quantize_f32 matches file storage") {
  Matrix m(1, 3);
  m(0, 0) = 0.1;  // not f32-representable
  m(0, 1) = 0.5;  // exactly representable
  m(0, 2) = 1.0 / 3.0;
  const Matrix q = quantize_f32(m);
  CHECK(q(0, 1) == 0.5);
  CHECK(q(0, 0) == static_cast<double>(0.1f));
  CHECK(q(0, 0) != 0.1);
}
