// End-to-end exercises of the command-line pipeline: exit codes, file
// outputs, and rerun determinism.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "mmn/dataio.hpp"
#include "mmn/evaluation.hpp"
#include "mmn/network.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kCli = MMN_CLI_PATH;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / "mmn_cli_test";
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const char* name) const {
    return (path / name).string();
  }
};

int run(const std::string& args) {
  const std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string read_bytes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("cli: full pipeline, determinism, exit codes") {
  TempDir dir;
  const auto data = dir / "train.mmd";
  const auto test_data = dir / "test.mmd";

  SUBCASE("usage errors exit 1") {
    CHECK(run("definitely-not-a-subcommand") == 1);
    CHECK(run("gen-data --no-such-flag 3 --out " + data) == 1);
    CHECK(run("train-generator --lambda -1 --data x --out y") == 1);
    CHECK(run("") == 1);
  }

  SUBCASE("missing files exit 2") {
    CHECK(run("inspect " + (dir / "absent.mmd")) == 2);
    CHECK(run("train-baseline --data " + (dir / "absent.mmd") + " --out " +
              (dir / "b.mmnc") + " --stats-out " + (dir / "s.mmst")) == 2);
  }

  SUBCASE("help exists everywhere") {
    CHECK(run("--help") == 0);
    for (const char* sub :
         {"gen-data", "train-baseline", "extract-bottleneck",
          "train-generator", "sample", "eval", "inspect"})
      CHECK(run(std::string(sub) + " --help") == 0);
  }

  SUBCASE("pipeline produces readable artifacts and is rerun-stable") {
    CHECK(run("gen-data --family heteroscedastic --seqs 6 --frames 60 "
              "--seed 7 --out " + data) == 0);
    const auto ds = mmn::read_dataset(data);
    CHECK(ds.sequences.size() == 6);
    CHECK(ds.total_frames() == 360);

    // Same seed, same bytes.
    const auto data2 = dir / "train2.mmd";
    CHECK(run("gen-data --family heteroscedastic --seqs 6 --frames 60 "
              "--seed 7 --out " + data2) == 0);
    CHECK(read_bytes(data) == read_bytes(data2));

    CHECK(run("gen-data --family heteroscedastic --seqs 2 --frames 40 "
              "--seed 8 --out " + test_data) == 0);

    const auto baseline = dir / "baseline.mmnc";
    const auto stats = dir / "stats.mmst";
    CHECK(run("train-baseline --data " + data + " --out " + baseline +
              " --stats-out " + stats +
              " --epochs 3 --hidden 8,8 --chunk 30 --seed 1") == 0);
    CHECK(mmn::load_checkpoint(baseline).params.layout.input_dim == 1);

    const auto bnd = dir / "bottleneck.mmd";
    CHECK(run("extract-bottleneck --data " + data + " --baseline " + baseline +
              " --stats " + stats + " --out " + bnd) == 0);
    CHECK(mmn::read_dataset(bnd).context_dim() == 8);

    const auto gen = dir / "generator.mmnc";
    CHECK(run("train-generator --data " + bnd + " --out " + gen +
              " --epochs 2 --hidden 8,8 --chunk 30 --noise-dim 2 --seed 2 "
              "--log " + (dir / "train.jsonl")) == 0);
    CHECK(mmn::load_checkpoint(gen).params.layout.input_dim == 10);

    const auto traj1 = dir / "traj1";
    const auto traj2 = dir / "traj2";
    const std::string sample_args =
        "sample --data " + test_data + " --baseline " + baseline +
        " --generator " + gen + " --stats " + stats +
        " --realizations 3 --seed 3 --out ";
    CHECK(run(sample_args + traj1) == 0);
    CHECK(run(sample_args + traj2) == 0);
    int files = 0;
    for (const auto& entry : fs::directory_iterator(traj1)) {
      const auto other = fs::path(traj2) / entry.path().filename();
      CHECK(fs::exists(other));
      CHECK(read_bytes(entry.path().string()) == read_bytes(other.string()));
      ++files;
    }
    CHECK(files == 2 * 3);

    // Deterministic mode: realization index does not matter.
    const auto det = dir / "det";
    CHECK(run(sample_args + det + " --deterministic") == 0);
    CHECK(read_bytes((fs::path(det) / "seq0000_r00.csv").string()) ==
          read_bytes((fs::path(det) / "seq0000_r01.csv").string()));

    const auto report = dir / "report.json";
    CHECK(run("eval --family heteroscedastic --data " + test_data +
              " --baseline " + baseline + " --generator " + gen + " --stats " +
              stats + " --n-draws 50 --mmd-draws 60 --mmd-perms 5 "
              "--variation-realizations 3 --seed 4 --format json --out " +
              report) == 0);
    const auto rep = mmn::read_report(report);
    CHECK(!rep.entries.empty());
    bool has_variation = false;
    for (const auto& e : rep.entries)
      if (e.name == "variation_score" && e.system == "pro_without_rand") {
        has_variation = true;
        CHECK(e.value == 0.0);
      }
    CHECK(has_variation);

    CHECK(run("inspect " + data) == 0);
    CHECK(run("inspect " + baseline) == 0);
    CHECK(run("inspect " + stats) == 0);
  }
}
