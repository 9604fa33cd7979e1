#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "vinrs/experiment.hpp"

using namespace vinrs;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("vinrs_test_" + std::to_string(std::rand()) + std::to_string(std::rand()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("config parsing: defaults, overrides, comments, errors") {
  auto cfg = parse_config(
      "# experiment setup\n"
      "env = four_rooms_traps\n"
      "n_traps = 4\n"
      "episodes = 25   # short run\n"
      "alpha_mix = 0.8\n"
      "modes = none, cnn\n"
      "seeds = 3, 5, 8\n"
      "eta = 5\n"
      "output_dir = /tmp/somewhere\n");
  CHECK(cfg.env == "four_rooms_traps");
  CHECK(cfg.n_traps == 4);
  CHECK(cfg.train.episodes == 25);
  CHECK(cfg.train.alpha_mix == 0.8);
  CHECK(cfg.train.vin.eta == 5.0);
  CHECK(cfg.modes == std::vector<ShapingMode>{ShapingMode::None, ShapingMode::Cnn});
  CHECK(cfg.seeds == std::vector<std::uint64_t>{3, 5, 8});

  // paper-backed defaults
  ExperimentConfig d;
  CHECK(d.train.gamma == 0.99);
  CHECK(d.train.lambda == 0.95);
  CHECK(d.train.alpha_mix == 0.9);
  CHECK(d.train.vin.eta == 10.0);
  CHECK(d.train.epsilon == 0.1);

  CHECK_THROWS_AS(parse_config("episodes\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("bogus_key = 3\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("episodes = abc\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("modes = warp\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("modes =\n"), std::invalid_argument);
}

TEST_CASE("metrics csv round trip and load validation") {
  std::vector<EpisodeMetrics> m{{1, 10, 10, -0.1, -0.1, 0.0},
                                {2, 7, 17, 0.93, 0.91, 0.25}};
  const std::string csv = metrics_to_csv(m);
  auto back = metrics_from_csv(csv);
  REQUIRE(back.size() == 2);
  CHECK(back[1].steps == 7);
  CHECK(back[1].cumulative_steps == 17);
  CHECK(back[1].episode_return == 0.93);

  CHECK_THROWS(metrics_from_csv("bad header\n1,1,1,0,0,0\n"));
  // broken prefix sum
  CHECK_THROWS(metrics_from_csv(
      "episode,steps,cumulative_steps,return,shaped_return,cnn_loss\n"
      "1,10,11,0,0,0\n"));
  // episodes out of order
  CHECK_THROWS(metrics_from_csv(
      "episode,steps,cumulative_steps,return,shaped_return,cnn_loss\n"
      "2,10,10,0,0,0\n"));
}

TEST_CASE("run_experiment writes per-run csvs and a summary, deterministically") {
  TempDir dir;
  ExperimentConfig cfg;
  cfg.env = "four_rooms";
  cfg.train.episodes = 10;
  cfg.modes = {ShapingMode::None};
  cfg.seeds = {1, 2};
  cfg.threads = 2;
  cfg.output_dir = (dir.path / "a").string();
  run_experiment(cfg, 0);

  const auto csv1 = slurp(dir.path / "a" / "a2c_1.csv");
  const auto csv2 = slurp(dir.path / "a" / "a2c_2.csv");
  CHECK(metrics_from_csv(csv1).size() == 10);
  CHECK(metrics_from_csv(csv2).size() == 10);
  CHECK(csv1 != csv2);  // different seeds differ

  // byte-identical re-execution
  cfg.output_dir = (dir.path / "b").string();
  run_experiment(cfg, 0);
  CHECK(slurp(dir.path / "b" / "a2c_1.csv") == csv1);
  CHECK(slurp(dir.path / "b" / "a2c_2.csv") == csv2);
  CHECK(slurp(dir.path / "a" / "summary.csv") == slurp(dir.path / "b" / "summary.csv"));

  // the seed offset relabels runs: offset 1 seed 1 == plain seed 2
  cfg.seeds = {1};
  cfg.output_dir = (dir.path / "c").string();
  run_experiment(cfg, 1);
  CHECK(slurp(dir.path / "c" / "a2c_2.csv") == csv2);

  // summary has one row per mode/checkpoint within range (10 < 100: none)
  const auto summary = slurp(dir.path / "a" / "summary.csv");
  CHECK(summary ==
        "mode,episode,mean_cumulative_steps,stddev_cumulative_steps\n");
}

TEST_CASE("plotdata: single seed lo=hi=mean; identical seeds give zero spread") {
  TempDir dir;
  // hand fixture: two 3-row csvs for one mode
  const char* header = "episode,steps,cumulative_steps,return,shaped_return,cnn_loss\n";
  {
    std::ofstream a(dir.path / "a2c_1.csv");
    a << header << "1,4,4,0,0,0\n2,6,10,0,0,0\n3,2,12,0,0,0\n";
    std::ofstream b(dir.path / "a2c_2.csv");
    b << header << "1,8,8,0,0,0\n2,6,14,0,0,0\n3,4,18,0,0,0\n";
    std::ofstream c(dir.path / "phi_ab_7.csv");
    c << header << "1,5,5,0,0,0\n2,5,10,0,0,0\n3,5,15,0,0,0\n";
  }
  write_plot_data(dir.path);

  // hand-computed mean/std for the pair: cum (4,8),(10,14),(12,18)
  const std::string a2c = slurp(dir.path / "a2c_curve.dat");
  std::istringstream in(a2c);
  double ep, mean, lo, hi;
  in >> ep >> mean >> lo >> hi;
  CHECK(mean == 6.0);
  CHECK(lo == doctest::Approx(6.0 - std::sqrt(8.0)));
  CHECK(hi == doctest::Approx(6.0 + std::sqrt(8.0)));

  // single seed: lo = hi = mean
  const std::string ab = slurp(dir.path / "phi_ab_curve.dat");
  std::istringstream in2(ab);
  in2 >> ep >> mean >> lo >> hi;
  CHECK(mean == 5.0);
  CHECK(lo == 5.0);
  CHECK(hi == 5.0);
}

TEST_CASE("make_world applies env selection and validates names") {
  ExperimentConfig cfg;
  cfg.env = "four_rooms_traps";
  cfg.n_traps = 3;
  CHECK(cfg.make_world().traps.size() == 3);
  cfg.env = "atari";
  CHECK_THROWS_AS(cfg.make_world(), std::invalid_argument);
}
