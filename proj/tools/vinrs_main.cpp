#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <iostream>

#include "vinrs/experiment.hpp"
#include "vinrs/gridworld.hpp"

namespace {

std::uint64_t seed_offset_from_env() {
  const char* raw = std::getenv("VINRS_SEED_OFFSET");
  if (!raw || !*raw) return 0;
  char* end = nullptr;
  const long long v = std::strtoll(raw, &end, 10);
  if (end == raw || *end != '\0' || v < 0)
    throw std::invalid_argument("VINRS_SEED_OFFSET must be a non-negative integer");
  return static_cast<std::uint64_t>(v);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vinrs: reward-shaping workbench on tabular gridworlds"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "run the configured experiment grid");
  run->add_option("config", config_path, "path to a key = value config file")
      ->required();

  auto* selfcheck_cmd =
      app.add_subcommand("selfcheck", "oracle and consistency checks, one line each");

  std::string csv_dir;
  auto* plotdata = app.add_subcommand("plotdata", "write per-mode mean/stddev curves");
  plotdata->add_option("dir", csv_dir, "directory holding <mode>_<seed>.csv files")
      ->required();

  auto* gradcheck_cmd = app.add_subcommand(
      "gradcheck", "finite-difference check of the full network gradient");

  std::string env_name = "four_rooms";
  int n_traps = 8;
  double penalty = -1.0;
  std::uint64_t trap_seed = 7;
  auto* map_dump = app.add_subcommand("map-dump", "print an environment map");
  map_dump->add_option("env", env_name, "four_rooms | four_rooms_traps");
  map_dump->add_option("--traps", n_traps, "trap count (four_rooms_traps)");
  map_dump->add_option("--penalty", penalty, "trap penalty (negative)");
  map_dump->add_option("--seed", trap_seed, "trap placement seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const auto config = vinrs::load_config(config_path);
      vinrs::run_experiment(config, seed_offset_from_env());
      std::printf("wrote run CSVs and summary.csv to %s\n", config.output_dir.c_str());
      return 0;
    }
    if (*selfcheck_cmd) return vinrs::selfcheck(std::cout) ? 0 : 1;
    if (*plotdata) {
      vinrs::write_plot_data(csv_dir);
      std::printf("wrote per-mode curve files to %s\n", csv_dir.c_str());
      return 0;
    }
    if (*gradcheck_cmd) {
      const double err = vinrs::full_gradcheck_error();
      std::printf("full-network gradient check: max rel err = %.3e (threshold 1e-4)\n",
                  err);
      return err < 1e-4 ? 0 : 1;
    }
    if (*map_dump) {
      vinrs::Gridworld world = env_name == "four_rooms_traps"
                                   ? vinrs::four_rooms_traps(n_traps, penalty, trap_seed)
                                   : vinrs::four_rooms();
      std::fputs(vinrs::to_map_text(world).c_str(), stdout);
      return 0;
    }
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
