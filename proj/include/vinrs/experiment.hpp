#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vinrs/trainer.hpp"

namespace vinrs {

/// Flat `key = value` experiment description; every field defaults to the
/// values the training loop and network use on four rooms.
struct ExperimentConfig {
  std::string env = "four_rooms";  // four_rooms | four_rooms_traps
  int n_traps = 8;
  double trap_penalty = -1.0;
  std::uint64_t trap_seed = 7;
  TrainConfig train;
  std::vector<ShapingMode> modes{ShapingMode::None, ShapingMode::ExactMessages,
                                 ShapingMode::Cnn};
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir = "out";
  int threads = 0;  // 0 -> hardware concurrency

  Gridworld make_world() const;
};

/// Parses the config text; unknown keys and malformed values are errors.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Runs every (mode, seed) pair, writing `<mode>_<seed>.csv` per run plus
/// `summary.csv` with per-mode mean/stddev of cumulative steps at episodes
/// 100/300/500. The seed offset (VINRS_SEED_OFFSET) is added to every seed.
/// Deterministic: identical inputs produce byte-identical files.
void run_experiment(const ExperimentConfig& config, std::uint64_t seed_offset);

/// Writes per-mode `<mode>_curve.dat` files (`episode mean lo hi`, lo/hi =
/// mean -/+ stddev over seeds) next to the CSVs in csv_dir.
void write_plot_data(const std::filesystem::path& csv_dir);

/// Oracle/self-consistency checks; returns false (and prints the failing
/// line) on any failure.
bool selfcheck(std::ostream& out);

/// Max relative error of the full-network gradient against central finite
/// differences (h = 1e-5) on the standard 5-node corridor fixture.
double full_gradcheck_error();

std::string metrics_to_csv(const std::vector<EpisodeMetrics>& metrics);
std::vector<EpisodeMetrics> metrics_from_csv(const std::string& text);

}  // namespace vinrs
