#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "vinrs/actor_critic.hpp"
#include "vinrs/experience_graph.hpp"
#include "vinrs/gridworld.hpp"
#include "vinrs/vin_network.hpp"

namespace vinrs {

enum class ShapingMode { None, ExactMessages, Cnn };

const char* shaping_mode_name(ShapingMode mode);
ShapingMode shaping_mode_from_name(const std::string& name);

struct TrainConfig {
  int episodes = 500;
  double gamma = 0.99;
  double lambda = 0.95;
  double epsilon = 0.1;      // random-action probability
  double alpha_mix = 0.9;
  double actor_lr = 0.1;
  double critic_lr = 0.1;
  ShapingMode shaping_mode = ShapingMode::None;
  VinConfig vin;             // CNN depth, eta, train period N, inner steps
  bool reset_graph_each_round = true;
};

struct EpisodeMetrics {
  int episode = 0;  // 1-based
  int steps = 0;
  long long cumulative_steps = 0;
  double episode_return = 0.0;
  double shaped_return = 0.0;
  double cnn_loss = 0.0;  // last training round's final loss
};

/// Runs the full training loop: per episode a SARSA rollout feeding the
/// experience graph, a CNN (or exact message passing) refresh of the
/// potential table every N episodes, and the mixed-return actor-critic
/// update. Deterministic given (world, config, seed).
std::vector<EpisodeMetrics> train(const Gridworld& world, const TrainConfig& config,
                                  std::uint64_t seed);

}  // namespace vinrs
