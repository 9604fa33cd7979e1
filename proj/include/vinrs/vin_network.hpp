#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vinrs/autodiff.hpp"
#include "vinrs/experience_graph.hpp"
#include "vinrs/gridworld.hpp"
#include "vinrs/messages.hpp"
#include "vinrs/optim.hpp"

namespace vinrs {

struct VinConfig {
  int k_iterations = 26;  // value-iteration depth; ~2x grid width upper-bounds
                          // four-rooms shortest paths
  int h_channels = 8;     // channels of the pixel-processing conv
  int q_channels = kNumActions;
  int kernel_size = 3;    // odd
  int fn_hidden = 32;
  double eta = 10.0;      // recursive-loss weight
  int train_period = 10;  // N: episodes between training rounds
  int k_train = 20;       // optimizer steps per training round
  double tau = 1.0;       // optimality temperature
  double learning_rate = 1e-3;
};

/// Records the channel-max selections of a forward pass so a later pass can
/// replay them; keeps the selection pattern fixed across the +/-h evaluations
/// of a finite-difference gradient check.
struct MaxSelectionTrace {
  bool replay = false;
  std::vector<std::vector<int>> selections;
  std::size_t cursor = 0;

  void rewind() { cursor = 0; }
};

/// The VIN-RS network: cnnH processes the observation planes, cnnR maps them
/// to a one-channel reward image, wQ/wV carry the learned transition kernels
/// of the value-iteration loop, and fn/opt squash the final Q volume into one
/// potential value per action.
class VinNetwork {
 public:
  VinNetwork(const VinConfig& config, int height, int width, std::uint64_t seed);

  const VinConfig& config() const { return config_; }
  int height() const { return height_; }
  int width() const { return width_; }

  std::vector<nn::Parameter>& params() { return params_; }
  nn::Parameter& param(const std::string& name);

  struct ForwardResult {
    nn::Var phi;   // [x], sigmoid-squashed
    nn::Var qmap;  // [x,H,W] after the final refinement
    nn::Var vmap;  // [H,W]
  };

  /// Full forward pass with k value iterations plus one final refinement;
  /// k <= 0 uses the configured depth.
  ForwardResult forward(const ObservationImage& obs, int k = 0,
                        MaxSelectionTrace* trace = nullptr) const;

  /// One value-iteration step, q = wQ*r + wV*v.
  nn::Var evaluate_q(const nn::Var& rmap, const nn::Var& vmap) const;
  /// The same step phrased as concat(r,v) convolved with concat(wQ,wV);
  /// numerically identical to evaluate_q.
  nn::Var evaluate_q_concat(const nn::Var& rmap, const nn::Var& vmap) const;

  /// Potential of one (state, action) pair under the current weights.
  double potential(const Gridworld& world, StateId s, Action a) const;

  /// Checkpoint round trip; the loader validates every shape.
  std::string save_checkpoint() const;
  void load_checkpoint(const std::string& text);

 private:
  VinConfig config_;
  int height_, width_;
  std::vector<nn::Parameter> params_;
  // parameter indices
  enum { kHKernel = 0, kHBias, kRKernel, kRBias, kWQ, kWV, kFnW, kFnB, kOptW, kOptB };
};

/// gamma*phi(s',a') - phi(s,a) under the current network weights.
double lookahead_advice(const VinNetwork& net, const Gridworld& world, StateId s,
                        Action a, StateId s_next, Action a_next, double gamma);

/// One Alg.-1 training step: forward every node's image, gather phi(s,a) per
/// graph node, build the message-passing loss, backpropagate, and take one
/// optimizer step. images must be indexed by graph node. Returns the loss.
double train_step(VinNetwork& net, const std::vector<ObservationImage>& images,
                  const ExperienceGraph& g, const MessageTable& labels,
                  nn::AdamOptimizer& optimizer);

/// Convenience overload computing labels from the graph (ceiling at the
/// graph's max reward, temperature from the network config).
double train_step(VinNetwork& net, const std::vector<ObservationImage>& images,
                  const ExperienceGraph& g, nn::AdamOptimizer& optimizer);

}  // namespace vinrs
