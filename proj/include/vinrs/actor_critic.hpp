#pragma once

#include <array>
#include <vector>

#include "vinrs/gridworld.hpp"
#include "vinrs/rng.hpp"

namespace vinrs {

/// Tabular softmax preferences. Action selection mixes the softmax with
/// epsilon-uniform exploration; the policy-gradient update uses the exact
/// softmax score function.
struct PolicyTable {
  std::vector<std::array<double, kNumActions>> theta;
  double epsilon = 0.1;

  explicit PolicyTable(int n_states, double eps = 0.1)
      : theta(static_cast<std::size_t>(n_states), {0, 0, 0, 0}), epsilon(eps) {}

  std::array<double, kNumActions> softmax(StateId s) const;

  /// Softmax mixed with the epsilon-uniform exploration mass; sums to 1.
  std::array<double, kNumActions> action_probs(StateId s) const;
};

struct CriticTable {
  std::vector<double> v;
  double lambda = 0.95;

  explicit CriticTable(int n_states, double lam = 0.95)
      : v(static_cast<std::size_t>(n_states), 0.0), lambda(lam) {}
};

Action select_action(const PolicyTable& policy, StateId s, Rng& rng);

/// Per-(state,action) potentials. Pairs can be marked unknown (no label
/// observed yet); advice involving an unknown pair is withheld rather than
/// defaulted to zero, so an incomplete table never punishes exploration.
struct PotentialTable {
  std::vector<std::array<double, kNumActions>> phi;
  std::vector<std::array<std::uint8_t, kNumActions>> known;

  PotentialTable() = default;
  explicit PotentialTable(int n_states, bool all_known = true)
      : phi(static_cast<std::size_t>(n_states), {0, 0, 0, 0}),
        known(static_cast<std::size_t>(n_states),
              all_known ? std::array<std::uint8_t, kNumActions>{1, 1, 1, 1}
                        : std::array<std::uint8_t, kNumActions>{0, 0, 0, 0}) {}

  double at(StateId s, Action a) const {
    return phi.empty() ? 0.0
                       : phi[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)];
  }
  bool is_known(StateId s, Action a) const {
    return !known.empty() &&
           known[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)] != 0;
  }
  void set(StateId s, Action a, double value) {
    phi[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)] = value;
    known[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)] = 1;
  }
};

/// Look-ahead shaped reward r + gamma*phi(s',a') - phi(s,a). Transitions into
/// the absorbing goal use phi(s',a') = 0; at a step-cap truncation the next
/// pair was never chosen, so advice is withheld and r passes through, which
/// also keeps the telescoping identity exact on truncated trajectories. A
/// null potential table, or one lacking either pair, returns r unchanged.
double shaped_reward(double r, StateId s, Action a, StateId s_next, Action a_next,
                     bool absorbing_end, bool truncated_end, const PotentialTable* phi,
                     double gamma);

struct TrajectoryStep {
  StateId s;
  Action a;
  double reward;
  StateId next;
  Action a_next;    // meaningful only when !episode_end
  bool reached_goal;
  bool timeout;
  bool episode_end() const { return reached_goal || timeout; }
};

struct UpdateConfig {
  double gamma = 0.99;
  double alpha_mix = 0.9;  // weight of the original-reward return in Q_comb
  double actor_lr = 0.1;
  double critic_lr = 0.1;
};

struct UpdateStats {
  double actor_grad_norm = 0.0;
  double critic_loss = 0.0;
};

/// Offline episode update. lambda-returns over original and shaped rewards
/// are computed from the pre-update critic; Q_comb mixes them with alpha_mix,
/// and the actor takes exact softmax-score steps on the advantage while the
/// critic tracks the original-reward return. phi may be null (no shaping).
UpdateStats episode_update(PolicyTable& policy, CriticTable& critic,
                           const std::vector<TrajectoryStep>& trajectory,
                           const PotentialTable* phi, const UpdateConfig& config);

}  // namespace vinrs
