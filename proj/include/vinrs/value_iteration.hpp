#pragma once

#include <array>
#include <vector>

#include "vinrs/gridworld.hpp"

namespace vinrs {

/// Converged Bellman tables. `q` holds the per-action score whose argmax
/// defines `greedy` (ties broken by action order Up<Down<Left<Right).
struct ValueIterationResult {
  std::vector<double> values;
  std::vector<std::array<double, kNumActions>> q;
  std::vector<Action> greedy;
  int sweeps = 0;
};

/// Synchronous Bellman sweeps until the sup-norm change drops below tol.
/// The goal state is absorbing with a fixed value of goal_reward; transition
/// rewards are the trap penalty when the entered cell is a trap, otherwise
/// step_reward. For gamma == 1 the step reward must be negative.
ValueIterationResult exact_value_iteration(const Gridworld& world, double tol);

/// Value iteration over rewards shaped with a state potential,
/// r' = r + gamma*phi(s') - phi(s), with phi treated as 0 on entering the
/// goal. Preserves the greedy argmax structure of the unshaped MDP.
ValueIterationResult shaped_value_iteration_state(const Gridworld& world,
                                                  const std::vector<double>& phi,
                                                  double tol);

/// Value iteration over look-ahead-shaped rewards,
/// r' = r + gamma*phi(s',a') - phi(s,a). The next action inside the sweep is
/// chosen to maximize phi(s',a') + Q(s',a'), which is also the score reported
/// in `q`; its argmax matches the unshaped greedy policy.
ValueIterationResult shaped_value_iteration_lookahead(
    const Gridworld& world, const std::vector<std::array<double, kNumActions>>& phi,
    double tol);

/// Actions whose score is within eps of the per-state maximum.
std::vector<std::vector<Action>> greedy_tie_sets(const ValueIterationResult& vi,
                                                 double eps);

}  // namespace vinrs
