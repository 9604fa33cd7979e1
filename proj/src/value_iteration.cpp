#include "vinrs/value_iteration.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

namespace vinrs {

namespace {

struct Transition {
  StateId next;
  double reward;  // trap penalty or step reward of the entered cell
};

std::vector<std::array<Transition, kNumActions>> transition_table(const Gridworld& w) {
  std::vector<std::array<Transition, kNumActions>> t(
      static_cast<std::size_t>(w.num_states()));
  for (StateId s = 0; s < w.num_states(); ++s)
    for (int a = 0; a < kNumActions; ++a) {
      const StepResult r = step(w, s, static_cast<Action>(a));
      const int next_cell = w.state_to_cell[static_cast<std::size_t>(r.next)];
      double move_reward = w.step_reward;
      if (auto it = w.traps.find(next_cell); it != w.traps.end()) move_reward = it->second;
      t[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)] = {r.next, move_reward};
    }
  return t;
}

void check_convergent(const Gridworld& w) {
  if (w.gamma < 1.0) return;
  if (w.step_reward >= 0.0)
    throw std::invalid_argument(
        "value iteration: gamma == 1 requires a negative step reward");
}

ValueIterationResult run_sweeps(
    const Gridworld& w,
    // score(s, a, next, V) -> the per-action quantity maximized by the sweep
    const std::function<double(StateId, int, const Transition&, const std::vector<double>&)>& score,
    double tol) {
  check_convergent(w);
  if (tol <= 0.0) throw std::invalid_argument("value iteration: tol must be positive");

  const auto trans = transition_table(w);
  const StateId goal = w.goal_state();
  const int n = w.num_states();

  std::vector<double> v(static_cast<std::size_t>(n), 0.0);
  v[static_cast<std::size_t>(goal)] = w.goal_reward;
  std::vector<double> next_v(v);

  ValueIterationResult out;
  const int max_sweeps = 1000000;
  for (out.sweeps = 1; out.sweeps <= max_sweeps; ++out.sweeps) {
    double delta = 0.0;
    for (StateId s = 0; s < n; ++s) {
      if (s == goal) continue;
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < kNumActions; ++a) {
        const double q = score(s, a, trans[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)], v);
        if (q > best) best = q;
      }
      next_v[static_cast<std::size_t>(s)] = best;
      delta = std::max(delta, std::fabs(best - v[static_cast<std::size_t>(s)]));
    }
    std::swap(v, next_v);
    if (delta < tol) break;
  }

  out.values = v;
  out.q.assign(static_cast<std::size_t>(n), {});
  out.greedy.assign(static_cast<std::size_t>(n), Action::Up);
  for (StateId s = 0; s < n; ++s) {
    if (s == goal) {
      out.q[static_cast<std::size_t>(s)].fill(w.goal_reward);
      continue;
    }
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < kNumActions; ++a) {
      const double q = score(s, a, trans[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)], v);
      out.q[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)] = q;
      if (q > best) {
        best = q;
        out.greedy[static_cast<std::size_t>(s)] = static_cast<Action>(a);
      }
    }
  }
  return out;
}

}  // namespace

ValueIterationResult exact_value_iteration(const Gridworld& world, double tol) {
  return run_sweeps(
      world,
      [&world](StateId, int, const Transition& t, const std::vector<double>& v) {
        return t.reward + world.gamma * v[static_cast<std::size_t>(t.next)];
      },
      tol);
}

ValueIterationResult shaped_value_iteration_state(const Gridworld& world,
                                                  const std::vector<double>& phi,
                                                  double tol) {
  if (static_cast<int>(phi.size()) != world.num_states())
    throw std::invalid_argument("shaped VI: phi size mismatch");
  const StateId goal = world.goal_state();
  return run_sweeps(
      world,
      [&world, &phi, goal](StateId s, int, const Transition& t,
                           const std::vector<double>& v) {
        const double phi_next = t.next == goal ? 0.0 : phi[static_cast<std::size_t>(t.next)];
        return t.reward + world.gamma * phi_next - phi[static_cast<std::size_t>(s)] +
               world.gamma * v[static_cast<std::size_t>(t.next)];
      },
      tol);
}

ValueIterationResult shaped_value_iteration_lookahead(
    const Gridworld& world, const std::vector<std::array<double, kNumActions>>& phi,
    double tol) {
  if (static_cast<int>(phi.size()) != world.num_states())
    throw std::invalid_argument("shaped VI: phi size mismatch");
  const StateId goal = world.goal_state();
  // Sweeps run over B(s,a) = phi(s,a) + Qtilde(s,a); the stored per-state
  // value is max_a B, so the recursion below reads v[] directly as that max.
  return run_sweeps(
      world,
      [&world, &phi, goal](StateId s, int a, const Transition& t,
                           const std::vector<double>& v) {
        const double continuation = world.gamma * v[static_cast<std::size_t>(t.next)];
        const double qtilde =
            t.reward - phi[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)] +
            (t.next == goal ? world.gamma * world.goal_reward : continuation);
        return phi[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)] + qtilde;
      },
      tol);
}

std::vector<std::vector<Action>> greedy_tie_sets(const ValueIterationResult& vi,
                                                 double eps) {
  std::vector<std::vector<Action>> sets(vi.q.size());
  for (std::size_t s = 0; s < vi.q.size(); ++s) {
    double best = vi.q[s][0];
    for (int a = 1; a < kNumActions; ++a) best = std::max(best, vi.q[s][static_cast<std::size_t>(a)]);
    for (int a = 0; a < kNumActions; ++a)
      if (vi.q[s][static_cast<std::size_t>(a)] >= best - eps)
        sets[s].push_back(static_cast<Action>(a));
  }
  return sets;
}

}  // namespace vinrs
