#include "vinrs/actor_critic.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace vinrs {

std::array<double, kNumActions> PolicyTable::softmax(StateId s) const {
  const auto& th = theta[static_cast<std::size_t>(s)];
  double mx = th[0];
  for (int a = 1; a < kNumActions; ++a) mx = std::max(mx, th[static_cast<std::size_t>(a)]);
  std::array<double, kNumActions> p{};
  double z = 0.0;
  for (int a = 0; a < kNumActions; ++a) {
    p[static_cast<std::size_t>(a)] = std::exp(th[static_cast<std::size_t>(a)] - mx);
    z += p[static_cast<std::size_t>(a)];
  }
  for (auto& v : p) v /= z;
  return p;
}

std::array<double, kNumActions> PolicyTable::action_probs(StateId s) const {
  auto p = softmax(s);
  for (auto& v : p)
    v = (1.0 - epsilon) * v + epsilon / static_cast<double>(kNumActions);
  return p;
}

Action select_action(const PolicyTable& policy, StateId s, Rng& rng) {
  if (rng.next_real() < policy.epsilon)
    return static_cast<Action>(rng.next_index(kNumActions));
  const auto p = policy.softmax(s);
  double u = rng.next_real();
  for (int a = 0; a < kNumActions - 1; ++a) {
    u -= p[static_cast<std::size_t>(a)];
    if (u < 0.0) return static_cast<Action>(a);
  }
  return static_cast<Action>(kNumActions - 1);
}

double shaped_reward(double r, StateId s, Action a, StateId s_next, Action a_next,
                     bool absorbing_end, bool truncated_end, const PotentialTable* phi,
                     double gamma) {
  if (!phi || truncated_end) return r;
  if (!phi->is_known(s, a)) return r;
  if (!absorbing_end && !phi->is_known(s_next, a_next)) return r;
  const double next_phi = absorbing_end ? 0.0 : phi->at(s_next, a_next);
  return r + gamma * next_phi - phi->at(s, a);
}

namespace {

// lambda-returns computed backward from the frozen critic; the last step
// bootstraps V(s_next) on timeout and takes the bare reward at the goal
std::vector<double> lambda_returns(const std::vector<TrajectoryStep>& traj,
                                   const std::vector<double>& rewards,
                                   const CriticTable& critic, double gamma) {
  const int T = static_cast<int>(traj.size());
  std::vector<double> g(static_cast<std::size_t>(T));
  for (int t = T - 1; t >= 0; --t) {
    const auto& st = traj[static_cast<std::size_t>(t)];
    const double r = rewards[static_cast<std::size_t>(t)];
    if (st.reached_goal) {
      g[static_cast<std::size_t>(t)] = r;
    } else if (t == T - 1) {  // timeout or truncated recording
      g[static_cast<std::size_t>(t)] =
          r + gamma * critic.v[static_cast<std::size_t>(st.next)];
    } else {
      const double vnext = critic.v[static_cast<std::size_t>(st.next)];
      g[static_cast<std::size_t>(t)] =
          r + gamma * ((1.0 - critic.lambda) * vnext +
                       critic.lambda * g[static_cast<std::size_t>(t + 1)]);
    }
    if (!std::isfinite(g[static_cast<std::size_t>(t)]))
      throw std::runtime_error("episode_update: non-finite return at step " +
                               std::to_string(t));
  }
  return g;
}

}  // namespace

UpdateStats episode_update(PolicyTable& policy, CriticTable& critic,
                           const std::vector<TrajectoryStep>& trajectory,
                           const PotentialTable* phi, const UpdateConfig& config) {
  UpdateStats stats;
  if (trajectory.empty()) return stats;
  const int T = static_cast<int>(trajectory.size());

  std::vector<double> orig(static_cast<std::size_t>(T)), shaped(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    const auto& st = trajectory[static_cast<std::size_t>(t)];
    orig[static_cast<std::size_t>(t)] = st.reward;
    shaped[static_cast<std::size_t>(t)] =
        shaped_reward(st.reward, st.s, st.a, st.next, st.a_next, st.reached_goal,
                      st.timeout, phi, config.gamma);
  }

  const auto g_orig = lambda_returns(trajectory, orig, critic, config.gamma);
  const auto g_shaped = lambda_returns(trajectory, shaped, critic, config.gamma);

  // advantages against the pre-update critic
  std::vector<double> advantage(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    const double q_comb = config.alpha_mix * g_orig[static_cast<std::size_t>(t)] +
                          (1.0 - config.alpha_mix) * g_shaped[static_cast<std::size_t>(t)];
    advantage[static_cast<std::size_t>(t)] =
        q_comb - critic.v[static_cast<std::size_t>(trajectory[static_cast<std::size_t>(t)].s)];
  }

  double grad_sq = 0.0, critic_sq = 0.0;
  for (int t = 0; t < T; ++t) {
    const auto& st = trajectory[static_cast<std::size_t>(t)];
    const double adv = advantage[static_cast<std::size_t>(t)];
    const auto pi = policy.softmax(st.s);
    auto& th = policy.theta[static_cast<std::size_t>(st.s)];
    for (int a = 0; a < kNumActions; ++a) {
      const double score = (a == static_cast<int>(st.a) ? 1.0 : 0.0) -
                           pi[static_cast<std::size_t>(a)];
      const double delta = config.actor_lr * adv * score;
      th[static_cast<std::size_t>(a)] += delta;
      grad_sq += delta * delta;
    }
    const double err = g_orig[static_cast<std::size_t>(t)] -
                       critic.v[static_cast<std::size_t>(st.s)];
    critic.v[static_cast<std::size_t>(st.s)] += config.critic_lr * err;
    critic_sq += err * err;
  }
  stats.actor_grad_norm = std::sqrt(grad_sq);
  stats.critic_loss = critic_sq / static_cast<double>(T);
  return stats;
}

}  // namespace vinrs
