#include "vinrs/trainer.hpp"

#include <stdexcept>

#include "vinrs/messages.hpp"

namespace vinrs {

const char* shaping_mode_name(ShapingMode mode) {
  switch (mode) {
    case ShapingMode::None: return "a2c";
    case ShapingMode::ExactMessages: return "phi_ab";
    case ShapingMode::Cnn: return "phi_cnn";
  }
  return "?";
}

ShapingMode shaping_mode_from_name(const std::string& name) {
  if (name == "none" || name == "a2c") return ShapingMode::None;
  if (name == "exact_messages" || name == "phi_ab") return ShapingMode::ExactMessages;
  if (name == "cnn" || name == "phi_cnn") return ShapingMode::Cnn;
  throw std::invalid_argument("unknown shaping mode '" + name + "'");
}

namespace {

// distinct seed streams: the rollout stream must not depend on whether the
// CNN machinery runs (degenerate-mix equivalence)
constexpr std::uint64_t kCnnSeedSalt = 0x9e3779b97f4a7c15ULL;

void refresh_phi_from_net(const VinNetwork& net, const Gridworld& world,
                          PotentialTable& phi) {
  for (StateId s = 0; s < world.num_states(); ++s) {
    const auto fwd = net.forward(render(world, s));
    for (int a = 0; a < kNumActions; ++a)
      phi.phi[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)] =
          fwd.phi->value[a];
  }
}

// experience graphs revisit states, and damped averaging over the resulting
// cycles can need far more sweeps than the 10*n default
MessageOptions solver_budget(const ExperienceGraph& graph) {
  (void)graph;
  MessageOptions opts;
  opts.max_iters = 20000;
  opts.tol = 1e-8;  // labels feed a potential table; 1e-10 is oracle territory
  opts.use_iterate_on_budget = true;
  return opts;
}

void refresh_phi_from_labels(const ExperienceGraph& graph, double tau,
                             PotentialTable& phi) {
  const auto labels = message_labels(graph, OptimalityModel::from_graph(graph, tau),
                                     solver_budget(graph));
  // a degenerate window (every label 1: no reward differences observed)
  // carries no signal; writing it would only plant stale flat potentials
  bool informative = false;
  for (double l : labels.label)
    if (l != 1.0) informative = true;
  if (!informative) return;
  // pairs outside the current window keep their last label
  for (int i = 0; i < graph.node_count(); ++i) {
    const auto& node = graph.node(i);
    phi.set(node.state, static_cast<Action>(node.action),
            labels.label[static_cast<std::size_t>(i)]);
  }
}

}  // namespace

std::vector<EpisodeMetrics> train(const Gridworld& world, const TrainConfig& config,
                                  std::uint64_t seed) {
  if (config.episodes <= 0) throw std::invalid_argument("train: episodes must be > 0");
  if (config.alpha_mix < 0.0 || config.alpha_mix > 1.0)
    throw std::invalid_argument("train: alpha_mix must be in [0,1]");

  Rng rollout_rng(seed);
  PolicyTable policy(world.num_states(), config.epsilon);
  CriticTable critic(world.num_states(), config.lambda);
  ExperienceGraph graph(world.step_reward);
  std::vector<ObservationImage> images;  // indexed by graph node

  std::unique_ptr<VinNetwork> net;
  std::unique_ptr<nn::AdamOptimizer> optimizer;
  // CNN potentials cover every pair; message labels only the pairs seen
  PotentialTable phi(world.num_states(), config.shaping_mode == ShapingMode::Cnn);
  const bool shaped = config.shaping_mode != ShapingMode::None;
  if (config.shaping_mode == ShapingMode::Cnn) {
    net = std::make_unique<VinNetwork>(config.vin, world.height, world.width,
                                       seed + kCnnSeedSalt);
    optimizer = std::make_unique<nn::AdamOptimizer>(config.vin.learning_rate);
    refresh_phi_from_net(*net, world, phi);
  }

  UpdateConfig update;
  update.gamma = config.gamma;
  update.alpha_mix = config.alpha_mix;
  update.actor_lr = config.actor_lr;
  update.critic_lr = config.critic_lr;

  std::vector<EpisodeMetrics> metrics;
  metrics.reserve(static_cast<std::size_t>(config.episodes));
  long long cumulative = 0;
  double last_cnn_loss = 0.0;

  std::vector<TrajectoryStep> trajectory;
  for (int episode = 1; episode <= config.episodes; ++episode) {
    trajectory.clear();
    StateId s = world.start_state();
    Action a = select_action(policy, s, rollout_rng);
    double episode_return = 0.0;
    for (int t = 0;; ++t) {
      const StepResult res = step(world, s, a, t);
      episode_return += res.reward;
      const bool reached_goal = res.next == world.goal_state() && res.done;
      const bool timeout = res.done && !reached_goal;
      if (res.done) {
        const int node = graph.record_terminal(s, a, res.reward, timeout);
        if (node == static_cast<int>(images.size())) images.push_back(render(world, s));
        trajectory.push_back({s, a, res.reward, res.next, a, reached_goal, timeout});
        break;
      }
      const Action a_next = select_action(policy, res.next, rollout_rng);
      const auto [from, to] = graph.add_transition(s, a, res.reward, res.next, a_next);
      if (from == static_cast<int>(images.size())) images.push_back(render(world, s));
      if (to == static_cast<int>(images.size())) images.push_back(render(world, res.next));
      trajectory.push_back({s, a, res.reward, res.next, a_next, false, false});
      s = res.next;
      a = a_next;
    }
    graph.end_episode();

    bool trained_this_round = false;
    if (episode % config.vin.train_period == 0 && graph.node_count() > 0) {
      if (config.shaping_mode == ShapingMode::Cnn) {
        const auto labels = message_labels(
            graph, OptimalityModel::from_graph(graph, config.vin.tau),
            solver_budget(graph));
        for (int k = 0; k < config.vin.k_train; ++k)
          last_cnn_loss = train_step(*net, images, graph, labels, *optimizer);
        refresh_phi_from_net(*net, world, phi);
        trained_this_round = true;
      } else if (config.shaping_mode == ShapingMode::ExactMessages) {
        refresh_phi_from_labels(graph, config.vin.tau, phi);
        trained_this_round = true;
      }
    }

    double shaped_return = 0.0;
    for (const auto& st : trajectory)
      shaped_return += shaped_reward(st.reward, st.s, st.a, st.next, st.a_next,
                                     st.reached_goal, st.timeout,
                                     shaped ? &phi : nullptr, config.gamma);

    episode_update(policy, critic, trajectory, shaped ? &phi : nullptr, update);

    if (trained_this_round && config.reset_graph_each_round) {
      graph.reset();
      images.clear();
    }

    cumulative += static_cast<long long>(trajectory.size());
    metrics.push_back({episode, static_cast<int>(trajectory.size()), cumulative,
                       episode_return, shaped_return, last_cnn_loss});
  }
  return metrics;
}

}  // namespace vinrs
