#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracle_helpers.hpp"
#include "vinrs/gradcheck.hpp"
#include "vinrs/messages.hpp"
#include "vinrs/rng.hpp"

using namespace vinrs;

namespace {

// graphs used as message fixtures: node id k <-> state k, action 0
ExperienceGraph fixture_graph(int n, const std::vector<double>& rewards,
                              const std::vector<std::pair<int, int>>& edges) {
  ExperienceGraph g(0.0);
  for (int k = 0; k < n; ++k)
    g.record_terminal(k, Action::Up, rewards[static_cast<std::size_t>(k)]);
  for (auto [i, j] : edges)
    g.add_transition(i, Action::Up, rewards[static_cast<std::size_t>(i)], j, Action::Up);
  // re-pin rewards (add_transition rewrites the source node's reward, which
  // matches, but successor placeholders must not linger)
  for (int k = 0; k < n; ++k)
    g.record_terminal(k, Action::Up, rewards[static_cast<std::size_t>(k)]);
  return g;
}

oracle::EnumGraph enum_of(const ExperienceGraph& g, const OptimalityModel& model) {
  oracle::EnumGraph e(g.node_count());
  double pmax = 0.0;
  for (int i = 0; i < g.node_count(); ++i) {
    e.prob[static_cast<std::size_t>(i)] = model.optimality_prob(g.node(i).reward);
    pmax = std::max(pmax, e.prob[static_cast<std::size_t>(i)]);
  }
  for (auto& p : e.prob) p /= pmax;
  for (int i = 0; i < g.node_count(); ++i)
    for (int j : g.successors(i)) e.add_edge(i, j);
  return e;
}

}  // namespace

TEST_CASE("optimality_prob closed forms") {
  OptimalityModel m{1.0, 1.0};
  CHECK(m.optimality_prob(1.0) == 1.0);
  CHECK(m.optimality_prob(0.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  // corridor rewards {-0.01, 1}, tau = 1
  CHECK(m.optimality_prob(-0.01) == doctest::Approx(std::exp(-1.01)).epsilon(1e-12));
  CHECK_THROWS(m.optimality_prob(2.0));  // above the ceiling
  OptimalityModel bad{-1.0, 0.0};
  CHECK_THROWS(bad.optimality_prob(0.0));
}

TEST_CASE("backward messages: terminal node, chain, and branch") {
  // single terminal node at the ceiling
  ExperienceGraph single = fixture_graph(1, {1.0}, {});
  OptimalityModel m1 = OptimalityModel::from_graph(single, 1.0);
  auto beta1 = backward_messages(single, m1);
  CHECK(beta1[0] == doctest::Approx(1.0).epsilon(1e-12));

  // 3-node chain: suffix products
  const std::vector<double> rewards{-0.3, -0.7, 0.0};
  ExperienceGraph chain = fixture_graph(3, rewards, {{0, 1}, {1, 2}});
  OptimalityModel m = OptimalityModel::from_graph(chain, 1.0);
  const double p1 = std::exp(-0.3), p2 = std::exp(-0.7), p3 = 1.0;
  auto beta = backward_messages(chain, m);
  CHECK(beta[0] == doctest::Approx(p1 * p2 * p3).epsilon(1e-10));
  CHECK(beta[1] == doctest::Approx(p2 * p3).epsilon(1e-10));
  CHECK(beta[2] == doctest::Approx(p3).epsilon(1e-10));

  // node 0 with two successors: mean of the branch suffixes
  ExperienceGraph dag = fixture_graph(3, rewards, {{0, 1}, {0, 2}});
  auto bd = backward_messages(dag, OptimalityModel::from_graph(dag, 1.0));
  CHECK(bd[0] == doctest::Approx(p1 * (bd[1] + bd[2]) / 2.0).epsilon(1e-10));
}

TEST_CASE("forward messages: prior anchoring and prefix products") {
  ExperienceGraph single = fixture_graph(1, {0.5}, {});
  auto a1 = forward_messages(single, OptimalityModel::from_graph(single, 1.0));
  CHECK(a1[0] == doctest::Approx(1.0).epsilon(1e-12));  // prior = 1/n with n=1

  const std::vector<double> rewards{-0.3, -0.7, 0.0};
  ExperienceGraph chain = fixture_graph(3, rewards, {{0, 1}, {1, 2}});
  auto alpha = forward_messages(chain, OptimalityModel::from_graph(chain, 1.0));
  const double c = 1.0 / 3.0, p1 = std::exp(-0.3), p2 = std::exp(-0.7);
  CHECK(alpha[0] == doctest::Approx(c).epsilon(1e-10));
  CHECK(alpha[1] == doctest::Approx(c * p1).epsilon(1e-10));
  CHECK(alpha[2] == doctest::Approx(c * p1 * p2).epsilon(1e-10));

  // node with two predecessors of equal alpha and probs: averaged enumeration
  ExperienceGraph merge = fixture_graph(3, {-0.3, -0.3, 0.0}, {{0, 2}, {1, 2}});
  OptimalityModel mm = OptimalityModel::from_graph(merge, 1.0);
  auto am = forward_messages(merge, mm);
  auto e = enum_of(merge, mm);
  for (int i = 0; i < 3; ++i)
    CHECK(am[static_cast<std::size_t>(i)] ==
          doctest::Approx(oracle::alpha_enum(e, i, 1.0 / 3.0)).epsilon(1e-10));
  CHECK(am[2] == doctest::Approx(std::exp(-0.3) * am[0]).epsilon(1e-10));
}

TEST_CASE("labels: degenerate single node, flat chain, trap vs goal branch") {
  ExperienceGraph single = fixture_graph(1, {1.0}, {});
  auto t1 = message_labels(single, OptimalityModel::from_graph(single, 1.0));
  CHECK(t1.label[0] == 1.0);

  // a pure chain toward the goal carries one trajectory: the posterior is
  // constant along it and the normalization collapses to 1
  ExperienceGraph chain =
      fixture_graph(3, {-0.01, -0.01, 1.0}, {{0, 1}, {1, 2}});
  auto tc = message_labels(chain, OptimalityModel::from_graph(chain, 1.0));
  for (double l : tc.label) CHECK(l == 1.0);
  for (int i = 0; i + 1 < 3; ++i)  // non-decreasing toward the goal
    CHECK(tc.label[static_cast<std::size_t>(i)] <= tc.label[static_cast<std::size_t>(i + 1)] + 1e-12);

  // chain plus a trap-ending branch, tau = 1
  ExperienceGraph branchy = fixture_graph(
      4, {-0.01, -0.01, 1.0, -1.0}, {{0, 1}, {1, 2}, {0, 3}});
  OptimalityModel m = OptimalityModel::from_graph(branchy, 1.0);
  MessageOptions tight;
  tight.tol = 1e-14;
  tight.max_iters = 2000;
  auto tb = message_labels(branchy, m, tight);
  CHECK(tb.label[3] < tb.label[2]);  // trap terminal below goal terminal
  auto e = enum_of(branchy, m);
  auto ref = oracle::labels_enum(e, kLabelFloor, kLabelLogRange);
  for (int i = 0; i < 4; ++i)
    CHECK(std::fabs(tb.label[static_cast<std::size_t>(i)] -
                    ref[static_cast<std::size_t>(i)]) < 1e-10);
}

TEST_CASE("solver equals enumeration on 50 random DAGs") {
  Rng rng(1234);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_index(11));  // up to 12 nodes
    std::vector<double> rewards(static_cast<std::size_t>(n));
    for (auto& r : rewards) r = rng.uniform(-1.0, 1.0);
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (rng.next_real() < 0.35) edges.emplace_back(i, j);
    ExperienceGraph g = fixture_graph(n, rewards, edges);
    OptimalityModel m = OptimalityModel::from_graph(g, 1.0);
    MessageOptions tight;
    tight.tol = 1e-14;
    tight.max_iters = 2000;
    auto table = message_labels(g, m, tight);
    auto e = enum_of(g, m);
    const double prior = 1.0 / static_cast<double>(n);
    auto ref_labels = oracle::labels_enum(e, kLabelFloor, kLabelLogRange);
    for (int i = 0; i < n; ++i) {
      CHECK(std::fabs(table.beta[static_cast<std::size_t>(i)] - oracle::beta_enum(e, i)) < 1e-10);
      CHECK(std::fabs(table.alpha[static_cast<std::size_t>(i)] -
                      oracle::alpha_enum(e, i, prior)) < 1e-10);
      CHECK(std::fabs(table.label[static_cast<std::size_t>(i)] -
                      ref_labels[static_cast<std::size_t>(i)]) < 1e-10);
    }
  }
}

TEST_CASE("labels are invariant to shifting the reward ceiling") {
  Rng rng(555);
  const int n = 10;
  std::vector<double> rewards(n);
  for (auto& r : rewards) r = rng.uniform(-1.0, 0.5);
  std::vector<std::pair<int, int>> edges{{0, 1}, {1, 2}, {2, 3}, {1, 4}, {4, 5},
                                         {5, 6}, {2, 7}, {7, 8}, {8, 9}};
  ExperienceGraph g = fixture_graph(n, rewards, edges);

  OptimalityModel base = OptimalityModel::from_graph(g, 1.0);
  OptimalityModel shifted{1.0, base.reward_ceiling + 0.7};
  auto a = message_labels(g, base);
  auto b = message_labels(g, shifted);
  for (int i = 0; i < n; ++i)
    CHECK(std::fabs(a.label[static_cast<std::size_t>(i)] - b.label[static_cast<std::size_t>(i)]) < 1e-10);
}

TEST_CASE("messages convergence error and empty-graph precondition") {
  ExperienceGraph empty(0.0);
  OptimalityModel m{1.0, 0.0};
  CHECK_THROWS(backward_messages(empty, m));
  CHECK_THROWS(forward_messages(empty, m));

  ExperienceGraph g = fixture_graph(3, {-0.5, -0.5, 0.0}, {{0, 1}, {1, 2}});
  MessageOptions starved;
  starved.max_iters = 1;
  starved.tol = 1e-300;  // unreachable tolerance -> must report non-convergence
  CHECK_THROWS(backward_messages(g, OptimalityModel::from_graph(g, 1.0), starved));
}

TEST_CASE("base loss closed forms and loop oracle") {
  CHECK(base_loss({1.0}, {1.0 - 1e-9}, {0}) == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(base_loss({1.0}, {std::exp(-1.0)}, {0}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(base_loss({1.0}, {0.5}, {}) == 0.0);

  Rng rng(9);
  std::vector<double> labels(5), phi(5);
  for (auto& v : labels) v = rng.next_real();
  for (auto& v : phi) v = 0.05 + 0.9 * rng.next_real();
  std::set<int> base_set{1, 2, 4};
  double expect = 0.0;
  for (int i : base_set)
    expect -= labels[static_cast<std::size_t>(i)] * std::log(phi[static_cast<std::size_t>(i)]) +
              (1.0 - labels[static_cast<std::size_t>(i)]) * std::log(1.0 - phi[static_cast<std::size_t>(i)]);
  expect /= 3.0;
  CHECK(std::fabs(base_loss(labels, phi, base_set) - expect) < 1e-12);

  CHECK_THROWS(base_loss({1.0}, {1.0}, {0}));   // phi not inside (0,1)
  CHECK_THROWS(base_loss({1.0}, {-0.1}, {0}));
}

TEST_CASE("recursive loss closed forms and oracle") {
  CHECK(recursive_loss({0.4, 0.4, 0.4}, {{0, 1, 0}, {0, 0, 1}, {0, 0, 0}}) == 0.0);
  CHECK(recursive_loss({0.2, 0.7}, {{0, 1}, {0, 0}}) == doctest::Approx(0.25).epsilon(1e-12));

  Rng rng(31);
  const int n = 10;
  std::vector<double> phi(n);
  for (auto& v : phi) v = rng.next_real();
  std::vector<std::vector<int>> adj(n, std::vector<int>(n, 0));
  double expect = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && rng.next_real() < 0.3) {
        adj[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = 1;
        const double d = phi[static_cast<std::size_t>(i)] - phi[static_cast<std::size_t>(j)];
        expect += d * d;
      }
  CHECK(std::fabs(recursive_loss(phi, adj) - expect) < 1e-12);
  CHECK(recursive_loss(phi, adj) >= 0.0);
}

TEST_CASE("total loss arithmetic") {
  CHECK(total_loss(0.3, 99.0, 0.0) == 0.3);
  CHECK(total_loss(0.0, 0.25, 10.0) == doctest::Approx(2.5).epsilon(1e-15));
}

TEST_CASE("differentiable losses match scalars and finite differences") {
  using namespace nn;
  ExperienceGraph g = fixture_graph(
      5, {-0.01, -0.01, 1.0, -1.0, -0.01}, {{0, 1}, {1, 2}, {0, 3}, {3, 4}});
  auto table = message_labels(g, OptimalityModel::from_graph(g, 1.0));
  auto rewarding = g.rewarding_nodes();

  Rng rng(71);
  std::vector<Parameter> params;
  for (int i = 0; i < 5; ++i)
    params.emplace_back(Tensor({1}, {rng.uniform(-1.0, 1.0)}), "logit" + std::to_string(i));

  auto make_loss = [&] {
    std::vector<Var> phi;
    for (auto& p : params) phi.push_back(sigmoid(p.var()));
    auto base = base_loss_node(table.label, phi, rewarding);
    auto rec = recursive_loss_node(phi, g);
    return add(base, scale(rec, 10.0));
  };

  // node values equal the scalar implementations
  std::vector<Var> phi;
  std::vector<double> phi_values;
  for (auto& p : params) {
    phi.push_back(sigmoid(p.var()));
    phi_values.push_back(phi.back()->value[0]);
  }
  const double scalar_total = total_loss(base_loss(table.label, phi_values, rewarding),
                                         recursive_loss(phi_values, g.adjacency()), 10.0);
  CHECK(std::fabs(make_loss()->value[0] - scalar_total) < 1e-12);

  auto res = grad_check(make_loss, params, 1e-6);
  CHECK(res.max_rel_error < 1e-6);
}
