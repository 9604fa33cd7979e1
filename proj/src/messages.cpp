#include "vinrs/messages.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <stdexcept>
#include <string>

namespace vinrs {

double OptimalityModel::optimality_prob(double r) const {
  if (tau <= 0.0) throw std::invalid_argument("optimality_prob: tau must be positive");
  if (r > reward_ceiling + 1e-12)
    throw std::invalid_argument("optimality_prob: reward above the ceiling");
  return std::exp((r - reward_ceiling) / tau);
}

OptimalityModel OptimalityModel::from_graph(const ExperienceGraph& g, double tau) {
  if (g.node_count() == 0)
    throw std::invalid_argument("OptimalityModel: empty graph");
  double ceiling = g.node(0).reward;
  for (int i = 1; i < g.node_count(); ++i)
    ceiling = std::max(ceiling, g.node(i).reward);
  return {tau, ceiling};
}

namespace {

// node probabilities scaled by their maximum; exact invariance to shifting
// the reward ceiling follows from min-max label normalization plus this
std::vector<double> scaled_probs(const ExperienceGraph& g, const OptimalityModel& m) {
  std::vector<double> p(static_cast<std::size_t>(g.node_count()));
  double pmax = 0.0;
  for (int i = 0; i < g.node_count(); ++i) {
    p[static_cast<std::size_t>(i)] = m.optimality_prob(g.node(i).reward);
    pmax = std::max(pmax, p[static_cast<std::size_t>(i)]);
  }
  for (auto& v : p) v /= pmax;
  return p;
}

std::vector<double> damped_fixed_point(
    const ExperienceGraph& g, const MessageOptions& opts, std::vector<double> x,
    const std::function<double(int, const std::vector<double>&)>& update,
    const char* what) {
  const int n = g.node_count();
  // 0.5-damping sheds error at ~2x per sweep, so small graphs need the floor
  // of 200 to reach tol regardless of 10*n
  const int max_iters = opts.max_iters > 0 ? opts.max_iters : std::max(10 * n, 200);
  std::vector<double> next(x.size());
  double residual = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    residual = 0.0;
    for (int i = 0; i < n; ++i) {
      const double t = update(i, x);
      next[static_cast<std::size_t>(i)] =
          (1.0 - opts.damping) * x[static_cast<std::size_t>(i)] + opts.damping * t;
      residual = std::max(residual,
                          std::fabs(next[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(i)]));
    }
    std::swap(x, next);
    if (residual < opts.tol) return x;
  }
  if (opts.use_iterate_on_budget) return x;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3e", residual);
  throw std::runtime_error(std::string(what) + ": no convergence within " +
                           std::to_string(max_iters) + " iterations, residual " + buf);
}

}  // namespace

std::vector<double> backward_messages(const ExperienceGraph& g,
                                      const OptimalityModel& model,
                                      const MessageOptions& opts) {
  if (g.node_count() == 0)
    throw std::invalid_argument("backward_messages: empty graph");
  const auto p = scaled_probs(g, model);
  // step-cap truncation points are not real trajectory ends: give them the
  // graph-mean continuation instead of sink status, so proximity to a cutoff
  // never reads as proximity to an outcome
  const double n_inv = 1.0 / static_cast<double>(g.node_count());
  return damped_fixed_point(
      g, opts, p,
      [&](int i, const std::vector<double>& beta) {
        const auto& succ = g.successors(i);
        if (succ.empty()) {
          if (!g.node(i).truncated) return p[static_cast<std::size_t>(i)];
          double mean = 0.0;
          for (double b : beta) mean += b;
          return p[static_cast<std::size_t>(i)] * mean * n_inv;
        }
        double acc = 0.0;
        for (int j : succ) acc += beta[static_cast<std::size_t>(j)];
        return p[static_cast<std::size_t>(i)] * acc / static_cast<double>(succ.size());
      },
      "backward_messages");
}

std::vector<double> forward_messages(const ExperienceGraph& g,
                                     const OptimalityModel& model,
                                     const MessageOptions& opts) {
  if (g.node_count() == 0)
    throw std::invalid_argument("forward_messages: empty graph");
  const auto p = scaled_probs(g, model);
  const double prior = 1.0 / static_cast<double>(g.node_count());
  std::vector<double> init(static_cast<std::size_t>(g.node_count()), prior);
  return damped_fixed_point(
      g, opts, std::move(init),
      [&](int i, const std::vector<double>& alpha) {
        const auto& pred = g.predecessors(i);
        if (pred.empty()) return prior;
        double acc = 0.0;
        for (int j : pred)
          acc += p[static_cast<std::size_t>(j)] * alpha[static_cast<std::size_t>(j)];
        return acc / static_cast<double>(pred.size());
      },
      "forward_messages");
}

std::vector<double> visitation_mass(const ExperienceGraph& g,
                                    const MessageOptions& opts) {
  if (g.node_count() == 0)
    throw std::invalid_argument("visitation_mass: empty graph");
  const double prior = 1.0 / static_cast<double>(g.node_count());
  std::vector<double> init(static_cast<std::size_t>(g.node_count()), prior);
  return damped_fixed_point(
      g, opts, std::move(init),
      [&](int i, const std::vector<double>& m) {
        const auto& pred = g.predecessors(i);
        if (pred.empty()) return prior;
        double acc = 0.0;
        for (int j : pred) acc += m[static_cast<std::size_t>(j)];
        return acc / static_cast<double>(pred.size());
      },
      "visitation_mass");
}

MessageTable message_labels(const ExperienceGraph& g, const OptimalityModel& model,
                            const MessageOptions& opts) {
  MessageTable t;
  t.alpha = forward_messages(g, model, opts);
  t.beta = backward_messages(g, model, opts);
  t.mass = visitation_mass(g, opts);

  const int n = g.node_count();
  // Min-max in the log domain: the posterior shrinks geometrically with path
  // length, so a linear stretch would pin everything but the best node to the
  // floor (and raw products underflow on long paths). Log spacing keeps the
  // label field graded all the way out from the rewarding nodes.
  std::vector<double> posterior(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    posterior[static_cast<std::size_t>(i)] =
        std::log(std::max(t.alpha[static_cast<std::size_t>(i)] *
                              t.beta[static_cast<std::size_t>(i)] /
                              t.mass[static_cast<std::size_t>(i)],
                          1e-300));

  const auto [mn_it, mx_it] = std::minmax_element(posterior.begin(), posterior.end());
  const double mn = *mn_it, mx = *mx_it;
  t.label.assign(static_cast<std::size_t>(n), 1.0);
  // log-spreads below ~1e-7 are solver residue on a constant posterior
  if (mx - mn > 1e-7 * std::max(1.0, std::fabs(mx))) {
    for (int i = 0; i < n; ++i) {
      const double depth =
          std::min((mx - posterior[static_cast<std::size_t>(i)]) / kLabelLogRange, 1.0);
      t.label[static_cast<std::size_t>(i)] = kLabelFloor + (1.0 - kLabelFloor) * (1.0 - depth);
    }
  }
  return t;
}

// ---- losses -------------------------------------------------------------

namespace {

void check_prediction(double v) {
  if (!(v > 0.0 && v < 1.0))
    throw std::invalid_argument("base_loss: prediction outside (0,1): " +
                                std::to_string(v));
}

}  // namespace

double base_loss(const std::vector<double>& labels, const std::vector<double>& phi,
                 const std::set<int>& rewarding) {
  if (labels.size() != phi.size())
    throw std::invalid_argument("base_loss: size mismatch");
  if (rewarding.empty()) return 0.0;
  double acc = 0.0;
  for (int i : rewarding) {
    if (i < 0 || i >= static_cast<int>(phi.size()))
      throw std::invalid_argument("base_loss: rewarding index out of range");
    const double y = labels[static_cast<std::size_t>(i)];
    const double f = phi[static_cast<std::size_t>(i)];
    check_prediction(f);
    acc += y * std::log(f) + (1.0 - y) * std::log(1.0 - f);
  }
  return -acc / static_cast<double>(rewarding.size());
}

double recursive_loss(const std::vector<double>& phi,
                      const std::vector<std::vector<int>>& adjacency) {
  if (adjacency.size() != phi.size())
    throw std::invalid_argument("recursive_loss: adjacency size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < adjacency.size(); ++i) {
    if (adjacency[i].size() != phi.size())
      throw std::invalid_argument("recursive_loss: adjacency must be square");
    for (std::size_t j = 0; j < adjacency[i].size(); ++j)
      if (adjacency[i][j]) {
        const double d = phi[i] - phi[j];
        acc += d * d;
      }
  }
  return acc;
}

double total_loss(double base, double rec, double eta) { return base + eta * rec; }

nn::Var base_loss_node(const std::vector<double>& labels,
                       const std::vector<nn::Var>& phi, const std::set<int>& rewarding) {
  using namespace nn;
  if (labels.size() != phi.size())
    throw std::invalid_argument("base_loss: size mismatch");
  if (rewarding.empty()) return constant(Tensor::scalar(0.0));

  std::vector<Var> preds;
  Tensor y({static_cast<int>(rewarding.size())});
  int k = 0;
  for (int i : rewarding) {
    if (i < 0 || i >= static_cast<int>(phi.size()))
      throw std::invalid_argument("base_loss: rewarding index out of range");
    check_prediction(phi[static_cast<std::size_t>(i)]->value[0]);
    preds.push_back(phi[static_cast<std::size_t>(i)]);
    y[k++] = labels[static_cast<std::size_t>(i)];
  }
  auto f = stack_scalars(preds);
  auto yc = constant(y);
  auto pos = mul(yc, log(f));
  auto neg = mul(rsub_const(1.0, yc), log(rsub_const(1.0, f)));
  return scale(sum(add(pos, neg)), -1.0 / static_cast<double>(rewarding.size()));
}

nn::Var recursive_loss_node(const std::vector<nn::Var>& phi, const ExperienceGraph& g) {
  using namespace nn;
  if (static_cast<int>(phi.size()) != g.node_count())
    throw std::invalid_argument("recursive_loss: phi size mismatch");
  std::vector<Var> from, to;
  for (int i = 0; i < g.node_count(); ++i)
    for (int j : g.successors(i)) {
      from.push_back(phi[static_cast<std::size_t>(i)]);
      to.push_back(phi[static_cast<std::size_t>(j)]);
    }
  if (from.empty()) return constant(Tensor::scalar(0.0));
  auto diff = sub(stack_scalars(from), stack_scalars(to));
  return sum(mul(diff, diff));
}

}  // namespace vinrs
