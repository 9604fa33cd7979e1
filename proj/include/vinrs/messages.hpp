#pragma once

#include <set>
#include <vector>

#include "vinrs/autodiff.hpp"
#include "vinrs/experience_graph.hpp"

namespace vinrs {

/// Maps rewards to optimality probabilities, p(O=1|s,a) = exp((r - ceiling)/tau).
/// With the ceiling at the running maximum observed reward the output lies in
/// (0, 1] and equals 1 exactly at the maximum.
struct OptimalityModel {
  double tau = 1.0;
  double reward_ceiling = 0.0;

  double optimality_prob(double r) const;

  /// Ceiling from the maximum node reward currently in the graph.
  static OptimalityModel from_graph(const ExperienceGraph& g, double tau);
};

struct MessageOptions {
  double tol = 1e-10;
  int max_iters = 0;     // 0 -> 10 * node_count
  double damping = 0.5;  // new <- (1-d)*old + d*T(old)
  // Accept the final iterate instead of throwing when the budget runs out.
  // Near-critical averaging structures (reward-free revisit cycles) mix too
  // slowly for any practical budget; the partial solve is still a valid
  // potential because shaping correctness is potential-agnostic.
  bool use_iterate_on_budget = false;
};

/// Backward messages: fixed point of beta(i) = p(i) * mean over successors of
/// beta(j), with beta(i) = p(i) at sink nodes. Probabilities are divided by
/// their maximum before iterating, so the result is invariant to shifting the
/// reward ceiling. Throws if the damped iteration fails to reach tol.
std::vector<double> backward_messages(const ExperienceGraph& g,
                                      const OptimalityModel& model,
                                      const MessageOptions& opts = {});

/// Forward messages: alpha(i) = 1/n at in-degree-0 nodes, otherwise the fixed
/// point of alpha(i) = mean over predecessors of p(j) * alpha(j).
std::vector<double> forward_messages(const ExperienceGraph& g,
                                     const OptimalityModel& model,
                                     const MessageOptions& opts = {});

/// Forward recursion with all probabilities set to 1: the arrival mass of a
/// uniform walk over the recorded transitions. Dividing alpha*beta by this
/// turns joint path mass into a per-node optimality posterior.
std::vector<double> visitation_mass(const ExperienceGraph& g,
                                    const MessageOptions& opts = {});

struct MessageTable {
  std::vector<double> alpha;
  std::vector<double> beta;
  std::vector<double> mass;
  std::vector<double> label;  // min-max normalized alpha*beta/mass in [1e-3, 1]
};

inline constexpr double kLabelFloor = 1e-3;
/// Log-posterior span mapped onto the label range: nodes this many log units
/// below the best node sit at the floor. A fixed scale keeps labels
/// comparable across different graphs of the same environment.
inline constexpr double kLabelLogRange = 60.0;

/// Per-node optimality estimate alpha*beta/mass on a log scale, anchored at 1
/// for the best node and decaying linearly in log units onto [kLabelFloor, 1]
/// over kLabelLogRange. Graphs where the estimate is constant (single node,
/// no informative rewards yet) get label 1 everywhere.
MessageTable message_labels(const ExperienceGraph& g, const OptimalityModel& model,
                            const MessageOptions& opts = {});

// ---- training losses ---------------------------------------------------

/// Binary cross-entropy over the rewarding nodes only, averaged; 0 when the
/// set is empty. Predictions must lie strictly inside (0, 1).
double base_loss(const std::vector<double>& labels, const std::vector<double>& phi,
                 const std::set<int>& rewarding);

/// Graph smoothness penalty: sum over all (i,j) of A[i][j]*(phi_i - phi_j)^2.
double recursive_loss(const std::vector<double>& phi,
                      const std::vector<std::vector<int>>& adjacency);

double total_loss(double base, double rec, double eta);

/// Differentiable versions over per-node scalar predictions.
nn::Var base_loss_node(const std::vector<double>& labels,
                       const std::vector<nn::Var>& phi, const std::set<int>& rewarding);
nn::Var recursive_loss_node(const std::vector<nn::Var>& phi, const ExperienceGraph& g);

}  // namespace vinrs
