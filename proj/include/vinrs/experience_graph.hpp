#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "vinrs/gridworld.hpp"

namespace vinrs {

/// Directed graph of visited (state, action) nodes. An edge i->j is recorded
/// when node j's pair immediately followed node i's pair inside one episode;
/// edges never cross episode boundaries (the final pair of an episode gets
/// no successor).
class ExperienceGraph {
 public:
  struct NodeInfo {
    StateId state = -1;
    int action = 0;
    double reward = 0.0;  // last observed reward for this pair
    int visits = 0;
    // ended an episode only because of the step cap; its continuation exists
    // but was never observed
    bool truncated = false;
  };

  explicit ExperienceGraph(double step_reward = 0.0) : step_reward_(step_reward) {}

  /// Upserts both (s,a) and (s_next,a_next) and inserts the edge between
  /// them. Returns the two node ids.
  std::pair<int, int> add_transition(StateId s, Action a, double r, StateId s_next,
                                     Action a_next);

  /// Upserts a node without a successor edge (the terminal pair of an
  /// episode). truncated marks step-cap cutoffs as opposed to real endings.
  int record_terminal(StateId s, Action a, double r, bool truncated = false);

  void end_episode();

  void reset();

  int node_count() const { return static_cast<int>(nodes_.size()); }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  const NodeInfo& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  const std::vector<int>& successors(int id) const {
    return succ_[static_cast<std::size_t>(id)];
  }
  const std::vector<int>& predecessors(int id) const {
    return pred_[static_cast<std::size_t>(id)];
  }
  int find(StateId s, Action a) const;  // -1 when absent

  /// Dense 0/1 adjacency matrix in node-index order.
  std::vector<std::vector<int>> adjacency() const;

  /// Nodes whose stored reward differs from the environment step reward:
  /// goal hits and trap hits both count.
  std::set<int> rewarding_nodes() const;

  double step_reward() const { return step_reward_; }

  /// Per-episode [first_new_node, node_count) watermarks.
  const std::vector<std::pair<int, int>>& episode_ranges() const { return episodes_; }

  /// Bumped by every mutation; lets callers cache derived tables.
  std::uint64_t version() const { return version_; }

  /// Line-oriented dump: `node <idx> s=<s> a=<a> r=<r>` then `edge <i> <j>`.
  std::string dump() const;
  static ExperienceGraph parse(const std::string& text, double step_reward = 0.0);

 private:
  int upsert(StateId s, Action a, double r, bool count_visit);

  double step_reward_;
  std::vector<NodeInfo> nodes_;
  std::vector<std::vector<int>> succ_, pred_;
  std::unordered_map<std::int64_t, int> index_;  // (s*4+a) -> node id
  std::set<std::pair<int, int>> edges_;
  std::vector<std::pair<int, int>> episodes_;
  int episode_start_ = 0;
  std::uint64_t version_ = 0;
};

}  // namespace vinrs
