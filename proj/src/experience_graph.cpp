#include "vinrs/experience_graph.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace vinrs {

int ExperienceGraph::upsert(StateId s, Action a, double r, bool set_reward) {
  const std::int64_t key = static_cast<std::int64_t>(s) * kNumActions + static_cast<int>(a);
  auto [it, inserted] = index_.try_emplace(key, node_count());
  if (inserted) {
    // a node first seen as a successor carries the step reward until its own
    // transition is observed
    nodes_.push_back({s, static_cast<int>(a), step_reward_, 0, false});
    succ_.emplace_back();
    pred_.emplace_back();
  }
  NodeInfo& n = nodes_[static_cast<std::size_t>(it->second)];
  if (set_reward) n.reward = r;  // rewards are (s,a)-deterministic; last write wins
  ++n.visits;
  ++version_;
  return it->second;
}

std::pair<int, int> ExperienceGraph::add_transition(StateId s, Action a, double r,
                                                    StateId s_next, Action a_next) {
  const int i = upsert(s, a, r, true);
  const int j = upsert(s_next, a_next, 0.0, false);
  if (edges_.insert({i, j}).second) {
    succ_[static_cast<std::size_t>(i)].push_back(j);
    pred_[static_cast<std::size_t>(j)].push_back(i);
  }
  ++version_;
  return {i, j};
}

int ExperienceGraph::record_terminal(StateId s, Action a, double r, bool truncated) {
  const int id = upsert(s, a, r, true);
  if (truncated) nodes_[static_cast<std::size_t>(id)].truncated = true;
  return id;
}

void ExperienceGraph::end_episode() {
  episodes_.emplace_back(episode_start_, node_count());
  episode_start_ = node_count();
  ++version_;
}

void ExperienceGraph::reset() {
  nodes_.clear();
  succ_.clear();
  pred_.clear();
  index_.clear();
  edges_.clear();
  episodes_.clear();
  episode_start_ = 0;
  ++version_;
}

int ExperienceGraph::find(StateId s, Action a) const {
  const std::int64_t key = static_cast<std::int64_t>(s) * kNumActions + static_cast<int>(a);
  auto it = index_.find(key);
  return it == index_.end() ? -1 : it->second;
}

std::vector<std::vector<int>> ExperienceGraph::adjacency() const {
  std::vector<std::vector<int>> m(static_cast<std::size_t>(node_count()),
                                  std::vector<int>(static_cast<std::size_t>(node_count()), 0));
  for (const auto& [i, j] : edges_) m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = 1;
  return m;
}

std::set<int> ExperienceGraph::rewarding_nodes() const {
  std::set<int> out;
  for (int i = 0; i < node_count(); ++i)
    if (nodes_[static_cast<std::size_t>(i)].reward != step_reward_) out.insert(i);
  return out;
}

std::string ExperienceGraph::dump() const {
  std::string out;
  char line[128];
  for (int i = 0; i < node_count(); ++i) {
    const NodeInfo& n = nodes_[static_cast<std::size_t>(i)];
    std::snprintf(line, sizeof(line), "node %d s=%d a=%d r=%.17g\n", i, n.state,
                  n.action, n.reward);
    out += line;
  }
  for (const auto& [i, j] : edges_) {
    std::snprintf(line, sizeof(line), "edge %d %d\n", i, j);
    out += line;
  }
  return out;
}

ExperienceGraph ExperienceGraph::parse(const std::string& text, double step_reward) {
  ExperienceGraph g(step_reward);
  std::istringstream in(text);
  std::string kind;
  while (in >> kind) {
    if (kind == "node") {
      int idx, s, a;
      double r;
      std::string sf, af, rf;
      if (!(in >> idx >> sf >> af >> rf) || std::sscanf(sf.c_str(), "s=%d", &s) != 1 ||
          std::sscanf(af.c_str(), "a=%d", &a) != 1 ||
          std::sscanf(rf.c_str(), "r=%lf", &r) != 1)
        throw std::invalid_argument("graph parse: bad node line");
      if (idx != g.node_count())
        throw std::invalid_argument("graph parse: node indices must be sequential");
      g.upsert(static_cast<StateId>(s), static_cast<Action>(a), r, true);
    } else if (kind == "edge") {
      int i, j;
      if (!(in >> i >> j)) throw std::invalid_argument("graph parse: bad edge line");
      if (i < 0 || j < 0 || i >= g.node_count() || j >= g.node_count())
        throw std::invalid_argument("graph parse: edge endpoint out of range");
      if (g.edges_.insert({i, j}).second) {
        g.succ_[static_cast<std::size_t>(i)].push_back(j);
        g.pred_[static_cast<std::size_t>(j)].push_back(i);
      }
    } else {
      throw std::invalid_argument("graph parse: unknown record '" + kind + "'");
    }
  }
  return g;
}

}  // namespace vinrs
