#include "vinrs/gridworld.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <queue>
#include <sstream>
#include <stdexcept>

#include "vinrs/rng.hpp"

namespace vinrs {

void Gridworld::finalize() {
  if (height <= 0 || width <= 0) throw std::invalid_argument("gridworld: empty grid");
  if (static_cast<int>(wall.size()) != cells())
    throw std::invalid_argument("gridworld: wall mask size mismatch");

  auto require_free = [&](int cell, const char* what) {
    if (cell < 0 || cell >= cells() || wall[static_cast<std::size_t>(cell)])
      throw std::invalid_argument(std::string("gridworld: ") + what +
                                  " is a wall or out of range");
  };
  require_free(goal_cell, "goal");
  require_free(start_cell, "start");
  for (const auto& [cell, penalty] : traps) {
    require_free(cell, "trap");
    if (cell == goal_cell) throw std::invalid_argument("gridworld: goal cannot be a trap");
    if (penalty >= 0.0) throw std::invalid_argument("gridworld: trap penalty must be negative");
  }

  cell_to_state.assign(static_cast<std::size_t>(cells()), -1);
  state_to_cell.clear();
  for (int c = 0; c < cells(); ++c) {
    if (!wall[static_cast<std::size_t>(c)]) {
      cell_to_state[static_cast<std::size_t>(c)] = static_cast<StateId>(state_to_cell.size());
      state_to_cell.push_back(c);
    }
  }

  // every free cell must reach the goal via 4-neighbor moves
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(cells()), 0);
  std::queue<int> frontier;
  frontier.push(goal_cell);
  seen[static_cast<std::size_t>(goal_cell)] = 1;
  while (!frontier.empty()) {
    const int c = frontier.front();
    frontier.pop();
    const int r = c / width, col = c % width;
    for (const auto& d : kActionDelta) {
      const int rr = r + d[0], cc = col + d[1];
      if (is_wall(rr, cc)) continue;
      const int f = flat(rr, cc);
      if (!seen[static_cast<std::size_t>(f)]) {
        seen[static_cast<std::size_t>(f)] = 1;
        frontier.push(f);
      }
    }
  }
  for (int c = 0; c < cells(); ++c)
    if (!wall[static_cast<std::size_t>(c)] && !seen[static_cast<std::size_t>(c)])
      throw std::invalid_argument("gridworld: free cell unreachable from goal");
}

StepResult step(const Gridworld& world, StateId state, Action action, int steps_taken) {
  const int cell = world.state_to_cell[static_cast<std::size_t>(state)];
  const int row = cell / world.width, col = cell % world.width;
  const auto& d = kActionDelta[static_cast<std::size_t>(action)];
  const int nr = row + d[0], nc = col + d[1];
  const int next_cell = world.is_wall(nr, nc) ? cell : world.flat(nr, nc);

  StepResult out;
  out.next = world.cell_to_state[static_cast<std::size_t>(next_cell)];
  if (next_cell == world.goal_cell) {
    out.reward = world.goal_reward;
    out.done = true;
  } else if (auto it = world.traps.find(next_cell); it != world.traps.end()) {
    out.reward = it->second;
  } else {
    out.reward = world.step_reward;
  }
  if (steps_taken + 1 >= world.max_episode_steps) out.done = true;
  return out;
}

ObservationImage render(const Gridworld& world, StateId state) {
  const int H = world.height, W = world.width;
  ObservationImage obs;
  obs.planes = Tensor({3, H, W});
  double max_penalty = 0.0;
  for (const auto& [cell, penalty] : world.traps)
    max_penalty = std::max(max_penalty, -penalty);
  for (int c = 0; c < world.cells(); ++c)
    obs.planes[c] = world.wall[static_cast<std::size_t>(c)] ? 1.0 : 0.0;
  obs.planes[H * W + world.goal_cell] = 1.0;
  for (const auto& [cell, penalty] : world.traps)
    obs.planes[H * W + cell] = penalty / max_penalty;  // in [-1, 0)
  obs.planes[2 * H * W + world.state_to_cell[static_cast<std::size_t>(state)]] = 1.0;
  return obs;
}

namespace {

const std::vector<std::string> kFourRoomsRows = {
    "#############",
    "#S....#.....#",
    "#.....#.....#",
    "#...........#",
    "#.....#.....#",
    "#.....#.....#",
    "##.####.....#",
    "#.....###.###",
    "#.....#.....#",
    "#.....#.....#",
    "#...........#",
    "#.....#....G#",
    "#############",
};

// the four doorway cells of the layout above
const std::vector<std::pair<int, int>> kFourRoomsDoorways = {
    {3, 6}, {6, 2}, {7, 9}, {10, 6}};

}  // namespace

Gridworld gridworld_from_rows(const std::vector<std::string>& rows, double gamma,
                              double step_reward, double goal_reward,
                              double trap_penalty, int max_episode_steps) {
  if (rows.empty()) throw std::invalid_argument("gridworld: no rows");
  Gridworld w;
  w.height = static_cast<int>(rows.size());
  w.width = static_cast<int>(rows[0].size());
  w.gamma = gamma;
  w.step_reward = step_reward;
  w.goal_reward = goal_reward;
  w.max_episode_steps = max_episode_steps;
  w.wall.assign(static_cast<std::size_t>(w.height * w.width), 0);
  for (int r = 0; r < w.height; ++r) {
    if (static_cast<int>(rows[static_cast<std::size_t>(r)].size()) != w.width)
      throw std::invalid_argument("gridworld: ragged rows");
    for (int c = 0; c < w.width; ++c) {
      const char ch = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
      const int f = w.flat(r, c);
      switch (ch) {
        case '#': w.wall[static_cast<std::size_t>(f)] = 1; break;
        case '.': case ' ': break;
        case 'G': w.goal_cell = f; break;
        case 'T': w.traps[f] = trap_penalty; break;
        case 'S': w.start_cell = f; break;
        default:
          throw std::invalid_argument(std::string("gridworld: bad map character '") + ch + "'");
      }
    }
  }
  if (w.goal_cell < 0) throw std::invalid_argument("gridworld: map has no goal");
  if (w.start_cell < 0) w.start_cell = w.goal_cell;  // single-state degenerate maps
  w.finalize();
  return w;
}

Gridworld four_rooms() {
  return gridworld_from_rows(kFourRoomsRows, 0.99, -0.01, 1.0, -1.0, 500);
}

Gridworld four_rooms_traps(int n_traps, double penalty, std::uint64_t seed) {
  Gridworld w = four_rooms();
  if (n_traps == 0) return w;
  if (n_traps < 0) throw std::invalid_argument("four_rooms_traps: negative trap count");
  if (penalty >= 0.0)
    throw std::invalid_argument("four_rooms_traps: penalty must be negative");

  std::vector<std::uint8_t> blocked(static_cast<std::size_t>(w.cells()), 0);
  blocked[static_cast<std::size_t>(w.start_cell)] = 1;
  blocked[static_cast<std::size_t>(w.goal_cell)] = 1;
  for (const auto& [r, c] : kFourRoomsDoorways)
    blocked[static_cast<std::size_t>(w.flat(r, c))] = 1;
  const int gr = w.goal_cell / w.width, gc = w.goal_cell % w.width;
  for (const auto& d : kActionDelta)
    if (!w.is_wall(gr + d[0], gc + d[1]))
      blocked[static_cast<std::size_t>(w.flat(gr + d[0], gc + d[1]))] = 1;

  std::vector<int> eligible;
  for (int c = 0; c < w.cells(); ++c)
    if (!w.wall[static_cast<std::size_t>(c)] && !blocked[static_cast<std::size_t>(c)])
      eligible.push_back(c);
  if (n_traps > static_cast<int>(eligible.size()))
    throw std::invalid_argument("four_rooms_traps: trap count exceeds eligible cells");

  Rng rng(seed);
  for (int i = 0; i < n_traps; ++i) {
    const auto j = i + static_cast<int>(rng.next_index(eligible.size() - static_cast<std::size_t>(i)));
    std::swap(eligible[static_cast<std::size_t>(i)], eligible[static_cast<std::size_t>(j)]);
    w.traps[eligible[static_cast<std::size_t>(i)]] = penalty;
  }
  w.finalize();
  return w;
}

std::string to_map_text(const Gridworld& w) {
  char header[256];
  double trap_penalty = -1.0;
  if (!w.traps.empty()) trap_penalty = w.traps.begin()->second;
  std::snprintf(header, sizeof(header),
                "gamma=%.17g step_reward=%.17g goal_reward=%.17g trap_penalty=%.17g "
                "max_steps=%d\n",
                w.gamma, w.step_reward, w.goal_reward, trap_penalty, w.max_episode_steps);
  std::string out = header;
  for (int r = 0; r < w.height; ++r) {
    for (int c = 0; c < w.width; ++c) {
      const int f = w.flat(r, c);
      char ch = '.';
      if (w.wall[static_cast<std::size_t>(f)]) ch = '#';
      else if (f == w.goal_cell) ch = 'G';
      else if (w.traps.count(f)) ch = 'T';
      else if (f == w.start_cell) ch = 'S';
      out += ch;
    }
    out += '\n';
  }
  return out;
}

Gridworld gridworld_from_map_text(const std::string& text) {
  std::istringstream in(text);
  std::string header;
  if (!std::getline(in, header)) throw std::invalid_argument("map: missing header");

  double gamma = 0.99, step_reward = -0.01, goal_reward = 1.0, trap_penalty = -1.0;
  int max_steps = 500;
  bool have_gamma = false, have_step = false;
  std::istringstream hs(header);
  std::string token;
  while (hs >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("map: bad header token '" + token + "'");
    const std::string key = token.substr(0, eq);
    const std::string value = token.substr(eq + 1);
    try {
      if (key == "gamma") { gamma = std::stod(value); have_gamma = true; }
      else if (key == "step_reward") { step_reward = std::stod(value); have_step = true; }
      else if (key == "goal_reward") goal_reward = std::stod(value);
      else if (key == "trap_penalty") trap_penalty = std::stod(value);
      else if (key == "max_steps") max_steps = std::stoi(value);
      else throw std::invalid_argument("map: unknown header key '" + key + "'");
    } catch (const std::invalid_argument&) {
      throw;
    } catch (const std::exception&) {
      throw std::invalid_argument("map: bad value for '" + key + "'");
    }
  }
  if (!have_gamma || !have_step)
    throw std::invalid_argument("map: header must set gamma and step_reward");
  if (gamma <= 0.0 || gamma > 1.0) throw std::invalid_argument("map: gamma out of (0,1]");

  std::vector<std::string> rows;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) rows.push_back(line);
  return gridworld_from_rows(rows, gamma, step_reward, goal_reward, trap_penalty,
                             max_steps);
}

}  // namespace vinrs
