#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vinrs/tensor.hpp"

namespace vinrs {

enum class Action : int { Up = 0, Down = 1, Left = 2, Right = 3 };
inline constexpr int kNumActions = 4;
inline constexpr std::array<std::array<int, 2>, kNumActions> kActionDelta{
    {{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};

using StateId = int;

/// Deterministic finite gridworld MDP. Immutable after construction; states
/// are densely indexed over non-wall cells in row-major order.
struct Gridworld {
  int height = 0, width = 0;
  std::vector<std::uint8_t> wall;  // height*width, 1 = wall
  int goal_cell = -1;              // flat cell index
  double goal_reward = 1.0;
  std::map<int, double> traps;     // flat cell index -> negative penalty
  double step_reward = -0.01;
  int start_cell = -1;
  double gamma = 0.99;
  int max_episode_steps = 500;

  // derived lookup tables, filled by finalize()
  std::vector<StateId> cell_to_state;  // -1 for walls
  std::vector<int> state_to_cell;

  int cells() const { return height * width; }
  int num_states() const { return static_cast<int>(state_to_cell.size()); }
  int flat(int row, int col) const { return row * width + col; }
  bool is_wall(int row, int col) const {
    return row < 0 || row >= height || col < 0 || col >= width ||
           wall[static_cast<std::size_t>(flat(row, col))] != 0;
  }
  StateId goal_state() const { return cell_to_state[static_cast<std::size_t>(goal_cell)]; }
  StateId start_state() const { return cell_to_state[static_cast<std::size_t>(start_cell)]; }

  /// Builds the state index and validates the invariants (goal/start/traps
  /// off walls, goal not a trap, every free cell connected to the goal).
  void finalize();
};

struct StepResult {
  StateId next = -1;
  double reward = 0.0;
  bool done = false;
};

/// One deterministic transition. Moving into a wall or off the grid leaves
/// the state unchanged. The reward is decided by the cell entered: goal pays
/// goal_reward and terminates, trap cells pay their penalty, anything else
/// pays step_reward. done is also set once steps_taken+1 reaches the cap.
StepResult step(const Gridworld& world, StateId state, Action action,
                int steps_taken = 0);

/// Observation planes for one state: plane 0 walls, plane 1 goal (+1) and
/// traps (negative, scaled into [-1,0)), plane 2 one-hot agent position.
struct ObservationImage {
  Tensor planes;  // [3, H, W]
};

ObservationImage render(const Gridworld& world, StateId state);

/// The classic 13x13 four-rooms layout: 104 free cells, four doorways,
/// start in the top-left room, goal in the diagonally opposite room.
Gridworld four_rooms();

/// four_rooms with n_traps trap cells placed by a seeded draw over free
/// cells that are not the start, the goal, a doorway, or adjacent to the
/// goal. penalty must be negative.
Gridworld four_rooms_traps(int n_traps, double penalty, std::uint64_t seed);

/// Builds a world from ASCII rows ('#' wall, '.'/' ' free, 'G' goal,
/// 'T' trap, 'S' start). Used by tests and the map loader.
Gridworld gridworld_from_rows(const std::vector<std::string>& rows, double gamma,
                              double step_reward, double goal_reward,
                              double trap_penalty, int max_episode_steps);

/// Plain-text map format: `gamma=.. step_reward=..` header then one row per
/// line. Extra header keys goal_reward/trap_penalty/max_steps round-trip the
/// remaining scalars.
std::string to_map_text(const Gridworld& world);
Gridworld gridworld_from_map_text(const std::string& text);

}  // namespace vinrs
