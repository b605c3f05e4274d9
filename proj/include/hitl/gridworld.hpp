#pragma once

#include <array>
#include <optional>
#include <string_view>
#include <vector>

#include "hitl/rng.hpp"

namespace hitl {

struct Position {
  int x = 0;  // column
  int y = 0;  // row

  friend bool operator==(const Position&, const Position&) = default;
};

enum class ActionType : int { Up = 0, Down = 1, Left = 2, Right = 3 };

inline constexpr int kNumActions = 4;
inline constexpr std::array<ActionType, kNumActions> kAllActions = {
    ActionType::Up, ActionType::Down, ActionType::Left, ActionType::Right};

constexpr int action_code(ActionType a) noexcept { return static_cast<int>(a); }

// Throws OutOfBounds for codes outside [0, 4).
ActionType action_from_code(int code);

std::string_view action_name(ActionType a) noexcept;
// Accepts "UP", "DOWN", "LEFT", "RIGHT". Throws InvalidArgument otherwise.
ActionType action_from_name(std::string_view name);

enum class Terminal { None, Win, Lose };

std::string_view terminal_name(Terminal t) noexcept;

struct StartMode {
  // Empty means uniform over non-terminal cells.
  std::optional<Position> fixed = Position{0, 0};

  static StartMode at(Position p) { return StartMode{p}; }
  static StartMode uniform_random() { return StartMode{std::nullopt}; }

  friend bool operator==(const StartMode&, const StartMode&) = default;
};

struct GridConfig {
  int grid_size = 4;
  Position win_pos{2, 2};
  std::vector<Position> lose_positions{{1, 2}, {3, 2}};
  double win_reward = 10.0;
  double lose_reward = -10.0;
  double step_reward = 0.0;
  int max_steps = 120;
  StartMode start_mode;

  bool in_bounds(Position p) const noexcept {
    return p.x >= 0 && p.y >= 0 && p.x < grid_size && p.y < grid_size;
  }
  bool is_lose(Position p) const noexcept;
  bool is_terminal(Position p) const noexcept { return p == win_pos || is_lose(p); }
  int num_states() const noexcept { return grid_size * grid_size; }

  // Throws InvalidConfig describing the first violated invariant.
  void validate() const;

  friend bool operator==(const GridConfig&, const GridConfig&) = default;
};

struct StepOutcome {
  Position next;
  double reward = 0.0;
  Terminal terminal = Terminal::None;

  friend bool operator==(const StepOutcome&, const StepOutcome&) = default;
};

// Moves off the grid leave the position unchanged.
Position apply_action(Position pos, ActionType action, const GridConfig& cfg) noexcept;

// Throws InvalidState when pos is a win or lose cell.
StepOutcome step(Position pos, ActionType action, const GridConfig& cfg);

// Fixed mode consumes no draws; uniform mode consumes exactly one.
Position reset(const GridConfig& cfg, Rng& rng);

int state_index(Position pos, int grid_size);
Position position_of(int state, int grid_size);

std::vector<Position> nonterminal_cells(const GridConfig& cfg);

inline int manhattan(Position a, Position b) noexcept {
  return (a.x > b.x ? a.x - b.x : b.x - a.x) + (a.y > b.y ? a.y - b.y : b.y - a.y);
}

}  // namespace hitl
