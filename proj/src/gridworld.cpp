#include "hitl/gridworld.hpp"

#include <algorithm>
#include <string>

#include "hitl/error.hpp"

namespace hitl {

namespace {

std::string describe(Position p) {
  return "(" + std::to_string(p.x) + "," + std::to_string(p.y) + ")";
}

}  // namespace

ActionType action_from_code(int code) {
  if (code < 0 || code >= kNumActions) {
    fail(ErrorCode::OutOfBounds, "action code " + std::to_string(code) + " is not in [0,4)");
  }
  return static_cast<ActionType>(code);
}

std::string_view action_name(ActionType a) noexcept {
  switch (a) {
    case ActionType::Up: return "UP";
    case ActionType::Down: return "DOWN";
    case ActionType::Left: return "LEFT";
    case ActionType::Right: return "RIGHT";
  }
  return "?";
}

ActionType action_from_name(std::string_view name) {
  for (ActionType a : kAllActions) {
    if (action_name(a) == name) return a;
  }
  fail(ErrorCode::InvalidArgument, "unknown action name '" + std::string(name) + "'");
}

std::string_view terminal_name(Terminal t) noexcept {
  switch (t) {
    case Terminal::None: return "none";
    case Terminal::Win: return "win";
    case Terminal::Lose: return "lose";
  }
  return "?";
}

bool GridConfig::is_lose(Position p) const noexcept {
  return std::find(lose_positions.begin(), lose_positions.end(), p) != lose_positions.end();
}

void GridConfig::validate() const {
  if (grid_size < 1) fail(ErrorCode::InvalidConfig, "grid_size must be positive");
  if (max_steps < 1) fail(ErrorCode::InvalidConfig, "max_steps must be at least 1");
  if (!in_bounds(win_pos)) {
    fail(ErrorCode::InvalidConfig, "win position " + describe(win_pos) + " is outside the grid");
  }
  for (Position p : lose_positions) {
    if (!in_bounds(p)) {
      fail(ErrorCode::InvalidConfig, "lose position " + describe(p) + " is outside the grid");
    }
    if (p == win_pos) {
      fail(ErrorCode::InvalidConfig, "win position " + describe(p) + " is also a lose position");
    }
  }
  if (start_mode.fixed) {
    if (!in_bounds(*start_mode.fixed)) {
      fail(ErrorCode::InvalidConfig, "start " + describe(*start_mode.fixed) + " is outside the grid");
    }
    if (is_terminal(*start_mode.fixed)) {
      fail(ErrorCode::InvalidConfig, "start " + describe(*start_mode.fixed) + " is a terminal cell");
    }
  } else if (nonterminal_cells(*this).empty()) {
    fail(ErrorCode::InvalidConfig, "grid has no non-terminal cell to start from");
  }
}

Position apply_action(Position pos, ActionType action, const GridConfig& cfg) noexcept {
  Position next = pos;
  switch (action) {
    case ActionType::Up: --next.y; break;
    case ActionType::Down: ++next.y; break;
    case ActionType::Left: --next.x; break;
    case ActionType::Right: ++next.x; break;
  }
  return cfg.in_bounds(next) ? next : pos;
}

StepOutcome step(Position pos, ActionType action, const GridConfig& cfg) {
  if (cfg.is_terminal(pos)) {
    fail(ErrorCode::InvalidState, "cannot step from terminal cell " + describe(pos));
  }
  StepOutcome out;
  out.next = apply_action(pos, action, cfg);
  if (out.next == cfg.win_pos) {
    out.reward = cfg.win_reward;
    out.terminal = Terminal::Win;
  } else if (cfg.is_lose(out.next)) {
    out.reward = cfg.lose_reward;
    out.terminal = Terminal::Lose;
  } else {
    out.reward = cfg.step_reward;
  }
  return out;
}

Position reset(const GridConfig& cfg, Rng& rng) {
  if (cfg.start_mode.fixed) return *cfg.start_mode.fixed;
  const auto cells = nonterminal_cells(cfg);
  auto k = static_cast<std::size_t>(rng.uniform() * static_cast<double>(cells.size()));
  return cells[std::min(k, cells.size() - 1)];
}

int state_index(Position pos, int grid_size) {
  if (pos.x < 0 || pos.y < 0 || pos.x >= grid_size || pos.y >= grid_size) {
    fail(ErrorCode::OutOfBounds,
         describe(pos) + " is outside a " + std::to_string(grid_size) + "x" +
             std::to_string(grid_size) + " grid");
  }
  return pos.y * grid_size + pos.x;
}

Position position_of(int state, int grid_size) {
  if (grid_size < 1 || state < 0 || state >= grid_size * grid_size) {
    fail(ErrorCode::OutOfBounds, "state index " + std::to_string(state) + " is out of range");
  }
  return Position{state % grid_size, state / grid_size};
}

std::vector<Position> nonterminal_cells(const GridConfig& cfg) {
  std::vector<Position> cells;
  for (int s = 0; s < cfg.num_states(); ++s) {
    Position p = position_of(s, cfg.grid_size);
    if (!cfg.is_terminal(p)) cells.push_back(p);
  }
  return cells;
}

}  // namespace hitl
