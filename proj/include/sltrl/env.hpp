#pragma once

// Cheese-in-the-Corner gridworld: an interior of m x m free cells surrounded
// by a one-cell wall border. Row 0 is the top row; Up decreases the row.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "sltrl/random.hpp"

namespace sltrl {

enum class Action : int { Up = 0, Down = 1, Left = 2, Right = 3 };

inline constexpr int kNumActions = 4;
// Previous-action codes: 0 = none, 1 + action otherwise.
inline constexpr int kNumPrevCodes = 5;

inline constexpr std::array<Action, 4> kAllActions = {Action::Up, Action::Down, Action::Left,
                                                      Action::Right};

using ActionProbs = std::array<double, kNumActions>;

inline int prev_code(std::optional<Action> prev) {
  return prev ? 1 + static_cast<int>(*prev) : 0;
}
inline std::optional<Action> prev_from_code(int code) {
  if (code == 0) return std::nullopt;
  return static_cast<Action>(code - 1);
}

struct Cell {
  int row = 0;
  int col = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

struct EnvSpec {
  int interior_size = 11;
  int t_max = 64;
  double gamma = 0.975;

  // Throws ConfigError.
  void validate() const;

  int grid_side() const { return interior_size + 2; }
  int num_cells() const { return interior_size * interior_size; }
  // |S| = m^2 (m^2 - 1) ordered (mouse, cheese) pairs with mouse != cheese.
  std::size_t num_states() const {
    const auto c = static_cast<std::size_t>(num_cells());
    return c * (c - 1);
  }
  int cell_index(Cell c) const { return c.row * interior_size + c.col; }
  Cell cell_at(int index) const { return {index / interior_size, index % interior_size}; }
};

struct GridState {
  Cell mouse;
  Cell cheese;
  std::optional<Action> prev_action;
  friend bool operator==(const GridState&, const GridState&) = default;
};

struct InitDistribution {
  double alpha = 0.0;

  void validate() const;
  // Lambda_alpha(state) for a start state (prev_action ignored).
  double probability(const EnvSpec& spec, Cell mouse, Cell cheese) const;
};

// Dense one-hot observation of shape (side, side, 3) with channels wall/mouse/cheese.
struct Observation {
  int side = 0;
  std::vector<std::uint8_t> data;

  std::uint8_t at(int row, int col, int channel) const {
    return data[static_cast<std::size_t>((row * side + col) * 3 + channel)];
  }
};

struct Step {
  GridState state;  // state (including previous action) the action was taken in
  Action action = Action::Up;
  double reward = 0.0;
};

struct Trajectory {
  std::vector<Step> steps;
  bool reached_goal = false;
  int behavior_id = 0;

  std::size_t length() const { return steps.size(); }
  // gamma^(T-1) when the goal is reached at step T, else 0.
  double discounted_return(double gamma) const;
};

struct StepResult {
  GridState next;
  double reward = 0.0;
  bool done = false;
};

// Policy oracle: action distribution for a state (observation + previous action).
using PolicyFn = std::function<ActionProbs(const GridState&)>;

GridState sample_initial(const EnvSpec& spec, const InitDistribution& dist, Rng& rng);

StepResult step(const EnvSpec& spec, const GridState& state, Action action);

// Cell reached by moving in `action`; unchanged when the move hits the wall.
Cell move(const EnvSpec& spec, Cell from, Action action);

Observation encode_observation(const EnvSpec& spec, const GridState& state);

// Inverse of encode_observation for the (mouse, cheese) pair; prev_action is not
// part of the observation and is returned empty.
GridState decode_observation(const EnvSpec& spec, const Observation& obs);

Action sample_action(const ActionProbs& probs, Rng& rng);

Trajectory rollout(const EnvSpec& spec, const PolicyFn& policy, const GridState& init, Rng& rng);

// Canonical enumeration of (state, previous action) rows:
// cheese-major, mouse-minor (skipping the cheese cell), previous action innermost
// with "none" first.
class StateIndexer {
 public:
  explicit StateIndexer(const EnvSpec& spec) : m_cells(spec.num_cells()), m_spec(spec) {}

  std::size_t num_pairs() const { return static_cast<std::size_t>(m_cells) * (m_cells - 1); }
  std::size_t num_rows() const { return num_pairs() * kNumPrevCodes; }

  std::size_t pair_index(int cheese_idx, int mouse_idx) const {
    const int rank = mouse_idx < cheese_idx ? mouse_idx : mouse_idx - 1;
    return static_cast<std::size_t>(cheese_idx) * (m_cells - 1) + rank;
  }
  std::size_t row_index(int cheese_idx, int mouse_idx, int prev) const {
    return pair_index(cheese_idx, mouse_idx) * kNumPrevCodes + prev;
  }
  std::size_t row_index(const GridState& s) const {
    return row_index(m_spec.cell_index(s.cheese), m_spec.cell_index(s.mouse),
                     prev_code(s.prev_action));
  }
  GridState state_at_row(std::size_t row) const;

 private:
  int m_cells;
  EnvSpec m_spec;
};

}  // namespace sltrl
