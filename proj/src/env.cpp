#include "sltrl/env.hpp"

#include <cmath>
#include <string>

#include "sltrl/errors.hpp"

namespace sltrl {

void EnvSpec::validate() const {
  if (interior_size < 3) {
    throw ConfigError("interior_size must be >= 3, got " + std::to_string(interior_size));
  }
  if (t_max < 1) throw ConfigError("t_max must be >= 1, got " + std::to_string(t_max));
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw ConfigError("gamma must lie in (0, 1), got " + std::to_string(gamma));
  }
}

void InitDistribution::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ConfigError("alpha must lie in [0, 1], got " + std::to_string(alpha));
  }
}

double InitDistribution::probability(const EnvSpec& spec, Cell mouse, Cell cheese) const {
  if (mouse == cheese) return 0.0;
  const double cells = spec.num_cells();
  double p = alpha / (cells * (cells - 1.0));
  if (cheese == Cell{0, 0}) p += (1.0 - alpha) / (cells - 1.0);
  return p;
}

double Trajectory::discounted_return(double gamma) const {
  if (!reached_goal) return 0.0;
  return std::pow(gamma, static_cast<double>(steps.size()) - 1.0);
}

GridState sample_initial(const EnvSpec& spec, const InitDistribution& dist, Rng& rng) {
  const int cells = spec.num_cells();
  std::uniform_int_distribution<int> any_cell(0, cells - 1);
  std::uniform_int_distribution<int> other_cell(0, cells - 2);

  const bool uniform = uniform01(rng) < dist.alpha;
  const int cheese_idx = uniform ? any_cell(rng) : 0;
  int mouse_idx = other_cell(rng);
  if (mouse_idx >= cheese_idx) ++mouse_idx;
  return GridState{spec.cell_at(mouse_idx), spec.cell_at(cheese_idx), std::nullopt};
}

Cell move(const EnvSpec& spec, Cell from, Action action) {
  Cell to = from;
  switch (action) {
    case Action::Up: --to.row; break;
    case Action::Down: ++to.row; break;
    case Action::Left: --to.col; break;
    case Action::Right: ++to.col; break;
  }
  const int m = spec.interior_size;
  if (to.row < 0 || to.row >= m || to.col < 0 || to.col >= m) return from;
  return to;
}

StepResult step(const EnvSpec& spec, const GridState& state, Action action) {
  StepResult out;
  out.next = GridState{move(spec, state.mouse, action), state.cheese, action};
  out.done = out.next.mouse == state.cheese;
  out.reward = out.done ? 1.0 : 0.0;
  return out;
}

Observation encode_observation(const EnvSpec& spec, const GridState& state) {
  const int side = spec.grid_side();
  Observation obs{side, std::vector<std::uint8_t>(static_cast<std::size_t>(side * side * 3), 0)};
  auto set = [&](int r, int c, int ch) {
    obs.data[static_cast<std::size_t>((r * side + c) * 3 + ch)] = 1;
  };
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      if (r == 0 || c == 0 || r == side - 1 || c == side - 1) set(r, c, 0);
    }
  }
  set(state.mouse.row + 1, state.mouse.col + 1, 1);
  set(state.cheese.row + 1, state.cheese.col + 1, 2);
  return obs;
}

GridState decode_observation(const EnvSpec& spec, const Observation& obs) {
  GridState s;
  const int m = spec.interior_size;
  for (int r = 0; r < m; ++r) {
    for (int c = 0; c < m; ++c) {
      if (obs.at(r + 1, c + 1, 1)) s.mouse = {r, c};
      if (obs.at(r + 1, c + 1, 2)) s.cheese = {r, c};
    }
  }
  return s;
}

Action sample_action(const ActionProbs& probs, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (int a = 0; a < kNumActions - 1; ++a) {
    acc += probs[a];
    if (u < acc) return static_cast<Action>(a);
  }
  return Action::Right;
}

Trajectory rollout(const EnvSpec& spec, const PolicyFn& policy, const GridState& init, Rng& rng) {
  Trajectory traj;
  traj.steps.reserve(static_cast<std::size_t>(spec.t_max));
  GridState s = init;
  for (int t = 0; t < spec.t_max; ++t) {
    const Action a = sample_action(policy(s), rng);
    const StepResult r = step(spec, s, a);
    traj.steps.push_back(Step{s, a, r.reward});
    if (r.done) {
      traj.reached_goal = true;
      break;
    }
    s = r.next;
  }
  return traj;
}

GridState StateIndexer::state_at_row(std::size_t row) const {
  const int prev = static_cast<int>(row % kNumPrevCodes);
  const std::size_t pair = row / kNumPrevCodes;
  const int cheese_idx = static_cast<int>(pair / (m_cells - 1));
  int mouse_idx = static_cast<int>(pair % (m_cells - 1));
  if (mouse_idx >= cheese_idx) ++mouse_idx;
  return GridState{m_spec.cell_at(mouse_idx), m_spec.cell_at(cheese_idx), prev_from_code(prev)};
}

}  // namespace sltrl
