#include "sltrl/evaluator.hpp"

#include <cmath>
#include <cstdlib>
#include <string>

#include "sltrl/errors.hpp"

namespace sltrl {
namespace {

void check_table(const PolicyTable& table, const EnvSpec& spec) {
  const StateIndexer index(spec);
  if (table.interior_size != spec.interior_size || table.rows() != index.num_rows()) {
    throw ConfigError("policy table (interior " + std::to_string(table.interior_size) + ", " +
                      std::to_string(table.rows()) + " rows) does not match environment (interior " +
                      std::to_string(spec.interior_size) + ")");
  }
}

// next[cell * 4 + a]: successor cell index of `cell` under action a.
std::vector<int> successor_table(const EnvSpec& spec) {
  const int cells = spec.num_cells();
  std::vector<int> next(static_cast<std::size_t>(cells * kNumActions));
  for (int c = 0; c < cells; ++c) {
    for (Action a : kAllActions) {
      next[static_cast<std::size_t>(c * kNumActions + static_cast<int>(a))] =
          spec.cell_index(move(spec, spec.cell_at(c), a));
    }
  }
  return next;
}

// Backward induction for one cheese cell. values[k] holds V_k over
// (mouse * 5 + prev); values[0] is all zero.
std::vector<std::vector<double>> value_sweep(const PolicyTable& table, const EnvSpec& spec,
                                             const StateIndexer& index,
                                             const std::vector<int>& next, int cheese) {
  const int cells = spec.num_cells();
  const auto width = static_cast<std::size_t>(cells * kNumPrevCodes);
  std::vector<std::vector<double>> values(static_cast<std::size_t>(spec.t_max) + 1,
                                          std::vector<double>(width, 0.0));
  for (int k = 1; k <= spec.t_max; ++k) {
    const std::vector<double>& prev_v = values[static_cast<std::size_t>(k - 1)];
    std::vector<double>& cur = values[static_cast<std::size_t>(k)];
    for (int mouse = 0; mouse < cells; ++mouse) {
      if (mouse == cheese) continue;
      for (int prev = 0; prev < kNumPrevCodes; ++prev) {
        const double* pi = table.row(index.row_index(cheese, mouse, prev));
        double v = 0.0;
        for (int a = 0; a < kNumActions; ++a) {
          const int to = next[static_cast<std::size_t>(mouse * kNumActions + a)];
          v += pi[a] * (to == cheese ? 1.0
                                     : spec.gamma * prev_v[static_cast<std::size_t>(
                                                        to * kNumPrevCodes + 1 + a)]);
        }
        cur[static_cast<std::size_t>(mouse * kNumPrevCodes + prev)] = v;
      }
    }
  }
  return values;
}

}  // namespace

nlohmann::json RegretReport::to_json() const {
  return {{"r_policy", r_policy}, {"r_max", r_max}, {"regret", regret},
          {"alpha", alpha},       {"gamma", gamma}, {"t_max", t_max}};
}

double exact_return(const PolicyTable& table, const EnvSpec& spec, const InitDistribution& dist) {
  check_table(table, spec);
  const StateIndexer index(spec);
  const std::vector<int> next = successor_table(spec);
  const int cells = spec.num_cells();
  double total = 0.0;
  for (int cheese = 0; cheese < cells; ++cheese) {
    // Cheese cells with zero start mass contribute nothing.
    if (dist.probability(spec, spec.cell_at(cheese == 0 ? 1 : 0), spec.cell_at(cheese)) == 0.0) {
      continue;
    }
    const auto values = value_sweep(table, spec, index, next, cheese);
    const std::vector<double>& top = values.back();
    for (int mouse = 0; mouse < cells; ++mouse) {
      if (mouse == cheese) continue;
      total += dist.probability(spec, spec.cell_at(mouse), spec.cell_at(cheese)) *
               top[static_cast<std::size_t>(mouse * kNumPrevCodes)];
    }
  }
  return total;
}

std::vector<double> exact_return_table_grad(const PolicyTable& table, const EnvSpec& spec,
                                            const InitDistribution& dist) {
  check_table(table, spec);
  const StateIndexer index(spec);
  const std::vector<int> next = successor_table(spec);
  const int cells = spec.num_cells();
  const auto width = static_cast<std::size_t>(cells * kNumPrevCodes);
  std::vector<double> grad(table.probs.size(), 0.0);

  for (int cheese = 0; cheese < cells; ++cheese) {
    if (dist.probability(spec, spec.cell_at(cheese == 0 ? 1 : 0), spec.cell_at(cheese)) == 0.0) {
      continue;
    }
    const auto values = value_sweep(table, spec, index, next, cheese);
    // adj[s] = d total / d V_k(s), walked from k = t_max down to 1.
    std::vector<double> adj(width, 0.0), adj_prev(width, 0.0);
    for (int mouse = 0; mouse < cells; ++mouse) {
      if (mouse == cheese) continue;
      adj[static_cast<std::size_t>(mouse * kNumPrevCodes)] =
          dist.probability(spec, spec.cell_at(mouse), spec.cell_at(cheese));
    }
    for (int k = spec.t_max; k >= 1; --k) {
      const std::vector<double>& prev_v = values[static_cast<std::size_t>(k - 1)];
      std::fill(adj_prev.begin(), adj_prev.end(), 0.0);
      for (int mouse = 0; mouse < cells; ++mouse) {
        if (mouse == cheese) continue;
        for (int prev = 0; prev < kNumPrevCodes; ++prev) {
          const double u = adj[static_cast<std::size_t>(mouse * kNumPrevCodes + prev)];
          if (u == 0.0) continue;
          const std::size_t row = index.row_index(cheese, mouse, prev);
          const double* pi = table.row(row);
          double* g = grad.data() + row * kNumActions;
          for (int a = 0; a < kNumActions; ++a) {
            const int to = next[static_cast<std::size_t>(mouse * kNumActions + a)];
            if (to == cheese) {
              g[a] += u;
            } else {
              const auto s_next = static_cast<std::size_t>(to * kNumPrevCodes + 1 + a);
              g[a] += u * spec.gamma * prev_v[s_next];
              adj_prev[s_next] += u * spec.gamma * pi[a];
            }
          }
        }
      }
      std::swap(adj, adj_prev);
    }
  }
  return grad;
}

double optimal_return(const EnvSpec& spec, const InitDistribution& dist) {
  const int cells = spec.num_cells();
  double total = 0.0;
  for (int cheese = 0; cheese < cells; ++cheese) {
    for (int mouse = 0; mouse < cells; ++mouse) {
      if (mouse == cheese) continue;
      const Cell m = spec.cell_at(mouse), c = spec.cell_at(cheese);
      const int d = std::abs(m.row - c.row) + std::abs(m.col - c.col);
      if (d > spec.t_max) continue;
      total += dist.probability(spec, m, c) * std::pow(spec.gamma, d - 1);
    }
  }
  return total;
}

RegretReport regret_from_table(const PolicyTable& table, const EnvSpec& spec,
                               const InitDistribution& dist) {
  RegretReport rep;
  rep.r_policy = exact_return(table, spec, dist);
  rep.r_max = optimal_return(spec, dist);
  rep.regret = rep.r_max - rep.r_policy;
  rep.alpha = dist.alpha;
  rep.gamma = spec.gamma;
  rep.t_max = spec.t_max;
  return rep;
}

RegretReport exact_regret(const PolicyParams& params, const EnvSpec& spec,
                          const InitDistribution& dist) {
  return regret_from_table(tabulate(params, spec), spec, dist);
}

std::vector<double> exact_regret_grad(const PolicyParams& params, const EnvSpec& spec,
                                      const InitDistribution& dist) {
  const PolicyTable table = tabulate(params, spec);
  const std::vector<double> dtable = exact_return_table_grad(table, spec, dist);
  const StateIndexer index(spec);
  PolicyEvaluator eval(params, spec);
  std::vector<double> grad(params.theta.size(), 0.0);
  for (std::size_t r = 0; r < table.rows(); ++r) {
    const double* d = dtable.data() + r * kNumActions;
    if (d[0] == 0.0 && d[1] == 0.0 && d[2] == 0.0 && d[3] == 0.0) continue;
    // Regret gradient is the negated return gradient.
    eval.accumulate_prob_grad(index.state_at_row(r), ActionProbs{-d[0], -d[1], -d[2], -d[3]},
                              grad);
  }
  return grad;
}

PolicyTable optimal_policy_table(const EnvSpec& spec) {
  const StateIndexer index(spec);
  PolicyTable table{spec.interior_size, std::vector<double>(index.num_rows() * kNumActions, 0.0)};
  for (std::size_t r = 0; r < index.num_rows(); ++r) {
    const GridState s = index.state_at_row(r);
    Action a;
    if (s.mouse.row > s.cheese.row) {
      a = Action::Up;
    } else if (s.mouse.row < s.cheese.row) {
      a = Action::Down;
    } else if (s.mouse.col > s.cheese.col) {
      a = Action::Left;
    } else {
      a = Action::Right;
    }
    table.row(r)[static_cast<int>(a)] = 1.0;
  }
  return table;
}

PolicyTable uniform_policy_table(const EnvSpec& spec) {
  const StateIndexer index(spec);
  return PolicyTable{spec.interior_size,
                     std::vector<double>(index.num_rows() * kNumActions, 1.0 / kNumActions)};
}

}  // namespace sltrl
