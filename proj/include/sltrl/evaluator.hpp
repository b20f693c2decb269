#pragma once

// Exact expected discounted return by finite-horizon backward induction over a
// tabulated policy, the optimal return from shortest paths, and the regret
// G = R_max - R.

#include <vector>

#include <json.hpp>

#include "sltrl/env.hpp"
#include "sltrl/policy.hpp"

namespace sltrl {

struct RegretReport {
  double r_policy = 0.0;
  double r_max = 0.0;
  double regret = 0.0;
  double alpha = 0.0;
  double gamma = 0.0;
  int t_max = 0;

  nlohmann::json to_json() const;
};

// Sum over start states of Lambda_alpha(s0) * V_{t_max}(s0, prev = none).
// Throws ConfigError when the table does not match the spec.
double exact_return(const PolicyTable& table, const EnvSpec& spec, const InitDistribution& dist);

// d exact_return / d table entry, same layout as table.probs.
std::vector<double> exact_return_table_grad(const PolicyTable& table, const EnvSpec& spec,
                                            const InitDistribution& dist);

// Sum over start states of Lambda_alpha(s0) * gamma^(d - 1), d = Manhattan distance,
// counting 0 when d > t_max.
double optimal_return(const EnvSpec& spec, const InitDistribution& dist);

RegretReport regret_from_table(const PolicyTable& table, const EnvSpec& spec,
                               const InitDistribution& dist);

RegretReport exact_regret(const PolicyParams& params, const EnvSpec& spec,
                          const InitDistribution& dist);

// Exact gradient of the regret with respect to theta (chain rule through the DP
// and the network).
std::vector<double> exact_regret_grad(const PolicyParams& params, const EnvSpec& spec,
                                      const InitDistribution& dist);

// Deterministic shortest-path policy: close the vertical gap first, then the
// horizontal one. Rows for every previous action are identical.
PolicyTable optimal_policy_table(const EnvSpec& spec);

PolicyTable uniform_policy_table(const EnvSpec& spec);

}  // namespace sltrl
