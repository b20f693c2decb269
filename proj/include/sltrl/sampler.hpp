#pragma once

// Importance-sampled empirical regret over trajectories collected by (possibly
// different) behavior policies:
//   G_n(w) = (1/n) sum_i q_w(tau_i) / q_{w_i}(tau_i) * (R_max - r(tau_i)).
// Environment transition and start-state factors cancel in the ratio, so the
// weights assume every trajectory was started from the evaluation
// distribution.

#include <iosfwd>
#include <map>
#include <vector>

#include "sltrl/env.hpp"
#include "sltrl/policy.hpp"

namespace sltrl {

inline constexpr double kDegenerateProbability = 1e-300;

struct DatasetEntry {
  int behavior_id = 0;
  Trajectory trajectory;
};

class Dataset {
 public:
  void add_behavior(int id, PolicyParams params);
  void add(int behavior_id, Trajectory traj);

  const PolicyParams& behavior(int id) const;
  bool has_behavior(int id) const { return m_behaviors.count(id) != 0; }
  const std::vector<DatasetEntry>& entries() const { return m_entries; }
  std::size_t size() const { return m_entries.size(); }
  bool empty() const { return m_entries.empty(); }

 private:
  std::vector<DatasetEntry> m_entries;
  std::map<int, PolicyParams> m_behaviors;
};

struct WeightStats {
  double min = 0.0;
  double max = 0.0;
  double ess = 0.0;  // (sum w)^2 / sum w^2
};

struct RegretEstimate {
  double value = 0.0;
  std::size_t n = 0;
  WeightStats weights;
};

// log q_target(traj) - log q_behavior(traj), summed per step.
// Throws DegenerateWeightError when a behavior probability is below 1e-300.
double log_importance_weight(const PolicyParams& target, const PolicyParams& behavior,
                             const Trajectory& traj, const EnvSpec& spec);

double importance_weight(const PolicyParams& target, const PolicyParams& behavior,
                         const Trajectory& traj, const EnvSpec& spec);

// g(tau) = r_max - r(tau), with r discounted at spec.gamma. Throws ConfigError
// on an empty dataset.
RegretEstimate empirical_regret(const PolicyParams& target, const Dataset& data, double r_max,
                                const EnvSpec& spec);

// (1/n) sum_i weight_i * g(tau_i) * sum_t grad log pi_target(a_t | s_t).
std::vector<double> empirical_regret_grad(const PolicyParams& target, const Dataset& data,
                                          double r_max, const EnvSpec& spec);

// On-policy dataset of n trajectories from `params` (registered as behavior 0).
Dataset collect_on_policy(const PolicyParams& params, const EnvSpec& spec,
                          const InitDistribution& dist, std::size_t n, std::uint64_t seed);

// One JSON object per line:
// {"behavior_id", "initial": {"mouse": [r, c], "cheese": [r, c], "prev": null|a},
//  "actions": [...], "rewards": [...]}.
// Behavior parameters are not serialized.
void write_jsonl(const Dataset& data, std::ostream& out);

// Replays actions through the environment to rebuild trajectories. Throws
// IoError on malformed lines and ConfigError when a replay disagrees with the
// recorded rewards.
Dataset read_jsonl(std::istream& in, const EnvSpec& spec);

}  // namespace sltrl
