#pragma once

// Vanilla REINFORCE (no baseline, no entropy bonus) with reward-to-go and Adam.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "sltrl/env.hpp"
#include "sltrl/evaluator.hpp"
#include "sltrl/policy.hpp"

namespace sltrl {

// How a step's log-probability gradient is weighted.
//  * RewardToGo: sum_{j >= t} gamma^(j - t) r_j, the training rule as used in
//    the reference experiments.
//  * DiscountedRewardToGo: gamma^(t - 1) times the above; unbiased for the
//    gradient of the discounted return.
enum class ReturnWeighting { RewardToGo, DiscountedRewardToGo };

struct CheckpointSchedule {
  int log_spaced_count = 64;
  std::vector<std::int64_t> explicit_steps;  // overrides log spacing when non-empty

  // Sorted, unique gradient-step indices in [0, total_steps]; always includes 0
  // and total_steps.
  std::vector<std::int64_t> resolve(std::int64_t total_steps) const;
};

struct TrainConfig {
  int batch_size = 512;
  double learning_rate = 5e-5;
  double alpha = 0.68;
  // Number of gradient steps. When <= 0 it is derived from total_env_steps as
  // floor(total_env_steps / (batch_size * t_max)).
  std::int64_t gradient_steps = 0;
  std::int64_t total_env_steps = 0;
  CheckpointSchedule checkpoints;
  std::uint64_t seed = 0;
  ReturnWeighting weighting = ReturnWeighting::RewardToGo;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
  std::int64_t resolved_gradient_steps(const EnvSpec& spec) const;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState fresh(std::size_t n, double beta1 = 0.9, double beta2 = 0.999,
                         double eps = 1e-8);
};

// Ascent direction on the return:
// (1/B) sum_i sum_t weight_{i,t} grad log pi(a_{i,t} | s_{i,t}, a_{i,t-1}).
// Throws ConfigError on an empty batch.
std::vector<double> reinforce_gradient(const PolicyParams& params, const EnvSpec& spec,
                                       std::span<const Trajectory> batch,
                                       ReturnWeighting weighting = ReturnWeighting::RewardToGo);

// One Adam descent step on `loss_grad` (pass the negated ascent direction to
// maximize). Throws NumericError on a non-finite update.
void adam_step(AdamState& state, PolicyParams& params, std::span<const double> loss_grad,
               double lr);

// Samples B start states from Lambda_alpha and rolls out on-policy, one random
// stream per (seed, step, index).
std::vector<Trajectory> sample_batch(const PolicyParams& params, const EnvSpec& spec,
                                     const InitDistribution& dist, int batch_size,
                                     std::uint64_t seed, std::uint64_t step);

struct CheckpointRecord {
  std::int64_t step = 0;
  std::int64_t env_steps = 0;
  PolicyParams params;
  RegretReport regret;
};

using CheckpointSink = std::function<void(const CheckpointRecord&)>;

// Runs the training loop and calls `sink` at every scheduled checkpoint.
// Returns the final parameters.
PolicyParams train(const TrainConfig& config, const EnvSpec& spec, const PolicyParams& initial,
                   const CheckpointSink& sink);

}  // namespace sltrl
