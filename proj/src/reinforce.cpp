#include "sltrl/reinforce.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "sltrl/errors.hpp"

namespace sltrl {

std::vector<std::int64_t> CheckpointSchedule::resolve(std::int64_t total_steps) const {
  std::set<std::int64_t> steps{0, total_steps};
  if (!explicit_steps.empty()) {
    for (std::int64_t s : explicit_steps) {
      if (s >= 0 && s <= total_steps) steps.insert(s);
    }
  } else if (total_steps > 0 && log_spaced_count > 1) {
    const double top = std::log(static_cast<double>(total_steps));
    for (int k = 0; k < log_spaced_count; ++k) {
      const double x = top * k / (log_spaced_count - 1);
      steps.insert(std::clamp<std::int64_t>(std::llround(std::exp(x)), 1, total_steps));
    }
  }
  return {steps.begin(), steps.end()};
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
  if (gradient_steps <= 0 && total_env_steps <= 0) {
    throw ConfigError("either gradient_steps or total_env_steps must be positive");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  if (checkpoints.explicit_steps.empty() && checkpoints.log_spaced_count < 2) {
    throw ConfigError("log_spaced checkpoint count must be >= 2");
  }
}

std::int64_t TrainConfig::resolved_gradient_steps(const EnvSpec& spec) const {
  if (gradient_steps > 0) return gradient_steps;
  return total_env_steps / (static_cast<std::int64_t>(batch_size) * spec.t_max);
}

AdamState AdamState::fresh(std::size_t n, double beta1, double beta2, double eps) {
  AdamState s;
  s.m.assign(n, 0.0);
  s.v.assign(n, 0.0);
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.eps = eps;
  return s;
}

std::vector<double> reinforce_gradient(const PolicyParams& params, const EnvSpec& spec,
                                       std::span<const Trajectory> batch,
                                       ReturnWeighting weighting) {
  if (batch.empty()) throw ConfigError("reinforce_gradient: empty batch");
  PolicyEvaluator eval(params, spec);
  std::vector<double> grad(params.theta.size(), 0.0);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (const Trajectory& traj : batch) {
    // Only the goal transition is rewarded, so reward-to-go at (0-based) step t
    // is gamma^(T-1-t) when the goal is reached at step T.
    if (!traj.reached_goal) continue;
    const auto T = static_cast<int>(traj.length());
    for (int t = 0; t < T; ++t) {
      double w = std::pow(spec.gamma, T - 1 - t);
      if (weighting == ReturnWeighting::DiscountedRewardToGo) w *= std::pow(spec.gamma, t);
      const Step& s = traj.steps[static_cast<std::size_t>(t)];
      eval.accumulate_logprob_grad(s.state, s.action, w * inv_b, grad);
    }
  }
  return grad;
}

void adam_step(AdamState& state, PolicyParams& params, std::span<const double> loss_grad,
               double lr) {
  const std::size_t n = params.theta.size();
  if (loss_grad.size() != n || state.m.size() != n || state.v.size() != n) {
    throw ConfigError("adam_step: shape mismatch");
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t k = 0; k < n; ++k) {
    const double g = loss_grad[k];
    state.m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * g;
    state.v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * g * g;
    const double mhat = state.m[k] / bc1;
    const double vhat = state.v[k] / bc2;
    const double update = lr * mhat / (std::sqrt(vhat) + state.eps);
    if (!std::isfinite(update)) {
      throw NumericError("adam_step: non-finite update at coordinate " + std::to_string(k) +
                         " (step " + std::to_string(state.t) + ")");
    }
    params.theta[k] -= update;
  }
}

std::vector<Trajectory> sample_batch(const PolicyParams& params, const EnvSpec& spec,
                                     const InitDistribution& dist, int batch_size,
                                     std::uint64_t seed, std::uint64_t step) {
  PolicyEvaluator eval(params, spec);
  const PolicyFn policy = [&eval](const GridState& s) { return eval.probs(s); };
  std::vector<Trajectory> batch;
  batch.reserve(static_cast<std::size_t>(batch_size));
  for (int i = 0; i < batch_size; ++i) {
    Rng rng = make_rng(seed, step, static_cast<std::uint64_t>(i));
    const GridState init = sample_initial(spec, dist, rng);
    batch.push_back(rollout(spec, policy, init, rng));
  }
  return batch;
}

PolicyParams train(const TrainConfig& config, const EnvSpec& spec, const PolicyParams& initial,
                   const CheckpointSink& sink) {
  config.validate();
  spec.validate();
  const InitDistribution dist{config.alpha};
  const std::int64_t total = config.resolved_gradient_steps(spec);
  const std::vector<std::int64_t> schedule = config.checkpoints.resolve(total);

  PolicyParams params = initial;
  AdamState adam = AdamState::fresh(params.theta.size(), config.adam_beta1, config.adam_beta2,
                                    config.adam_eps);
  std::int64_t env_steps = 0;
  std::size_t next_ckpt = 0;

  auto emit = [&](std::int64_t step) {
    if (next_ckpt < schedule.size() && schedule[next_ckpt] == step) {
      if (sink) sink(CheckpointRecord{step, env_steps, params, exact_regret(params, spec, dist)});
      ++next_ckpt;
    }
  };

  emit(0);
  for (std::int64_t step = 1; step <= total; ++step) {
    const auto batch = sample_batch(params, spec, dist, config.batch_size, config.seed,
                                    static_cast<std::uint64_t>(step));
    for (const Trajectory& t : batch) env_steps += static_cast<std::int64_t>(t.length());
    std::vector<double> g = reinforce_gradient(params, spec, batch, config.weighting);
    for (double& x : g) x = -x;
    adam_step(adam, params, g, config.learning_rate);
    emit(step);
  }
  return params;
}

}  // namespace sltrl
