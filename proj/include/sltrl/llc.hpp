#pragma once

// Local learning coefficient estimation by (preconditioned) SGLD on the
// localized tempered posterior
//   p(w) ~ exp(-n_beta G(w) - |w - w*|^2 / (2 sigma2)),
// with lambda_hat = n_beta (E[G(w)] - G(w*)).

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sltrl/env.hpp"
#include "sltrl/policy.hpp"
#include "sltrl/random.hpp"

namespace sltrl {

enum class Preconditioner { None, Rms };
enum class LLCMode { TemperedSampled, AnnealedExact };

std::string to_string(Preconditioner p);
std::string to_string(LLCMode m);
Preconditioner preconditioner_from_string(const std::string& s);
LLCMode llc_mode_from_string(const std::string& s);

struct LLCConfig {
  double n_beta = 1000.0;
  double sigma2 = 1.0 / 200.0;
  double step_size = 1e-6;
  int chain_length = 6000;
  int burn_in = -1;  // < 0: chain_length / 2
  int batch_size = 4800;
  int num_chains = 5;
  Preconditioner preconditioner = Preconditioner::None;
  double rms_decay = 0.99;
  double rms_eps = 1e-8;
  LLCMode mode = LLCMode::TemperedSampled;
  double eval_alpha = 0.68;
  double eval_gamma = 0.975;
  bool inject_noise = true;
  std::uint64_t seed = 0;

  void validate() const;
  int resolved_burn_in() const { return burn_in < 0 ? chain_length / 2 : burn_in; }
};

nlohmann::json to_json(const LLCConfig& cfg);

// Loss whose local geometry is probed. `value` is the readout G(w);
// `gradient` writes an estimate of grad G(w) drawn from `batch_size` samples.
class LossOracle {
 public:
  virtual ~LossOracle() = default;
  virtual std::size_t dim() const = 0;
  virtual double value(std::span<const double> w) = 0;
  virtual void gradient(std::span<const double> w, int batch_size, Rng& rng,
                        std::span<double> out) = 0;
  // Maps a proposal back into the loss's domain (identity by default).
  virtual void constrain(std::span<double> w) const { (void)w; }
  // Reseeds any internal randomness (sampled readouts).
  virtual void reseed(std::uint64_t seed) { (void)seed; }
  // Independent copy for another chain.
  virtual std::unique_ptr<LossOracle> clone() const = 0;
};

// G(w) = scale * |w|^2 (true lambda = d / 2 at w = 0).
std::unique_ptr<LossOracle> make_quadratic_oracle(std::size_t d, double scale = 1.0);

// G(u) = prod_i u_i^(2 k_i) on the box [-1, 1]^d, proposals reflected at the
// box faces (true lambda = min_i 1 / (2 k_i) at u = 0).
std::unique_ptr<LossOracle> make_monomial_oracle(std::vector<int> half_exponents);

// G == 0.
std::unique_ptr<LossOracle> make_zero_oracle(std::size_t d);

// Regret of a policy network under the evaluation distribution of `eval_spec`
// and `dist`. The drift estimate is the on-policy score-function gradient from
// `batch_size` fresh trajectories (or the exact gradient when `exact_gradient`);
// the readout is the exact regret when the policy table fits `max_table_rows`,
// otherwise a sampled estimate from `readout_batch` trajectories.
std::unique_ptr<LossOracle> make_regret_oracle(const ArchSpec& arch, const EnvSpec& eval_spec,
                                               const InitDistribution& dist,
                                               bool exact_gradient,
                                               std::size_t max_table_rows = kDefaultTableRowBudget,
                                               int readout_batch = 4096);

struct RmsState {
  std::vector<double> v;
  bool initialized = false;
};

// w' = w + (eps/2) P (-n_beta grad + (w* - w) / sigma2) + sqrt(eps P) xi, xi ~ N(0, I),
// P = 1 without preconditioning or 1 / (sqrt(v) + rms_eps) with the RMS
// accumulator v <- rho v + (1 - rho) grad^2. `rms` may be null when
// preconditioning is off. Throws NumericError on a non-finite result.
std::vector<double> sgld_step(std::span<const double> w, std::span<const double> w_star,
                              std::span<const double> grad_est, const LLCConfig& cfg, Rng& rng,
                              RmsState* rms = nullptr);

struct ChainTrace {
  std::vector<double> readouts;     // G(w_j), j = 1..T
  std::vector<double> dist_to_star; // |w_j - w*|
  std::uint64_t seed = 0;
  bool aborted = false;
  int abort_step = -1;
  std::string abort_reason;

  bool complete(int chain_length) const {
    return !aborted && static_cast<int>(readouts.size()) == chain_length;
  }
};

ChainTrace run_chain(std::span<const double> w_star, LossOracle& oracle, const LLCConfig& cfg,
                     std::uint64_t seed);

struct LLCDiagnostics {
  bool trained_below_wstar = false;
  bool floated_to_generic = false;
  bool signal_below_noise = false;
};

struct LLCEstimate {
  double lambda_hat = 0.0;
  std::vector<double> per_chain;
  double std_error = 0.0;
  double g_star = 0.0;
  double mean_readout = 0.0;
  int burn_in = 0;
  std::size_t chains_used = 0;
  std::size_t chains_aborted = 0;
  LLCDiagnostics diagnostics;

  nlohmann::json to_json() const;
};

// Per chain: n_beta * (mean of readouts after burn-in - g_star); the estimate
// is the mean over complete chains. `generic_regret`, when given, is the
// readout of a featureless policy used for the floated-to-generic check.
// Throws NumericError when no chain is complete.
LLCEstimate llc_estimate(const std::vector<ChainTrace>& traces, double g_star,
                         const LLCConfig& cfg,
                         std::optional<double> generic_regret = std::nullopt);

// Chain seed for chain index c of a configuration.
std::uint64_t chain_seed(const LLCConfig& cfg, int chain);

// Runs cfg.num_chains chains (up to `workers` in parallel) from `w_star`.
std::vector<ChainTrace> run_chains(std::span<const double> w_star, const LossOracle& oracle,
                                   const LLCConfig& cfg, int workers = 1);

struct LLCRun {
  LLCEstimate estimate;
  std::vector<ChainTrace> traces;
};

// LLC of a policy checkpoint with respect to the regret at (eval_alpha,
// eval_gamma), which may differ from the training distribution.
LLCRun estimate_llc_rl(const PolicyParams& ckpt, const EnvSpec& spec, const LLCConfig& cfg,
                       int workers = 1);

}  // namespace sltrl
