#include "sltrl/llc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "sltrl/errors.hpp"
#include "sltrl/evaluator.hpp"

namespace sltrl {

std::string to_string(Preconditioner p) { return p == Preconditioner::Rms ? "rms" : "none"; }
std::string to_string(LLCMode m) {
  return m == LLCMode::AnnealedExact ? "annealed_exact" : "tempered_sampled";
}
Preconditioner preconditioner_from_string(const std::string& s) {
  if (s == "none") return Preconditioner::None;
  if (s == "rms") return Preconditioner::Rms;
  throw ConfigError("unknown preconditioner '" + s + "'");
}
LLCMode llc_mode_from_string(const std::string& s) {
  if (s == "tempered_sampled") return LLCMode::TemperedSampled;
  if (s == "annealed_exact") return LLCMode::AnnealedExact;
  throw ConfigError("unknown llc mode '" + s + "'");
}

void LLCConfig::validate() const {
  if (!(n_beta >= 0.0) || !std::isfinite(n_beta)) throw ConfigError("n_beta must be >= 0");
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw ConfigError("sigma2 must be > 0");
  if (!(step_size > 0.0)) throw ConfigError("step_size must be > 0");
  if (chain_length < 1) throw ConfigError("chain_length must be >= 1");
  if (resolved_burn_in() >= chain_length) throw ConfigError("burn_in must be < chain_length");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (num_chains < 1) throw ConfigError("num_chains must be >= 1");
  if (!(rms_decay >= 0.0 && rms_decay < 1.0)) throw ConfigError("rms_decay must lie in [0, 1)");
  if (!(rms_eps > 0.0)) throw ConfigError("rms_eps must be > 0");
  if (!(eval_alpha >= 0.0 && eval_alpha <= 1.0)) throw ConfigError("eval_alpha must lie in [0, 1]");
  if (!(eval_gamma > 0.0 && eval_gamma < 1.0)) throw ConfigError("eval_gamma must lie in (0, 1)");
}

nlohmann::json to_json(const LLCConfig& c) {
  return {{"n_beta", c.n_beta},
          {"sigma2", c.sigma2},
          {"step_size", c.step_size},
          {"chain_length", c.chain_length},
          {"burn_in", c.resolved_burn_in()},
          {"batch_size", c.batch_size},
          {"num_chains", c.num_chains},
          {"preconditioner", to_string(c.preconditioner)},
          {"rms_decay", c.rms_decay},
          {"rms_eps", c.rms_eps},
          {"mode", to_string(c.mode)},
          {"eval_alpha", c.eval_alpha},
          {"eval_gamma", c.eval_gamma},
          {"inject_noise", c.inject_noise},
          {"seed", c.seed}};
}

namespace {

class QuadraticOracle final : public LossOracle {
 public:
  QuadraticOracle(std::size_t d, double scale) : m_d(d), m_scale(scale) {}
  std::size_t dim() const override { return m_d; }
  double value(std::span<const double> w) override {
    return m_scale * std::inner_product(w.begin(), w.end(), w.begin(), 0.0);
  }
  void gradient(std::span<const double> w, int, Rng&, std::span<double> out) override {
    for (std::size_t i = 0; i < w.size(); ++i) out[i] = 2.0 * m_scale * w[i];
  }
  std::unique_ptr<LossOracle> clone() const override {
    return std::make_unique<QuadraticOracle>(*this);
  }

 private:
  std::size_t m_d;
  double m_scale;
};

class MonomialOracle final : public LossOracle {
 public:
  explicit MonomialOracle(std::vector<int> k) : m_k(std::move(k)) {
    if (m_k.empty()) throw ConfigError("monomial oracle needs at least one exponent");
    for (int e : m_k) {
      if (e < 1) throw ConfigError("monomial half-exponents must be >= 1");
    }
  }
  std::size_t dim() const override { return m_k.size(); }
  double value(std::span<const double> u) override {
    double g = 1.0;
    for (std::size_t i = 0; i < m_k.size(); ++i) g *= std::pow(u[i], 2 * m_k[i]);
    return g;
  }
  void gradient(std::span<const double> u, int, Rng&, std::span<double> out) override {
    for (std::size_t i = 0; i < m_k.size(); ++i) {
      double g = 2.0 * m_k[i] * std::pow(u[i], 2 * m_k[i] - 1);
      for (std::size_t j = 0; j < m_k.size(); ++j) {
        if (j != i) g *= std::pow(u[j], 2 * m_k[j]);
      }
      out[i] = g;
    }
  }
  void constrain(std::span<double> u) const override {
    for (double& x : u) {
      // reflect into [-1, 1]
      x = std::fmod(x + 1.0, 4.0);
      if (x < 0.0) x += 4.0;
      x = (x <= 2.0 ? x : 4.0 - x) - 1.0;
    }
  }
  std::unique_ptr<LossOracle> clone() const override {
    return std::make_unique<MonomialOracle>(*this);
  }

 private:
  std::vector<int> m_k;
};

class ZeroOracle final : public LossOracle {
 public:
  explicit ZeroOracle(std::size_t d) : m_d(d) {}
  std::size_t dim() const override { return m_d; }
  double value(std::span<const double>) override { return 0.0; }
  void gradient(std::span<const double>, int, Rng&, std::span<double> out) override {
    std::fill(out.begin(), out.end(), 0.0);
  }
  std::unique_ptr<LossOracle> clone() const override { return std::make_unique<ZeroOracle>(*this); }

 private:
  std::size_t m_d;
};

class RegretOracle final : public LossOracle {
 public:
  RegretOracle(const ArchSpec& arch, const EnvSpec& spec, const InitDistribution& dist,
               bool exact_gradient, std::size_t max_rows, int readout_batch)
      : m_spec(spec),
        m_dist(dist),
        m_exact_gradient(exact_gradient),
        m_max_rows(max_rows),
        m_readout_batch(readout_batch),
        m_r_max(optimal_return(spec, dist)) {
    m_params.arch = arch;
    m_params.theta.assign(arch.param_count(), 0.0);
    m_tabulate = StateIndexer(spec).num_rows() <= max_rows;
    if (m_exact_gradient && !m_tabulate) {
      throw ResourceError("exact regret gradient needs a tabulable environment");
    }
  }

  RegretOracle(const RegretOracle& o)
      : RegretOracle(o.m_params.arch, o.m_spec, o.m_dist, o.m_exact_gradient, o.m_max_rows,
                     o.m_readout_batch) {
    m_rng = o.m_rng;
  }

  std::size_t dim() const override { return m_params.theta.size(); }

  double value(std::span<const double> w) override {
    load(w);
    if (m_tabulate) return regret_from_table(tabulate(m_params, m_spec, m_max_rows), m_spec, m_dist).regret;
    double acc = 0.0;
    const PolicyFn policy = [this](const GridState& s) { return evaluator().probs(s); };
    for (int i = 0; i < m_readout_batch; ++i) {
      const GridState init = sample_initial(m_spec, m_dist, m_rng);
      acc += m_r_max - rollout(m_spec, policy, init, m_rng).discounted_return(m_spec.gamma);
    }
    return acc / m_readout_batch;
  }

  void gradient(std::span<const double> w, int batch_size, Rng& rng,
                std::span<double> out) override {
    load(w);
    if (m_exact_gradient) {
      const std::vector<double> g = exact_regret_grad(m_params, m_spec, m_dist);
      std::copy(g.begin(), g.end(), out.begin());
      return;
    }
    std::fill(out.begin(), out.end(), 0.0);
    PolicyEvaluator& eval = evaluator();
    const PolicyFn policy = [&eval](const GridState& s) { return eval.probs(s); };
    const double inv_m = 1.0 / batch_size;
    for (int i = 0; i < batch_size; ++i) {
      const GridState init = sample_initial(m_spec, m_dist, rng);
      const Trajectory traj = rollout(m_spec, policy, init, rng);
      const double coeff = (m_r_max - traj.discounted_return(m_spec.gamma)) * inv_m;
      if (coeff == 0.0) continue;
      for (const Step& s : traj.steps) eval.accumulate_logprob_grad(s.state, s.action, coeff, out);
    }
  }

  void reseed(std::uint64_t seed) override { m_rng = make_rng(seed, 0x5EAD); }

  std::unique_ptr<LossOracle> clone() const override {
    return std::make_unique<RegretOracle>(*this);
  }

 private:
  void load(std::span<const double> w) {
    if (w.size() != m_params.theta.size()) throw ConfigError("regret oracle: dimension mismatch");
    std::copy(w.begin(), w.end(), m_params.theta.begin());
  }
  PolicyEvaluator& evaluator() {
    if (!m_eval) m_eval = std::make_unique<PolicyEvaluator>(m_params, m_spec);
    return *m_eval;
  }

  EnvSpec m_spec;
  InitDistribution m_dist;
  bool m_exact_gradient;
  std::size_t m_max_rows;
  int m_readout_batch;
  double m_r_max;
  bool m_tabulate = true;
  PolicyParams m_params;
  std::unique_ptr<PolicyEvaluator> m_eval;
  Rng m_rng{0};
};

double mean_of(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_sd(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean_of(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

}  // namespace

std::unique_ptr<LossOracle> make_quadratic_oracle(std::size_t d, double scale) {
  if (d == 0) throw ConfigError("quadratic oracle needs d >= 1");
  return std::make_unique<QuadraticOracle>(d, scale);
}

std::unique_ptr<LossOracle> make_monomial_oracle(std::vector<int> half_exponents) {
  return std::make_unique<MonomialOracle>(std::move(half_exponents));
}

std::unique_ptr<LossOracle> make_zero_oracle(std::size_t d) {
  return std::make_unique<ZeroOracle>(d);
}

std::unique_ptr<LossOracle> make_regret_oracle(const ArchSpec& arch, const EnvSpec& eval_spec,
                                               const InitDistribution& dist, bool exact_gradient,
                                               std::size_t max_table_rows, int readout_batch) {
  eval_spec.validate();
  dist.validate();
  return std::make_unique<RegretOracle>(arch, eval_spec, dist, exact_gradient, max_table_rows,
                                        readout_batch);
}

std::vector<double> sgld_step(std::span<const double> w, std::span<const double> w_star,
                              std::span<const double> grad_est, const LLCConfig& cfg, Rng& rng,
                              RmsState* rms) {
  const std::size_t n = w.size();
  if (w_star.size() != n || grad_est.size() != n) throw ConfigError("sgld_step: shape mismatch");
  const bool precondition = cfg.preconditioner == Preconditioner::Rms;
  if (precondition) {
    if (rms == nullptr) throw ConfigError("sgld_step: rms state required");
    if (!rms->initialized) {
      rms->v.assign(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) rms->v[i] = grad_est[i] * grad_est[i];
      rms->initialized = true;
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        rms->v[i] = cfg.rms_decay * rms->v[i] + (1.0 - cfg.rms_decay) * grad_est[i] * grad_est[i];
      }
    }
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double p = precondition ? 1.0 / (std::sqrt(rms->v[i]) + cfg.rms_eps) : 1.0;
    const double drift = -cfg.n_beta * grad_est[i] + (w_star[i] - w[i]) / cfg.sigma2;
    double x = w[i] + 0.5 * cfg.step_size * p * drift;
    if (cfg.inject_noise) x += std::sqrt(cfg.step_size * p) * normal(rng);
    if (!std::isfinite(x)) {
      throw NumericError("sgld_step: non-finite coordinate " + std::to_string(i));
    }
    out[i] = x;
  }
  return out;
}

ChainTrace run_chain(std::span<const double> w_star, LossOracle& oracle, const LLCConfig& cfg,
                     std::uint64_t seed) {
  cfg.validate();
  if (oracle.dim() != w_star.size()) throw ConfigError("run_chain: oracle dimension mismatch");
  ChainTrace trace;
  trace.seed = seed;
  trace.readouts.reserve(static_cast<std::size_t>(cfg.chain_length));
  trace.dist_to_star.reserve(static_cast<std::size_t>(cfg.chain_length));
  oracle.reseed(seed);
  Rng rng = make_rng(seed, 0x5C1D);
  RmsState rms;
  std::vector<double> w(w_star.begin(), w_star.end());
  std::vector<double> grad(w.size());
  for (int j = 1; j <= cfg.chain_length; ++j) {
    try {
      oracle.gradient(w, cfg.batch_size, rng, grad);
      w = sgld_step(w, w_star, grad, cfg, rng, &rms);
      oracle.constrain(w);
      const double g = oracle.value(w);
      if (!std::isfinite(g)) throw NumericError("non-finite readout");
      trace.readouts.push_back(g);
    } catch (const NumericError& ex) {
      trace.aborted = true;
      trace.abort_step = j;
      trace.abort_reason = ex.what();
      return trace;
    }
    double d2 = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) d2 += (w[i] - w_star[i]) * (w[i] - w_star[i]);
    trace.dist_to_star.push_back(std::sqrt(d2));
  }
  return trace;
}

LLCEstimate llc_estimate(const std::vector<ChainTrace>& traces, double g_star,
                         const LLCConfig& cfg, std::optional<double> generic_regret) {
  LLCEstimate est;
  est.g_star = g_star;
  est.burn_in = cfg.resolved_burn_in();
  std::vector<double> chain_means;
  std::vector<double> pooled;
  for (const ChainTrace& t : traces) {
    if (!t.complete(cfg.chain_length)) {
      ++est.chains_aborted;
      continue;
    }
    const std::span<const double> tail(t.readouts.data() + est.burn_in,
                                       t.readouts.size() - static_cast<std::size_t>(est.burn_in));
    double gap = 0.0;
    for (double g : tail) gap += g - g_star;
    gap /= static_cast<double>(tail.size());
    chain_means.push_back(mean_of(tail));
    est.per_chain.push_back(cfg.n_beta * gap);
    pooled.insert(pooled.end(), tail.begin(), tail.end());
  }
  if (chain_means.empty()) throw NumericError("llc_estimate: no complete chain");
  est.chains_used = chain_means.size();
  est.lambda_hat = mean_of(est.per_chain);
  est.std_error = sample_sd(est.per_chain) / std::sqrt(static_cast<double>(est.per_chain.size()));
  est.mean_readout = mean_of(chain_means);

  // Noise on the mean readout: between-chain standard error, or the naive
  // within-chain one for a single chain.
  const double readout_noise =
      chain_means.size() >= 2
          ? sample_sd(chain_means) / std::sqrt(static_cast<double>(chain_means.size()))
          : sample_sd(pooled) / std::sqrt(static_cast<double>(pooled.size()));
  const double gap = est.mean_readout - g_star;
  est.diagnostics.trained_below_wstar = gap < 0.0;
  est.diagnostics.signal_below_noise = std::abs(gap) < 3.0 * readout_noise;
  if (generic_regret) {
    est.diagnostics.floated_to_generic =
        est.mean_readout >= *generic_regret - 3.0 * std::max(readout_noise, sample_sd(pooled));
  }
  return est;
}

nlohmann::json LLCEstimate::to_json() const {
  return {{"lambda_hat", lambda_hat},
          {"per_chain", per_chain},
          {"stderr", std_error},
          {"g_star", g_star},
          {"mean_readout", mean_readout},
          {"burn_in", burn_in},
          {"chains_used", chains_used},
          {"chains_aborted", chains_aborted},
          {"diagnostics",
           {{"trained_below_wstar", diagnostics.trained_below_wstar},
            {"floated_to_generic", diagnostics.floated_to_generic},
            {"signal_below_noise", diagnostics.signal_below_noise}}}};
}

std::uint64_t chain_seed(const LLCConfig& cfg, int chain) {
  return mix_seed(mix_seed(cfg.seed) ^ static_cast<std::uint64_t>(chain + 1));
}

std::vector<ChainTrace> run_chains(std::span<const double> w_star, const LossOracle& oracle,
                                   const LLCConfig& cfg, int workers) {
  cfg.validate();
  const int chains = cfg.num_chains;
  std::vector<ChainTrace> traces(static_cast<std::size_t>(chains));
  auto run_one = [&](int c) {
    auto local = oracle.clone();
    traces[static_cast<std::size_t>(c)] = run_chain(w_star, *local, cfg, chain_seed(cfg, c));
  };
  workers = std::clamp(workers, 1, chains);
  if (workers == 1) {
    for (int c = 0; c < chains; ++c) run_one(c);
    return traces;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  for (int k = 0; k < workers; ++k) {
    pool.emplace_back([&, k] {
      try {
        for (int c = k; c < chains; c += workers) run_one(c);
      } catch (...) {
        errors[static_cast<std::size_t>(k)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return traces;
}

LLCRun estimate_llc_rl(const PolicyParams& ckpt, const EnvSpec& spec, const LLCConfig& cfg,
                       int workers) {
  cfg.validate();
  EnvSpec eval_spec = spec;
  eval_spec.gamma = cfg.eval_gamma;
  const InitDistribution dist{cfg.eval_alpha};
  const auto oracle = make_regret_oracle(ckpt.arch, eval_spec, dist,
                                         cfg.mode == LLCMode::AnnealedExact);
  const double g_star = exact_regret(ckpt, eval_spec, dist).regret;
  const double generic = regret_from_table(uniform_policy_table(eval_spec), eval_spec, dist).regret;
  LLCRun run;
  run.traces = run_chains(ckpt.theta, *oracle, cfg, workers);
  run.estimate = llc_estimate(run.traces, g_star, cfg, generic);
  return run;
}

}  // namespace sltrl
