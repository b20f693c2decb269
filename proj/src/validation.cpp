#include "sltrl/validation.hpp"

#include <chrono>
#include <cmath>

#include "sltrl/random.hpp"

namespace sltrl {

LLCConfig quadratic_validation_config() {
  LLCConfig c;
  c.step_size = 3e-5;
  c.batch_size = 3000;
  return c;
}

LLCConfig monomial_validation_config() {
  LLCConfig c;
  c.n_beta = 3000.0;
  c.sigma2 = 1.0;
  c.step_size = 1e-4;
  c.batch_size = 3000;
  return c;
}

LLCConfig ou_validation_config() {
  LLCConfig c;
  c.n_beta = 0.0;
  c.sigma2 = 1.0 / 200.0;
  c.step_size = 3e-4;
  c.chain_length = 100000;
  c.burn_in = 1000;
  c.num_chains = 1;
  c.batch_size = 1;
  return c;
}

nlohmann::json SyntheticCheck::to_json() const {
  return {{"name", name},   {"lambda", lambda_true}, {"band", {lo, hi}},
          {"pass", pass()}, {"seconds", seconds},    {"estimate", estimate.to_json()}};
}

std::vector<SyntheticCheck> run_llc_validation(bool quick, int workers) {
  struct Case {
    std::string name;
    std::unique_ptr<LossOracle> oracle;
    LLCConfig cfg;
    double lambda, lo, hi;
  };
  std::vector<Case> cases;
  for (int d : {1, 2, 8}) {
    const double lam = d / 2.0;
    cases.push_back({"quadratic_d" + std::to_string(d), make_quadratic_oracle(d),
                     quadratic_validation_config(), lam, 0.8 * lam, 1.2 * lam});
  }
  cases.push_back({"monomial_2_2", make_monomial_oracle({1, 1}), monomial_validation_config(), 0.5,
                   0.35, 0.65});

  std::vector<SyntheticCheck> out;
  for (auto& c : cases) {
    if (quick) {
      c.cfg.chain_length = 1500;
      c.cfg.num_chains = 2;
    }
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<double> w_star(c.oracle->dim(), 0.0);
    const auto traces = run_chains(w_star, *c.oracle, c.cfg, workers);
    SyntheticCheck r;
    r.name = c.name;
    r.lambda_true = c.lambda;
    r.lo = c.lo;
    r.hi = c.hi;
    r.estimate = llc_estimate(traces, c.oracle->value(w_star), c.cfg);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(std::move(r));
  }
  return out;
}

nlohmann::json OuCheck::to_json() const {
  return {{"sigma2", sigma2},
          {"variances", variances},
          {"max_rel_err", max_rel_err},
          {"steps", steps}};
}

OuCheck run_ou_check(std::int64_t steps, int dim, std::uint64_t seed) {
  LLCConfig cfg = ou_validation_config();
  const std::int64_t burn = cfg.burn_in;
  const std::vector<double> w_star(static_cast<std::size_t>(dim), 0.0);
  const std::vector<double> zero(static_cast<std::size_t>(dim), 0.0);
  std::vector<double> w = w_star;
  std::vector<double> sum(w.size(), 0.0), sum_sq(w.size(), 0.0);
  Rng rng = make_rng(seed, 0x0A);
  for (std::int64_t j = 0; j < burn + steps; ++j) {
    w = sgld_step(w, w_star, zero, cfg, rng);
    if (j < burn) continue;
    for (std::size_t i = 0; i < w.size(); ++i) {
      sum[i] += w[i];
      sum_sq[i] += w[i] * w[i];
    }
  }
  OuCheck r;
  r.sigma2 = cfg.sigma2;
  r.steps = steps;
  const double n = static_cast<double>(steps);
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double mean = sum[i] / n;
    const double var = (sum_sq[i] - n * mean * mean) / (n - 1.0);
    r.variances.push_back(var);
    r.max_rel_err = std::max(r.max_rel_err, std::abs(var - cfg.sigma2) / cfg.sigma2);
  }
  return r;
}

}  // namespace sltrl
