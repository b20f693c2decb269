#include <doctest.h>
#include <numeric>

#include <algorithm>

#include "sltrl/errors.hpp"
#include "sltrl/evaluator.hpp"
#include "sltrl/llc.hpp"
#include "support.hpp"

using namespace sltrl;

namespace {

LLCConfig quick(double n_beta, double sigma2, double eps, int T = 2000, int chains = 3) {
  LLCConfig c;
  c.n_beta = n_beta;
  c.sigma2 = sigma2;
  c.step_size = eps;
  c.chain_length = T;
  c.num_chains = chains;
  c.batch_size = 1;
  return c;
}

}  // namespace

TEST_CASE("config validation and defaults") {
  LLCConfig c;
  CHECK(c.sigma2 == 1.0 / 200.0);
  CHECK(c.n_beta == 1000.0);
  CHECK(c.resolved_burn_in() == 3000);
  c.validate();
  c.burn_in = 6000;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = LLCConfig{};
  c.sigma2 = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = LLCConfig{};
  c.num_chains = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(preconditioner_from_string("rms") == Preconditioner::Rms);
  CHECK(llc_mode_from_string(to_string(LLCMode::AnnealedExact)) == LLCMode::AnnealedExact);
  CHECK_THROWS_AS(llc_mode_from_string("x"), ConfigError);
}

TEST_CASE("at the localization center with zero gradient the step is pure noise") {
  const LLCConfig c = quick(1000, 0.005, 1e-6);
  const std::vector<double> w(4, 0.3), g(4, 0.0);
  Rng rng = make_rng(1);
  double ss = 0.0, s = 0.0;
  const int n = 50000;
  for (int k = 0; k < n; ++k) {
    const auto next = sgld_step(w, w, g, c, rng);
    for (int i = 0; i < 4; ++i) {
      s += next[i] - w[i];
      ss += (next[i] - w[i]) * (next[i] - w[i]);
    }
  }
  CHECK(std::abs(s / (4 * n)) < 5 * std::sqrt(1e-6 / (4 * n)));
  CHECK(ss / (4 * n) == doctest::Approx(1e-6).epsilon(0.03));
}

TEST_CASE("noise-free chain converges geometrically to the Gaussian mode") {
  LLCConfig c = quick(10, 0.5, 1e-3);
  c.inject_noise = false;
  const std::vector<double> w_star{1.0, -2.0, 0.5};
  auto oracle = make_quadratic_oracle(3);
  // argmin n_beta |w|^2 + |w - w*|^2 / (2 sigma2) = w* / (1 + 2 n_beta sigma2)
  std::vector<double> w = w_star, g(3);
  Rng rng = make_rng(0);
  double prev_err = 1e9;
  for (int k = 0; k < 4000; ++k) {
    oracle->gradient(w, 1, rng, g);
    w = sgld_step(w, w_star, g, c, rng);
    double err = 0.0;
    for (int i = 0; i < 3; ++i) err = std::max(err, std::abs(w[i] - w_star[i] / 11.0));
    CHECK(err <= prev_err);
    prev_err = err;
  }
  CHECK(prev_err < 1e-12);
}

TEST_CASE("localization-only chain has the Ornstein-Uhlenbeck variance") {
  LLCConfig c = quick(0.0, 0.01, 2e-4, 60000, 1);
  auto zero = make_zero_oracle(3);
  const std::vector<double> w_star(3, 0.0);
  // sampled through run_chain: readouts are 0, distances carry the spread
  const ChainTrace t = run_chain(w_star, *zero, c, 5);
  double ss = 0.0;
  for (std::size_t j = 1000; j < t.dist_to_star.size(); ++j) ss += t.dist_to_star[j] * t.dist_to_star[j];
  const double var = ss / (3.0 * (t.dist_to_star.size() - 1000));
  // discrete-time stationary variance sigma2 / (1 - a / 2), a = eps / (2 sigma2)
  CHECK(var == doctest::Approx(0.01 / (1 - 0.005)).epsilon(0.05));
}

TEST_CASE("zero loss gives zero readouts and a zero estimate") {
  const LLCConfig c = quick(1000, 0.005, 1e-5, 500, 2);
  auto zero = make_zero_oracle(5);
  const auto traces = run_chains(std::vector<double>(5, 0.0), *zero, c);
  for (const auto& t : traces) {
    CHECK(t.readouts.size() == 500);
    for (double g : t.readouts) CHECK(g == 0.0);
  }
  const LLCEstimate e = llc_estimate(traces, 0.0, c);
  CHECK(e.lambda_hat == 0.0);
  CHECK(e.std_error == 0.0);
}

TEST_CASE("chains are deterministic in the seed") {
  const LLCConfig c = quick(1000, 0.005, 1e-5, 300, 2);
  auto q = make_quadratic_oracle(4);
  const std::vector<double> w(4, 0.0);
  const ChainTrace a = run_chain(w, *q, c, 17);
  const ChainTrace b = run_chain(w, *q, c, 17);
  const ChainTrace d = run_chain(w, *q, c, 18);
  CHECK(a.readouts == b.readouts);
  CHECK(a.dist_to_star == b.dist_to_star);
  CHECK(a.readouts != d.readouts);
  const auto serial = run_chains(w, *q, c, 1);
  const auto parallel = run_chains(w, *q, c, 2);
  for (std::size_t k = 0; k < serial.size(); ++k) CHECK(serial[k].readouts == parallel[k].readouts);
}

TEST_CASE("estimate arithmetic: scale equivariance, chain permutation, constant readouts") {
  LLCConfig c = quick(1000, 0.005, 1e-5, 10, 3);
  c.burn_in = 4;
  std::vector<ChainTrace> traces(3);
  Rng rng = make_rng(2);
  for (auto& t : traces) {
    for (int j = 0; j < 10; ++j) t.readouts.push_back(0.1 + 0.01 * uniform01(rng));
  }
  const double g_star = 0.1;
  const LLCEstimate base = llc_estimate(traces, g_star, c);
  CHECK(base.lambda_hat == doctest::Approx(std::accumulate(base.per_chain.begin(), base.per_chain.end(), 0.0) / 3));

  auto scaled = traces;
  for (auto& t : scaled)
    for (double& g : t.readouts) g = g_star + 4.0 * (g - g_star);
  CHECK(llc_estimate(scaled, g_star, c).lambda_hat == doctest::Approx(4.0 * base.lambda_hat).epsilon(1e-12));

  auto permuted = traces;
  std::rotate(permuted.begin(), permuted.begin() + 1, permuted.end());
  const LLCEstimate p = llc_estimate(permuted, g_star, c);
  CHECK(p.lambda_hat == doctest::Approx(base.lambda_hat).epsilon(1e-14));
  CHECK(p.std_error == doctest::Approx(base.std_error).epsilon(1e-12));

  auto flat = traces;
  for (auto& t : flat) std::fill(t.readouts.begin(), t.readouts.end(), g_star);
  CHECK(llc_estimate(flat, g_star, c).lambda_hat == 0.0);

  auto below = traces;
  for (auto& t : below)
    for (double& g : t.readouts) g = g_star - 0.05;
  CHECK(llc_estimate(below, g_star, c).diagnostics.trained_below_wstar);
  CHECK(llc_estimate(traces, g_star, c, 0.1).diagnostics.floated_to_generic);
  CHECK_FALSE(llc_estimate(traces, g_star, c, 5.0).diagnostics.floated_to_generic);
}

TEST_CASE("divergent chains abort with the step recorded") {
  LLCConfig c = quick(1e6, 0.005, 1.0, 200, 2);
  auto q = make_quadratic_oracle(2);
  const auto traces = run_chains(std::vector<double>{0.1, 0.1}, *q, c);
  for (const auto& t : traces) {
    CHECK(t.aborted);
    CHECK(t.abort_step > 0);
    CHECK_FALSE(t.abort_reason.empty());
  }
  CHECK_THROWS_AS(llc_estimate(traces, 0.0, c), NumericError);
}

TEST_CASE("longer burn-in on a converged chain moves the estimate by less than its error") {
  LLCConfig c = quick(1000, 0.005, 3e-5, 6000, 5);
  auto q = make_quadratic_oracle(2);
  const auto traces = run_chains(std::vector<double>(2, 0.0), *q, c);
  c.burn_in = 3000;
  const LLCEstimate a = llc_estimate(traces, 0.0, c);
  c.burn_in = 4000;
  const LLCEstimate b = llc_estimate(traces, 0.0, c);
  CHECK(std::abs(a.lambda_hat - b.lambda_hat) < a.std_error);
}

TEST_CASE("rms preconditioning scales drift by the running gradient magnitude") {
  LLCConfig c = quick(10, 0.5, 1e-3);
  c.preconditioner = Preconditioner::Rms;
  c.inject_noise = false;
  const std::vector<double> w{0.2, -0.1}, w_star{0.0, 0.0}, g{4.0, -0.25};
  Rng rng = make_rng(0);
  RmsState rms;
  const auto next = sgld_step(w, w_star, g, c, rng, &rms);
  for (int i = 0; i < 2; ++i) {
    const double drift = -10 * g[i] + (w_star[i] - w[i]) / 0.5;
    CHECK(next[i] - w[i] == doctest::Approx(0.5e-3 * drift / (std::abs(g[i]) + 1e-8)).epsilon(1e-12));
  }
  // second step uses v = rho v + (1 - rho) g^2
  const std::vector<double> g2{0.0, 1.0};
  const auto after = sgld_step(next, w_star, g2, c, rng, &rms);
  const double v0 = 0.99 * 16.0;
  const double drift0 = -10 * 0.0 + (0.0 - next[0]) / 0.5;
  CHECK(after[0] - next[0] == doctest::Approx(0.5e-3 * drift0 / (std::sqrt(v0) + 1e-8)).epsilon(1e-12));
  CHECK_THROWS_AS(sgld_step(w, w_star, g, c, rng, nullptr), ConfigError);
}

TEST_CASE("monomial oracle stays inside its box") {
  auto m = make_monomial_oracle({1, 2});
  std::vector<double> u{1.3, -3.5};
  m->constrain(u);
  CHECK(u[0] == doctest::Approx(0.7));
  CHECK(u[1] == doctest::Approx(0.5));
  CHECK(m->value(u) == doctest::Approx(0.49 * 0.0625));
  Rng rng = make_rng(0);
  std::vector<double> g(2);
  m->gradient(u, 1, rng, g);
  CHECK(g[0] == doctest::Approx(2 * 0.7 * 0.0625));
  CHECK(g[1] == doctest::Approx(0.49 * 4 * 0.125));
}

TEST_CASE("regret oracle readouts and exact drift match the evaluator") {
  const EnvSpec spec = testsupport::small_spec(4, 10, 0.9);
  const InitDistribution d{0.5};
  const PolicyParams p = testsupport::small_mlp(spec, 12, {8});
  auto exact = make_regret_oracle(p.arch, spec, d, true);
  CHECK(exact->value(p.theta) == doctest::Approx(exact_regret(p, spec, d).regret).epsilon(1e-14));
  Rng rng = make_rng(0);
  std::vector<double> g(p.size());
  exact->gradient(p.theta, 1, rng, g);
  CHECK(g == exact_regret_grad(p, spec, d));

  // sampled drift averages to the exact gradient
  auto sampled = make_regret_oracle(p.arch, spec, d, false);
  std::vector<double> acc(p.size(), 0.0), one(p.size());
  const int reps = 40;
  for (int r = 0; r < reps; ++r) {
    sampled->gradient(p.theta, 500, rng, one);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += one[i] / reps;
  }
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < acc.size(); ++i) {
    num += (acc[i] - g[i]) * (acc[i] - g[i]);
    den += g[i] * g[i];
  }
  CHECK(std::sqrt(num / den) < 0.2);

  // sampled readout when the table budget is too small
  auto no_table = make_regret_oracle(p.arch, spec, d, false, 10, 20000);
  no_table->reseed(3);
  CHECK(no_table->value(p.theta) == doctest::Approx(exact_regret(p, spec, d).regret).epsilon(0.05));
  CHECK_THROWS_AS(make_regret_oracle(p.arch, spec, d, true, 10), ResourceError);
}

TEST_CASE("end-to-end policy estimate is deterministic and reports the checkpoint regret") {
  const EnvSpec spec = testsupport::small_spec(4, 10, 0.9);
  const PolicyParams p = testsupport::small_mlp(spec, 12, {8});
  LLCConfig c = quick(100, 0.005, 1e-6, 40, 2);
  c.batch_size = 16;
  c.eval_alpha = 0.3;
  c.eval_gamma = 0.8;
  const LLCRun a = estimate_llc_rl(p, spec, c);
  const LLCRun b = estimate_llc_rl(p, spec, c);
  CHECK(a.estimate.lambda_hat == b.estimate.lambda_hat);
  EnvSpec eval = spec;
  eval.gamma = 0.8;
  CHECK(a.estimate.g_star == exact_regret(p, eval, InitDistribution{0.3}).regret);
  CHECK(a.traces.size() == 2);
  const auto j = a.estimate.to_json();
  CHECK(j.contains("diagnostics"));
  CHECK(j["per_chain"].size() == 2);
}
