#include <doctest.h>

#include "sltrl/errors.hpp"
#include "sltrl/evaluator.hpp"
#include "support.hpp"

using namespace sltrl;

TEST_CASE("exact return equals exhaustive enumeration on 3x3") {
  for (int t_max : {1, 3, 6}) {
    const EnvSpec spec = testsupport::small_spec(3, t_max, 0.9);
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      const PolicyTable t = testsupport::random_table(spec, seed);
      const double alpha = 0.25 * static_cast<double>(seed);
      const double exact = exact_return(t, spec, InitDistribution{alpha});
      const double brute = oracles::enumerated_return({3, t_max, 0.9}, alpha, t.probs);
      CHECK(std::abs(exact - brute) < 1e-12);
    }
  }
}

TEST_CASE("optimal return matches breadth-first search and the optimal table") {
  for (int m : {3, 5}) {
    for (int t_max : {2, 4, 16}) {
      const EnvSpec spec = testsupport::small_spec(m, t_max, 0.95);
      for (double alpha : {0.0, 0.68, 1.0}) {
        const InitDistribution d{alpha};
        const double r_max = optimal_return(spec, d);
        CHECK(r_max == doctest::Approx(oracles::bfs_optimal_return({m, t_max, 0.95}, alpha)).epsilon(1e-13));
        CHECK(exact_return(optimal_policy_table(spec), spec, d) == doctest::Approx(r_max).epsilon(1e-13));
      }
    }
  }
}

TEST_CASE("regret is non-negative and zero at the optimum") {
  const EnvSpec spec = testsupport::small_spec(4, 10, 0.95);
  const InitDistribution d{0.5};
  CHECK(regret_from_table(optimal_policy_table(spec), spec, d).regret == doctest::Approx(0.0).scale(1.0).epsilon(1e-14));
  for (std::uint64_t s = 0; s < 5; ++s) {
    CHECK(regret_from_table(testsupport::random_table(spec, s), spec, d).regret > 0.0);
  }
  const RegretReport u = regret_from_table(uniform_policy_table(spec), spec, d);
  CHECK(u.r_max > u.r_policy);
  CHECK(u.to_json()["regret"].get<double>() == u.regret);
}

TEST_CASE("table gradient matches central differences of the DP") {
  const EnvSpec spec = testsupport::small_spec(3, 5, 0.9);
  const InitDistribution d{0.6};
  const PolicyTable t = testsupport::random_table(spec, 9);
  const auto g = exact_return_table_grad(t, spec, d);
  Rng rng = make_rng(4);
  std::uniform_int_distribution<std::size_t> pick(0, t.probs.size() - 1);
  for (int k = 0; k < 60; ++k) {
    const std::size_t i = pick(rng);
    PolicyTable a = t, b = t;
    a.probs[i] += 1e-6;
    b.probs[i] -= 1e-6;
    const double fd = (exact_return(a, spec, d) - exact_return(b, spec, d)) / 2e-6;
    CHECK(std::abs(fd - g[i]) < 1e-8);
  }
}

TEST_CASE("exact regret gradient through the network matches enumeration differences") {
  const EnvSpec spec = testsupport::small_spec(3, 4, 0.9);
  const InitDistribution d{0.7};
  const PolicyParams p = testsupport::small_mlp(spec, 6, {6});
  const auto g = exact_regret_grad(p, spec, d);
  auto regret = [&](const std::vector<double>& th) {
    const PolicyTable t = tabulate(PolicyParams{p.arch, th}, spec);
    return oracles::bfs_optimal_return({3, 4, 0.9}, 0.7) -
           oracles::enumerated_return({3, 4, 0.9}, 0.7, t.probs);
  };
  const auto fd = oracles::central_difference(regret, p.theta, 1e-5);
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(std::abs(fd[i] - g[i]) <= 1e-4 * std::max(1.0, std::abs(fd[i])));
  }
}

TEST_CASE("mismatched table is rejected") {
  const EnvSpec spec = testsupport::small_spec(3);
  PolicyTable t = uniform_policy_table(spec);
  t.probs.pop_back();
  CHECK_THROWS_AS(exact_return(t, spec, InitDistribution{0.5}), ConfigError);
}
