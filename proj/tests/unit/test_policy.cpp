#include <doctest.h>

#include <numeric>

#include "sltrl/errors.hpp"
#include "sltrl/policy.hpp"
#include "support.hpp"

using namespace sltrl;

namespace {

double logprob(const PolicyParams& p, const EnvSpec& spec, const GridState& s, Action a) {
  return std::log(forward(p, spec, encode_observation(spec, s), s.prev_action)[static_cast<int>(a)]);
}

void check_logprob_gradient(const PolicyParams& params, const EnvSpec& spec, std::uint64_t seed) {
  Rng rng = make_rng(seed, 3);
  StateIndexer idx(spec);
  std::uniform_int_distribution<std::size_t> row(0, idx.num_rows() - 1);
  std::uniform_int_distribution<int> act(0, 3);
  std::uniform_int_distribution<std::size_t> coord(0, params.size() - 1);
  for (int trial = 0; trial < 3; ++trial) {
    const GridState s = idx.state_at_row(row(rng));
    const auto a = static_cast<Action>(act(rng));
    const auto g = logprob_grad(params, spec, encode_observation(spec, s), s.prev_action, a);
    for (int k = 0; k < 30; ++k) {
      const std::size_t i = coord(rng);
      PolicyParams p = params;
      p.theta[i] += 1e-5;
      const double up = logprob(p, spec, s, a);
      p.theta[i] -= 2e-5;
      const double down = logprob(p, spec, s, a);
      const double fd = (up - down) / 2e-5;
      CHECK(std::abs(fd - g[i]) <= 1e-4 * std::max(1.0, std::abs(fd)));
    }
  }
}

}  // namespace

TEST_CASE("probabilities are a distribution") {
  const EnvSpec spec = testsupport::small_spec(5);
  const PolicyParams p = testsupport::small_mlp(spec, 1);
  const PolicyTable t = tabulate(p, spec);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const double* row = t.row(r);
    CHECK(row[0] + row[1] + row[2] + row[3] == doctest::Approx(1.0).epsilon(1e-12));
    for (int a = 0; a < 4; ++a) CHECK(row[a] > 0.0);
  }
}

TEST_CASE("zero parameters give the uniform policy") {
  const EnvSpec spec = testsupport::small_spec(4);
  for (auto arch : {ArchSpec::mlp_for(spec, {8}), ArchSpec::conv_for(spec, {4, 4}, 8)}) {
    const PolicyParams p = init_params(arch, 0, InitScheme::Zero);
    const auto probs = forward(p, spec, encode_observation(spec, {{1, 1}, {2, 2}, {}}), {});
    for (double x : probs) CHECK(x == doctest::Approx(0.25));
  }
}

TEST_CASE("initialization is deterministic in the seed") {
  const EnvSpec spec = testsupport::small_spec(5);
  const auto a = testsupport::small_mlp(spec, 11);
  const auto b = testsupport::small_mlp(spec, 11);
  const auto c = testsupport::small_mlp(spec, 12);
  CHECK(a.theta == b.theta);
  CHECK(a.theta != c.theta);
  CHECK(a.size() == a.arch.param_count());
}

TEST_CASE("mlp log-probability gradient matches central differences") {
  const EnvSpec spec = testsupport::small_spec(5);
  check_logprob_gradient(testsupport::small_mlp(spec, 2, {16, 8}), spec, 1);
}

TEST_CASE("conv log-probability gradient matches central differences") {
  const EnvSpec spec = testsupport::small_spec(4);
  ArchSpec arch = ArchSpec::conv_for(spec, {4, 6}, 12);
  arch.output_init_gain = 1.0;
  check_logprob_gradient(init_params(arch, 3), spec, 2);
}

TEST_CASE("probability-gradient accumulation matches central differences") {
  const EnvSpec spec = testsupport::small_spec(4);
  const PolicyParams params = testsupport::small_mlp(spec, 4);
  const GridState s{{2, 1}, {0, 3}, Action::Down};
  const ActionProbs coeff{0.3, -1.2, 0.7, 2.0};
  PolicyEvaluator ev(params, spec);
  std::vector<double> g(params.size(), 0.0);
  ev.accumulate_prob_grad(s, coeff, g);
  auto f = [&](const std::vector<double>& th) {
    PolicyParams p{params.arch, th};
    const auto pr = forward(p, spec, encode_observation(spec, s), s.prev_action);
    double v = 0.0;
    for (int a = 0; a < 4; ++a) v += coeff[a] * pr[a];
    return v;
  };
  const auto fd = oracles::central_difference(f, params.theta, 1e-5);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i] == doctest::Approx(fd[i]).epsilon(1e-6).scale(1.0));
}

TEST_CASE("previous action changes the policy") {
  const EnvSpec spec = testsupport::small_spec(5);
  const PolicyParams p = testsupport::small_mlp(spec, 5);
  const Observation o = encode_observation(spec, {{2, 2}, {0, 0}, {}});
  const auto a = forward(p, spec, o, std::nullopt);
  const auto b = forward(p, spec, o, Action::Left);
  CHECK(a != b);
}

TEST_CASE("tabulation budget and architecture checks") {
  const EnvSpec spec = testsupport::small_spec(5);
  const PolicyParams p = testsupport::small_mlp(spec, 5);
  CHECK_THROWS_AS(tabulate(p, spec, 10), ResourceError);
  EnvSpec other = spec;
  other.interior_size = 6;
  CHECK_THROWS_AS(PolicyEvaluator(p, other), ConfigError);
  ArchSpec bad = ArchSpec::mlp_for(spec, {});
  bad.widths = {0};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}
