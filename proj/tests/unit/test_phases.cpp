#include <doctest.h>

#include "sltrl/errors.hpp"
#include "sltrl/evaluator.hpp"
#include "sltrl/phases.hpp"
#include "support.hpp"

using namespace sltrl;

namespace {

PolicyTable constant_table(const EnvSpec& spec, ActionProbs p) {
  PolicyTable t = uniform_policy_table(spec);
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (int a = 0; a < 4; ++a) t.row(r)[a] = p[a];
  return t;
}

PolicyTable mix(const PolicyTable& a, const PolicyTable& b, double s) {
  PolicyTable t = a;
  for (std::size_t i = 0; i < t.probs.size(); ++i) t.probs[i] = (1 - s) * a.probs[i] + s * b.probs[i];
  return t;
}

}  // namespace

TEST_CASE("phase one point has zero distance to itself and is not goal-seeking") {
  const EnvSpec spec = testsupport::small_spec(5);
  const PolicyTable p1 = constant_table(spec, {0.5, 0, 0.5, 0});
  const PhaseDistance d = phase_distance(p1, PhaseSpec::of(Phase::P1), spec);
  CHECK(d.raw == 0.0);
  CHECK(d.normalized == 0.0);
  const PhaseReading r = classify(p1, 0.15, spec);
  CHECK(r.has(Phase::P1));
  CHECK_FALSE(r.has(Phase::P3));
  CHECK(r.distance(Phase::P3) > 0.0);
}

TEST_CASE("uniform policy against the phase one point") {
  const EnvSpec spec = testsupport::small_spec(5);
  const PhaseDistance d = phase_distance(uniform_policy_table(spec), PhaseSpec::of(Phase::P1), spec);
  const double states = static_cast<double>(spec.num_states());
  CHECK(d.raw == doctest::Approx(0.5 * std::sqrt(states)).epsilon(1e-12));
  CHECK(d.normalized == doctest::Approx(0.5 * std::sqrt(states) / std::sqrt(4 * states)).epsilon(1e-12));
  // brute-force per-state check
  const std::array<double, 4> u{0.25, 0.25, 0.25, 0.25}, p{0.5, 0, 0.5, 0};
  double sq = 0;
  for (int a = 0; a < 4; ++a) sq += (u[a] - p[a]) * (u[a] - p[a]);
  CHECK(sq == doctest::Approx(0.25));
}

TEST_CASE("shortest-path policy is goal-seeking") {
  for (int m : {3, 5, 7}) {
    const EnvSpec spec = testsupport::small_spec(m);
    const PolicyTable opt = optimal_policy_table(spec);
    CHECK(phase_distance(opt, PhaseSpec::of(Phase::P3), spec).raw == 0.0);
    const PhaseReading r = classify(opt, 0.15, spec);
    CHECK(r.has(Phase::P3));
    CHECK_FALSE(r.has(Phase::P1));
  }
}

TEST_CASE("delta zero detects nothing off the subspaces") {
  const EnvSpec spec = testsupport::small_spec(4);
  const PhaseReading r = classify(testsupport::random_table(spec, 1), 0.0, spec);
  for (Phase p : kAllPhases) CHECK_FALSE(r.has(p));
  CHECK(r.detected_label().empty());
  CHECK_THROWS_AS(classify(uniform_policy_table(spec), 1.0, spec), ConfigError);
}

TEST_CASE("masks") {
  const EnvSpec spec = testsupport::small_spec(5);
  const Cell goal{2, 2};
  const auto p3 = PhaseSpec::of(Phase::P3);
  // mouse below-right of the goal: only up and left
  CHECK(p3.allowed(spec, {4, 4}, goal) == ActionMask{true, false, true, false});
  // same row, to the left: only right
  CHECK(p3.allowed(spec, {2, 0}, goal) == ActionMask{false, false, false, true});
  const auto p2a = PhaseSpec::of(Phase::P2a);
  CHECK(p2a.allowed(spec, {3, 3}, goal) == ActionMask{true, false, true, false});
  CHECK(p2a.allowed(spec, {0, 3}, goal) == ActionMask{false, false, true, false});
  CHECK(p2a.allowed(spec, {3, 0}, goal) == ActionMask{true, false, false, false});
  // top-left cell: every action forbidden, left unconstrained
  CHECK(p2a.allowed(spec, {0, 0}, goal) == ActionMask{true, true, true, true});
  const auto p2b = PhaseSpec::of(Phase::P2b);
  CHECK(p2b.allowed(spec, {4, 2}, goal) == ActionMask{true, false, false, false});
  CHECK(p2b.allowed(spec, {2, 4}, goal) == ActionMask{false, false, true, false});
  for (Phase ph : kAllPhases) CHECK(phase_from_string(to_string(ph)) == ph);
}

TEST_CASE("projection agrees with the grid-search oracle") {
  Rng rng = make_rng(8);
  std::gamma_distribution<double> g(1.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    ActionProbs p;
    double s = 0;
    for (double& x : p) s += (x = g(rng));
    for (double& x : p) x /= s;
    ActionMask allowed;
    int count = 0;
    do {
      count = 0;
      for (bool& b : allowed) count += (b = uniform01(rng) < 0.6);
    } while (count == 0);
    const ActionProbs q = project_onto_face(p, allowed);
    double sum = 0;
    for (int a = 0; a < 4; ++a) {
      CHECK(q[a] >= 0.0);
      if (!allowed[a]) CHECK(q[a] == 0.0);
      sum += q[a];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    const auto best = oracles::grid_search_projection(p, allowed, 1e-3);
    double dq = 0, db = 0;
    for (int a = 0; a < 4; ++a) {
      dq += (p[a] - q[a]) * (p[a] - q[a]);
      db += (p[a] - best[a]) * (p[a] - best[a]);
    }
    CHECK(std::sqrt(dq) <= std::sqrt(db) + 1e-3);
  }
}

TEST_CASE("P2b is never closer than P2a") {
  const EnvSpec spec = testsupport::small_spec(4);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const PolicyTable t = testsupport::random_table(spec, s);
    CHECK(phase_distance(t, PhaseSpec::of(Phase::P2b), spec).raw >=
          phase_distance(t, PhaseSpec::of(Phase::P2a), spec).raw - 1e-15);
  }
}

TEST_CASE("normalizer counts allowed coordinates") {
  const EnvSpec spec = testsupport::small_spec(3);
  const PolicyTable u = uniform_policy_table(spec);
  CHECK(phase_distance(u, PhaseSpec::of(Phase::P1), spec).d_max == doctest::Approx(std::sqrt(4.0 * 72)));
  // P2a on 3x3: 9 mouse cells x 8 goals; top-left unconstrained (4), other top-row
  // and left-column cells 1 each (4 cells), interior cells 2 each (4 cells)
  const double free_dims = 8.0 * (4 + 4 * 1 + 4 * 2);
  CHECK(phase_distance(u, PhaseSpec::of(Phase::P2a), spec).d_max ==
        doctest::Approx(std::sqrt(4.0 * 72 - free_dims)));
}

TEST_CASE("raw distance does not depend on state enumeration order") {
  const EnvSpec spec = testsupport::small_spec(3);
  const PolicyTable t = testsupport::random_table(spec, 4);
  StateIndexer idx(spec);
  double sq = 0.0;
  // reverse order over pairs
  for (std::size_t k = idx.num_pairs(); k-- > 0;) {
    const GridState s = idx.state_at_row(k * kNumPrevCodes);
    const double* row = t.row(k * kNumPrevCodes);
    const ActionProbs p{row[0], row[1], row[2], row[3]};
    const auto q = project_onto_face(p, PhaseSpec::of(Phase::P3).allowed(spec, s.mouse, s.cheese));
    for (int a = 0; a < 4; ++a) sq += (p[a] - q[a]) * (p[a] - q[a]);
  }
  CHECK(phase_distance(t, PhaseSpec::of(Phase::P3), spec).raw == doctest::Approx(std::sqrt(sq)).epsilon(1e-13));
}

TEST_CASE("transition steps on an interpolation towards the phase one point") {
  const EnvSpec spec = testsupport::small_spec(4);
  const PolicyTable u = uniform_policy_table(spec);
  const PolicyTable p1 = constant_table(spec, {0.5, 0, 0.5, 0});
  std::vector<std::pair<std::int64_t, PolicyTable>> series;
  for (int k = 0; k <= 20; ++k) series.emplace_back(10 * k, mix(u, p1, k / 20.0));
  const TransitionSummary s = transition_steps(series, 0.15, spec);
  // normalized distance of the mix is (1 - s) * 0.25 exactly
  int first = -1;
  for (int k = 0; k <= 20; ++k) {
    if ((1 - k / 20.0) * 0.25 < 0.15) {
      first = k;
      break;
    }
  }
  REQUIRE(s.entry_step.count(Phase::P1));
  CHECK(s.entry_step.at(Phase::P1) == 10 * first);
  CHECK(s.entry_index.at(Phase::P1) == static_cast<std::size_t>(first));
  REQUIRE(s.dwell.at(Phase::P1).size() == 1);
  CHECK(s.dwell.at(Phase::P1)[0].last_step == 200);

  std::vector<std::pair<std::int64_t, PolicyTable>> flat{{0, u}, {5, u}};
  CHECK_FALSE(transition_steps(flat, 0.15, spec).entry_step.count(Phase::P1));
  CHECK_THROWS_AS(transition_steps(std::vector<std::pair<std::int64_t, PolicyTable>>{}, 0.15, spec), ConfigError);
}

TEST_CASE("stage segments follow stage entries") {
  TransitionSummary s;
  s.entry_index = {{Phase::P1, 2}, {Phase::P2b, 5}, {Phase::P2a, 6}, {Phase::P3, 9}};
  const auto seg = stage_segments(s, 12);
  REQUIRE(seg.size() == 3);
  CHECK(seg[0].stage == Stage::S1);
  CHECK(seg[0].first_index == 2);
  CHECK(seg[0].last_index == 4);
  CHECK(seg[1].first_index == 5);
  CHECK(seg[1].last_index == 8);
  CHECK(seg[2].first_index == 9);
  CHECK(seg[2].last_index == 11);
  CHECK(has_full_staircase(s));
  s.entry_index[Phase::P3] = 1;
  CHECK_FALSE(has_full_staircase(s));
  CHECK(stage_segments(s, 12).empty());
}
