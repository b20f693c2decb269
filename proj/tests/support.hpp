#pragma once

#include <cmath>
#include <vector>

#include "oracles/oracles.hpp"
#include "sltrl/env.hpp"
#include "sltrl/policy.hpp"
#include "sltrl/random.hpp"

namespace testsupport {

inline sltrl::EnvSpec small_spec(int m = 3, int t_max = 6, double gamma = 0.9) {
  sltrl::EnvSpec s;
  s.interior_size = m;
  s.t_max = t_max;
  s.gamma = gamma;
  return s;
}

// Softmax of Gaussian logits with scale `temp` in every row.
inline sltrl::PolicyTable random_table(const sltrl::EnvSpec& spec, std::uint64_t seed,
                                       double temp = 1.5) {
  sltrl::StateIndexer idx(spec);
  sltrl::PolicyTable t;
  t.interior_size = spec.interior_size;
  t.probs.resize(idx.num_rows() * 4);
  sltrl::Rng rng = sltrl::make_rng(seed, 77);
  std::normal_distribution<double> n(0.0, temp);
  for (std::size_t r = 0; r < idx.num_rows(); ++r) {
    double z[4], s = 0.0;
    for (double& v : z) {
      v = std::exp(n(rng));
      s += v;
    }
    for (int a = 0; a < 4; ++a) t.probs[r * 4 + a] = z[a] / s;
  }
  return t;
}

inline sltrl::Trajectory to_trajectory(const oracles::EnumTrajectory& e, oracles::Pos cheese) {
  sltrl::Trajectory t;
  for (const auto& s : e.steps) {
    sltrl::GridState st{{s.mouse.r, s.mouse.c}, {cheese.r, cheese.c}, sltrl::prev_from_code(s.prev_code)};
    t.steps.push_back(sltrl::Step{st, static_cast<sltrl::Action>(s.action), 0.0});
  }
  if (e.reached && !t.steps.empty()) t.steps.back().reward = 1.0;
  t.reached_goal = e.reached;
  return t;
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

// Small MLP on a given environment.
inline sltrl::PolicyParams small_mlp(const sltrl::EnvSpec& spec, std::uint64_t seed,
                                     std::vector<int> widths = {8, 8}, double gain = 1.0) {
  sltrl::ArchSpec a = sltrl::ArchSpec::mlp_for(spec, std::move(widths));
  a.output_init_gain = gain;
  return sltrl::init_params(a, seed);
}

}  // namespace testsupport
