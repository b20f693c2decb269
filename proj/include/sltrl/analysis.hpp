#pragma once

// Free-energy bookkeeping between two phases and the statistics used on
// transition data.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace sltrl {

struct PhaseComparison {
  double delta_G = 0.0;       // G_1 - G_2 >= 0
  double delta_lambda = 0.0;  // lambda_2 - lambda_1
  std::optional<double> n_star;
  bool empirical_regret = false;  // inputs were sampled rather than exact
};

// Fills n_star when both gaps are positive and a crossing exists.
PhaseComparison compare_phases(double g1, double lambda1, double g2, double lambda2,
                               bool empirical_regret = false);

// n dG - dlambda log n (the o(log n) remainder is dropped). Negative values
// favour the simpler phase. Throws ConfigError when n < 1.
double free_energy_gap(const PhaseComparison& cmp, double n);

// Solution n* > e of n / log n = C, C = dlambda / dG, by bisection on
// [e, C^2 + 10]. Returns nullopt when C < e (no crossing); C == e gives e.
// Throws ConfigError unless both gaps are positive.
std::optional<double> critical_n(double delta_lambda, double delta_G);

struct TransitionRecord {
  double alpha = 0.0;
  double gamma = 0.0;
  double entry_step = 0.0;
  std::string label;

  double horizon() const { return 1.0 / (1.0 - gamma); }
};

struct TransitionFit {
  double c1 = 0.0, c2 = 0.0, c3 = 0.0;
  double r_squared = 0.0;
  std::vector<double> residuals;

  nlohmann::json to_json() const;
};

// OLS of entry_step on (1, alpha, h). Throws ConfigError with fewer than 4
// records, gamma >= 1, or a rank-deficient design.
TransitionFit fit_transition_model(const std::vector<TransitionRecord>& records);

struct PhaseTriple {
  double g1 = 0.0, lambda1 = 0.0;
  double g2b = 0.0, lambda2b = 0.0;
  double g3 = 0.0, lambda3 = 0.0;
};

struct NonlinearityResult {
  std::vector<double> d_values;
  std::vector<std::size_t> excluded;  // runs with a zero denominator
  double mean = 0.0;
  double t = 0.0;
  double p = 1.0;
  int dof = 0;

  nlohmann::json to_json() const;
};

// d = (l2b - l1) / (G2b - G1) - (l3 - l2b) / (G3 - G2b) per run, and a
// two-sided one-sample t-test of mean(d) = 0. Throws ConfigError with fewer
// than 2 usable runs.
NonlinearityResult nonlinearity_stat(const std::vector<PhaseTriple>& runs);

// Regularized incomplete beta I_x(a, b) by continued fraction.
double regularized_incomplete_beta(double a, double b, double x);

// Two-sided tail P(|T| >= |t|) of Student's t with `dof` degrees of freedom.
double student_t_two_sided_p(double t, int dof);

}  // namespace sltrl
