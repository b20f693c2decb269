#include "sltrl/analysis.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

#include <Eigen/Dense>

#include "sltrl/errors.hpp"

namespace sltrl {

PhaseComparison compare_phases(double g1, double lambda1, double g2, double lambda2,
                               bool empirical_regret) {
  PhaseComparison c;
  c.delta_G = g1 - g2;
  c.delta_lambda = lambda2 - lambda1;
  c.empirical_regret = empirical_regret;
  if (c.delta_G > 0.0 && c.delta_lambda > 0.0) c.n_star = critical_n(c.delta_lambda, c.delta_G);
  return c;
}

double free_energy_gap(const PhaseComparison& cmp, double n) {
  if (!(n >= 1.0)) throw ConfigError("free_energy_gap: n must be >= 1");
  return n * cmp.delta_G - cmp.delta_lambda * std::log(n);
}

std::optional<double> critical_n(double delta_lambda, double delta_G) {
  if (!(delta_lambda > 0.0 && delta_G > 0.0)) {
    throw ConfigError("critical_n: both gaps must be positive");
  }
  const double c = delta_lambda / delta_G;
  constexpr double e = std::numbers::e;
  if (c < e) return std::nullopt;
  if (c == e) return e;
  double lo = e, hi = c * c + 10.0;
  auto f = [c](double n) { return n / std::log(n) - c; };
  for (int it = 0; it < 400 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (f(mid) < 0.0 ? lo : hi) = mid;
  }
  return std::abs(f(lo)) <= std::abs(f(hi)) ? lo : hi;
}

nlohmann::json TransitionFit::to_json() const {
  return {{"c1", c1}, {"c2", c2}, {"c3", c3}, {"r_squared", r_squared}};
}

TransitionFit fit_transition_model(const std::vector<TransitionRecord>& records) {
  const auto n = static_cast<Eigen::Index>(records.size());
  if (n < 4) throw ConfigError("fit_transition_model: need at least 4 records");
  Eigen::MatrixXd x(n, 3);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = records[static_cast<std::size_t>(i)];
    if (!(r.gamma < 1.0)) throw ConfigError("fit_transition_model: gamma must be < 1");
    x(i, 0) = 1.0;
    x(i, 1) = r.alpha;
    x(i, 2) = r.horizon();
    y(i) = r.entry_step;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() < 3) throw ConfigError("fit_transition_model: rank-deficient design");
  const Eigen::VectorXd beta = qr.solve(y);
  const Eigen::VectorXd resid = y - x * beta;
  TransitionFit fit;
  fit.c1 = beta(0);
  fit.c2 = beta(1);
  fit.c3 = beta(2);
  fit.residuals.assign(resid.data(), resid.data() + n);
  const double ss_tot = (y.array() - y.mean()).square().sum();
  const double ss_res = resid.squaredNorm();
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

nlohmann::json NonlinearityResult::to_json() const {
  return {{"d", d_values}, {"excluded_runs", excluded}, {"mean", mean},
          {"t", t},        {"p", p},                    {"dof", dof}};
}

NonlinearityResult nonlinearity_stat(const std::vector<PhaseTriple>& runs) {
  NonlinearityResult out;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const PhaseTriple& r = runs[i];
    const double den1 = r.g2b - r.g1;
    const double den2 = r.g3 - r.g2b;
    if (den1 == 0.0 || den2 == 0.0) {
      out.excluded.push_back(i);
      continue;
    }
    const double s1 = (r.lambda2b - r.lambda1) / den1;
    const double s2 = (r.lambda3 - r.lambda2b) / den2;
    double d = s1 - s2;
    // collinear triples: treat rounding-level differences as exactly zero
    if (std::abs(d) <= 1e-12 * (std::abs(s1) + std::abs(s2))) d = 0.0;
    out.d_values.push_back(d);
  }
  const auto k = out.d_values.size();
  if (k < 2) throw ConfigError("nonlinearity_stat: need at least 2 usable runs");
  out.dof = static_cast<int>(k) - 1;
  out.mean = std::accumulate(out.d_values.begin(), out.d_values.end(), 0.0) / k;
  double ss = 0.0;
  for (double d : out.d_values) ss += (d - out.mean) * (d - out.mean);
  const double se = std::sqrt(ss / (k - 1)) / std::sqrt(static_cast<double>(k));
  if (se == 0.0) {
    // no spread: a zero mean carries no evidence, a nonzero one is exact
    out.t = out.mean == 0.0 ? 0.0 : std::copysign(INFINITY, out.mean);
    out.p = out.mean == 0.0 ? 1.0 : 0.0;
    return out;
  }
  out.t = out.mean / se;
  out.p = student_t_two_sided_p(out.t, out.dof);
  return out;
}

namespace {
// Modified Lentz evaluation of the incomplete-beta continued fraction.
double beta_cf(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-16;
  double c = 1.0;
  double d = 1.0 - (a + b) * x / (a + 1.0);
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) return h;
  }
  throw NumericError("incomplete beta continued fraction did not converge");
}
}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw ConfigError("incomplete beta: a, b must be > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw ConfigError("incomplete beta: x must lie in [0, 1]");
  if (x == 0.0 || x == 1.0) return x;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, int dof) {
  if (dof < 1) throw ConfigError("student t: dof must be >= 1");
  if (std::isinf(t)) return 0.0;
  const double v = dof;
  return regularized_incomplete_beta(0.5 * v, 0.5, v / (v + t * t));
}

}  // namespace sltrl
