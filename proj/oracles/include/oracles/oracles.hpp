#pragma once

// Brute-force and closed-form reference computations for the tests. Nothing
// here depends on the library under test: dynamics, indexing and start
// probabilities are re-derived from scratch.

#include <array>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace oracles {

class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OracleResult {
  std::string name;
  std::vector<double> values;
  std::string method;
};

// Gridworld description used by the oracles: m x m interior, actions
// 0=up 1=down 2=left 3=right, previous-action code 0 = none, 1 + a otherwise.
struct Grid {
  int m = 3;
  int horizon = 6;
  double gamma = 0.9;
};

struct Pos {
  int r = 0;
  int c = 0;
};

// Row of a (cheese, mouse, prev) triple in a policy table laid out
// cheese-major, mouse-minor (cheese cell skipped), prev innermost.
std::size_t table_row(int m, Pos cheese, Pos mouse, int prev_code);

// Lambda_alpha(mouse, cheese).
double start_probability(int m, double alpha, Pos mouse, Pos cheese);

struct EnumStep {
  Pos mouse;
  int prev_code = 0;
  int action = 0;
};

struct EnumTrajectory {
  std::vector<EnumStep> steps;
  bool reached = false;
  double probability = 0.0;
  double discounted_return = 0.0;  // gamma^(T-1) on reaching the goal at step T
};

// Every action sequence of length <= horizon from (mouse, cheese, prev), cut
// at the goal. `table` holds rows x 4 action probabilities. Throws
// BudgetExceeded when horizon > 6 or m > 4.
std::vector<EnumTrajectory> enumerate_trajectories(const Grid& g, Pos mouse, Pos cheese,
                                                   int prev_code, const std::vector<double>& table);

// Sum over start states and enumerated trajectories of prob * return.
double enumerated_return(const Grid& g, double alpha, const std::vector<double>& table);

// Shortest-path length between interior cells by breadth-first search.
int bfs_distance(int m, Pos from, Pos to);

// Sum over start states of Lambda * gamma^(d - 1), d by BFS, 0 beyond horizon.
double bfs_optimal_return(const Grid& g, double alpha);

// Central finite differences of f at x, step h.
std::vector<double> central_difference(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x, double h);

// Coarse-to-fine grid search for the closest point to p on the simplex face
// with only `allowed` coordinates nonzero, down to `resolution`.
std::array<double, 4> grid_search_projection(const std::array<double, 4>& p,
                                             const std::array<bool, 4>& allowed,
                                             double resolution = 1e-3);

// n <- C log n iterated to a relative change below tol, started at C log C
// (upper branch, C > e).
double fixed_point_critical_n(double c, double tol = 1e-14);

// RLCT of |w|^2 in d dimensions (d / 2) and of prod_i u_i^(e_i) with even
// exponents e_i (min_i 1 / e_i). Throws std::invalid_argument otherwise.
double analytic_rlct_quadratic(int d);
double analytic_rlct_monomial(const std::vector<int>& exponents);

}  // namespace oracles
