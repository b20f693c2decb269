#include "oracles/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

namespace oracles {

std::size_t table_row(int m, Pos cheese, Pos mouse, int prev_code) {
  const int cells = m * m;
  const int ci = cheese.r * m + cheese.c;
  const int mi = mouse.r * m + mouse.c;
  const int rank = mi > ci ? mi - 1 : mi;
  return (static_cast<std::size_t>(ci) * (cells - 1) + rank) * 5 + prev_code;
}

double start_probability(int m, double alpha, Pos mouse, Pos cheese) {
  if (mouse.r == cheese.r && mouse.c == cheese.c) return 0.0;
  const double cells = m * m;
  const double uniform = alpha / (cells * (cells - 1.0));
  if (cheese.r == 0 && cheese.c == 0) return uniform + (1.0 - alpha) / (cells - 1.0);
  return uniform;
}

namespace {

Pos apply(int m, Pos p, int a) {
  static constexpr int dr[4] = {-1, 1, 0, 0};
  static constexpr int dc[4] = {0, 0, -1, 1};
  Pos q{p.r + dr[a], p.c + dc[a]};
  if (q.r < 0 || q.r >= m || q.c < 0 || q.c >= m) return p;
  return q;
}

void expand(const Grid& g, Pos cheese, const std::vector<double>& table, EnumTrajectory& cur,
            Pos mouse, int prev, std::vector<EnumTrajectory>& out) {
  if (static_cast<int>(cur.steps.size()) == g.horizon) {
    out.push_back(cur);
    return;
  }
  const std::size_t row = table_row(g.m, cheese, mouse, prev);
  for (int a = 0; a < 4; ++a) {
    const double p = table.at(row * 4 + a);
    const Pos next = apply(g.m, mouse, a);
    EnumTrajectory branch = cur;
    branch.steps.push_back(EnumStep{mouse, prev, a});
    branch.probability *= p;
    if (next.r == cheese.r && next.c == cheese.c) {
      branch.reached = true;
      branch.discounted_return = std::pow(g.gamma, static_cast<double>(branch.steps.size()) - 1.0);
      out.push_back(std::move(branch));
    } else {
      expand(g, cheese, table, branch, next, a + 1, out);
    }
  }
}

}  // namespace

std::vector<EnumTrajectory> enumerate_trajectories(const Grid& g, Pos mouse, Pos cheese,
                                                   int prev_code,
                                                   const std::vector<double>& table) {
  if (g.horizon > 6 || g.horizon < 1) throw BudgetExceeded("enumeration horizon must be 1..6");
  if (g.m > 4 || g.m < 2) throw BudgetExceeded("enumeration interior must be 2..4");
  std::vector<EnumTrajectory> out;
  EnumTrajectory root;
  root.probability = 1.0;
  expand(g, cheese, table, root, mouse, prev_code, out);
  return out;
}

double enumerated_return(const Grid& g, double alpha, const std::vector<double>& table) {
  double total = 0.0;
  for (int cr = 0; cr < g.m; ++cr) {
    for (int cc = 0; cc < g.m; ++cc) {
      for (int mr = 0; mr < g.m; ++mr) {
        for (int mc = 0; mc < g.m; ++mc) {
          const Pos cheese{cr, cc}, mouse{mr, mc};
          const double p0 = start_probability(g.m, alpha, mouse, cheese);
          if (p0 == 0.0) continue;
          double r = 0.0;
          for (const auto& t : enumerate_trajectories(g, mouse, cheese, 0, table)) {
            r += t.probability * t.discounted_return;
          }
          total += p0 * r;
        }
      }
    }
  }
  return total;
}

int bfs_distance(int m, Pos from, Pos to) {
  std::vector<int> dist(static_cast<std::size_t>(m * m), -1);
  std::queue<Pos> q;
  dist[static_cast<std::size_t>(from.r * m + from.c)] = 0;
  q.push(from);
  while (!q.empty()) {
    const Pos p = q.front();
    q.pop();
    const int d = dist[static_cast<std::size_t>(p.r * m + p.c)];
    if (p.r == to.r && p.c == to.c) return d;
    for (int a = 0; a < 4; ++a) {
      const Pos n = apply(m, p, a);
      auto& slot = dist[static_cast<std::size_t>(n.r * m + n.c)];
      if (slot < 0) {
        slot = d + 1;
        q.push(n);
      }
    }
  }
  return -1;
}

double bfs_optimal_return(const Grid& g, double alpha) {
  double total = 0.0;
  for (int cr = 0; cr < g.m; ++cr)
    for (int cc = 0; cc < g.m; ++cc)
      for (int mr = 0; mr < g.m; ++mr)
        for (int mc = 0; mc < g.m; ++mc) {
          const Pos cheese{cr, cc}, mouse{mr, mc};
          const double p0 = start_probability(g.m, alpha, mouse, cheese);
          if (p0 == 0.0) continue;
          const int d = bfs_distance(g.m, mouse, cheese);
          if (d <= g.horizon) total += p0 * std::pow(g.gamma, d - 1);
        }
  return total;
}

std::vector<double> central_difference(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    x[i] = xi + h;
    const double up = f(x);
    x[i] = xi - h;
    const double down = f(x);
    x[i] = xi;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

namespace {

double sq_dist(const std::array<double, 4>& a, const std::array<double, 4>& b) {
  double s = 0.0;
  for (int i = 0; i < 4; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

// Scans the grid of spacing `step` on the face inside the box center +- radius.
void scan(const std::array<double, 4>& p, const std::vector<int>& free_idx, double step,
          const std::array<double, 4>& center, double radius, std::array<double, 4>& best,
          double& best_d) {
  const int k = static_cast<int>(free_idx.size());
  std::array<double, 4> q{};
  std::function<void(int, double)> rec = [&](int level, double remaining) {
    const int idx = free_idx[static_cast<std::size_t>(level)];
    if (level == k - 1) {
      q[idx] = remaining;
      if (remaining >= -1e-12 && std::abs(remaining - center[idx]) <= radius + 1e-12) {
        q[idx] = std::max(0.0, remaining);
        const double d = sq_dist(p, q);
        if (d < best_d) {
          best_d = d;
          best = q;
        }
      }
      return;
    }
    const double lo = std::max(0.0, center[idx] - radius);
    const double hi = std::min(remaining, center[idx] + radius);
    const long n0 = static_cast<long>(std::ceil(lo / step - 1e-9));
    const long n1 = static_cast<long>(std::floor(hi / step + 1e-9));
    for (long n = n0; n <= n1; ++n) {
      q[idx] = n * step;
      rec(level + 1, remaining - q[idx]);
    }
    q[idx] = 0.0;
  };
  rec(0, 1.0);
}

}  // namespace

std::array<double, 4> grid_search_projection(const std::array<double, 4>& p,
                                             const std::array<bool, 4>& allowed,
                                             double resolution) {
  std::vector<int> free_idx;
  for (int i = 0; i < 4; ++i) {
    if (allowed[i]) free_idx.push_back(i);
  }
  if (free_idx.empty()) throw std::invalid_argument("grid_search_projection: empty face");
  std::array<double, 4> best{};
  double best_d = std::numeric_limits<double>::infinity();
  const std::array<double, 4> center{0.5, 0.5, 0.5, 0.5};
  double step = 0.05;
  scan(p, free_idx, step, center, 1.0, best, best_d);
  while (step > resolution * 1.0000001) {
    const double next = std::max(resolution, step / 10.0);
    const std::array<double, 4> c = best;
    scan(p, free_idx, next, c, 2.0 * step, best, best_d);
    step = next;
  }
  return best;
}

double fixed_point_critical_n(double c, double tol) {
  if (!(c > std::exp(1.0))) throw std::invalid_argument("fixed point needs C > e");
  double n = c * std::log(c);
  for (int it = 0; it < 100000; ++it) {
    const double next = c * std::log(n);
    if (std::abs(next - n) <= tol * next) return next;
    n = next;
  }
  return n;
}

double analytic_rlct_quadratic(int d) {
  if (d < 1) throw std::invalid_argument("quadratic RLCT needs d >= 1");
  return d / 2.0;
}

double analytic_rlct_monomial(const std::vector<int>& exponents) {
  if (exponents.empty()) throw std::invalid_argument("monomial RLCT needs exponents");
  double lam = std::numeric_limits<double>::infinity();
  for (int e : exponents) {
    if (e < 2 || e % 2 != 0) throw std::invalid_argument("monomial exponents must be even");
    lam = std::min(lam, 1.0 / e);
  }
  return lam;
}

}  // namespace oracles
