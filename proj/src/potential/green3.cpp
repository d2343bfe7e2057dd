#include "dbm/potential.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "dbm/error.hpp"
#include "dbm/laplace_grid.hpp"

namespace dbm::potential {
namespace {

constexpr int kBall = 40;     // solve radius
constexpr int kWindow3 = 20;  // table window in |x|_inf
constexpr double kLead = 3.0 / (2.0 * std::numbers::pi);

double h4hat(double x, double y, double z) {
  const double r2 = x * x + y * y + z * z;
  const double q = x * x * x * x + y * y * y * y + z * z * z * z;
  return (q - 0.6 * r2 * r2) / (r2 * r2);
}

// asymptotic model with corrections c = {eps0, c1, c3, c3a}
double model(const std::array<double, 4>& c, double x, double y, double z) {
  const double r = std::sqrt(x * x + y * y + z * z);
  return c[0] + c[1] / r + (c[2] + c[3] * h4hat(x, y, z)) / (r * r * r);
}

struct Fit {
  std::array<double, 4> c;
  double rms;
};

Fit ring_fit(const GridSolution& sol, const std::array<double, 4>& base) {
  // least squares over the shell 12 <= |x| <= 18 for the residual against
  // the current model, basis {1, 1/r, 1/r^3, h4/r^3}
  std::array<std::array<long double, 4>, 4> N{};
  std::array<long double, 4> rhs{};
  for (int x = -18; x <= 18; ++x)
    for (int y = -18; y <= 18; ++y)
      for (int z = -18; z <= 18; ++z) {
        const int64_t r2 = int64_t(x) * x + int64_t(y) * y + int64_t(z) * z;
        if (r2 < 12 * 12 || r2 > 18 * 18) continue;
        const double r = std::sqrt(double(r2));
        const std::array<double, 4> phi = {1.0, 1.0 / r, 1.0 / (r * r * r),
                                           h4hat(x, y, z) / (r * r * r)};
        const double res = sol.at(Site{x, y, z}) - model(base, x, y, z);
        for (int i = 0; i < 4; ++i) {
          rhs[i] += phi[i] * res;
          for (int j = 0; j < 4; ++j) N[i][j] += phi[i] * phi[j];
        }
      }
  // 4x4 Gaussian elimination with partial pivoting
  for (int k = 0; k < 4; ++k) {
    int piv = k;
    for (int i = k + 1; i < 4; ++i)
      if (std::abs(double(N[i][k])) > std::abs(double(N[piv][k]))) piv = i;
    std::swap(N[k], N[piv]);
    std::swap(rhs[k], rhs[piv]);
    for (int i = k + 1; i < 4; ++i) {
      const long double f = N[i][k] / N[k][k];
      for (int j = k; j < 4; ++j) N[i][j] -= f * N[k][j];
      rhs[i] -= f * rhs[k];
    }
  }
  Fit out;
  for (int i = 3; i >= 0; --i) {
    long double acc = rhs[i];
    for (int j = i + 1; j < 4; ++j) acc -= N[i][j] * out.c[size_t(j)];
    out.c[size_t(i)] = double(acc / N[i][i]);
  }
  for (int i = 0; i < 4; ++i) out.c[size_t(i)] += base[size_t(i)];

  long double rss = 0, n = 0;
  for (int x = -18; x <= 18; ++x)
    for (int y = -18; y <= 18; ++y)
      for (int z = -18; z <= 18; ++z) {
        const int64_t r2 = int64_t(x) * x + int64_t(y) * y + int64_t(z) * z;
        if (r2 < 12 * 12 || r2 > 18 * 18) continue;
        const double res = sol.at(Site{x, y, z}) - model(out.c, x, y, z);
        rss += res * res;
        n += 1;
      }
  out.rms = std::sqrt(double(rss / n));
  return out;
}

struct Green3 {
  std::vector<double> table;  // (2k+1)^3 window
  std::array<double, 4> c;    // final model coefficients
  Green3Diagnostics diag;
};

GridSolution solve_ball(const std::array<double, 4>& c) {
  DirichletProblem p;
  p.dim = 3;
  p.half = kBall;
  p.is_dof = [](const Site& s) {
    return int64_t(s.x) * s.x + int64_t(s.y) * s.y + int64_t(s.z) * s.z <
           int64_t(kBall) * kBall;
  };
  p.fixed_value = [c](const Site& s) { return model(c, s.x, s.y, s.z); };
  p.sources = {{Site{0, 0, 0}, 1.0}};
  return solve_dirichlet(p, 1e-12);
}

Green3 build_green3() {
  // pass 1: leading term only on the boundary; in 3D the constant part of the
  // boundary error penetrates the whole ball, so fit it and solve again
  GridSolution s1 = solve_ball({0.0, kLead, 0.0, 0.0});
  Fit f1 = ring_fit(s1, {0.0, kLead, 0.0, 0.0});

  std::array<double, 4> bc = {0.0, f1.c[1], f1.c[2], f1.c[3]};
  GridSolution s2 = solve_ball(bc);
  Fit f2 = ring_fit(s2, bc);

  Green3 g;
  g.c = {0.0, f2.c[1], f2.c[2], f2.c[3]};
  g.diag.c1 = f2.c[1];
  g.diag.c3 = f2.c[2];
  g.diag.c3a = f2.c[3];
  g.diag.fit_rms = f2.rms;
  const double eps0 = f2.c[0];  // residual constant mode, subtracted below
  const int w = kWindow3, n = 2 * w + 1;
  g.table.assign(size_t(n) * n * n, 0.0);
  for (int x = -w; x <= w; ++x)
    for (int y = -w; y <= w; ++y)
      for (int z = -w; z <= w; ++z)
        g.table[(size_t(x + w) * n + size_t(y + w)) * n + size_t(z + w)] =
            s2.at(Site{x, y, z}) - eps0;
  return g;
}

const Green3& green3() {
  static const Green3 g = build_green3();
  return g;
}

}  // namespace

double green3_free(const Site& s) {
  const Green3& g = green3();
  const int w = kWindow3, n = 2 * w + 1;
  if (std::abs(s.x) <= w && std::abs(s.y) <= w && std::abs(s.z) <= w)
    return g.table[(size_t(s.x + w) * n + size_t(s.y + w)) * n + size_t(s.z + w)];
  return model(g.c, s.x, s.y, s.z);
}

const Green3Diagnostics& green3_diagnostics() { return green3().diag; }

}  // namespace dbm::potential
