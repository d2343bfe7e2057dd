#include "dbm/laplace_grid.hpp"

#include <cmath>

#include "dbm/error.hpp"
#include "dbm/simd/kernels.hpp"

namespace dbm::potential {

GridSolution::GridSolution(int dim, int32_t half)
    : dim_(dim), half_(half), sx_(size_t(2 * half + 3)) {
  const size_t cells = dim == 2 ? sx_ * sx_ : sx_ * sx_ * sx_;
  u.assign(cells, 0.0);
  mask.assign(cells, 0.0);
}

namespace {

// out = mask .* ((I - c S) x) on the interior; border cells stay whatever
// they were initialised to (0) because mask is 0 there.
void apply_operator(const GridSolution& g, size_t sx, size_t cells, const double* x,
                    double* out, double c) {
  const auto& k = simd::kernels();
  if (g.dim() == 2) {
    k.stencil2d(x, g.mask.data(), out, sx, 1, cells / sx - 1, c);
  } else {
    k.stencil3d(x, g.mask.data(), out, sx, sx * sx, 1, cells / (sx * sx) - 1, c);
  }
}

}  // namespace

GridSolution solve_dirichlet(const DirichletProblem& p, double tol, int max_iters) {
  check_dim(p.dim);
  if (p.half < 1) throw ContractViolation("grid half extent must be positive");
  GridSolution g(p.dim, p.half);
  const size_t sx = size_t(2 * p.half + 3);
  const size_t cells = g.u.size();
  const double c = 1.0 / (2 * p.dim);
  const int32_t h1 = p.half + 1;

  std::vector<double> b(cells, 0.0);
  std::vector<double> fixed(cells, 0.0);
  std::vector<Site> dof_sites;

  // Classify cells; the outermost ring is forced non-DOF so stencil reads
  // never leave the array.
  const int32_t zlo = p.dim == 2 ? 0 : -h1, zhi = p.dim == 2 ? 0 : h1;
  for (int32_t z = zlo; z <= zhi; ++z) {
    for (int32_t y = -h1; y <= h1; ++y) {
      for (int32_t x = -h1; x <= h1; ++x) {
        const Site s{x, y, z};
        const bool border = std::abs(x) == h1 || std::abs(y) == h1 ||
                            (p.dim == 3 && std::abs(z) == h1);
        const size_t i = g.index(s);
        if (!border && p.is_dof(s)) {
          g.mask[i] = 1.0;
        } else {
          fixed[i] = p.fixed_value ? p.fixed_value(s) : 0.0;
        }
      }
    }
  }
  for (int32_t z = zlo; z <= zhi; ++z) {
    for (int32_t y = -h1 + 1; y <= h1 - 1; ++y) {
      for (int32_t x = -h1 + 1; x <= h1 - 1; ++x) {
        const Site s{x, y, z};
        const size_t i = g.index(s);
        if (g.mask[i] == 0.0) continue;
        double acc = 0.0;
        const auto nb = neighbors(s, p.dim);
        for (int n = 0; n < 2 * p.dim; ++n) {
          const size_t j = g.index(nb[n]);
          if (g.mask[j] == 0.0) acc += fixed[j];
        }
        if (acc != 0.0) b[i] = c * acc;
      }
    }
  }
  for (const auto& [s, v] : p.sources) {
    if (!g.in_grid(s) || g.mask[g.index(s)] == 0.0)
      throw ContractViolation("source must sit on a DOF cell");
    b[g.index(s)] += v;
  }

  const auto& k = simd::kernels();
  const double bnorm = std::sqrt(k.dot(b.data(), b.data(), cells));
  if (bnorm == 0.0) {
    g.rel_residual = 0.0;
    return g;
  }
  if (max_iters <= 0) max_iters = int(20 * std::sqrt(double(cells)) + 1000);

  std::vector<double> r = b;
  std::vector<double> pdir = r;
  std::vector<double> ap(cells, 0.0);
  double rr = k.dot(r.data(), r.data(), cells);
  int it = 0;
  for (; it < max_iters; ++it) {
    if (std::sqrt(rr) <= tol * bnorm) break;
    apply_operator(g, sx, cells, pdir.data(), ap.data(), c);
    const double pap = k.dot(pdir.data(), ap.data(), cells);
    if (pap <= 0.0) throw SolverError("conjugate gradient broke down", std::sqrt(rr) / bnorm);
    const double alpha = rr / pap;
    k.axpy(alpha, pdir.data(), g.u.data(), cells);
    k.axpy(-alpha, ap.data(), r.data(), cells);
    const double rr_new = k.dot(r.data(), r.data(), cells);
    k.xpby(r.data(), rr_new / rr, pdir.data(), cells);
    rr = rr_new;
  }
  g.rel_residual = std::sqrt(rr) / bnorm;
  g.iters = it;
  if (g.rel_residual > tol) {
    throw SolverError("conjugate gradient did not reach tolerance", g.rel_residual);
  }
  return g;
}

}  // namespace dbm::potential
