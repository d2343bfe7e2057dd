#include <algorithm>
#include <cmath>
#include <vector>

#include "dbm/error.hpp"
#include "dbm/laplace_grid.hpp"
#include "dbm/potential.hpp"

namespace dbm::potential {

double HarmonicProfile::total() const {
  double t = 0;
  for (const auto& [s, v] : w) t += v;
  return t;
}

double HarmonicProfile::value_at(const Site& s) const {
  const uint64_t key = pack_site(s, dim);
  auto it = std::lower_bound(w.begin(), w.end(), key, [this](const auto& e, uint64_t k) {
    return pack_site(e.first, dim) < k;
  });
  if (it == w.end() || pack_site(it->first, dim) != key) return 0.0;
  return it->second;
}

double HarmonicProfile::max_value() const {
  double m = 0;
  for (const auto& [s, v] : w) m = std::max(m, v);
  return m;
}

// --- shell escape solves ----------------------------------------------------

namespace {

// Relative-coordinate Dirichlet solve: absorb `absorb_closure ? closure : A`,
// value 1 on the shell |x| >= rho about the cluster origin.
GridSolution shell_solve(const Cluster& A, double rho, double tol, bool absorb_closure) {
  const Site o = A.origin();
  const int32_t half = int32_t(std::ceil(rho)) + 1;
  const double rho2 = rho * rho;

  const size_t side = size_t(2 * half + 3);
  const size_t cells = A.dim() == 2 ? side * side : side * side * side;
  if (cells > (size_t(1) << 24))
    throw SolverError("escape solve exceeds the grid budget", double(cells));

  DirichletProblem p;
  p.dim = A.dim();
  p.half = half;
  p.is_dof = [&A, o, rho2, absorb_closure](const Site& rel) {
    const double r2 = double(rel.x) * rel.x + double(rel.y) * rel.y + double(rel.z) * rel.z;
    if (r2 >= rho2) return false;
    const int32_t ax = o.x + rel.x, ay = o.y + rel.y, az = o.z + rel.z;
    if (absorb_closure) return !A.in_closure_fast(ax, ay, az);
    return !A.contains(Site{ax, ay, az});
  };
  p.fixed_value = [rho2](const Site& rel) {
    const double r2 = double(rel.x) * rel.x + double(rel.y) * rel.y + double(rel.z) * rel.z;
    return r2 >= rho2 ? 1.0 : 0.0;
  };
  return solve_dirichlet(p, tol);
}

double tv_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0;
  for (size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
  return 0.5 * d;
}

void normalize(std::vector<double>& v) {
  double t = 0;
  for (double x : v) t += x;
  if (t > 0)
    for (double& x : v) x /= t;
}

// Richardson step for profiles sampled at rho and 2 rho, error ~ rho^-rate.
std::vector<double> extrapolate(const std::vector<double>& coarse,
                                const std::vector<double>& fine, double rate) {
  const double f = 1.0 / (std::pow(2.0, rate) - 1.0);
  std::vector<double> out(fine.size());
  for (size_t i = 0; i < fine.size(); ++i)
    out[i] = std::max(0.0, fine[i] + (fine[i] - coarse[i]) * f);
  normalize(out);
  return out;
}

// Empirically measured decay of the normalized escape profile toward the
// harmonic measure as the shell recedes (see the ladder convergence test):
// TV shrinks 4x per shell doubling in 2D and 8x in 3D.
constexpr double kLadderRate2 = 2.0;
constexpr double kLadderRate3 = 3.0;

}  // namespace

EscapeProfile escape_profile(const Cluster& A, double rho, double tol) {
  if (!(rho > 2.0 * A.radius() + 2.0))
    throw ContractViolation("escape_profile: shell must clear twice the cluster radius plus two");
  GridSolution sol = shell_solve(A, rho, tol, true);
  const Site o = A.origin();
  const double c = 1.0 / (2 * A.dim());

  EscapeProfile out;
  out.rho = rho;
  out.rel_residual = sol.rel_residual;
  for (const Site& y : A.boundary_sorted()) {
    double acc = 0;
    for (int k = 0; k < 2 * A.dim(); ++k) {
      const Site nb = neighbors(y, A.dim())[size_t(k)];
      acc += sol.at(Site{nb.x - o.x, nb.y - o.y, nb.z - o.z});
    }
    out.e.emplace_back(y, c * acc);
  }
  return out;
}

namespace {

HarmonicProfile ladder_measure(const Cluster& A, const ExactOptions& opt) {
  const double base = A.radius() + 2.0;
  const double rate = A.dim() == 2 ? kLadderRate2 : kLadderRate3;
  const std::vector<Site> bd = A.boundary_sorted();

  std::vector<double> prev_raw, prev_ext;
  double rho = 2.0 * base;
  std::vector<std::vector<double>> last_two;
  while (rho <= opt.max_rho_factor * base) {
    EscapeProfile ep = escape_profile(A, rho, std::min(opt.tol * 1e-2, 1e-10));
    std::vector<double> raw(bd.size());
    for (size_t i = 0; i < bd.size(); ++i) raw[i] = ep.e[i].second;
    normalize(raw);

    if (!prev_raw.empty()) {
      std::vector<double> ext = extrapolate(prev_raw, raw, rate);
      last_two.push_back(ext);
      if (last_two.size() > 2) last_two.erase(last_two.begin());
      if (!prev_ext.empty() && tv_distance(ext, prev_ext) <= opt.tol) {
        HarmonicProfile p;
        p.dim = A.dim();
        p.source = HarmonicProfile::Source::exact;
        p.cluster_hash = A.set_hash();
        p.cluster_size = A.size();
        for (size_t i = 0; i < bd.size(); ++i) p.w.emplace_back(bd[i], ext[i]);
        return p;
      }
      prev_ext = std::move(ext);
    }
    prev_raw = std::move(raw);
    rho *= 2.0;
  }
  throw LadderError("escape ladder did not converge within the shell budget",
                    last_two.size() > 1 ? last_two[0] : std::vector<double>{},
                    last_two.empty() ? std::vector<double>{} : last_two.back());
}

// Connectivity flood over the complement: marks free cells joined to the
// shell ||z||_inf = inf_radius + 2, then flags each boundary site that has a
// marked free neighbour.  Sites without one sit in sealed pockets and carry
// exactly zero harmonic measure.  Returns one flag per entry of bd; empty
// when the bounding box is too large to flood (very sparse sets), in which
// case callers keep the solver values as-is.
std::vector<char> accessible_mask(const Cluster& A, const std::vector<Site>& bd) {
  const int64_t R = int64_t(A.inf_radius()) + 2;
  const int64_t side = 2 * R + 1;
  const int64_t cells = A.dim() == 2 ? side * side : side * side * side;
  if (cells > (int64_t(1) << 26)) return {};

  const Site o = A.origin();
  const auto idx = [&](int32_t rx, int32_t ry, int32_t rz) {
    const int64_t ux = rx + R, uy = ry + R, uz = A.dim() == 2 ? 0 : rz + R;
    return size_t((uz * side + uy) * side + ux);
  };
  std::vector<char> vis(size_t(A.dim() == 2 ? side * side : cells), 0);
  std::vector<Site> queue;
  const int32_t r = int32_t(R);
  const auto push = [&](int32_t rx, int32_t ry, int32_t rz) {
    if (std::max({std::abs(rx), std::abs(ry), std::abs(rz)}) > r) return;
    const size_t i = idx(rx, ry, rz);
    if (vis[i]) return;
    if (A.in_closure_fast(o.x + rx, o.y + ry, o.z + rz)) return;
    vis[i] = 1;
    queue.push_back(Site{rx, ry, rz});
  };
  if (A.dim() == 2) {
    for (int32_t t = -r; t <= r; ++t) {
      push(t, -r, 0);
      push(t, r, 0);
      push(-r, t, 0);
      push(r, t, 0);
    }
  } else {
    for (int32_t u = -r; u <= r; ++u)
      for (int32_t v = -r; v <= r; ++v) {
        push(u, v, -r);
        push(u, v, r);
        push(u, -r, v);
        push(u, r, v);
        push(-r, u, v);
        push(r, u, v);
      }
  }
  for (size_t head = 0; head < queue.size(); ++head) {
    const Site c = queue[head];
    push(c.x + 1, c.y, c.z);
    push(c.x - 1, c.y, c.z);
    push(c.x, c.y + 1, c.z);
    push(c.x, c.y - 1, c.z);
    if (A.dim() == 3) {
      push(c.x, c.y, c.z + 1);
      push(c.x, c.y, c.z - 1);
    }
  }
  std::vector<char> out(bd.size(), 0);
  for (size_t i = 0; i < bd.size(); ++i) {
    for (int k = 0; k < 2 * A.dim(); ++k) {
      const Site nb = neighbors(bd[i], A.dim())[size_t(k)];
      if (A.in_closure_fast(nb.x, nb.y, nb.z)) continue;
      if (vis[idx(nb.x - o.x, nb.y - o.y, nb.z - o.z)]) {
        out[i] = 1;
        break;
      }
    }
  }
  return out;
}

}  // namespace

HarmonicProfile harmonic_measure_exact(const Cluster& A, const ExactOptions& opt) {
  const size_t closure_n = A.size() + A.boundary_size();
  if (closure_n > opt.site_cap)
    throw ContractViolation("harmonic_measure_exact: cluster exceeds the solver site cap");
  if (closure_n > opt.dense_cap) return ladder_measure(A, opt);

  Equilibrium eq = equilibrium_measure(A.dim(), A.closure_sorted());
  HarmonicProfile p;
  p.dim = A.dim();
  p.source = HarmonicProfile::Source::exact;
  p.cluster_hash = A.set_hash();
  p.cluster_size = A.size();

  double leak = 0;
  std::vector<Site> bd;
  std::vector<double> mu;
  for (size_t i = 0; i < eq.sites.size(); ++i) {
    if (A.contains(eq.sites[i])) {
      leak = std::max(leak, std::abs(eq.mu[i]));
      continue;
    }
    bd.push_back(eq.sites[i]);
    mu.push_back(eq.mu[i]);
  }
  if (leak > 1e-9)
    throw SolverError("equilibrium measure leaks onto interior sites", leak);

  // Boundary sites walled off from infinity carry exactly zero measure; the
  // dense solve only gets them to roundoff.  Pin them so that downstream
  // support tests (eta = 0 steps, spectrum sums at alpha <= 0) see the true
  // support instead of noise.
  const std::vector<char> acc = accessible_mask(A, bd);
  double total = 0;
  for (size_t i = 0; i < bd.size(); ++i) {
    double v = mu[i];
    const bool sealed = !acc.empty() && !acc[i];
    if (v < 0 || sealed) {
      if (std::abs(v) > 1e-8)
        throw SolverError(sealed ? "equilibrium measure puts weight on a sealed boundary site"
                                 : "equilibrium measure has a negative boundary weight",
                          v);
      v = 0;
    }
    p.w.emplace_back(bd[i], v);
    total += v;
  }
  if (!(total > 0)) throw SolverError("harmonic measure vanished on the boundary", total);
  for (auto& [s, v] : p.w) v /= total;
  return p;
}

double capacity(const Cluster& A, const ExactOptions& opt) {
  const size_t closure_n = A.size() + A.boundary_size();
  if (A.dim() == 2) {
    if (closure_n <= opt.dense_cap)
      return equilibrium_measure(2, A.closure_sorted()).gamma;
    // ladder route: gamma = sum omega(y) a(y - z) for any z in A
    HarmonicProfile hm = ladder_measure(A, opt);
    const Site o = A.origin();
    double g = 0;
    for (const auto& [y, v] : hm.w)
      g += v * potential_kernel(Site{y.x - o.x, y.y - o.y, 0});
    return g;
  }
  if (A.size() <= opt.dense_cap) return capacity_of_set(3, A.sites_sorted(), opt);

  // 3D ladder: shell-escape probabilities absorbed on A itself.  Unlike the
  // normalized profile, the escape sums carry the full O(1/rho) shell return
  // probability, so the first Richardson level runs at rate 1 and a second
  // level removes the O(1/rho^2) remainder.  The twice-eliminated column
  // converges at rate ~3, hence the rung difference overstates the error of
  // its finer entry by about 2^3 - 1; the stop test divides that out.  The
  // tolerance floor keeps the last needed rung inside the grid budget;
  // measured accuracy on small sets is ~1e-6 relative.
  const double cap_tol = std::max(opt.tol, 1e-5);
  const double base = A.radius() + 2.0;
  const std::vector<Site> bd = A.boundary_sorted();
  const Site o = A.origin();
  std::vector<double> prev;
  double prev_cap = -1, prev_e1 = -1, prev_e2 = -1;
  double rho = 2.0 * base;
  while (rho <= opt.max_rho_factor * base) {
    GridSolution sol = shell_solve(A, rho, 1e-11, false);
    std::vector<double> cur(bd.size());
    for (size_t i = 0; i < bd.size(); ++i)
      cur[i] = sol.at(Site{bd[i].x - o.x, bd[i].y - o.y, bd[i].z - o.z});
    double cap = 0;
    for (double v : cur) cap += v;
    if (prev_cap >= 0) {
      const double e1 = 2.0 * cap - prev_cap;
      if (prev_e1 >= 0) {
        const double e2 = e1 + (e1 - prev_e1) / 3.0;
        if (prev_e2 >= 0 && std::abs(e2 - prev_e2) <= 7.0 * cap_tol * std::max(1.0, e2))
          return e2;
        prev_e2 = e2;
      }
      prev_e1 = e1;
    }
    prev_cap = cap;
    prev = std::move(cur);
    rho *= 2.0;
  }
  throw LadderError("capacity ladder did not converge within the shell budget", {}, prev);
}

std::vector<char> boundary_accessible(const Cluster& A) {
  std::vector<char> m = accessible_mask(A, A.boundary_sorted());
  if (m.empty())
    throw SolverError("boundary_accessible: bounding box exceeds the flood budget",
                      double(A.inf_radius()));
  return m;
}

double capacity_from_profile(const HarmonicProfile& p, Site anchor) {
  check_dim(p.dim);
  if (p.w.empty()) throw ContractViolation("capacity_from_profile: empty profile");
  double acc = 0;
  if (p.dim == 2) {
    for (const auto& [y, v] : p.w)
      if (v > 0) acc += v * potential_kernel(Site{y.x - anchor.x, y.y - anchor.y, 0});
    return acc;
  }
  for (const auto& [y, v] : p.w)
    if (v > 0) acc += v * green3_free(Site{y.x - anchor.x, y.y - anchor.y, y.z - anchor.z});
  if (!(acc > 0)) throw SolverError("capacity_from_profile: Green sum vanished", acc);
  return 1.0 / acc;
}

std::shared_ptr<const HarmonicProfile> ProfileCache::get(const Cluster& A) const {
  auto it = map_.find(Key{A.set_hash(), A.size()});
  return it == map_.end() ? nullptr : it->second;
}

void ProfileCache::put(const Cluster& A, std::shared_ptr<const HarmonicProfile> p) {
  map_[Key{A.set_hash(), A.size()}] = std::move(p);
}

}  // namespace dbm::potential
