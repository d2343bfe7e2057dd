#include <algorithm>
#include <cmath>
#include <unordered_set>
#include <vector>

#include "dbm/dense.hpp"
#include "dbm/error.hpp"
#include "dbm/potential.hpp"

namespace dbm::potential {
namespace {

double kernel_value(int dim, const Site& d) {
  return dim == 2 ? potential_kernel(d) : green3_free(d);
}

Site diff(const Site& a, const Site& b) { return Site{a.x - b.x, a.y - b.y, a.z - b.z}; }

std::vector<Site> sorted_unique(int dim, std::vector<Site> v) {
  std::sort(v.begin(), v.end(), [dim](const Site& a, const Site& b) {
    return pack_site(a, dim) < pack_site(b, dim);
  });
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

std::vector<Site> boundary_of(int dim, const std::vector<Site>& sites) {
  std::unordered_set<uint64_t, KeyHash> in;
  in.reserve(sites.size() * 2);
  for (const Site& s : sites) in.insert(pack_site(s, dim));
  std::vector<Site> bd;
  for (const Site& s : sites)
    for (int k = 0; k < 2 * dim; ++k) {
      const Site n = neighbors(s, dim)[size_t(k)];
      if (!in.count(pack_site(n, dim))) bd.push_back(n);
    }
  return sorted_unique(dim, std::move(bd));
}

}  // namespace

Equilibrium equilibrium_measure(int dim, std::vector<Site> sites) {
  check_dim(dim);
  if (sites.empty()) throw ContractViolation("equilibrium_measure: empty set");
  sites = sorted_unique(dim, std::move(sites));
  const size_t n = sites.size();

  Equilibrium eq;
  eq.dim = dim;
  eq.sites = sites;

  if (dim == 2) {
    // bordered Robin system: constant potential on the set, total mass one
    const size_t m = n + 1;
    std::vector<double> a(m * m, 0.0);
    for (size_t i = 0; i < n; ++i) {
      for (size_t j = 0; j < n; ++j)
        a[i * m + j] = potential_kernel(diff(sites[i], sites[j]));
      a[i * m + n] = 1.0;
      a[n * m + i] = 1.0;
    }
    std::vector<double> rhs(m, 0.0);
    rhs[n] = 1.0;
    DenseLU lu(std::move(a), m);
    lu.solve(rhs);
    eq.mu.assign(rhs.begin(), rhs.begin() + long(n));
    eq.gamma = -rhs[n];
  } else {
    // capacitor problem: G q = 1 on the set
    std::vector<double> g(n * n);
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < n; ++j)
        g[i * n + j] = green3_free(diff(sites[i], sites[j]));
    std::vector<double> q(n, 1.0);
    DenseLU lu(std::move(g), n);
    lu.solve(q);
    double tot = 0;
    for (double v : q) tot += v;
    if (!(tot > 0)) throw SolverError("capacitor solve gave non-positive mass", tot);
    eq.gamma = tot;
    eq.mu.resize(n);
    for (size_t i = 0; i < n; ++i) eq.mu[i] = q[i] / tot;
  }
  return eq;
}

namespace {

// escape probability route shared by the 3D capacity conventions:
// q solves the capacitor problem on `sites`, escapes evaluated on `at`
std::vector<double> escape_at(const std::vector<Site>& sites, const std::vector<double>& q,
                              const std::vector<Site>& at) {
  std::vector<double> out(at.size());
  for (size_t i = 0; i < at.size(); ++i) {
    double hit = 0;
    for (size_t j = 0; j < sites.size(); ++j)
      hit += green3_free(diff(at[i], sites[j])) * q[j];
    out[i] = 1.0 - hit;
  }
  return out;
}

double capacity_impl(int dim, const std::vector<Site>& sites) {
  if (dim == 2) {
    std::vector<Site> closure = sites;
    {
      std::vector<Site> bd = boundary_of(2, sites);
      closure.insert(closure.end(), bd.begin(), bd.end());
    }
    return equilibrium_measure(2, std::move(closure)).gamma;
  }
  // 3D: total escape probability over the outer boundary
  Equilibrium eq = equilibrium_measure(3, sites);
  std::vector<double> q(eq.mu.size());
  for (size_t i = 0; i < q.size(); ++i) q[i] = eq.mu[i] * eq.gamma;
  const std::vector<Site> bd = boundary_of(3, eq.sites);
  double cap = 0;
  for (double e : escape_at(eq.sites, q, bd)) cap += e;
  return cap;
}

}  // namespace

namespace {

bool edge_connected(int dim, const std::vector<Site>& sites) {
  if (sites.empty()) return false;
  std::unordered_set<uint64_t, KeyHash> in, seen;
  for (const Site& s : sites) in.insert(pack_site(s, dim));
  std::vector<Site> queue = {sites[0]};
  seen.insert(pack_site(sites[0], dim));
  while (!queue.empty()) {
    const Site s = queue.back();
    queue.pop_back();
    for (int k = 0; k < 2 * dim; ++k) {
      const Site n = neighbors(s, dim)[size_t(k)];
      const uint64_t key = pack_site(n, dim);
      if (in.count(key) && seen.insert(key).second) queue.push_back(n);
    }
  }
  return seen.size() == in.size();
}

}  // namespace

double capacity_of_set(int dim, const std::vector<Site>& sites, const ExactOptions& opt) {
  check_dim(dim);
  if (sites.size() > opt.dense_cap)
    throw ContractViolation("capacity_of_set: set too large for the dense route");
  if (!edge_connected(dim, sites))
    throw ContractViolation("capacity_of_set: site set is not edge-connected");
  return capacity_impl(dim, sorted_unique(dim, sites));
}

CapacityIncrement capacity_increment(const Cluster& A, const Site& x, const ExactOptions& opt) {
  if (!A.in_boundary(x))
    throw ContractViolation("capacity_increment: site is not on the cluster boundary");
  std::vector<Site> a_sites = A.sites_sorted();
  std::vector<Site> b_sites = a_sites;
  b_sites.push_back(x);
  const double cap_a = capacity_of_set(A.dim(), a_sites, opt);
  const double cap_b = capacity_of_set(A.dim(), b_sites, opt);

  CapacityIncrement inc;
  inc.raw = cap_b - cap_a;
  inc.lemma_form = A.dim() == 2 ? inc.raw : 1.0 / cap_a - 1.0 / cap_b;
  HarmonicProfile w = harmonic_measure_exact(A, opt);
  inc.omega = w.value_at(x);
  return inc;
}

double greens_function(const Site& x, const Site& y, const Cluster& A) {
  if (A.contains(x) || A.contains(y))
    throw ContractViolation("greens_function: argument lies in the absorbing set");
  const int dim = A.dim();
  const std::vector<Site> k = A.sites_sorted();
  const size_t n = k.size();

  if (dim == 2) {
    // one bordered factorisation serves both the equilibrium data and the
    // bounded-harmonic extension with boundary values a(z - y)
    const size_t m = n + 1;
    std::vector<double> mat(m * m, 0.0);
    for (size_t i = 0; i < n; ++i) {
      for (size_t j = 0; j < n; ++j) mat[i * m + j] = potential_kernel(diff(k[i], k[j]));
      mat[i * m + n] = 1.0;
      mat[n * m + i] = 1.0;
    }
    DenseLU lu(std::move(mat), m);

    std::vector<double> eqv(m, 0.0);
    eqv[n] = 1.0;
    lu.solve(eqv);  // mu, -gamma
    double h = eqv[n];  // -gamma... h(x) accumulates below
    for (size_t j = 0; j < n; ++j) h += eqv[j] * potential_kernel(diff(x, k[j]));

    std::vector<double> psi(m, 0.0);
    for (size_t i = 0; i < n; ++i) psi[i] = potential_kernel(diff(k[i], y));
    lu.solve(psi);  // coefficients c (zero-sum) and the bounded limit b
    double hit = psi[n];
    for (size_t j = 0; j < n; ++j) hit += psi[j] * potential_kernel(diff(x, k[j]));

    return hit - potential_kernel(diff(x, y)) + h;
  }

  std::vector<double> g(n * n);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j) g[i * n + j] = green3_free(diff(k[i], k[j]));
  std::vector<double> c(n);
  for (size_t i = 0; i < n; ++i) c[i] = green3_free(diff(k[i], y));
  DenseLU lu(std::move(g), n);
  lu.solve(c);
  double hit = 0;
  for (size_t j = 0; j < n; ++j) hit += c[j] * green3_free(diff(x, k[j]));
  return green3_free(diff(x, y)) - hit;
}

double harmonic_from_infinity(const Site& x, const std::vector<Site>& K, int dim) {
  check_dim(dim);
  Equilibrium eq = equilibrium_measure(dim, K);
  if (dim == 2) {
    double h = -eq.gamma;
    for (size_t j = 0; j < eq.sites.size(); ++j)
      h += eq.mu[j] * potential_kernel(diff(x, eq.sites[j]));
    return h;
  }
  double hit = 0;
  for (size_t j = 0; j < eq.sites.size(); ++j)
    hit += eq.gamma * eq.mu[j] * green3_free(diff(x, eq.sites[j]));
  return 1.0 - hit;
}

}  // namespace dbm::potential
