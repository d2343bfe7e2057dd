#include "dbm/oracle.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <unordered_map>

#include "dbm/cluster.hpp"
#include "dbm/error.hpp"
#include "dbm/potential.hpp"

namespace dbm::oracle {

namespace {

// canonical form: bounding-box corner at the origin, cells sorted by key
std::vector<uint64_t> canonical_keys(std::vector<Site> cells, int dim) {
  int32_t mx = cells[0].x, my = cells[0].y, mz = cells[0].z;
  for (const Site& c : cells) {
    mx = std::min(mx, c.x);
    my = std::min(my, c.y);
    mz = std::min(mz, c.z);
  }
  std::vector<uint64_t> keys;
  keys.reserve(cells.size());
  for (const Site& c : cells)
    keys.push_back(pack_site({c.x - mx, c.y - my, c.z - mz}, dim));
  std::sort(keys.begin(), keys.end());
  return keys;
}

}  // namespace

std::vector<std::vector<Site>> enumerate_shapes(int dim, int n_sites) {
  check_dim(dim);
  if (n_sites < 1) throw ContractViolation("enumerate_shapes: need at least one site");

  std::set<std::vector<uint64_t>> level;
  level.insert({pack_site({0, 0, 0}, dim)});
  for (int n = 1; n < n_sites; ++n) {
    std::set<std::vector<uint64_t>> next;
    for (const auto& keys : level) {
      std::vector<Site> cells;
      cells.reserve(keys.size() + 1);
      for (const uint64_t k : keys) cells.push_back(unpack_site(k, dim));
      const size_t base = cells.size();
      for (size_t ci = 0; ci < base; ++ci) {
        const Site c = cells[ci];
        for (int j = 0; j < 2 * dim; ++j) {
          const Site nb = neighbors(c, dim)[size_t(j)];
          const uint64_t nk = pack_site(nb, dim);
          if (std::binary_search(keys.begin(), keys.end(), nk)) continue;
          cells.push_back(nb);
          next.insert(canonical_keys(cells, dim));
          cells.pop_back();
        }
      }
    }
    level = std::move(next);
  }

  std::vector<std::vector<Site>> out;
  out.reserve(level.size());
  for (const auto& keys : level) {
    std::vector<Site> cells;
    cells.reserve(keys.size());
    for (const uint64_t k : keys) cells.push_back(unpack_site(k, dim));
    out.push_back(std::move(cells));
  }
  return out;
}

double ShapeDistribution::total() const {
  double t = 0.0;
  for (const Entry& e : entries) t += e.p;
  return t;
}

const ShapeDistribution::Entry* ShapeDistribution::find_hash(uint64_t h) const {
  for (const Entry& e : entries)
    if (e.hash == h) return &e;
  return nullptr;
}

namespace {

// the lattice point group: axis permutations x sign flips (8 maps in 2D,
// 48 in 3D), all fixing the origin
std::vector<std::array<int, 6>> point_group(int dim) {
  std::vector<std::array<int, 3>> perms;
  std::array<int, 3> p{0, 1, 2};
  do {
    if (dim == 3 || p[2] == 2) perms.push_back(p);
  } while (std::next_permutation(p.begin(), p.end()));
  std::vector<std::array<int, 6>> maps;  // perm then signs
  const int nsign = dim == 2 ? 4 : 8;
  for (const auto& pe : perms)
    for (int s = 0; s < nsign; ++s)
      maps.push_back({pe[0], pe[1], pe[2], (s & 1) ? -1 : 1, (s & 2) ? -1 : 1,
                      (s & 4) ? -1 : 1});
  return maps;
}

Site apply_map(const std::array<int, 6>& m, const Site& s) {
  const int32_t c[3] = {s.x, s.y, s.z};
  return Site{m[3] * c[m[0]], m[4] * c[m[1]], m[5] * c[m[2]]};
}

// orbit fingerprint: lexicographically smallest sorted key vector over the
// point-group images (origin-rooted, so no translation is involved)
std::vector<uint64_t> orbit_key(const std::vector<Site>& sites, int dim,
                                const std::vector<std::array<int, 6>>& maps) {
  std::vector<uint64_t> best;
  std::vector<uint64_t> keys(sites.size());
  for (const auto& m : maps) {
    for (size_t i = 0; i < sites.size(); ++i)
      keys[i] = pack_site(apply_map(m, sites[i]), dim);
    std::sort(keys.begin(), keys.end());
    if (best.empty() || keys < best) best = keys;
  }
  return best;
}

struct Leaf {
  double p = 0.0;
  uint64_t hash = 0;
};

void expand(const Cluster& A, double prob, int depth_left, double eta,
            std::map<std::vector<uint64_t>, potential::HarmonicProfile>& memo,
            std::map<std::vector<uint64_t>, Leaf>& leaves) {
  std::vector<uint64_t> key;
  key.reserve(A.size());
  for (const Site& s : A.sites_sorted()) key.push_back(pack_site(s, A.dim()));

  if (depth_left == 0) {
    Leaf& leaf = leaves[key];
    leaf.p += prob;
    leaf.hash = A.set_hash();
    return;
  }

  auto it = memo.find(key);
  if (it == memo.end())
    it = memo.emplace(std::move(key), potential::harmonic_measure_exact(A)).first;
  const potential::HarmonicProfile& profile = it->second;

  // same weight law as the growth engine: omega^eta on the positive support
  double tot = 0.0;
  std::vector<double> w(profile.w.size(), 0.0);
  for (size_t i = 0; i < profile.w.size(); ++i) {
    const double v = profile.w[i].second;
    if (v > 0.0) {
      w[i] = eta == 0.0 ? 1.0 : (eta == 1.0 ? v : std::pow(v, eta));
      tot += w[i];
    }
  }
  if (!(tot > 0.0)) throw SolverError("enumerate_dbm: no admissible growth site", tot);

  for (size_t i = 0; i < profile.w.size(); ++i) {
    if (w[i] <= 0.0) continue;
    Cluster B = A;
    B.attach(profile.w[i].first);
    expand(B, prob * (w[i] / tot), depth_left - 1, eta, memo, leaves);
  }
}

}  // namespace

ShapeDistribution enumerate_dbm(int dim, double eta, int depth) {
  check_dim(dim);
  if (!(std::isfinite(eta)) || eta < 0.0)
    throw ContractViolation("enumerate_dbm: eta must be finite and nonnegative");
  if (depth < 0) throw ContractViolation("enumerate_dbm: negative depth");
  const int guard = dim == 2 ? 5 : 4;
  if (depth > guard) {
    double est = 1.0;
    double b = 2.0 * dim;
    for (int k = 0; k < depth; ++k) {
      est *= b;
      b += 2.0 * dim - 2.0;
    }
    char msg[160];
    std::snprintf(msg, sizeof msg,
                  "enumerate_dbm: depth %d exceeds the guard (%d for %dD); roughly %.2g "
                  "expansion paths",
                  depth, guard, dim, est);
    throw ConfigError(msg);
  }

  std::map<std::vector<uint64_t>, potential::HarmonicProfile> memo;
  std::map<std::vector<uint64_t>, Leaf> leaves;
  expand(Cluster(dim), 1.0, depth, eta, memo, leaves);

  ShapeDistribution dist;
  dist.dim = dim;
  dist.eta = eta;
  dist.depth = depth;
  const auto maps = point_group(dim);
  std::map<std::vector<uint64_t>, size_t> classes;
  for (const auto& [key, leaf] : leaves) {
    ShapeDistribution::Entry e;
    e.sites.reserve(key.size());
    for (const uint64_t k : key) e.sites.push_back(unpack_site(k, dim));
    e.hash = leaf.hash;
    e.p = leaf.p;
    const auto ck = orbit_key(e.sites, dim, maps);
    e.sym_class = classes.emplace(ck, classes.size()).first->second;
    dist.entries.push_back(std::move(e));
  }
  dist.n_classes = classes.size();
  return dist;
}

LemmaSweep lemma_sweep(int dim, int max_sites) {
  check_dim(dim);
  if (max_sites < 1) throw ContractViolation("lemma_sweep: need at least one site");
  if (max_sites > 8)
    throw ConfigError("lemma_sweep: max_sites beyond 8 is refused (exhaustive enumeration)");

  LemmaSweep sweep;
  sweep.dim = dim;
  sweep.max_sites = max_sites;
  sweep.ratio_min = std::numeric_limits<double>::infinity();
  sweep.ratio_max = 0.0;
  sweep.by_size.assign(size_t(max_sites),
                       {std::numeric_limits<double>::infinity(), 0.0});

  for (int n = 1; n <= max_sites; ++n) {
    for (const auto& cells : enumerate_shapes(dim, n)) {
      const Cluster A = Cluster::from_sites(dim, cells, cells[0]);
      const auto eqA = potential::equilibrium_measure(dim, A.closure_sorted());
      std::unordered_map<uint64_t, double, KeyHash> mu;
      for (size_t i = 0; i < eqA.sites.size(); ++i)
        mu.emplace(pack_site(eqA.sites[i], dim), eqA.mu[i]);

      const auto bd = A.boundary_sorted();
      const auto acc = potential::boundary_accessible(A);
      for (size_t i = 0; i < bd.size(); ++i) {
        if (!acc[i]) {
          ++sweep.zero_sites;
          continue;
        }
        const double om = mu.at(pack_site(bd[i], dim));
        if (!(om > 0.0))
          throw SolverError("lemma_sweep: accessible site carries no measure", om);
        Cluster B = A;
        B.attach(bd[i]);
        const auto eqB = potential::equilibrium_measure(dim, B.closure_sorted());
        const double inc = dim == 2 ? eqB.gamma - eqA.gamma
                                    : 1.0 / eqA.gamma - 1.0 / eqB.gamma;
        const double ratio = inc / (om * om);
        sweep.ratio_min = std::min(sweep.ratio_min, ratio);
        sweep.ratio_max = std::max(sweep.ratio_max, ratio);
        auto& [lo, hi] = sweep.by_size[size_t(n - 1)];
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
        ++sweep.pairs;
      }
      ++sweep.shapes;
    }
  }
  return sweep;
}

double potential_kernel_oracle(int i, int j) {
  constexpr int N = 14;
  i = std::abs(i);
  j = std::abs(j);
  if (i < j) std::swap(i, j);
  if (i > N)
    throw ContractViolation("potential_kernel_oracle: coordinates beyond the precision guard");

  // octant table: diagonal from the closed form, then march off the diagonal
  // with the mean-value relation, in extended precision
  static const auto table = [] {
    std::array<std::array<long double, N + 1>, N + 1> a{};
    constexpr long double pi = std::numbers::pi_v<long double>;
    long double harm = 0.0L;
    for (int k = 1; k <= N; ++k) {
      harm += 1.0L / (2 * k - 1);
      a[size_t(k)][size_t(k)] = (4.0L / pi) * harm;
    }
    a[1][0] = 1.0L;  // unit defect at the origin forces this exactly
    for (int m = 1; m < N; ++m)
      a[size_t(m + 1)][size_t(m)] = 2.0L * a[size_t(m)][size_t(m)] - a[size_t(m)][size_t(m - 1)];
    for (int ii = 2; ii <= N; ++ii)
      for (int jj = ii - 2; jj >= 0; --jj)
        a[size_t(ii)][size_t(jj)] = 4.0L * a[size_t(ii - 1)][size_t(jj)] -
                                    a[size_t(ii - 2)][size_t(jj)] -
                                    a[size_t(ii - 1)][size_t(jj + 1)] -
                                    a[size_t(ii - 1)][size_t(jj == 0 ? 1 : jj - 1)];
    return a;
  }();
  return double(table[size_t(i)][size_t(j)]);
}

}  // namespace dbm::oracle
