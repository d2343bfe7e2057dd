#include "dbm/growth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>
#include <utility>

#include "dbm/error.hpp"

namespace dbm::growth {

namespace {

// Walker stream ids stay below 2^63 (step block << 32 plus sample index);
// the chain's own draws live on a tagged stream that can never collide.
constexpr uint64_t kChainStream = (uint64_t(1) << 63) | 1;
// Checkpoint-only profiles use the upper half of a step's index block so
// they never share walkers with the step's own sampling.
constexpr uint64_t kCheckpointBase = uint64_t(1) << 31;

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

}  // namespace

void GrowthConfig::validate() const {
  check_dim(dimension);
  if (!(eta >= 0) || !std::isfinite(eta))
    throw ConfigError("growth: eta must be finite and nonnegative");
  if (n_particles >= (uint64_t(1) << 31))
    throw ConfigError("growth: n_particles exceeds the supported range");
  if (measure_mode == MeasureMode::dla_fast && eta != 1.0)
    throw ConfigError("growth: dla_fast requires eta = 1");
  if (strict_eden && eta != 0.0)
    throw ConfigError("growth: strict_eden only makes sense at eta = 0");
  if (samples_per_step >= (uint64_t(1) << 31))
    throw ConfigError("growth: samples_per_step exceeds the per-step stream block");
  if (checkpoint_samples == 0 || checkpoint_samples >= (uint64_t(1) << 31))
    throw ConfigError("growth: checkpoint_samples must lie in [1, 2^31)");
  walker.validate();
  if (measure_mode == MeasureMode::exact) {
    // closure gains at most 2d - 1 sites per attachment
    const uint64_t worst =
        1 + 2 * uint64_t(dimension) + n_particles * (2 * uint64_t(dimension) - 1);
    if (worst > exact.dense_cap)
      throw ConfigError("growth: exact mode at this n_particles can exceed the dense cap");
  }
}

Site dbm_step(const Cluster& A, double eta, const potential::HarmonicProfile& profile,
              CounterStream& rng) {
  if (!(eta >= 0) || !std::isfinite(eta))
    throw ContractViolation("dbm_step: eta must be finite and nonnegative");
  if (profile.dim != A.dim() || profile.cluster_size != A.size() ||
      profile.cluster_hash != A.set_hash() || profile.w.size() != A.boundary_size())
    throw ContractViolation("dbm_step: profile does not belong to this cluster");

  std::vector<double> wt(profile.w.size());
  double total = 0;
  for (size_t i = 0; i < profile.w.size(); ++i) {
    const double v = profile.w[i].second;
    if (v > 0)
      wt[i] = eta == 0.0 ? 1.0 : (eta == 1.0 ? v : std::pow(v, eta));
    total += wt[i];
  }
  if (!(total > 0)) throw SolverError("dbm_step: no boundary site carries positive weight", total);

  const double u = rng.next_double() * total;
  double acc = 0;
  size_t last_pos = profile.w.size();
  for (size_t i = 0; i < wt.size(); ++i) {
    if (wt[i] <= 0) continue;
    acc += wt[i];
    last_pos = i;
    if (u < acc) return profile.w[i].first;
  }
  return profile.w[last_pos].first;  // u landed on the rounding sliver at 1
}

namespace detail {

bool FreeRegion::accessible(const Cluster& A, const Site& y) const {
  for (int k = 0; k < 2 * dim_; ++k) {
    const Site nb = neighbors(y, dim_)[size_t(k)];
    if (!A.in_closure(nb) && !sealed(nb)) return true;
  }
  return false;
}

void FreeRegion::on_attach(const Cluster& A, const std::vector<Site>& fresh) {
  if (fresh.empty()) return;

  // The fresh cells just left the free graph, so drop any sealed marks they
  // carried; sealed_ then stays a subset of the free cells.
  for (const Site& f : fresh) sealed_.erase(pack_site(f, dim_));

  // Free unsealed cells adjacent to the newly absorbed ones.  Every fragment
  // the absorption pinched off contains one of these, so flooding from them
  // finds every new pocket.
  std::vector<Site> seeds;
  for (const Site& f : fresh)
    for (int k = 0; k < 2 * dim_; ++k) {
      const Site nb = neighbors(f, dim_)[size_t(k)];
      if (A.in_closure(nb) || sealed(nb)) continue;
      bool dup = false;
      for (const Site& s : seeds)
        dup = dup || (s.x == nb.x && s.y == nb.y && s.z == nb.z);
      if (!dup) seeds.push_back(nb);
    }
  // A single fragment touching the absorbed cells must be the infinite one:
  // whenever a pocket pinches off, the infinite fragment touches them too.
  if (seeds.size() <= 1) return;

  // Lockstep multi-source flood.  Seed groups expand one cell per round and
  // merge on contact; a group reaching the shell past the bounding box is
  // infinite, one that exhausts is a pocket and gets sealed.  Once every
  // class but one has resolved finite, the survivor is the infinite
  // fragment, so the common no-pocket case never pays more than the few
  // cells it takes the groups to meet.
  const size_t m = seeds.size();
  enum class S : char { active, finite, infinite };
  std::vector<size_t> parent(m);
  std::vector<S> state(m, S::active);  // meaningful at class roots
  for (size_t i = 0; i < m; ++i) parent[i] = i;
  const auto find = [&](size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  size_t n_active = m, n_infinite = 0;

  const Site o = A.origin();
  const int32_t shell = A.inf_radius() + 2;
  std::unordered_map<uint64_t, size_t, KeyHash> owner;  // visited cell -> seed group
  std::vector<std::vector<Site>> queue(m);
  std::vector<std::vector<uint64_t>> cells(m);
  std::vector<size_t> head(m, 0);
  for (size_t i = 0; i < m; ++i) {
    const uint64_t key = pack_site(seeds[i], dim_);
    owner.emplace(key, i);
    queue[i].push_back(seeds[i]);
    cells[i].push_back(key);
  }

  // Classes resolved finite own their whole fragment, so nothing can touch
  // them later; merges only ever involve at most one resolved-infinite side.
  const auto merge = [&](size_t ra, size_t rb) {
    const S sa = state[ra], sb = state[rb];
    parent[rb] = ra;
    n_active -= size_t(sa == S::active) + size_t(sb == S::active);
    n_infinite -= size_t(sa == S::infinite) + size_t(sb == S::infinite);
    if (sa == S::infinite || sb == S::infinite) {
      state[ra] = S::infinite;
      ++n_infinite;
    } else {
      state[ra] = S::active;
      ++n_active;
    }
  };
  const auto group_exhausted = [&](size_t root) {
    for (size_t i = 0; i < m; ++i)
      if (find(i) == root && head[i] < queue[i].size()) return false;
    return true;
  };

  while (n_active > 0) {
    if (n_active == 1 && n_infinite == 0) return;  // survivor is the infinite fragment
    bool progressed = false;
    for (size_t i = 0; i < m; ++i) {
      size_t root = find(i);
      if (state[root] != S::active || head[i] >= queue[i].size()) continue;
      const Site c = queue[i][head[i]++];
      progressed = true;
      for (int k = 0; k < 2 * dim_; ++k) {
        const Site nb = neighbors(c, dim_)[size_t(k)];
        if (A.in_closure(nb) || sealed(nb)) continue;
        const uint64_t key = pack_site(nb, dim_);
        const auto it = owner.find(key);
        if (it != owner.end()) {
          const size_t r2 = find(it->second);
          if (r2 != root) {
            merge(root, r2);
            root = find(i);
            if (state[root] != S::active) break;
          }
          continue;
        }
        owner.emplace(key, i);
        queue[i].push_back(nb);
        cells[i].push_back(key);
        if (std::max({std::abs(nb.x - o.x), std::abs(nb.y - o.y), std::abs(nb.z - o.z)}) >=
            shell) {
          state[root] = S::infinite;
          --n_active;
          ++n_infinite;
          break;
        }
      }
      root = find(i);
      if (state[root] == S::active && group_exhausted(root)) {
        // pocket: seal every cell the class touched
        for (size_t j = 0; j < m; ++j)
          if (find(j) == root)
            for (const uint64_t key : cells[j]) sealed_.insert(key);
        state[root] = S::finite;
        --n_active;
      }
    }
    if (!progressed) break;  // defensive; an active class always has work
  }
}

}  // namespace detail

namespace {

// Boundary mirror with O(1) removal, for uniform eta = 0 draws.
struct BoundaryList {
  std::vector<Site> v;
  std::unordered_map<uint64_t, size_t, KeyHash> pos;
  int dim;

  explicit BoundaryList(const Cluster& A) : dim(A.dim()) {
    v = A.boundary_sorted();
    pos.reserve(2 * v.size());
    for (size_t i = 0; i < v.size(); ++i) pos.emplace(pack_site(v[i], dim), i);
  }

  void apply(const Site& picked, const std::vector<Site>& fresh) {
    const auto it = pos.find(pack_site(picked, dim));
    const size_t i = it->second;
    pos.erase(it);
    if (i + 1 != v.size()) {
      v[i] = v.back();
      pos[pack_site(v[i], dim)] = i;
    }
    v.pop_back();
    for (const Site& f : fresh) {
      pos.emplace(pack_site(f, dim), v.size());
      v.push_back(f);
    }
  }
};

Site eden_draw(const Cluster& A, const BoundaryList& bd, const detail::FreeRegion& region,
               bool strict, CounterStream& rng) {
  const size_t m = bd.v.size();
  if (m == 0) throw SolverError("eden draw on an empty boundary");
  if (strict) return bd.v[rng.next_below(uint32_t(m))];
  // rejection over the maintained boundary keeps the draw exactly uniform on
  // the accessible part; the enumeration fallback is equivalent and only
  // guards against astronomically unlucky streaks
  for (uint64_t attempt = 0; attempt < 64 + 8 * m; ++attempt) {
    const Site y = bd.v[rng.next_below(uint32_t(m))];
    if (region.accessible(A, y)) return y;
  }
  std::vector<Site> acc;
  for (const Site& y : bd.v)
    if (region.accessible(A, y)) acc.push_back(y);
  if (acc.empty()) throw SolverError("eden draw: no accessible boundary site remains");
  return acc[rng.next_below(uint32_t(acc.size()))];
}

}  // namespace

GrowthTrace grow(const GrowthConfig& cfg) {
  cfg.validate();

  GrowthTrace tr;
  tr.config = cfg;
  tr.final_cluster = Cluster(cfg.dimension);
  Cluster& A = tr.final_cluster;
  tr.steps.reserve(size_t(cfg.n_particles));

  CounterStream chain(cfg.seed, kChainStream);
  walkers::WalkerConfig wcfg = cfg.walker;
  wcfg.rng_seed = cfg.seed;

  const bool eden = cfg.eta == 0.0;
  const int dim = cfg.dimension;
  detail::FreeRegion region(dim);
  BoundaryList bd(A);

  try {
    for (uint64_t n = 1; n <= cfg.n_particles; ++n) {
      const bool checkpoint =
          cfg.capacity_checkpoint_every != 0 &&
          (n % cfg.capacity_checkpoint_every == 0 || n == cfg.n_particles);
      const uint64_t block = n << 32;

      Site pick{};
      double omega_hat = kMissing;
      std::optional<double> cap;

      const auto record_from = [&](const potential::HarmonicProfile& p, const Site& y) {
        omega_hat = p.value_at(y);
        if (checkpoint) cap = potential::capacity_from_profile(p, A.origin());
      };

      switch (cfg.measure_mode) {
        case MeasureMode::exact: {
          const potential::HarmonicProfile p = potential::harmonic_measure_exact(A, cfg.exact);
          pick = (eden && cfg.strict_eden) ? bd.v[chain.next_below(uint32_t(bd.v.size()))]
                                           : dbm_step(A, cfg.eta, p, chain);
          record_from(p, pick);
          break;
        }
        case MeasureMode::monte_carlo: {
          if (eden) {
            // the eta = 0 kernel needs only the support, which the sealed-set
            // tracker maintains exactly; profiles are for checkpoints only
            pick = eden_draw(A, bd, region, cfg.strict_eden, chain);
            if (checkpoint) {
              const potential::HarmonicProfile p = walkers::estimate_profile(
                  A, cfg.checkpoint_samples, wcfg, &tr.walker_stats, block + kCheckpointBase);
              record_from(p, pick);
            }
          } else {
            const uint64_t ns = cfg.samples_per_step
                                    ? cfg.samples_per_step
                                    : std::max<uint64_t>(10000, 20 * A.boundary_size());
            const potential::HarmonicProfile p =
                walkers::estimate_profile(A, ns, wcfg, &tr.walker_stats, block);
            pick = dbm_step(A, cfg.eta, p, chain);
            record_from(p, pick);
          }
          break;
        }
        case MeasureMode::dla_fast: {
          pick = walkers::sample_hit(A, wcfg, block, &tr.walker_stats);
          if (checkpoint) {
            const potential::HarmonicProfile p = walkers::estimate_profile(
                A, cfg.checkpoint_samples, wcfg, &tr.walker_stats, block + kCheckpointBase);
            record_from(p, pick);
          }
          break;
        }
      }

      std::vector<Site> fresh;
      for (int k = 0; k < 2 * dim; ++k) {
        const Site nb = neighbors(pick, dim)[size_t(k)];
        if (!A.in_closure(nb)) fresh.push_back(nb);
      }
      A.attach(pick);
      if (eden && !cfg.strict_eden) region.on_attach(A, fresh);
      bd.apply(pick, fresh);

      tr.steps.push_back(StepRecord{n, pick, omega_hat, A.radius(), cap});
    }
  } catch (const std::exception& e) {
    // build the message before the trace is moved out; evaluation order of
    // the two constructor arguments is unspecified
    std::string msg =
        "growth aborted at step " + std::to_string(tr.steps.size() + 1) + ": " + e.what();
    throw GrowthAborted(msg, std::move(tr));
  }
  return tr;
}

}  // namespace dbm::growth
