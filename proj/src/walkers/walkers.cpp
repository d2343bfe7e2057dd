#include "dbm/walkers.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>
#include <vector>

#include "dbm/error.hpp"
#include "dbm/laplace_grid.hpp"
#include "dbm/philox.hpp"

namespace dbm::walkers {
namespace {

constexpr double kPi = 3.14159265358979323846;

// Effective continuum radius of the rounded launch circle seen by the 2D
// re-injection kernel.  Half a lattice unit; the choice is validated against
// the exact solver by the kill-shell bias tests.
constexpr double kReentryShift = 0.5;

// A walker that never lands is a configuration bug, not a statistics event.
constexpr uint64_t kAttemptCap = 10000000;

// --- precomputed ball-exit tables -------------------------------------------
//
// Exit distribution of the SRW started at the centre of the L2 ball of
// radius r: p(y) = sum_{x in B, x ~ y} G(x) / 2d with G the expected-visits
// Green's function of the ball.  Jumping straight to the exit site is exact
// for the walk as long as the ball holds no absorbing site.

struct BallTable {
  int32_t r = 0;
  std::vector<Site> exits;
  std::vector<double> cum;

  const Site& sample(double u) const {
    size_t i = size_t(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
    if (i >= exits.size()) i = exits.size() - 1;
    return exits[i];
  }
};

constexpr int32_t kRadii[] = {2,  3,  4,  6,  8,   11,  16,  23, 32,
                              45, 64, 91, 128, 181, 256, 362, 512};
constexpr int kNumRadii2 = int(sizeof(kRadii) / sizeof(kRadii[0]));
constexpr int kNumRadii3 = 11;  // 3D stops at r = 64, grid cost grows as r^3

const BallTable* build_ball_table(int dim, int32_t r) {
  potential::DirichletProblem p;
  p.dim = dim;
  p.half = r + 1;
  const int64_t r2 = int64_t(r) * r;
  p.is_dof = [r2](const Site& s) { return norm2_sq(s) <= r2; };
  p.fixed_value = [](const Site&) { return 0.0; };
  p.sources = {{Site{0, 0, 0}, 1.0}};
  const potential::GridSolution g = potential::solve_dirichlet(p, 1e-12);

  auto* t = new BallTable;
  t->r = r;
  const double inv2d = 1.0 / (2.0 * dim);
  const int32_t lim = r + 1;
  const int32_t zlo = dim == 2 ? 0 : -lim, zhi = dim == 2 ? 0 : lim;
  double total = 0.0;
  for (int32_t z = zlo; z <= zhi; ++z)
    for (int32_t y = -lim; y <= lim; ++y)
      for (int32_t x = -lim; x <= lim; ++x) {
        const Site s{x, y, z};
        if (norm2_sq(s) <= r2) continue;  // exits live outside the ball
        double flux = 0.0;
        const auto nb = neighbors(s, dim);
        for (int k = 0; k < 2 * dim; ++k)
          if (norm2_sq(nb[k]) <= r2) flux += g.at(nb[k]);
        if (flux <= 0.0) continue;
        t->exits.push_back(s);
        total += flux * inv2d;
        t->cum.push_back(total);
      }
  for (double& c : t->cum) c /= total;  // CG tolerance leaves ~1e-12 slack
  t->cum.back() = 1.0;
  return t;
}

std::atomic<const BallTable*> g_tables[2][kNumRadii2];
std::mutex g_table_mu;

const BallTable* ball_table(int dim, int idx) {
  std::atomic<const BallTable*>& slot = g_tables[dim - 2][idx];
  const BallTable* t = slot.load(std::memory_order_acquire);
  if (t) return t;
  std::lock_guard<std::mutex> lock(g_table_mu);
  t = slot.load(std::memory_order_relaxed);
  if (!t) {
    t = build_ball_table(dim, kRadii[idx]);
    slot.store(t, std::memory_order_release);
  }
  return t;
}

const BallTable* pick_table(int dim, int32_t allow) {
  const int n = dim == 2 ? kNumRadii2 : kNumRadii3;
  int best = -1;
  for (int i = 0; i < n && kRadii[i] <= allow; ++i) best = i;
  return best < 0 ? nullptr : ball_table(dim, best);
}

// --- the walk ----------------------------------------------------------------

Site launch_site(CounterStream& rng, int dim, double L, const Site& o) {
  if (dim == 2) {
    const double t = 2.0 * kPi * rng.next_double();
    return Site{o.x + int32_t(std::lround(L * std::cos(t))),
                o.y + int32_t(std::lround(L * std::sin(t))), 0};
  }
  const double w = 2.0 * rng.next_double() - 1.0;
  const double phi = 2.0 * kPi * rng.next_double();
  const double s = std::sqrt(std::max(0.0, 1.0 - w * w));
  return Site{o.x + int32_t(std::lround(L * s * std::cos(phi))),
              o.y + int32_t(std::lround(L * s * std::sin(phi))),
              o.z + int32_t(std::lround(L * w))};
}

// First-passage angle onto the launch circle from distance d (continuum
// Poisson kernel of the disk, sampled through its explicit quantile).
Site reenter_2d(CounterStream& rng, const Site& z, const Site& o, double d, double L) {
  const double leff = L + kReentryShift;
  const double q = (d - leff) / (d + leff);
  const double phi = 2.0 * std::atan(q * std::tan(kPi * (rng.next_double() - 0.5)));
  const double theta = std::atan2(double(z.y - o.y), double(z.x - o.x)) + phi;
  return Site{o.x + int32_t(std::lround(L * std::cos(theta))),
              o.y + int32_t(std::lround(L * std::sin(theta))), 0};
}

Site sample_hit_impl(const Cluster& A, const WalkerConfig& cfg, uint64_t walker_index,
                     WalkerStats& st) {
  const int dim = A.dim();
  const Site o = A.origin();
  const double base = A.radius() + 2.0;
  const double L = cfg.launch_factor * base;
  const double far = 2.0 * base;
  const double K = cfg.kill_factor * base;
  const double K2 = K * K;
  CounterStream rng(cfg.rng_seed, walker_index);

  for (uint64_t attempt = 0; attempt < kAttemptCap; ++attempt) {
    Site z = launch_site(rng, dim, L, o);
    int32_t c_est = 0;   // proven clearance lower bound at the current site
    int32_t cooldown = 0;  // clearance grows at most 1 per move, skip queries
    uint64_t moves = 0;
    for (;;) {
      if (moves++ >= cfg.max_steps) {
        ++st.abandoned;
        break;  // abandon this attempt, relaunch
      }
      if (c_est < 3) {
        if (cooldown > 0) {
          --cooldown;
        } else {
          c_est = A.clearance(z);
          if (c_est < 3) cooldown = 3 - c_est;
        }
      }
      int32_t allow = c_est - 1;
      const int64_t dx = z.x - o.x, dy = z.y - o.y, dz = z.z - o.z;
      const int64_t d2 = dx * dx + dy * dy + dz * dz;
      if (allow >= 2 && double(d2) > far * far) {
        // far field: the jump ball additionally stays clear of the launch shell
        const double cap = std::sqrt(double(d2)) - L - 1.0;
        if (cap < double(allow)) allow = cap < 0.0 ? 0 : int32_t(cap);
      }
      const BallTable* t = allow >= 2 ? pick_table(dim, allow) : nullptr;
      if (t) {
        const Site& e = t->sample(rng.next_double());
        z.x += e.x;
        z.y += e.y;
        z.z += e.z;
        c_est -= t->r + 1;
        ++st.jumps;
      } else {
        switch (rng.next_below(uint32_t(2 * dim))) {
          case 0: ++z.x; break;
          case 1: --z.x; break;
          case 2: ++z.y; break;
          case 3: --z.y; break;
          case 4: ++z.z; break;
          default: --z.z; break;
        }
        if (c_est > 0) --c_est;
        ++st.steps;
      }
      if (A.in_closure_fast(z.x, z.y, z.z)) {
        ++st.samples;
        return z;  // first entry into the closure always lands on bd(A)
      }
      const int64_t ex = z.x - o.x, ey = z.y - o.y, ez = z.z - o.z;
      const double e2 = double(ex * ex + ey * ey + ez * ez);
      if (e2 > K2) {
        if (dim == 3) {
          ++st.discards;
          break;  // condition on the hitting event: restart
        }
        ++st.reentries;
        z = reenter_2d(rng, z, o, std::sqrt(e2), L);
        c_est = 0;
        cooldown = 0;
      }
    }
  }
  throw SolverError("walker made no progress within the attempt budget");
}

std::atomic<int> g_threads{0};

}  // namespace

void WalkerConfig::validate() const {
  if (!(launch_factor >= 1.5))
    throw ContractViolation("walker launch_factor must be at least 1.5");
  if (!(kill_factor >= 4.0 * launch_factor))
    throw ContractViolation("walker kill_factor must be at least 4x launch_factor");
  if (max_steps == 0) throw ContractViolation("walker max_steps must be positive");
}

WalkerStats& WalkerStats::operator+=(const WalkerStats& o) {
  samples += o.samples;
  steps += o.steps;
  jumps += o.jumps;
  reentries += o.reentries;
  discards += o.discards;
  abandoned += o.abandoned;
  return *this;
}

void set_walker_threads(int n) { g_threads.store(n < 0 ? 0 : n); }

int walker_threads() {
  int n = g_threads.load();
  if (n == 0) n = int(std::thread::hardware_concurrency());
  return n < 1 ? 1 : n;
}

Site sample_hit(const Cluster& A, const WalkerConfig& cfg, uint64_t walker_index,
                WalkerStats* stats) {
  cfg.validate();
  if (A.size() == 0) throw ContractViolation("sample_hit needs a non-empty cluster");
  WalkerStats local;
  const Site h = sample_hit_impl(A, cfg, walker_index, local);
  if (stats) *stats += local;
  return h;
}

potential::HarmonicProfile estimate_profile(const Cluster& A, uint64_t n_samples,
                                            const WalkerConfig& cfg, WalkerStats* stats,
                                            uint64_t index_base) {
  cfg.validate();
  if (n_samples < 1) throw ContractViolation("estimate_profile needs n_samples >= 1");
  const int dim = A.dim();
  const std::vector<Site> bd = A.boundary_sorted();
  std::vector<uint64_t> keys(bd.size());
  for (size_t i = 0; i < bd.size(); ++i) keys[i] = pack_site(bd[i], dim);

  const int want = walker_threads();
  const int T = (n_samples >= 2048 && want > 1) ? want : 1;
  const size_t nt = size_t(T);
  std::vector<std::vector<uint64_t>> counts(nt, std::vector<uint64_t>(bd.size(), 0));
  std::vector<WalkerStats> st(nt);
  std::vector<std::exception_ptr> errs(nt);

  auto work = [&](int t) {
    try {
      const uint64_t lo = n_samples * uint64_t(t) / uint64_t(T);
      const uint64_t hi = n_samples * uint64_t(t + 1) / uint64_t(T);
      for (uint64_t i = lo; i < hi; ++i) {
        const Site h = sample_hit_impl(A, cfg, index_base + i, st[size_t(t)]);
        const uint64_t k = pack_site(h, dim);
        const size_t j = size_t(std::lower_bound(keys.begin(), keys.end(), k) - keys.begin());
        if (j >= keys.size() || keys[j] != k)
          throw SolverError("walker hit site is not on the cluster boundary");
        ++counts[size_t(t)][j];
      }
    } catch (...) {
      errs[size_t(t)] = std::current_exception();
    }
  };

  if (T == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(size_t(T));
    for (int t = 0; t < T; ++t) pool.emplace_back(work, t);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);

  // integer tallies merge the same way for every worker count
  std::vector<uint64_t> tally(bd.size(), 0);
  for (const auto& c : counts)
    for (size_t i = 0; i < tally.size(); ++i) tally[i] += c[i];

  potential::HarmonicProfile p;
  p.dim = dim;
  p.source = potential::HarmonicProfile::Source::monte_carlo;
  p.samples = n_samples;
  p.cluster_hash = A.set_hash();
  p.cluster_size = A.size();
  p.w.reserve(bd.size());
  const double inv = 1.0 / double(n_samples);
  for (size_t i = 0; i < bd.size(); ++i) p.w.emplace_back(bd[i], double(tally[i]) * inv);
  if (stats)
    for (const auto& s : st) *stats += s;
  return p;
}

}  // namespace dbm::walkers
