#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "dbm/cluster.hpp"
#include "dbm/philox.hpp"
#include "dbm/potential.hpp"
#include "dbm/walkers.hpp"

namespace dbm::growth {

// How the transition measure is obtained each step.
//  exact       per-step equilibrium solve; limited to small clusters.
//  monte_carlo per-step walker profile, raised to the eta-th power.  For
//              eta = 0 the step itself needs no measure values (uniform over
//              the walk-accessible boundary, tracked combinatorially), so
//              profiles are only estimated at checkpoints.
//  dla_fast    eta = 1 only: one walker's hit site is itself a draw from the
//              transition kernel, so no profile is ever formed for stepping;
//              checkpoints estimate one for the record.
enum class MeasureMode { exact, monte_carlo, dla_fast };

struct GrowthConfig {
  int dimension = 2;
  double eta = 1.0;
  uint64_t n_particles = 0;
  MeasureMode measure_mode = MeasureMode::dla_fast;

  // monte_carlo walkers per step; 0 means max(10^4, 20 |bd A|).
  uint64_t samples_per_step = 0;
  // Record closure capacity every k-th step (and at the final step); 0 = off.
  uint64_t capacity_checkpoint_every = 0;
  // Walkers behind a checkpoint-only profile (dla_fast and eta = 0 modes).
  uint64_t checkpoint_samples = 10000;
  // eta = 0 only: draw uniformly over all of bd(A) instead of only the
  // walk-accessible part.
  bool strict_eden = false;

  uint64_t seed = 0;
  walkers::WalkerConfig walker{};   // rng_seed inside is ignored; seed rules
  potential::ExactOptions exact{};  // exact-mode solver options

  void validate() const;
};

struct StepRecord {
  uint64_t n = 0;     // chain time; the cluster holds n + 1 sites afterwards
  Site attached{};
  // Measure of the attached site under the profile that drove the step; NaN
  // when the mode had no profile in hand (dla_fast and eta = 0 between
  // checkpoints).
  double omega_hat = 0;
  double radius = 0;  // Euclidean radius after the attachment
  // Closure capacity at checkpoints, from the same pre-attachment profile
  // (2D Robin constant; 3D total equilibrium charge, see
  // capacity_from_profile).
  std::optional<double> capacity;
};

struct GrowthTrace {
  GrowthConfig config;
  std::vector<StepRecord> steps;
  Cluster final_cluster{2};
  walkers::WalkerStats walker_stats;
};

// A solver or walker failure mid-run surfaces as this, carrying everything
// grown so far; the CLI dumps the partial trace before exiting.
class GrowthAborted : public std::runtime_error {
 public:
  GrowthAborted(const std::string& what, GrowthTrace partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const GrowthTrace& partial() const { return partial_; }

 private:
  GrowthTrace partial_;
};

// One transition of the chain: returns y in bd(A) with probability
// omega(y)^eta / sum_z omega(z)^eta.  Zero-measure sites get weight zero for
// every eta > 0 and are excluded from the eta = 0 uniform draw as well, so
// the support convention is continuous in eta.  Throws SolverError when no
// positive weight remains.
Site dbm_step(const Cluster& A, double eta, const potential::HarmonicProfile& profile,
              CounterStream& rng);

// Runs the chain from A_0 = {origin} for n_particles steps.  Pure function
// of cfg: traces are bit-identical across runs and walker thread counts.
GrowthTrace grow(const GrowthConfig& cfg);

namespace detail {

// Incremental accessibility tracker behind the eta = 0 sampler.  Free cells
// (complement of the closure) that provably sit in finite pockets go into a
// sealed set; since the free region only shrinks as the cluster grows, seals
// are permanent, and one bounded flood per attachment keeps the invariant
// "every finite-pocket cell is sealed" exact.  Exposed so tests can pit it
// against the from-scratch flood in potential::boundary_accessible.
class FreeRegion {
 public:
  explicit FreeRegion(int dim) : dim_(dim) {}

  bool sealed(const Site& s) const { return sealed_.count(pack_site(s, dim_)) != 0; }

  // y in bd(A): positive harmonic measure iff a free neighbour escapes.
  bool accessible(const Cluster& A, const Site& y) const;

  // Call right after A.attach(y); fresh holds the boundary sites the
  // attachment created (y's neighbours that were outside the old closure).
  void on_attach(const Cluster& A, const std::vector<Site>& fresh);

  size_t sealed_count() const { return sealed_.size(); }

 private:
  int dim_;
  std::unordered_set<uint64_t, KeyHash> sealed_;
};

}  // namespace detail

}  // namespace dbm::growth
