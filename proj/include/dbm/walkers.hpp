#pragma once

#include <cstdint>

#include "dbm/cluster.hpp"
#include "dbm/potential.hpp"

namespace dbm::walkers {

// Radii in units of (R + 2), R the cluster radius: walkers launch on the
// shell launch_factor * (R + 2) and the kill rule fires past
// kill_factor * (R + 2).  In 2D a killed walk is re-injected onto the launch
// shell (the walk is recurrent, killing it would be wrong); in 3D it is
// discarded and the walker restarts, conditioning on the hitting event.
struct WalkerConfig {
  double launch_factor = 2.0;
  double kill_factor = 8.0;
  uint64_t max_steps = 1000000000;  // per attempt; hitting it abandons the attempt
  uint64_t rng_seed = 0;

  void validate() const;  // launch_factor >= 1.5, kill_factor >= 4 * launch_factor
};

struct WalkerStats {
  uint64_t samples = 0;
  uint64_t steps = 0;      // nearest-neighbour moves
  uint64_t jumps = 0;      // ball-exit long jumps
  uint64_t reentries = 0;  // 2D kill-shell re-injections
  uint64_t discards = 0;   // 3D kill-shell restarts
  uint64_t abandoned = 0;  // attempts cut off at max_steps

  WalkerStats& operator+=(const WalkerStats& o);
};

// First-hit site on bd(A) of a walk from infinity, approximately
// omega(., closure of A).  Deterministic in (cfg.rng_seed, walker_index)
// alone: each walker owns counter stream walker_index, so results do not
// depend on thread scheduling.
Site sample_hit(const Cluster& A, const WalkerConfig& cfg, uint64_t walker_index,
                WalkerStats* stats = nullptr);

// Normalized hit counts over bd(A) from n_samples independent walkers
// (indices 0..n_samples-1 offset by index_base; growth encodes the step
// number there to decorrelate successive profiles).  Integer tallies make
// the result bit-identical for any worker count.
potential::HarmonicProfile estimate_profile(const Cluster& A, uint64_t n_samples,
                                            const WalkerConfig& cfg,
                                            WalkerStats* stats = nullptr,
                                            uint64_t index_base = 0);

// Worker pool width for estimate_profile; 0 restores the hardware default.
void set_walker_threads(int n);
int walker_threads();

}  // namespace dbm::walkers
