#pragma once

#include <cstdint>
#include <vector>

#include "dbm/site.hpp"

namespace dbm::oracle {

// All fixed (translation-canonical) edge-connected shapes with exactly
// n_sites cells, each translated so the bounding box starts at the origin
// and sorted by packed key.  Deterministic order across calls.
std::vector<std::vector<Site>> enumerate_shapes(int dim, int n_sites);

// Exact law of the growth chain after `depth` attachments, obtained by
// exhaustive tree expansion with the exact boundary measure at every node.
// Shapes keep the chain's rooting at the origin (no translation); the lattice
// point group only enters through the symmetry-class labels.
struct ShapeDistribution {
  int dim = 2;
  double eta = 1.0;
  int depth = 0;
  struct Entry {
    std::vector<Site> sites;  // sorted by packed key, origin included
    uint64_t hash = 0;        // matches Cluster::set_hash of the same set
    double p = 0.0;
    size_t sym_class = 0;
  };
  std::vector<Entry> entries;  // sorted by site-key sequence
  size_t n_classes = 0;

  double total() const;
  const Entry* find_hash(uint64_t h) const;  // nullptr when absent
};
// Guard: depth <= 5 in 2D, <= 4 in 3D; beyond that the refusal carries a
// node-count estimate.  eta must be finite and nonnegative.
ShapeDistribution enumerate_dbm(int dim, double eta, int depth);

// Capacity-increment ratios swept over every enumerated shape and every
// boundary site carrying positive measure:
//   2D   [gamma(B) - gamma(A)] / omega^2       (Robin constant of the closure)
//   3D   [1/cap(A) - 1/cap(B)] / omega^2       (equilibrium charge of the closure)
// with B = A + x.  Inaccessible boundary sites are skipped and counted; their
// increments vanish with them.
struct LemmaSweep {
  int dim = 2;
  int max_sites = 0;
  size_t shapes = 0;
  size_t pairs = 0;          // (shape, accessible site) ratios recorded
  size_t zero_sites = 0;     // skipped omega = 0 boundary sites
  double ratio_min = 0.0;
  double ratio_max = 0.0;
  // per shape size k = 1..max_sites: [k-1] = {min, max} over that size
  std::vector<std::pair<double, double>> by_size;
};
// Guard: max_sites <= 8.
LemmaSweep lemma_sweep(int dim, int max_sites);

// Independent 2D potential kernel values from the diagonal closed form
// a(k,k) = (4/pi) sum_{j<=k} 1/(2j-1) marched off the diagonal with the
// discrete harmonicity relation in extended precision.  Exact anchors:
// a(0,0) = 0, a(1,0) = 1, a(1,1) = 4/pi.  Guard: |i|, |j| <= 14 (the
// recurrence amplifies roundoff beyond that).
double potential_kernel_oracle(int i, int j);

}  // namespace dbm::oracle
