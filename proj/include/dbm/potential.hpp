#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dbm/cluster.hpp"
#include "dbm/site.hpp"

namespace dbm::potential {

// --- lattice kernels ------------------------------------------------------

// 2D recurrent potential kernel a(x): a(0) = 0, discrete-harmonic away from
// the origin with unit defect there, a(x) = (2/pi) log|x| + kappa + O(|x|^-2).
// Built once from a disk solve seeded by the asymptotic form on a far ring;
// kappa and the leading anisotropic correction are fitted internally.
double potential_kernel(const Site& s, int dim = 2);

struct Kernel2DDiagnostics {
  double kappa;      // fitted additive constant
  double c4;         // fitted cos(4 theta)/|x|^2 coefficient
  double fit_rms;    // ring-fit residual after removing both terms
};
const Kernel2DDiagnostics& potential_kernel_diagnostics();

// 3D free Green's function (expected visits, SRW on Z^3).
double green3_free(const Site& s);

struct Green3Diagnostics {
  double c1;         // fitted |x|^-1 coefficient, should match 3/(2 pi)
  double c3;         // isotropic |x|^-3 coefficient
  double c3a;        // cubic-harmonic |x|^-3 coefficient
  double fit_rms;
};
const Green3Diagnostics& green3_diagnostics();

// --- profiles ---------------------------------------------------------------

// Probability profile over the outer boundary of a cluster, canonically
// ordered by packed site key.
struct HarmonicProfile {
  enum class Source { exact, monte_carlo };
  int dim = 2;
  Source source = Source::exact;
  uint64_t samples = 0;           // meaningful for monte_carlo
  uint64_t cluster_hash = 0;
  size_t cluster_size = 0;
  std::vector<std::pair<Site, double>> w;

  double total() const;
  double value_at(const Site& s) const;  // 0 when the site is absent
  double max_value() const;
};

// --- exact solvers ----------------------------------------------------------

struct ExactOptions {
  double tol = 1e-8;        // target total-variation accuracy
  size_t dense_cap = 4096;  // closure size handled by the dense route
  size_t site_cap = 100000; // hard precondition on the closure size
  double max_rho_factor = 512.0;  // ladder budget, in units of (R + 2)
};

// Harmonic measure from infinity of the closure of A, supported on bd(A).
// Dense equilibrium solve for small closures, shell-escape ladder with
// Richardson extrapolation for large ones.
HarmonicProfile harmonic_measure_exact(const Cluster& A, const ExactOptions& opt = {});

// Flags, parallel to boundary_sorted(), marking boundary sites reachable from
// infinity through the complement of the closure; exactly the support of the
// harmonic measure.  Throws when the bounding box is too large to flood.
std::vector<char> boundary_accessible(const Cluster& A);

// Escape probabilities: for y in bd(A), the chance a walk from y reaches
// |x| >= rho before re-entering the closure of A.  Requires rho > 2R + 2.
struct EscapeProfile {
  double rho;
  double rel_residual;
  std::vector<std::pair<Site, double>> e;
};
EscapeProfile escape_profile(const Cluster& A, double rho, double tol = 1e-10);

// Capacity under the conventions used throughout: in 2D the Robin constant
// of the closure (equivalently sum of omega(x) a(x - z) over bd(A), any
// z in A); in 3D the sum over bd(A) of escape probabilities P^x(T_A = inf).
double capacity(const Cluster& A, const ExactOptions& opt = {});

// Same quantity for an arbitrary finite connected site set.
double capacity_of_set(int dim, const std::vector<Site>& sites, const ExactOptions& opt = {});

struct CapacityIncrement {
  double raw;         // Cap(closure of A + x) - Cap(closure of A)
  double lemma_form;  // 2D: same; 3D: 1/Cap(closure A) - 1/Cap(closure B)
  double omega;       // omega(x, closure of A)
};
CapacityIncrement capacity_increment(const Cluster& A, const Site& x,
                                     const ExactOptions& opt = {});

// Capacity-type functional of the closure read off its boundary profile
// through the equilibrium identities (anchor must be a cluster site):
//   2D  sum omega(y) a(y - anchor)   = Robin constant of the closure,
//                                      same number as capacity();
//   3D  1 / sum omega(y) G(y - anchor) = total equilibrium charge of the
//                                      closure (the quantity whose reciprocal
//                                      drives the increment lemma), NOT the
//                                      boundary escape sum capacity() uses.
// Exact for exact profiles, a consistent estimator for Monte Carlo ones; the
// growth engine uses it to price capacity checkpoints at the cost of the
// profile already in hand.
double capacity_from_profile(const HarmonicProfile& p, Site anchor);

// Green's function of the walk killed on A: expected visits to y from x
// before hitting A.  Requires x, y outside A.
double greens_function(const Site& x, const Site& y, const Cluster& A);

// Harmonic function vanishing on the set, normalised against the walk from
// infinity: in 2D grows like (2/pi) log|x|, in 3D it is the escape
// probability P^x(T_K = inf).  This is the G(x, infinity, K) limit entering
// the capacity-increment identity.
double harmonic_from_infinity(const Site& x, const std::vector<Site>& K, int dim);

// --- equilibrium internals (exposed for tests and the oracle) ---------------

// Dense equilibrium solve over an explicit finite set K (2D: constant
// potential + total mass one; 3D: capacitor problem).  Returns the measure
// over K (many entries exactly 0) and the 2D Robin constant / 3D total mass.
struct Equilibrium {
  int dim;
  std::vector<Site> sites;      // sorted by packed key
  std::vector<double> mu;       // equilibrium measure, sums to 1
  double gamma;                 // 2D Robin constant; 3D Lawler capacity
};
Equilibrium equilibrium_measure(int dim, std::vector<Site> sites);

// Memoised exact profiles keyed by the cluster site set.
class ProfileCache {
 public:
  std::shared_ptr<const HarmonicProfile> get(const Cluster& A) const;
  void put(const Cluster& A, std::shared_ptr<const HarmonicProfile> p);
  size_t size() const { return map_.size(); }

 private:
  struct Key {
    uint64_t hash;
    size_t n;
    bool operator==(const Key&) const = default;
  };
  struct KeyHasher {
    size_t operator()(const Key& k) const { return size_t(k.hash ^ (k.n * 0x9e3779b97f4a7c15ull)); }
  };
  std::unordered_map<Key, std::shared_ptr<const HarmonicProfile>, KeyHasher> map_;
};

}  // namespace dbm::potential
