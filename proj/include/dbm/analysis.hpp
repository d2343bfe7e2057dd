#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "dbm/growth.hpp"
#include "dbm/potential.hpp"

namespace dbm::analysis {

using growth::GrowthTrace;
using growth::StepRecord;

// sum_y omega(y)^alpha over the boundary profile.  Zero entries contribute 0
// for alpha > 0; for alpha <= 0 they are excluded from the sum and counted
// into *zeros_excluded when a counter is supplied (0^alpha is unusable there).
double statistical_sum(const potential::HarmonicProfile& p, double alpha,
                       size_t* zeros_excluded = nullptr);

// One checkpoint of the measure spectrum: the alpha-sums and the per-scale
// exponents tau_hat(alpha) = -ln(sum) / ln(radius).
struct SpectrumReport {
  std::vector<double> alphas;
  std::vector<double> sums;
  std::vector<double> tau_hat;  // NaN when radius <= 1
  double radius = 0.0;
  uint32_t n = 0;          // chain time the profile was taken at (0 = unknown)
  size_t zero_sites = 0;   // zero-measure boundary sites (excluded for alpha <= 0)
};
SpectrumReport spectrum(const potential::HarmonicProfile& p,
                        const std::vector<double>& alphas, double radius,
                        uint32_t n = 0);

// Entropy statistic sum omega ln(omega R), equal to sum omega ln omega + ln R
// on normalised profiles; the fused form makes dyadic uniform profiles with
// R = m come out exactly 0.  Requires R >= 1 (R = 1 is the degenerate anchor
// where the statistic reduces to the plain entropy).
double makarov_statistic(const potential::HarmonicProfile& p, double R);

// sigma_hat = -ln(max omega) / ln R.  Requires R > 1.
double max_measure_exponent(const potential::HarmonicProfile& p, double R);

// Geometric mean of the attachment measures in a radius band against the
// m^{-1/2} envelope (2D), resp. the (m Cap)^{-1/2} envelope from a capacity
// checkpoint on (3D).
struct BeurlingReport {
  int dim = 2;
  double band_lo = 0.0;
  double band_hi = 0.0;              // 3D: +inf (band is "from n0 on")
  uint32_t n0 = 0;                   // 3D: chain time anchoring the band
  size_t m = 0;                      // attachments entering the product
  size_t missing = 0;                // in-band steps without a recorded omega
  size_t zeros = 0;                  // in-band zero omegas, excluded
  double geometric_mean = std::numeric_limits<double>::quiet_NaN();
  double ratio = std::numeric_limits<double>::quiet_NaN();       // GM * sqrt(m) resp. GM * sqrt(m Cap)
  double ratio_sup = std::numeric_limits<double>::quiet_NaN();   // sup of the prefix ratios, prefixes m >= 100
  double rms = std::numeric_limits<double>::quiet_NaN();         // sqrt(mean omega^2), same entries
  bool amgm_ok = false;              // GM <= RMS, checked in log domain
  std::optional<double> cap_anchor;  // 3D: capacity at the anchoring checkpoint
};
// 2D: the band is radius in [R, 100R].  3D: the band opens at the first
// capacity checkpoint with radius >= R and runs to the end of the trace.
// m = 0 yields an empty-band report rather than an error.
BeurlingReport beurling_integral_check(const GrowthTrace& tr, double R);

// Least-squares slope of ln radius against ln n over chain times in
// [n_lo, n_hi].  The window must span at least one decade.
double growth_exponent(const GrowthTrace& tr, uint32_t n_lo, uint32_t n_hi);

// One radius-growth margin: the sup over the trace of radius / f(n) for the
// bound form f applicable to the run's dimension and eta, plus a decade trend
// (sup over the last decade of n against the one before it).
struct CheckResult {
  std::string name;
  std::string bound_form;  // human-readable f(n)
  double statistic = std::numeric_limits<double>::quiet_NaN();  // sup radius/f(n)
  double trend = std::numeric_limits<double>::quiet_NaN();      // last-decade sup / previous-decade sup
  bool applicable = false;
  bool pass = false;
  std::string note;
};
struct VerificationReport {
  std::vector<CheckResult> checks;
  bool all_pass() const;  // non-applicable checks do not count against it
};
// Margins for every bound form matching (dimension, eta); eta >= 2 in 2D is
// reported as explicitly not applicable.  Pass means non-trending: last-decade
// sup <= 1.2 x previous-decade sup (traces shorter than three decades of n
// pass vacuously with a note).
VerificationReport theorem_margin(const GrowthTrace& tr);

// Scale-averaged tau_hat at alpha = eta and alpha = eta + 2, their difference
// (the dimension surrogate), and the two spectrum inequalities with margins.
struct DimensionReport {
  double eta = 0.0;
  double tau_eta = std::numeric_limits<double>::quiet_NaN();
  double tau_eta2 = std::numeric_limits<double>::quiet_NaN();
  double dimension = std::numeric_limits<double>::quiet_NaN();    // tau(eta+2) - tau(eta)
  double inv_beta = std::numeric_limits<double>::quiet_NaN();     // 1/beta_hat when supplied
  double lower_margin = std::numeric_limits<double>::quiet_NaN(); // tau(eta+2) - (eta+2)/2
  double upper_margin = std::numeric_limits<double>::quiet_NaN(); // (eta - 1) - tau(eta)
  size_t scales_used = 0;        // checkpoints with R >= 30
  bool low_confidence = true;    // under one decade of usable scales
  std::string note;
};
// Heuristic identities: everything is reported with margins, nothing is
// asserted.  beta_hat (optional) fills in the 1/beta column for comparison.
DimensionReport dimension_identity_report(const std::vector<SpectrumReport>& spectra,
                                          double eta,
                                          double beta_hat = std::numeric_limits<double>::quiet_NaN());

// Rebuild the cluster after the first upto_n attachments of a trace.
Cluster replay_prefix(const GrowthTrace& tr, uint32_t upto_n);

}  // namespace dbm::analysis
