#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dbm/growth.hpp"
#include "dbm/potential.hpp"
#include "dbm/walkers.hpp"

namespace dbm::io {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kCodeVersion = "dbm-lab/0.1.0";

// Header object on line 1 of every trace file.  `created_utc` honours
// SOURCE_DATE_EPOCH so identical configs produce byte-identical files; with
// the variable unset it pins the epoch instead of sampling the wall clock.
struct RunManifest {
  int schema_version = kSchemaVersion;
  growth::GrowthConfig config;
  std::string created_utc;
  std::string code_version = kCodeVersion;
  uint64_t seed = 0;
  bool aborted = false;        // partial dump after a mid-run failure
  std::string abort_reason;    // empty unless aborted
};

RunManifest make_manifest(const growth::GrowthConfig& cfg);

// Run configuration as one JSON object mirroring GrowthConfig (with nested
// "walker" and "exact" objects).  Every key is optional and defaulted;
// unknown keys are errors, as are wrong JSON types.  walker.rng_seed is not
// a key: the top-level seed drives every stream.
growth::GrowthConfig config_from_json(const std::string& text);
growth::GrowthConfig load_config(const std::string& path);
std::string config_to_json(const growth::GrowthConfig& cfg);

// JSONL trace: line 1 the manifest, then one object per step,
//   {"n":…, "site":[x,y(,z)], "omega":…|null, "r":…, "cap":…|null}
// null stands for "not measured" (NaN omega, absent capacity).  Doubles are
// emitted in shortest round-trip form, so parse(write(tr)) reproduces every
// record bit-for-bit; the final cluster is rebuilt by replaying the steps.
// Walker statistics are process diagnostics and are not part of the format.
void write_trace(std::ostream& os, const growth::GrowthTrace& tr, bool aborted = false,
                 const std::string& abort_reason = "");
void save_trace(const std::string& path, const growth::GrowthTrace& tr, bool aborted = false,
                const std::string& abort_reason = "");

struct LoadedTrace {
  RunManifest manifest;
  growth::GrowthTrace trace;
};

// Rejects unsupported schema_version values and malformed records outright;
// never reinterprets.  Throws ConfigError with the offending line number.
LoadedTrace read_trace(std::istream& is);
LoadedTrace load_trace(const std::string& path);

// Rebuilds the measure the run recorded at checkpoint step n: the exact
// profile in exact mode, the per-step walker profile in monte_carlo mode,
// and the checkpoint-stream profile (same counter block as the run used) in
// dla_fast and eta = 0 modes.  Bit-identical to what grow() saw.
potential::HarmonicProfile checkpoint_profile(const growth::GrowthTrace& tr, uint64_t n,
                                              walkers::WalkerStats* stats = nullptr);

// Steps n carrying a capacity checkpoint, ascending.
std::vector<uint64_t> checkpoint_steps(const growth::GrowthTrace& tr);

// CSV (RFC 4180: header row, comma separated, CRLF, "." decimal, missing
// values empty).
//   radius_series: n,radius
//   increments:    n,omega_hat,delta_cap   (delta_cap between checkpoints)
//   spectra:       checkpoint_n,R,alpha,sum,tau_hat  (profiles rebuilt via
//                  checkpoint_profile; R is the pre-attachment radius)
void export_radius_series(std::ostream& os, const growth::GrowthTrace& tr);
void export_increments(std::ostream& os, const growth::GrowthTrace& tr);
void export_spectra(std::ostream& os, const growth::GrowthTrace& tr,
                    const std::vector<double>& alphas);

}  // namespace dbm::io
