#include "dbm/trace_io.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <initializer_list>
#include <ostream>
#include <sstream>
#include <string>

#include "dbm/analysis.hpp"
#include "dbm/error.hpp"

namespace dbm::io {

using growth::GrowthConfig;
using growth::GrowthTrace;
using growth::MeasureMode;
using growth::StepRecord;
using json = nlohmann::ordered_json;

namespace {

std::string iso_utc(std::time_t t) {
  std::tm g{};
  gmtime_r(&t, &g);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &g);
  return buf;
}

const char* mode_name(MeasureMode m) {
  switch (m) {
    case MeasureMode::exact: return "exact";
    case MeasureMode::monte_carlo: return "monte_carlo";
    case MeasureMode::dla_fast: return "dla_fast";
  }
  throw ContractViolation("unknown measure mode");
}

MeasureMode mode_from(const std::string& s, const std::string& ctx) {
  if (s == "exact") return MeasureMode::exact;
  if (s == "monte_carlo") return MeasureMode::monte_carlo;
  if (s == "dla_fast") return MeasureMode::dla_fast;
  throw ConfigError(ctx + ": unknown measure_mode \"" + s +
                    "\" (expected exact | monte_carlo | dla_fast)");
}

// Typo protection: every key present must be one we know about.
void reject_unknown_keys(const json& j, std::initializer_list<const char*> known,
                         const std::string& ctx) {
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : known)
      if (item.key() == k) { ok = true; break; }
    if (!ok) throw ConfigError(ctx + ": unknown key \"" + item.key() + "\"");
  }
}

void require_object(const json& j, const std::string& ctx) {
  if (!j.is_object()) throw ConfigError(ctx + ": expected a JSON object");
}

uint64_t get_u64(const json& j, const char* key, uint64_t dflt, const std::string& ctx) {
  if (!j.contains(key)) return dflt;
  const json& v = j.at(key);
  if (!v.is_number_unsigned())
    throw ConfigError(ctx + "." + key + ": expected a non-negative integer");
  return v.get<uint64_t>();
}

int get_int(const json& j, const char* key, int dflt, const std::string& ctx) {
  if (!j.contains(key)) return dflt;
  const json& v = j.at(key);
  if (!v.is_number_integer() && !v.is_number_unsigned())
    throw ConfigError(ctx + "." + key + ": expected an integer");
  return v.get<int>();
}

double get_double(const json& j, const char* key, double dflt, const std::string& ctx) {
  if (!j.contains(key)) return dflt;
  const json& v = j.at(key);
  if (!v.is_number()) throw ConfigError(ctx + "." + key + ": expected a number");
  return v.get<double>();
}

bool get_bool(const json& j, const char* key, bool dflt, const std::string& ctx) {
  if (!j.contains(key)) return dflt;
  const json& v = j.at(key);
  if (!v.is_boolean()) throw ConfigError(ctx + "." + key + ": expected true or false");
  return v.get<bool>();
}

std::string get_string(const json& j, const char* key, const std::string& dflt,
                       const std::string& ctx) {
  if (!j.contains(key)) return dflt;
  const json& v = j.at(key);
  if (!v.is_string()) throw ConfigError(ctx + "." + key + ": expected a string");
  return v.get<std::string>();
}

json config_json(const GrowthConfig& cfg) {
  json w;
  w["launch_factor"] = cfg.walker.launch_factor;
  w["kill_factor"] = cfg.walker.kill_factor;
  w["max_steps"] = cfg.walker.max_steps;
  json x;
  x["tol"] = cfg.exact.tol;
  x["dense_cap"] = cfg.exact.dense_cap;
  x["site_cap"] = cfg.exact.site_cap;
  x["max_rho_factor"] = cfg.exact.max_rho_factor;
  json j;
  j["dimension"] = cfg.dimension;
  j["eta"] = cfg.eta;
  j["n_particles"] = cfg.n_particles;
  j["measure_mode"] = mode_name(cfg.measure_mode);
  j["samples_per_step"] = cfg.samples_per_step;
  j["capacity_checkpoint_every"] = cfg.capacity_checkpoint_every;
  j["checkpoint_samples"] = cfg.checkpoint_samples;
  j["strict_eden"] = cfg.strict_eden;
  j["seed"] = cfg.seed;
  j["walker"] = std::move(w);
  j["exact"] = std::move(x);
  return j;
}

GrowthConfig config_from(const json& j, const std::string& ctx) {
  require_object(j, ctx);
  reject_unknown_keys(j,
                      {"dimension", "eta", "n_particles", "measure_mode", "samples_per_step",
                       "capacity_checkpoint_every", "checkpoint_samples", "strict_eden", "seed",
                       "walker", "exact"},
                      ctx);
  GrowthConfig cfg;
  cfg.dimension = get_int(j, "dimension", cfg.dimension, ctx);
  cfg.eta = get_double(j, "eta", cfg.eta, ctx);
  cfg.n_particles = get_u64(j, "n_particles", cfg.n_particles, ctx);
  if (j.contains("measure_mode")) {
    if (!j.at("measure_mode").is_string())
      throw ConfigError(ctx + ".measure_mode: expected a string");
    cfg.measure_mode = mode_from(j.at("measure_mode").get<std::string>(), ctx);
  }
  cfg.samples_per_step = get_u64(j, "samples_per_step", cfg.samples_per_step, ctx);
  cfg.capacity_checkpoint_every =
      get_u64(j, "capacity_checkpoint_every", cfg.capacity_checkpoint_every, ctx);
  cfg.checkpoint_samples = get_u64(j, "checkpoint_samples", cfg.checkpoint_samples, ctx);
  cfg.strict_eden = get_bool(j, "strict_eden", cfg.strict_eden, ctx);
  cfg.seed = get_u64(j, "seed", cfg.seed, ctx);
  if (j.contains("walker")) {
    const json& w = j.at("walker");
    const std::string wctx = ctx + ".walker";
    require_object(w, wctx);
    // rng_seed is deliberately not a key: the top-level seed drives it
    reject_unknown_keys(w, {"launch_factor", "kill_factor", "max_steps"}, wctx);
    cfg.walker.launch_factor = get_double(w, "launch_factor", cfg.walker.launch_factor, wctx);
    cfg.walker.kill_factor = get_double(w, "kill_factor", cfg.walker.kill_factor, wctx);
    cfg.walker.max_steps = get_u64(w, "max_steps", cfg.walker.max_steps, wctx);
  }
  if (j.contains("exact")) {
    const json& x = j.at("exact");
    const std::string xctx = ctx + ".exact";
    require_object(x, xctx);
    reject_unknown_keys(x, {"tol", "dense_cap", "site_cap", "max_rho_factor"}, xctx);
    cfg.exact.tol = get_double(x, "tol", cfg.exact.tol, xctx);
    cfg.exact.dense_cap = get_u64(x, "dense_cap", cfg.exact.dense_cap, xctx);
    cfg.exact.site_cap = get_u64(x, "site_cap", cfg.exact.site_cap, xctx);
    cfg.exact.max_rho_factor = get_double(x, "max_rho_factor", cfg.exact.max_rho_factor, xctx);
  }
  return cfg;
}

json manifest_json(const RunManifest& m) {
  json j;
  j["schema_version"] = m.schema_version;
  j["code_version"] = m.code_version;
  j["created_utc"] = m.created_utc;
  j["seed"] = m.seed;
  j["aborted"] = m.aborted;
  j["abort_reason"] = m.abort_reason;
  j["config"] = config_json(m.config);
  return j;
}

RunManifest manifest_from(const json& j) {
  const std::string ctx = "manifest";
  require_object(j, ctx);
  reject_unknown_keys(j,
                      {"schema_version", "code_version", "created_utc", "seed", "aborted",
                       "abort_reason", "config"},
                      ctx);
  if (!j.contains("schema_version"))
    throw ConfigError("manifest: missing schema_version");
  RunManifest m;
  m.schema_version = get_int(j, "schema_version", 0, ctx);
  if (m.schema_version != kSchemaVersion)
    throw ConfigError("manifest: unsupported schema_version " +
                      std::to_string(m.schema_version) + " (supported: " +
                      std::to_string(kSchemaVersion) + ")");
  m.code_version = get_string(j, "code_version", "", ctx);
  m.created_utc = get_string(j, "created_utc", "", ctx);
  m.seed = get_u64(j, "seed", 0, ctx);
  m.aborted = get_bool(j, "aborted", false, ctx);
  m.abort_reason = get_string(j, "abort_reason", "", ctx);
  if (!j.contains("config")) throw ConfigError("manifest: missing config");
  m.config = config_from(j.at("config"), "config");
  return m;
}

json step_json(const StepRecord& rec, int dim) {
  json j;
  j["n"] = rec.n;
  json site = json::array();
  site.push_back(rec.attached.x);
  site.push_back(rec.attached.y);
  if (dim == 3) site.push_back(rec.attached.z);
  j["site"] = std::move(site);
  if (std::isnan(rec.omega_hat))
    j["omega"] = nullptr;
  else
    j["omega"] = rec.omega_hat;
  j["r"] = rec.radius;
  if (rec.capacity)
    j["cap"] = *rec.capacity;
  else
    j["cap"] = nullptr;
  return j;
}

StepRecord step_from(const json& j, int dim, size_t lineno) {
  const std::string ctx = "trace line " + std::to_string(lineno);
  require_object(j, ctx);
  reject_unknown_keys(j, {"n", "site", "omega", "r", "cap"}, ctx);
  for (const char* k : {"n", "site", "omega", "r", "cap"})
    if (!j.contains(k)) throw ConfigError(ctx + ": missing key \"" + k + "\"");
  StepRecord rec;
  rec.n = get_u64(j, "n", 0, ctx);
  const json& site = j.at("site");
  if (!site.is_array() || site.size() != size_t(dim))
    throw ConfigError(ctx + ": site must be an array of " + std::to_string(dim) +
                      " coordinates");
  for (const json& c : site)
    if (!c.is_number_integer() && !c.is_number_unsigned())
      throw ConfigError(ctx + ": site coordinates must be integers");
  rec.attached.x = site.at(0).get<int32_t>();
  rec.attached.y = site.at(1).get<int32_t>();
  if (dim == 3) rec.attached.z = site.at(2).get<int32_t>();
  const json& om = j.at("omega");
  if (om.is_null())
    rec.omega_hat = std::numeric_limits<double>::quiet_NaN();
  else if (om.is_number())
    rec.omega_hat = om.get<double>();
  else
    throw ConfigError(ctx + ": omega must be a number or null");
  const json& r = j.at("r");
  if (!r.is_number()) throw ConfigError(ctx + ": r must be a number");
  rec.radius = r.get<double>();
  const json& cap = j.at("cap");
  if (cap.is_null())
    rec.capacity.reset();
  else if (cap.is_number())
    rec.capacity = cap.get<double>();
  else
    throw ConfigError(ctx + ": cap must be a number or null");
  return rec;
}

json parse_line(const std::string& line, size_t lineno) {
  try {
    return json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("trace line " + std::to_string(lineno) + ": " + e.what());
  }
}

// Number formatting for CSV: shortest form that parses back to the same
// double, "." decimal by construction.
std::string fmt(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

constexpr const char* kCrlf = "\r\n";

}  // namespace

RunManifest make_manifest(const GrowthConfig& cfg) {
  RunManifest m;
  m.config = cfg;
  m.seed = cfg.seed;
  std::time_t t = 0;
  if (const char* e = std::getenv("SOURCE_DATE_EPOCH")) t = std::time_t(std::atoll(e));
  m.created_utc = iso_utc(t);
  return m;
}

GrowthConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  GrowthConfig cfg = config_from(j, "config");
  try {
    cfg.validate();
  } catch (const ContractViolation& e) {
    // a config file that fails validation is a config error, whichever
    // layer's precondition tripped
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

GrowthConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

std::string config_to_json(const GrowthConfig& cfg) {
  return config_json(cfg).dump(2) + "\n";
}

void write_trace(std::ostream& os, const GrowthTrace& tr, bool aborted,
                 const std::string& abort_reason) {
  RunManifest m = make_manifest(tr.config);
  m.aborted = aborted;
  m.abort_reason = abort_reason;
  os << manifest_json(m).dump() << '\n';
  for (const StepRecord& rec : tr.steps)
    os << step_json(rec, tr.config.dimension).dump() << '\n';
}

void save_trace(const std::string& path, const GrowthTrace& tr, bool aborted,
                const std::string& abort_reason) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open output file: " + path);
  write_trace(out, tr, aborted, abort_reason);
  out.flush();
  if (!out) throw SolverError("short write on trace file: " + path);
}

LoadedTrace read_trace(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("trace: empty input");
  LoadedTrace lt;
  lt.manifest = manifest_from(parse_line(line, 1));
  lt.trace.config = lt.manifest.config;
  size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;  // tolerate a trailing newline, nothing else
    StepRecord rec = step_from(parse_line(line, lineno), lt.trace.config.dimension, lineno);
    if (rec.n != lt.trace.steps.size() + 1)
      throw ConfigError("trace line " + std::to_string(lineno) +
                        ": step numbers must run 1,2,... (got " + std::to_string(rec.n) + ")");
    lt.trace.steps.push_back(rec);
  }
  // replaying the attachments rebuilds the cluster and proves the trace is
  // geometrically consistent (every site attached on the then-boundary)
  lt.trace.final_cluster = analysis::replay_prefix(lt.trace, lt.trace.steps.size());
  return lt;
}

LoadedTrace load_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open trace file: " + path);
  return read_trace(in);
}

potential::HarmonicProfile checkpoint_profile(const GrowthTrace& tr, uint64_t n,
                                              walkers::WalkerStats* stats) {
  if (n < 1 || n > tr.steps.size())
    throw ContractViolation("checkpoint_profile: step outside the trace");
  const GrowthConfig& cfg = tr.config;
  const Cluster A = analysis::replay_prefix(tr, n - 1);
  walkers::WalkerConfig wcfg = cfg.walker;
  wcfg.rng_seed = cfg.seed;
  const uint64_t block = n << 32;
  constexpr uint64_t kCheckpointBase = uint64_t(1) << 31;
  switch (cfg.measure_mode) {
    case MeasureMode::exact:
      return potential::harmonic_measure_exact(A, cfg.exact);
    case MeasureMode::monte_carlo:
      if (cfg.eta != 0.0) {
        const uint64_t ns = cfg.samples_per_step
                                ? cfg.samples_per_step
                                : std::max<uint64_t>(10000, 20 * A.boundary_size());
        return walkers::estimate_profile(A, ns, wcfg, stats, block);
      }
      return walkers::estimate_profile(A, cfg.checkpoint_samples, wcfg, stats,
                                       block + kCheckpointBase);
    case MeasureMode::dla_fast:
      return walkers::estimate_profile(A, cfg.checkpoint_samples, wcfg, stats,
                                       block + kCheckpointBase);
  }
  throw ContractViolation("checkpoint_profile: unknown measure mode");
}

std::vector<uint64_t> checkpoint_steps(const GrowthTrace& tr) {
  std::vector<uint64_t> out;
  for (const StepRecord& rec : tr.steps)
    if (rec.capacity) out.push_back(rec.n);
  return out;
}

void export_radius_series(std::ostream& os, const GrowthTrace& tr) {
  os << "n,radius" << kCrlf;
  for (const StepRecord& rec : tr.steps)
    os << rec.n << ',' << fmt(rec.radius) << kCrlf;
}

void export_increments(std::ostream& os, const GrowthTrace& tr) {
  os << "n,omega_hat,delta_cap" << kCrlf;
  std::optional<double> prev_cap;
  for (const StepRecord& rec : tr.steps) {
    os << rec.n << ',';
    if (!std::isnan(rec.omega_hat)) os << fmt(rec.omega_hat);
    os << ',';
    if (rec.capacity && prev_cap) os << fmt(*rec.capacity - *prev_cap);
    if (rec.capacity) prev_cap = rec.capacity;
    os << kCrlf;
  }
}

void export_spectra(std::ostream& os, const GrowthTrace& tr,
                    const std::vector<double>& alphas) {
  if (alphas.empty()) throw ContractViolation("export spectra: empty alpha list");
  os << "checkpoint_n,R,alpha,sum,tau_hat" << kCrlf;
  for (const uint64_t n : checkpoint_steps(tr)) {
    const Cluster A = analysis::replay_prefix(tr, n - 1);
    const double R = A.radius();
    const potential::HarmonicProfile p = checkpoint_profile(tr, n);
    const analysis::SpectrumReport rep = analysis::spectrum(p, alphas, R, n);
    for (size_t i = 0; i < rep.alphas.size(); ++i) {
      os << n << ',' << fmt(R) << ',' << fmt(rep.alphas[i]) << ',' << fmt(rep.sums[i]) << ',';
      if (!std::isnan(rep.tau_hat[i])) os << fmt(rep.tau_hat[i]);
      os << kCrlf;
    }
  }
}

}  // namespace dbm::io
