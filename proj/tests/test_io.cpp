#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "dbm/analysis.hpp"
#include "dbm/error.hpp"
#include "dbm/growth.hpp"
#include "dbm/potential.hpp"
#include "dbm/trace_io.hpp"

using namespace dbm;
using namespace dbm::growth;
using namespace dbm::io;

namespace {

bool same_double(double a, double b) {
  if (std::isnan(a) && std::isnan(b)) return true;
  return a == b;  // bit-level for anything the formats round-trip
}

GrowthTrace small_exact_trace() {
  GrowthConfig cfg;
  cfg.dimension = 2;
  cfg.eta = 1.0;
  cfg.n_particles = 40;
  cfg.measure_mode = MeasureMode::exact;
  cfg.capacity_checkpoint_every = 10;
  cfg.seed = 404;
  return grow(cfg);
}

void check_traces_equal(const GrowthTrace& a, const GrowthTrace& b) {
  CHECK(a.config.dimension == b.config.dimension);
  CHECK(a.config.eta == b.config.eta);
  CHECK(a.config.n_particles == b.config.n_particles);
  CHECK(a.config.measure_mode == b.config.measure_mode);
  CHECK(a.config.samples_per_step == b.config.samples_per_step);
  CHECK(a.config.capacity_checkpoint_every == b.config.capacity_checkpoint_every);
  CHECK(a.config.checkpoint_samples == b.config.checkpoint_samples);
  CHECK(a.config.strict_eden == b.config.strict_eden);
  CHECK(a.config.seed == b.config.seed);
  CHECK(a.config.walker.launch_factor == b.config.walker.launch_factor);
  CHECK(a.config.walker.kill_factor == b.config.walker.kill_factor);
  CHECK(a.config.walker.max_steps == b.config.walker.max_steps);
  CHECK(a.config.exact.tol == b.config.exact.tol);
  CHECK(a.config.exact.dense_cap == b.config.exact.dense_cap);
  CHECK(a.config.exact.site_cap == b.config.exact.site_cap);
  CHECK(a.config.exact.max_rho_factor == b.config.exact.max_rho_factor);
  REQUIRE(a.steps.size() == b.steps.size());
  for (size_t i = 0; i < a.steps.size(); ++i) {
    CHECK(a.steps[i].n == b.steps[i].n);
    CHECK(a.steps[i].attached == b.steps[i].attached);
    CHECK(same_double(a.steps[i].omega_hat, b.steps[i].omega_hat));
    CHECK(a.steps[i].radius == b.steps[i].radius);
    CHECK(a.steps[i].capacity.has_value() == b.steps[i].capacity.has_value());
    if (a.steps[i].capacity) CHECK(*a.steps[i].capacity == *b.steps[i].capacity);
  }
  CHECK(a.final_cluster.set_hash() == b.final_cluster.set_hash());
}

}  // namespace

TEST_CASE("config: minimal object takes defaults, full object round-trips") {
  const GrowthConfig minimal =
      config_from_json(R"({"dimension": 2, "eta": 1.0, "n_particles": 100, "seed": 7})");
  CHECK(minimal.dimension == 2);
  CHECK(minimal.eta == 1.0);
  CHECK(minimal.n_particles == 100);
  CHECK(minimal.seed == 7);
  CHECK(minimal.measure_mode == MeasureMode::dla_fast);
  CHECK(minimal.samples_per_step == 0);
  CHECK(minimal.capacity_checkpoint_every == 0);
  CHECK(minimal.checkpoint_samples == 10000);
  CHECK(minimal.strict_eden == false);
  CHECK(minimal.walker.launch_factor == 2.0);
  CHECK(minimal.exact.dense_cap == 4096);

  GrowthConfig full;
  full.dimension = 3;
  full.eta = 1.5;
  full.n_particles = 1234;
  full.measure_mode = MeasureMode::monte_carlo;
  full.samples_per_step = 5000;
  full.capacity_checkpoint_every = 100;
  full.checkpoint_samples = 777;
  full.strict_eden = false;
  full.seed = 0xdeadbeefcafe;
  full.walker.launch_factor = 2.5;
  full.walker.kill_factor = 11.0;
  full.walker.max_steps = 123456789;
  full.exact.tol = 1e-9;
  full.exact.dense_cap = 2048;
  full.exact.site_cap = 50000;
  full.exact.max_rho_factor = 256.0;
  const GrowthConfig back = config_from_json(config_to_json(full));
  CHECK(back.dimension == full.dimension);
  CHECK(back.eta == full.eta);
  CHECK(back.n_particles == full.n_particles);
  CHECK(back.measure_mode == full.measure_mode);
  CHECK(back.samples_per_step == full.samples_per_step);
  CHECK(back.capacity_checkpoint_every == full.capacity_checkpoint_every);
  CHECK(back.checkpoint_samples == full.checkpoint_samples);
  CHECK(back.seed == full.seed);
  CHECK(back.walker.launch_factor == full.walker.launch_factor);
  CHECK(back.walker.kill_factor == full.walker.kill_factor);
  CHECK(back.walker.max_steps == full.walker.max_steps);
  CHECK(back.exact.tol == full.exact.tol);
  CHECK(back.exact.dense_cap == full.exact.dense_cap);
  CHECK(back.exact.site_cap == full.exact.site_cap);
  CHECK(back.exact.max_rho_factor == full.exact.max_rho_factor);
}

TEST_CASE("config: unknown keys, wrong types, and bad values are rejected") {
  CHECK_THROWS_AS(config_from_json(R"({"dimension": 2, "etaa": 1.0})"), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"walker": {"rng_seed": 5}})"), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"exact": {"tolerance": 1e-8}})"), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"measure_mode": "walkers"})"), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"measure_mode": 3})"), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"seed": -4})"), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"eta": "one"})"), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"walker": 7})"), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"([1,2,3])"), ConfigError);
  CHECK_THROWS_AS(config_from_json("{"), ConfigError);
  // structurally fine, semantically invalid: validate() fires
  CHECK_THROWS_AS(config_from_json(R"({"dimension": 4, "eta": 1.0, "n_particles": 1})"),
                  ConfigError);
}

TEST_CASE("manifest: deterministic timestamp honours SOURCE_DATE_EPOCH") {
  unsetenv("SOURCE_DATE_EPOCH");
  GrowthConfig cfg;
  cfg.n_particles = 1;
  cfg.seed = 42;
  RunManifest m = make_manifest(cfg);
  CHECK(m.created_utc == "1970-01-01T00:00:00Z");
  CHECK(m.seed == 42);
  CHECK(m.schema_version == kSchemaVersion);
  CHECK(m.code_version == kCodeVersion);

  setenv("SOURCE_DATE_EPOCH", "1700000000", 1);
  m = make_manifest(cfg);
  CHECK(m.created_utc == "2023-11-14T22:13:20Z");
  unsetenv("SOURCE_DATE_EPOCH");
}

TEST_CASE("trace: write/read round-trips every record bit-for-bit (exact mode)") {
  const GrowthTrace tr = small_exact_trace();
  std::stringstream ss;
  write_trace(ss, tr);
  const LoadedTrace back = read_trace(ss);
  CHECK_FALSE(back.manifest.aborted);
  check_traces_equal(tr, back.trace);

  // serialization is idempotent: write(parse(write(tr))) is byte-identical
  std::stringstream ss2;
  write_trace(ss2, back.trace);
  std::stringstream ss3;
  write_trace(ss3, tr);
  CHECK(ss2.str() == ss3.str());
}

TEST_CASE("trace: dla_fast round-trip keeps missing omegas missing") {
  GrowthConfig cfg;
  cfg.dimension = 2;
  cfg.eta = 1.0;
  cfg.n_particles = 60;
  cfg.measure_mode = MeasureMode::dla_fast;
  cfg.capacity_checkpoint_every = 20;
  cfg.checkpoint_samples = 500;
  cfg.seed = 5;
  const GrowthTrace tr = grow(cfg);
  size_t missing = 0;
  for (const auto& s : tr.steps) missing += std::isnan(s.omega_hat);
  CHECK(missing == 57);  // all but the three checkpoints
  std::stringstream ss;
  write_trace(ss, tr);
  CHECK(ss.str().find("\"omega\":null") != std::string::npos);
  const LoadedTrace back = read_trace(ss);
  check_traces_equal(tr, back.trace);
}

TEST_CASE("trace: aborted dumps carry the flag and reason through") {
  GrowthConfig cfg;
  cfg.dimension = 2;
  cfg.eta = 600.0;  // omega^eta underflows: aborts on the first step
  cfg.n_particles = 5;
  cfg.measure_mode = MeasureMode::exact;
  cfg.seed = 1;
  GrowthTrace partial;
  try {
    grow(cfg);
    FAIL("expected GrowthAborted");
  } catch (const GrowthAborted& e) {
    partial = e.partial();
    std::stringstream ss;
    write_trace(ss, partial, true, e.what());
    const LoadedTrace back = read_trace(ss);
    CHECK(back.manifest.aborted);
    CHECK(back.manifest.abort_reason == e.what());
    CHECK(back.trace.steps.empty());
    CHECK(back.trace.final_cluster.size() == 1);
  }
}

TEST_CASE("trace: unsupported schema and malformed records are refused") {
  const GrowthTrace tr = small_exact_trace();
  std::stringstream ss;
  write_trace(ss, tr);
  const std::string good = ss.str();

  {
    std::string bad = good;
    const std::string tag = "\"schema_version\":1";
    bad.replace(bad.find(tag), tag.size(), "\"schema_version\":2");
    std::stringstream in(bad);
    CHECK_THROWS_AS(read_trace(in), ConfigError);
  }
  {
    std::string bad = good;
    const std::string tag = "\"n\":2,";
    bad.replace(bad.find(tag), tag.size(), "\"n\":3,");  // out of order
    std::stringstream in(bad);
    CHECK_THROWS_AS(read_trace(in), ConfigError);
  }
  {
    std::string bad = good;
    const std::string tag = "\"r\":";
    bad.replace(bad.find(tag), tag.size(), "\"radius\":");  // unknown step key
    std::stringstream in(bad);
    CHECK_THROWS_AS(read_trace(in), ConfigError);
  }
  {
    // a site nowhere near the cluster: replay proves it non-attachable
    std::string bad = good;
    const size_t pos = bad.find("\"site\":[", bad.find('\n'));
    const size_t end = bad.find(']', pos);
    bad.replace(pos, end + 1 - pos, "\"site\":[55,55]");
    std::stringstream in(bad);
    CHECK_THROWS_AS(read_trace(in), ContractViolation);
  }
  {
    std::stringstream in("");
    CHECK_THROWS_AS(read_trace(in), ConfigError);
  }
  CHECK_THROWS_AS(load_trace("/nonexistent/path/t.jsonl"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/path/c.json"), ConfigError);
}

TEST_CASE("checkpoint_profile rebuilds exactly what the run recorded") {
  // exact mode: deterministic solve, must reproduce omega_hat and capacity
  const GrowthTrace tr = small_exact_trace();
  const std::vector<uint64_t> cps = checkpoint_steps(tr);
  REQUIRE(cps.size() == 4);
  for (const uint64_t n : cps) {
    const potential::HarmonicProfile p = checkpoint_profile(tr, n);
    const StepRecord& rec = tr.steps[n - 1];
    CHECK(p.value_at(rec.attached) == rec.omega_hat);
    const Cluster A = analysis::replay_prefix(tr, n - 1);
    CHECK(potential::capacity_from_profile(p, A.origin()) == *rec.capacity);
  }

  // dla_fast mode: the checkpoint stream must land on the same counters
  GrowthConfig cfg;
  cfg.dimension = 2;
  cfg.eta = 1.0;
  cfg.n_particles = 50;
  cfg.measure_mode = MeasureMode::dla_fast;
  cfg.capacity_checkpoint_every = 25;
  cfg.checkpoint_samples = 400;
  cfg.seed = 99;
  const GrowthTrace fast = grow(cfg);
  for (const uint64_t n : checkpoint_steps(fast)) {
    const potential::HarmonicProfile p = checkpoint_profile(fast, n);
    const StepRecord& rec = fast.steps[n - 1];
    CHECK(p.value_at(rec.attached) == rec.omega_hat);
    const Cluster A = analysis::replay_prefix(fast, n - 1);
    CHECK(potential::capacity_from_profile(p, A.origin()) == *rec.capacity);
  }

  CHECK_THROWS_AS(checkpoint_profile(tr, 0), ContractViolation);
  CHECK_THROWS_AS(checkpoint_profile(tr, tr.steps.size() + 1), ContractViolation);
}

TEST_CASE("csv: radius series schema") {
  const GrowthTrace tr = small_exact_trace();
  std::stringstream ss;
  export_radius_series(ss, tr);
  std::string line;
  std::getline(ss, line);
  CHECK(line == "n,radius\r");
  uint64_t expect = 1;
  uint64_t rows = 0;
  while (std::getline(ss, line)) {
    REQUIRE(!line.empty());
    CHECK(line.back() == '\r');
    const uint64_t n = std::stoull(line.substr(0, line.find(',')));
    CHECK(n == expect);
    ++expect;
    ++rows;
  }
  CHECK(rows == tr.steps.size());
}

TEST_CASE("csv: increments leave unmeasured cells empty") {
  const GrowthTrace tr = small_exact_trace();  // checkpoints at 10,20,30,40
  std::stringstream ss;
  export_increments(ss, tr);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(ss, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  REQUIRE(lines.size() == 41);
  CHECK(lines[0] == "n,omega_hat,delta_cap");
  // exact mode records omega everywhere; first checkpoint has no delta yet
  CHECK(lines[10].substr(lines[10].size() - 1) == ",");
  // second checkpoint: delta equals the recorded capacity difference
  const double d20 = std::stod(lines[20].substr(lines[20].rfind(',') + 1));
  CHECK(d20 == *tr.steps[19].capacity - *tr.steps[9].capacity);
  // off-checkpoint rows end with an empty delta field
  CHECK(lines[15].back() == ',');
}

TEST_CASE("csv: spectra rows cover every checkpoint and alpha") {
  const GrowthTrace tr = small_exact_trace();
  std::stringstream ss;
  const std::vector<double> alphas{0.5, 1.0, 2.0};
  export_spectra(ss, tr, alphas);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(ss, line)) lines.push_back(line);
  REQUIRE(lines.size() == 1 + 4 * alphas.size());
  CHECK(lines[0] == "checkpoint_n,R,alpha,sum,tau_hat\r");
  // alpha = 1 row: the sum is the profile total, 1 up to rounding
  const std::string& row = lines[2];
  std::vector<std::string> cells;
  size_t start = 0;
  while (true) {
    const size_t comma = row.find(',', start);
    if (comma == std::string::npos) {
      cells.push_back(row.substr(start));
      break;
    }
    cells.push_back(row.substr(start, comma - start));
    start = comma + 1;
  }
  REQUIRE(cells.size() == 5);
  CHECK(cells[0] == "10");
  CHECK(std::stod(cells[2]) == 1.0);
  CHECK(std::stod(cells[3]) == doctest::Approx(1.0).epsilon(1e-9));

  CHECK_THROWS_AS(export_spectra(ss, tr, {}), ContractViolation);
}

TEST_CASE("trace: files round-trip through the filesystem") {
  const GrowthTrace tr = small_exact_trace();
  const std::string path = "io_roundtrip_tmp.jsonl";
  save_trace(path, tr);
  const LoadedTrace back = load_trace(path);
  check_traces_equal(tr, back.trace);
  std::remove(path.c_str());
}
