#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>

#include "dbm/cluster.hpp"
#include "dbm/error.hpp"
#include "dbm/growth.hpp"
#include "dbm/oracle.hpp"
#include "dbm/potential.hpp"
#include "doctest.h"

using namespace dbm;
using namespace dbm::oracle;

constexpr double kPi = std::numbers::pi;

TEST_CASE("enumerate_shapes reproduces the fixed shape counts") {
  const size_t counts2[] = {1, 2, 6, 19, 63, 216};
  for (int n = 1; n <= 6; ++n)
    CHECK(enumerate_shapes(2, n).size() == counts2[n - 1]);
  const size_t counts3[] = {1, 3, 15, 86, 534};
  for (int n = 1; n <= 5; ++n)
    CHECK(enumerate_shapes(3, n).size() == counts3[n - 1]);
}

TEST_CASE("enumerate_shapes: canonical, connected, deduplicated") {
  const auto shapes = enumerate_shapes(2, 5);
  std::set<std::vector<uint64_t>> seen;
  for (const auto& cells : shapes) {
    REQUIRE(cells.size() == 5);
    int32_t mx = cells[0].x, my = cells[0].y;
    for (const Site& c : cells) {
      mx = std::min(mx, c.x);
      my = std::min(my, c.y);
      CHECK(c.x >= 0);
      CHECK(c.y >= 0);
      CHECK(c.z == 0);
    }
    CHECK(mx == 0);
    CHECK(my == 0);
    // edge-connected: breadth-first reach covers all cells
    std::vector<uint64_t> keys;
    for (const Site& c : cells) keys.push_back(pack_site(c, 2));
    std::sort(keys.begin(), keys.end());
    CHECK(seen.insert(keys).second);  // no duplicates
    std::set<uint64_t> todo(keys.begin() + 1, keys.end());
    std::vector<Site> stack{cells[0]};
    while (!stack.empty()) {
      const Site c = stack.back();
      stack.pop_back();
      for (int j = 0; j < 4; ++j) {
        const Site nb = neighbors(c, 2)[size_t(j)];
        const auto it = todo.find(pack_site(nb, 2));
        if (it != todo.end()) {
          todo.erase(it);
          stack.push_back(nb);
        }
      }
    }
    CHECK(todo.empty());
  }
}

TEST_CASE("potential_kernel_oracle: closed-form anchors and symmetry") {
  CHECK(potential_kernel_oracle(0, 0) == 0.0);
  CHECK(potential_kernel_oracle(1, 0) == 1.0);
  CHECK(potential_kernel_oracle(0, 1) == 1.0);
  CHECK(potential_kernel_oracle(-1, 0) == 1.0);
  CHECK(potential_kernel_oracle(1, 1) == doctest::Approx(4.0 / kPi).epsilon(1e-15));
  CHECK(potential_kernel_oracle(2, 0) == doctest::Approx(4.0 - 8.0 / kPi).epsilon(1e-14));
  CHECK(potential_kernel_oracle(2, 1) == doctest::Approx(8.0 / kPi - 1.0).epsilon(1e-14));
  CHECK(potential_kernel_oracle(2, 2) ==
        doctest::Approx((4.0 / kPi) * (1.0 + 1.0 / 3.0)).epsilon(1e-14));
  for (int i = 0; i <= 10; ++i)
    for (int j = 0; j <= i; ++j) {
      CHECK(potential_kernel_oracle(i, j) == potential_kernel_oracle(j, i));
      CHECK(potential_kernel_oracle(i, j) == potential_kernel_oracle(-i, j));
    }
  CHECK_THROWS_AS(potential_kernel_oracle(15, 0), ContractViolation);
}

TEST_CASE("potential_kernel_oracle agrees with the production kernel") {
  double worst = 0.0;
  for (int i = 0; i <= 10; ++i)
    for (int j = 0; j <= i; ++j) {
      const double ref = potential_kernel_oracle(i, j);
      const double got = potential::potential_kernel({i, j, 0});
      worst = std::max(worst, std::abs(ref - got));
    }
  CHECK(worst < 1e-6);
  printf("[oracle] potential kernel worst |diff| over |x|inf<=10: %.3g\n", worst);
}

TEST_CASE("enumerate_dbm: depth-1 symmetry in both dimensions") {
  for (const double eta : {0.0, 1.0, 2.0}) {
    const ShapeDistribution d2 = enumerate_dbm(2, eta, 1);
    REQUIRE(d2.entries.size() == 4);
    CHECK(d2.n_classes == 1);
    for (const auto& e : d2.entries) CHECK(e.p == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(d2.total() == doctest::Approx(1.0).epsilon(1e-12));
  }
  const ShapeDistribution d3 = enumerate_dbm(3, 1.0, 1);
  REQUIRE(d3.entries.size() == 6);
  CHECK(d3.n_classes == 1);
  for (const auto& e : d3.entries)
    CHECK(e.p == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("enumerate_dbm: eta=0 depth-2 sequence counting") {
  const ShapeDistribution d = enumerate_dbm(2, 0.0, 2);
  // 4 first moves x 6 uniform second moves = 24 sequences
  CHECK(d.total() == doctest::Approx(1.0).epsilon(1e-12));
  const auto key_of = [](std::vector<Site> sites) {
    std::sort(sites.begin(), sites.end(),
              [](const Site& l, const Site& r) { return pack_site(l, 2) < pack_site(r, 2); });
    return sites;
  };
  // straight line reachable one way, the L both ways
  for (const auto& e : d.entries) {
    if (e.sites == key_of({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}}))
      CHECK(e.p == doctest::Approx(1.0 / 24.0).epsilon(1e-12));
    if (e.sites == key_of({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}))
      CHECK(e.p == doctest::Approx(1.0 / 12.0).epsilon(1e-12));
  }
  REQUIRE(d.entries.size() == 18);  // 6 boundary choices per first move, merged
}

TEST_CASE("enumerate_dbm: normalization and class equality across eta and depth") {
  for (const double eta : {0.0, 1.0, 1.5, 2.0}) {
    const ShapeDistribution d = enumerate_dbm(2, eta, 3);
    CHECK(std::abs(d.total() - 1.0) < 1e-10);
    std::map<size_t, std::pair<double, double>> cls;  // class -> (min, max)
    for (const auto& e : d.entries) {
      auto it = cls.emplace(e.sym_class, std::make_pair(e.p, e.p)).first;
      it->second.first = std::min(it->second.first, e.p);
      it->second.second = std::max(it->second.second, e.p);
    }
    CHECK(cls.size() == d.n_classes);
    for (const auto& [c, mm] : cls) CHECK(mm.second - mm.first < 1e-12);
  }
  const ShapeDistribution d3 = enumerate_dbm(3, 1.0, 2);
  CHECK(std::abs(d3.total() - 1.0) < 1e-10);

  CHECK_THROWS_AS(enumerate_dbm(2, 1.0, 6), ConfigError);
  CHECK_THROWS_AS(enumerate_dbm(3, 1.0, 5), ConfigError);
  CHECK_THROWS_AS(enumerate_dbm(2, -1.0, 2), ContractViolation);
}

TEST_CASE("enumerate_dbm: probabilities match an independent two-step computation") {
  // depth 2, eta = 1: P(shape) = sum over orders of (1/4) * omega(second site)
  Cluster domino(2);
  domino.attach({1, 0, 0});
  const auto p = potential::harmonic_measure_exact(domino);
  const ShapeDistribution d = enumerate_dbm(2, 1.0, 2);
  const Cluster line = [] {
    Cluster c(2);
    c.attach({1, 0, 0});
    c.attach({2, 0, 0});
    return c;
  }();
  const auto* e = d.find_hash(line.set_hash());
  REQUIRE(e != nullptr);
  CHECK(e->p == doctest::Approx(0.25 * p.value_at({2, 0, 0})).epsilon(1e-10));

  const Cluster ell = [] {
    Cluster c(2);
    c.attach({1, 0, 0});
    c.attach({1, 1, 0});
    return c;
  }();
  const auto* e2 = d.find_hash(ell.set_hash());
  REQUIRE(e2 != nullptr);
  CHECK(e2->p == doctest::Approx(0.25 * p.value_at({1, 1, 0})).epsilon(1e-10));
}

TEST_CASE("growth engine tracks the oracle at depth 3") {
  const ShapeDistribution d = enumerate_dbm(2, 1.0, 3);
  std::map<uint64_t, size_t> freq;
  const int runs = 20000;
  for (int r = 0; r < runs; ++r) {
    growth::GrowthConfig cfg;
    cfg.eta = 1.0;
    cfg.measure_mode = growth::MeasureMode::exact;
    cfg.n_particles = 3;
    cfg.seed = 777000 + uint64_t(r);
    ++freq[growth::grow(cfg).final_cluster.set_hash()];
  }
  double tv = 0.0;
  std::set<uint64_t> seen;
  for (const auto& [h, c] : freq) {
    const auto* e = d.find_hash(h);
    REQUIRE(e != nullptr);  // the engine can never produce an off-tree shape
    tv += std::abs(double(c) / runs - e->p);
    seen.insert(h);
  }
  for (const auto& e : d.entries)
    if (!seen.count(e.hash)) tv += e.p;
  tv *= 0.5;
  printf("[oracle] engine-vs-oracle depth-3 tv=%.4f over %zu shapes\n", tv, d.entries.size());
  CHECK(tv < 0.05);
}

TEST_CASE("lemma_sweep: positive bounded ratio intervals, bit-stable") {
  const LemmaSweep s2 = lemma_sweep(2, 4);
  CHECK(s2.shapes == 1 + 2 + 6 + 19);
  CHECK(s2.pairs > 0);
  CHECK(s2.zero_sites == 0);  // traps need at least 7 cells
  CHECK(s2.ratio_min > 0.0);
  CHECK(std::isfinite(s2.ratio_max));
  CHECK(s2.ratio_min <= s2.by_size[0].first);
  printf("[oracle] 2D sweep <=4: ratio in [%.6f, %.6f] over %zu pairs\n", s2.ratio_min,
         s2.ratio_max, s2.pairs);

  const LemmaSweep s3 = lemma_sweep(3, 3);
  CHECK(s3.ratio_min > 0.0);
  CHECK(std::isfinite(s3.ratio_max));
  printf("[oracle] 3D sweep <=3: ratio in [%.6f, %.6f] over %zu pairs\n", s3.ratio_min,
         s3.ratio_max, s3.pairs);

  // bit-stability: identical numbers on a second run
  const LemmaSweep r2 = lemma_sweep(2, 4);
  CHECK(r2.ratio_min == s2.ratio_min);
  CHECK(r2.ratio_max == s2.ratio_max);
  CHECK(r2.pairs == s2.pairs);

  CHECK_THROWS_AS(lemma_sweep(2, 9), ConfigError);
}

TEST_CASE("lemma_sweep: the singleton ratios are exactly the theory") {
  // A = {0}: every boundary site has omega = 1/4 (2D) resp. 1/6 (3D), and the
  // increments are equal by symmetry, so min == max at size 1
  const LemmaSweep s2 = lemma_sweep(2, 1);
  CHECK(s2.pairs == 4);
  CHECK(s2.by_size[0].first == doctest::Approx(s2.by_size[0].second).epsilon(1e-12));
  const LemmaSweep s3 = lemma_sweep(3, 1);
  CHECK(s3.pairs == 6);
  CHECK(s3.by_size[0].first == doctest::Approx(s3.by_size[0].second).epsilon(1e-12));
}

TEST_CASE("sealed fjord: zero measure comes with zero increment") {
  // 7-cell hook around a trapped site: the smallest holed shape
  const std::vector<Site> hook = {{0, 0, 0}, {0, 1, 0}, {0, 2, 0}, {1, 0, 0},
                                  {1, 2, 0}, {2, 0, 0}, {2, 1, 0}};
  const Cluster a = Cluster::from_sites(2, hook, {0, 0, 0});
  const Site hole{1, 1, 0};
  REQUIRE(a.in_boundary(hole));

  const auto acc = potential::boundary_accessible(a);
  const auto bd = a.boundary_sorted();
  bool hole_acc = true;
  for (size_t i = 0; i < bd.size(); ++i)
    if (bd[i] == hole) hole_acc = acc[i];
  CHECK(!hole_acc);

  // the exact profile pins the trapped site to zero
  const auto p = potential::harmonic_measure_exact(a);
  CHECK(p.value_at(hole) == 0.0);

  // attaching it leaves the closure site-set unchanged: increment exactly 0
  const auto eqA = potential::equilibrium_measure(2, a.closure_sorted());
  Cluster b = a;
  b.attach(hole);
  const auto eqB = potential::equilibrium_measure(2, b.closure_sorted());
  CHECK(eqA.gamma == eqB.gamma);

  // a sweep over 7-cell shapes sees such sites and skips them
  const LemmaSweep s = lemma_sweep(2, 7);
  CHECK(s.zero_sites > 0);
  printf("[oracle] 2D sweep <=7: %zu trapped boundary sites skipped\n", s.zero_sites);
}
