#include <algorithm>
#include <vector>

#include "dbm/cluster.hpp"
#include "dbm/error.hpp"
#include "dbm/philox.hpp"
#include "doctest.h"

using namespace dbm;

TEST_CASE("single-site cluster has the axis neighbours as boundary") {
  Cluster a(2);
  CHECK(a.size() == 1);
  CHECK(a.boundary_size() == 4);
  CHECK(a.contains({0, 0, 0}));
  CHECK(a.in_boundary({1, 0, 0}));
  CHECK(a.in_boundary({0, -1, 0}));
  CHECK(!a.in_boundary({1, 1, 0}));
  CHECK(a.radius() == 0.0);

  Cluster b(3);
  CHECK(b.boundary_size() == 6);
  CHECK(b.in_boundary({0, 0, 1}));
}

TEST_CASE("attach maintains sets, radius and order") {
  Cluster a(2);
  a.attach({1, 0, 0});
  CHECK(a.size() == 2);
  CHECK(a.contains({1, 0, 0}));
  CHECK(!a.in_boundary({1, 0, 0}));
  CHECK(a.in_boundary({2, 0, 0}));
  CHECK(a.in_boundary({1, 1, 0}));
  CHECK(a.boundary_size() == 6);
  CHECK(a.radius_sq() == 1);
  CHECK(a.attach_order().size() == 1);
  CHECK(a.attach_order()[0] == Site{1, 0, 0});

  CHECK_THROWS_AS(a.attach({5, 5, 0}), ContractViolation);  // not boundary
  CHECK_THROWS_AS(a.attach({0, 0, 0}), ContractViolation);  // already in A
}

TEST_CASE("closure bookkeeping matches brute force on a random growth") {
  for (int dim : {2, 3}) {
    Cluster a(dim);
    CounterStream rng(2024, uint64_t(dim));
    for (int step = 0; step < 200; ++step) {
      auto bd = a.boundary_sorted();
      a.attach(bd[rng.next_below(uint32_t(bd.size()))]);
    }
    // recompute boundary from scratch
    auto sites = a.sites_sorted();
    std::vector<Site> bd_brute;
    for (const Site& s : sites)
      for (int k = 0; k < 2 * dim; ++k) {
        const Site n = neighbors(s, dim)[size_t(k)];
        if (!a.contains(n)) bd_brute.push_back(n);
      }
    std::sort(bd_brute.begin(), bd_brute.end(), [dim](const Site& l, const Site& r) {
      return pack_site(l, dim) < pack_site(r, dim);
    });
    bd_brute.erase(std::unique(bd_brute.begin(), bd_brute.end()), bd_brute.end());
    CHECK(a.boundary_sorted() == bd_brute);
    CHECK(a.size() == 201);

    // fast closure bitmap agrees with the hash sets around the cluster
    for (const Site& s : bd_brute) {
      CHECK(a.in_closure_fast(s.x, s.y, s.z));
      for (int k = 0; k < 2 * dim; ++k) {
        const Site n = neighbors(s, dim)[size_t(k)];
        CHECK(a.in_closure_fast(n.x, n.y, n.z) == a.in_closure(n));
      }
    }
  }
}

TEST_CASE("set hash is order independent and size sensitive") {
  Cluster a(2), b(2);
  a.attach({1, 0, 0});
  a.attach({0, 1, 0});
  b.attach({0, 1, 0});
  b.attach({1, 0, 0});
  CHECK(a.set_hash() == b.set_hash());
  b.attach({1, 1, 0});
  CHECK(a.set_hash() != b.set_hash());
}

TEST_CASE("from_sites accepts connected sets and rejects disconnected ones") {
  const std::vector<Site> domino = {{0, 0, 0}, {1, 0, 0}};
  Cluster a = Cluster::from_sites(2, domino);
  CHECK(a.size() == 2);
  CHECK(a.boundary_size() == 6);

  const std::vector<Site> gap = {{0, 0, 0}, {2, 0, 0}};
  CHECK_THROWS_AS(Cluster::from_sites(2, gap), ContractViolation);

  // needle along x in Z^3
  std::vector<Site> needle;
  for (int i = 0; i <= 8; ++i) needle.push_back({i, 0, 0});
  Cluster n3 = Cluster::from_sites(3, needle);
  CHECK(n3.size() == 9);
  CHECK(n3.boundary_size() == 9 * 4 + 2);
}

TEST_CASE("clearance is conservative and usefully large far away") {
  Cluster a(2);
  a.attach({1, 0, 0});
  CHECK(a.clearance({0, 0, 0}) == 0);
  CHECK(a.clearance({3, 0, 0}) <= 2);  // true Chebyshev gap is 2

  const Site far{300, -200, 0};
  const int32_t c = a.clearance(far);
  CHECK(c >= 64);  // plenty of room certified
  CHECK(c <= 299);
}

TEST_CASE("clearance never certifies a ball that touches the cluster") {
  // A thin arm reaching the box edge plus probes just outside the bitmap
  // box: the certified L-inf ball must stay strictly off every site of A,
  // or a maximal ball jump could land on the arm tip (and the absorbing
  // boundary shell would reach inside the jump ball).
  Cluster a(2);
  for (int32_t x = 1; x <= 10; ++x) a.attach({x, 0, 0});
  for (const Site z : {Site{50, 0, 0}, Site{40, 3, 0}, Site{-47, -2, 0}, Site{0, 44, 0},
                       Site{33, 0, 0}, Site{12, 1, 0}}) {
    const int32_t c = a.clearance(z);
    int32_t nearest = INT32_MAX;
    for (const Site& s : a.sites_sorted())
      nearest = std::min(nearest,
                         std::max(std::abs(z.x - s.x), std::abs(z.y - s.y)));
    INFO("probe (", z.x, ",", z.y, ") certified ", c, " nearest A site ", nearest);
    CHECK(c < nearest);  // the closed ball of radius c holds no site of A
  }

  Cluster b(3);
  for (int32_t x = 1; x <= 6; ++x) b.attach({x, 0, 0});
  for (const Site z : {Site{40, 0, 0}, Site{7, 7, 7}, Site{-38, 2, -2}}) {
    const int32_t c = b.clearance(z);
    int32_t nearest = INT32_MAX;
    for (const Site& s : b.sites_sorted())
      nearest = std::min(nearest, std::max({std::abs(z.x - s.x), std::abs(z.y - s.y),
                                            std::abs(z.z - s.z)}));
    CHECK(c < nearest);
  }
}

TEST_CASE("sorted snapshots are canonical") {
  Cluster a(2, {5, -3, 0});
  a.attach({6, -3, 0});
  a.attach({5, -2, 0});
  auto s = a.sites_sorted();
  CHECK(std::is_sorted(s.begin(), s.end(), [](const Site& l, const Site& r) {
    return pack_site(l, 2) < pack_site(r, 2);
  }));
  auto c = a.closure_sorted();
  CHECK(c.size() == a.size() + a.boundary_size());
}
