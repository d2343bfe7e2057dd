#pragma once

#include <cstdint>
#include <unordered_set>
#include <vector>

#include "dbm/site.hpp"

namespace dbm {

// Growing lattice cluster A together with its outer boundary
//   bd(A) = { y not in A : y adjacent to A },
// maintained incrementally.  The closure means A together with bd(A).
//
// Storage follows a two-tier scheme: hash sets give exact membership and
// enumeration, dense bitmaps over the bounding box answer the hot-loop
// queries (walker absorption, flood fill) in O(1).  A coarse occupancy
// pyramid over A supports conservative empty-ball queries used for walker
// long jumps.
class Cluster {
 public:
  explicit Cluster(int dim, Site origin = {});

  // Builds a cluster from an arbitrary connected, non-empty site set.
  // `anchor` is the member acting as the origin; radius is measured from it.
  static Cluster from_sites(int dim, const std::vector<Site>& sites, Site anchor = {});

  int dim() const { return dim_; }
  Site origin() const { return origin_; }
  size_t size() const { return sites_.size(); }
  size_t boundary_size() const { return boundary_.size(); }

  bool contains(const Site& s) const { return sites_.count(pack_site(s, dim_)) != 0; }
  bool in_boundary(const Site& s) const { return boundary_.count(pack_site(s, dim_)) != 0; }
  bool in_closure(const Site& s) const {
    return contains(s) || in_boundary(s);
  }

  // Bitmap-backed closure test for hot loops; coordinates relative to origin
  // must satisfy the box bound, callers outside it get `false` (correct:
  // the closure never extends past the box).
  bool in_closure_fast(int32_t x, int32_t y, int32_t z) const {
    const int32_t rx = x - origin_.x, ry = y - origin_.y, rz = z - origin_.z;
    const int32_t h = half_;
    if (rx < -h || rx >= h || ry < -h || ry >= h || (dim_ == 3 && (rz < -h || rz >= h)))
      return false;
    return test_bit(closure_bits_, box_index(rx, ry, rz));
  }

  // Attaches a boundary site.  Throws ContractViolation if y is not in
  // bd(A) or leaves the supported coordinate range.
  void attach(const Site& y);

  double radius() const { return std::sqrt(double(max_r2_)); }
  int64_t radius_sq() const { return max_r2_; }
  // Chebyshev radius of A about the origin (bounding-box half width).
  int32_t inf_radius() const { return max_inf_; }

  const std::vector<Site>& attach_order() const { return attach_order_; }

  // Canonically ordered snapshots (sorted by packed key).
  std::vector<Site> sites_sorted() const;
  std::vector<Site> boundary_sorted() const;
  std::vector<Site> closure_sorted() const;

  // Order-independent digest of the site set; used to tie measure profiles
  // to the cluster state they were computed for.
  uint64_t set_hash() const { return set_hash_; }

  // Conservative empty-ball query: returns s such that no site of A lies
  // within Chebyshev distance s of `from` (0 when nothing is guaranteed).
  int32_t clearance(const Site& from) const;

 private:
  void insert_site_structures(const Site& s);
  void ensure_box(int32_t need_half);
  void rebuild_bitmaps();
  size_t box_index(int32_t rx, int32_t ry, int32_t rz) const {
    const uint32_t side = uint32_t(2 * half_);
    const uint32_t ux = uint32_t(rx + half_), uy = uint32_t(ry + half_),
                   uz = uint32_t(rz + half_);
    if (dim_ == 2) return size_t(uy) * side + ux;
    return (size_t(uz) * side + uy) * side + ux;
  }
  static bool test_bit(const std::vector<uint64_t>& bits, size_t i) {
    return (bits[i >> 6] >> (i & 63)) & 1u;
  }
  static void set_bit(std::vector<uint64_t>& bits, size_t i) {
    bits[i >> 6] |= uint64_t(1) << (i & 63);
  }

  int dim_;
  Site origin_;
  std::unordered_set<uint64_t, KeyHash> sites_;
  std::unordered_set<uint64_t, KeyHash> boundary_;
  std::vector<Site> attach_order_;
  int64_t max_r2_ = 0;
  int32_t max_inf_ = 0;
  uint64_t set_hash_ = 0;

  // Dense structures over [-half_, half_)^dim relative to origin.
  int32_t half_ = 0;
  std::vector<uint64_t> site_bits_;
  std::vector<uint64_t> closure_bits_;
  // pyramid_[l] marks occupied blocks of side 1 << (l + kPyramidBase).
  static constexpr int kPyramidBase = 3;
  std::vector<std::vector<uint64_t>> pyramid_;
};

}  // namespace dbm
