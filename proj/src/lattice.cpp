#include "dbm/cluster.hpp"

#include <algorithm>

namespace dbm {

Cluster::Cluster(int dim, Site origin) : dim_(dim), origin_(origin) {
  check_dim(dim);
  if (dim == 2 && origin.z != 0) throw ContractViolation("2D origin must have z = 0");
  ensure_box(32);
  insert_site_structures(origin);
}

Cluster Cluster::from_sites(int dim, const std::vector<Site>& sites, Site anchor) {
  check_dim(dim);
  if (sites.empty()) throw ContractViolation("cluster must be non-empty");
  std::unordered_set<uint64_t, KeyHash> pending;
  for (const Site& s : sites) {
    if (dim == 2 && s.z != 0) throw ContractViolation("2D site must have z = 0");
    pending.insert(pack_site(s, dim));
  }
  if (!pending.count(pack_site(anchor, dim)))
    throw ContractViolation("anchor must be a member of the site set");
  Cluster c(dim, anchor);
  pending.erase(pack_site(anchor, dim));
  // Attach in rounds: any pending site currently on the boundary is legal.
  // For a connected set this terminates; otherwise it is a contract error.
  while (!pending.empty()) {
    std::vector<uint64_t> frontier;
    for (uint64_t k : pending) {
      if (c.boundary_.count(k)) frontier.push_back(k);
    }
    if (frontier.empty()) throw ContractViolation("site set is not edge-connected");
    std::sort(frontier.begin(), frontier.end());
    for (uint64_t k : frontier) {
      c.attach(unpack_site(k, dim));
      pending.erase(k);
    }
  }
  return c;
}

void Cluster::insert_site_structures(const Site& s) {
  const uint64_t key = pack_site(s, dim_);
  sites_.insert(key);
  set_hash_ += mix64(key);
  const Site r{s.x - origin_.x, s.y - origin_.y, s.z - origin_.z};
  max_r2_ = std::max(max_r2_, norm2_sq(r));
  max_inf_ = std::max({max_inf_, std::abs(r.x), std::abs(r.y), std::abs(r.z)});

  set_bit(site_bits_, box_index(r.x, r.y, r.z));
  set_bit(closure_bits_, box_index(r.x, r.y, r.z));
  const auto nb = neighbors(s, dim_);
  for (int i = 0; i < 2 * dim_; ++i) {
    const uint64_t nk = pack_site(nb[i], dim_);
    if (!sites_.count(nk)) boundary_.insert(nk);
    const Site rn{nb[i].x - origin_.x, nb[i].y - origin_.y, nb[i].z - origin_.z};
    set_bit(closure_bits_, box_index(rn.x, rn.y, rn.z));
  }
  for (size_t l = 0; l < pyramid_.size(); ++l) {
    const int shift = int(l) + kPyramidBase;
    const int32_t bh = half_ >> shift;
    const uint32_t bside = uint32_t(2 * bh);
    const uint32_t bx = uint32_t((r.x + half_) >> shift), by = uint32_t((r.y + half_) >> shift),
                   bz = uint32_t((r.z + half_) >> shift);
    const size_t bi = dim_ == 2 ? size_t(by) * bside + bx : (size_t(bz) * bside + by) * bside + bx;
    set_bit(pyramid_[l], bi);
  }
}

void Cluster::attach(const Site& y) {
  const uint64_t key = pack_site(y, dim_);
  if (sites_.count(key)) throw ContractViolation("attach target already in cluster");
  if (!boundary_.count(key)) throw ContractViolation("attach target is not a boundary site");
  if (std::abs(y.x) >= kCoordLimit || std::abs(y.y) >= kCoordLimit || std::abs(y.z) >= kCoordLimit)
    throw ContractViolation("attach target exceeds coordinate range");
  const int32_t need = std::max({std::abs(y.x - origin_.x), std::abs(y.y - origin_.y),
                                 std::abs(y.z - origin_.z)}) +
                       2;
  ensure_box(need);
  boundary_.erase(key);
  attach_order_.push_back(y);
  insert_site_structures(y);
}

void Cluster::ensure_box(int32_t need_half) {
  if (need_half < half_) return;
  int32_t h = half_ > 0 ? half_ : 32;
  while (h <= need_half) h *= 2;
  half_ = h;
  rebuild_bitmaps();
}

void Cluster::rebuild_bitmaps() {
  const size_t side = size_t(2 * half_);
  const size_t cells = dim_ == 2 ? side * side : side * side * side;
  site_bits_.assign((cells + 63) / 64, 0);
  closure_bits_.assign((cells + 63) / 64, 0);
  pyramid_.clear();
  for (int shift = kPyramidBase; (half_ >> shift) >= 2; ++shift) {
    const size_t bside = size_t(2 * (half_ >> shift));
    const size_t bcells = dim_ == 2 ? bside * bside : bside * bside * bside;
    pyramid_.emplace_back((bcells + 63) / 64, 0);
  }
  // Re-mark every site (cheap relative to the growth that triggered it).
  auto keys = std::vector<uint64_t>(sites_.begin(), sites_.end());
  auto saved_boundary = std::move(boundary_);
  boundary_.clear();
  sites_.clear();
  set_hash_ = 0;
  max_r2_ = 0;
  max_inf_ = 0;
  for (uint64_t k : keys) insert_site_structures(unpack_site(k, dim_));
  boundary_ = std::move(saved_boundary);
  // insert_site_structures repopulated boundary entries as well; the merge
  // keeps both sources, which agree by construction.
  for (uint64_t k : keys) boundary_.erase(k);
}

std::vector<Site> Cluster::sites_sorted() const {
  std::vector<uint64_t> keys(sites_.begin(), sites_.end());
  std::sort(keys.begin(), keys.end());
  std::vector<Site> out;
  out.reserve(keys.size());
  for (uint64_t k : keys) out.push_back(unpack_site(k, dim_));
  return out;
}

std::vector<Site> Cluster::boundary_sorted() const {
  std::vector<uint64_t> keys(boundary_.begin(), boundary_.end());
  std::sort(keys.begin(), keys.end());
  std::vector<Site> out;
  out.reserve(keys.size());
  for (uint64_t k : keys) out.push_back(unpack_site(k, dim_));
  return out;
}

std::vector<Site> Cluster::closure_sorted() const {
  std::vector<uint64_t> keys;
  keys.reserve(sites_.size() + boundary_.size());
  keys.insert(keys.end(), sites_.begin(), sites_.end());
  keys.insert(keys.end(), boundary_.begin(), boundary_.end());
  std::sort(keys.begin(), keys.end());
  std::vector<Site> out;
  out.reserve(keys.size());
  for (uint64_t k : keys) out.push_back(unpack_site(k, dim_));
  return out;
}

int32_t Cluster::clearance(const Site& from) const {
  const int32_t rx = from.x - origin_.x, ry = from.y - origin_.y, rz = from.z - origin_.z;
  const int32_t h = half_;
  int32_t best = 0;
  for (size_t l = 0; l < pyramid_.size(); ++l) {
    const int shift = int(l) + kPyramidBase;
    const int32_t bh = h >> shift;
    const int32_t bside = 2 * bh;
    const int32_t bx = (rx + h) >> shift, by = (ry + h) >> shift, bz = (rz + h) >> shift;
    bool empty = true;
    const int32_t zlo = dim_ == 2 ? bz : bz - 1, zhi = dim_ == 2 ? bz : bz + 1;
    for (int32_t cz = zlo; cz <= zhi && empty; ++cz) {
      for (int32_t cy = by - 1; cy <= by + 1 && empty; ++cy) {
        for (int32_t cx = bx - 1; cx <= bx + 1 && empty; ++cx) {
          if (cx < 0 || cx >= bside || cy < 0 || cy >= bside ||
              (dim_ == 3 && (cz < 0 || cz >= bside))) {
            continue;  // outside the box there are no sites
          }
          const size_t bi = dim_ == 2 ? size_t(cy) * uint32_t(bside) + uint32_t(cx)
                                      : (size_t(cz) * uint32_t(bside) + uint32_t(cy)) *
                                                uint32_t(bside) +
                                            uint32_t(cx);
          if (test_bit(pyramid_[l], bi)) empty = false;
        }
      }
    }
    if (!empty) break;
    best = int32_t(1) << shift;
  }
  // Walkers may roam past the box; outside it the box itself bounds A.  The
  // nearest site of A sits at Chebyshev distance |r|inf - max_inf_ exactly,
  // and the contract is "no site of A within L-inf distance <= best", so one
  // must come off (clearance equal to the gap would let a maximal ball jump
  // land on that site, and its absorbing closure shell reaches one closer).
  if (rx < -h || rx >= h || ry < -h || ry >= h || (dim_ == 3 && (rz < -h || rz >= h))) {
    const int32_t dist =
        std::max({std::abs(rx), std::abs(ry), dim_ == 3 ? std::abs(rz) : 0}) - max_inf_ - 1;
    best = std::max(best, dist);
  }
  return best;
}

}  // namespace dbm
