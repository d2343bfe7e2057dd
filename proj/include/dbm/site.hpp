#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>

#include "dbm/error.hpp"

namespace dbm {

// Lattice site on Z^2 or Z^3.  For d = 2 the z coordinate stays 0.
struct Site {
  int32_t x = 0;
  int32_t y = 0;
  int32_t z = 0;

  friend bool operator==(const Site&, const Site&) = default;
};

inline constexpr int32_t kCoordLimit = 1 << 30;

// Injective 64-bit key.  2D uses two full 32-bit fields.  3D packs three
// 21-bit biased fields, which covers every reachable cluster by a wide
// margin; the range is checked so a violation cannot pass silently.
inline uint64_t pack_site(const Site& s, int dim) {
  if (dim == 2) {
    return (uint64_t(uint32_t(s.x)) << 32) | uint64_t(uint32_t(s.y));
  }
  constexpr int32_t kBias = 1 << 20;
  if (s.x <= -kBias || s.x >= kBias || s.y <= -kBias || s.y >= kBias || s.z <= -kBias ||
      s.z >= kBias) {
    throw ContractViolation("3D site coordinate exceeds packing range");
  }
  return (uint64_t(uint32_t(s.x + kBias)) << 42) | (uint64_t(uint32_t(s.y + kBias)) << 21) |
         uint64_t(uint32_t(s.z + kBias));
}

inline Site unpack_site(uint64_t k, int dim) {
  if (dim == 2) {
    return Site{int32_t(uint32_t(k >> 32)), int32_t(uint32_t(k)), 0};
  }
  constexpr int32_t kBias = 1 << 20;
  constexpr uint64_t kMask = (uint64_t(1) << 21) - 1;
  return Site{int32_t((k >> 42) & kMask) - kBias, int32_t((k >> 21) & kMask) - kBias,
              int32_t(k & kMask) - kBias};
}

inline int64_t norm2_sq(const Site& s) {
  return int64_t(s.x) * s.x + int64_t(s.y) * s.y + int64_t(s.z) * s.z;
}

inline double norm2(const Site& s) { return std::sqrt(double(norm2_sq(s))); }

// Nearest neighbours in fixed axis order (+x,-x,+y,-y[,+z,-z]).  Only the
// first 2*dim entries are meaningful.
inline std::array<Site, 6> neighbors(const Site& s, int dim) {
  std::array<Site, 6> out{};
  out[0] = {s.x + 1, s.y, s.z};
  out[1] = {s.x - 1, s.y, s.z};
  out[2] = {s.x, s.y + 1, s.z};
  out[3] = {s.x, s.y - 1, s.z};
  if (dim == 3) {
    out[4] = {s.x, s.y, s.z + 1};
    out[5] = {s.x, s.y, s.z - 1};
  }
  return out;
}

inline void check_dim(int dim) {
  if (dim != 2 && dim != 3) throw ContractViolation("dimension must be 2 or 3");
}

// splitmix64 finaliser; used for hashing packed keys.
inline uint64_t mix64(uint64_t v) {
  v += 0x9e3779b97f4a7c15ull;
  v = (v ^ (v >> 30)) * 0xbf58476d1ce4e5b9ull;
  v = (v ^ (v >> 27)) * 0x94d049bb133111ebull;
  return v ^ (v >> 31);
}

struct KeyHash {
  size_t operator()(uint64_t k) const { return size_t(mix64(k)); }
};

}  // namespace dbm
