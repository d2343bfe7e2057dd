#include "dbm/philox.hpp"

namespace dbm {

std::array<uint32_t, 4> philox_block(const std::array<uint32_t, 4>& counter,
                                     const std::array<uint32_t, 2>& key) {
  uint32_t out[32];
  const uint64_t lo = uint64_t(counter[0]) | (uint64_t(counter[1]) << 32);
  const uint64_t hi = uint64_t(counter[2]) | (uint64_t(counter[3]) << 32);
  simd::kernels().philox8(lo, hi, key[0], key[1], out);
  return {out[0], out[1], out[2], out[3]};
}

}  // namespace dbm
