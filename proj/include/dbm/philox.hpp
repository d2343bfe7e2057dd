#pragma once

#include <array>
#include <cstdint>

#include "dbm/simd/kernels.hpp"

namespace dbm {

// Counter-based stream over Philox4x32-10.  A stream is addressed by
// (seed, stream_id); equal addresses give equal draw sequences no matter
// which thread runs them or in what order, which is what makes the walker
// sampling reproducible under --threads.
class CounterStream {
 public:
  CounterStream(uint64_t seed, uint64_t stream_id) : hi_(stream_id) {
    key0_ = uint32_t(seed);
    key1_ = uint32_t(seed >> 32);
  }

  uint32_t next_u32() {
    if (pos_ == kBuf) refill();
    return buf_[pos_++];
  }

  uint64_t next_u64() {
    const uint64_t lo = next_u32();
    return lo | (uint64_t(next_u32()) << 32);
  }

  // Uniform in [0, 1) with 53 random bits.
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // Unbiased uniform draw from {0, ..., n-1} for small n via rejection on
  // the smallest covering power of two.
  uint32_t next_below(uint32_t n) {
    const uint32_t mask = n <= 1 ? 0 : (~uint32_t(0) >> __builtin_clz(n - 1));
    for (;;) {
      const uint32_t v = next_u32() & mask;
      if (v < n) return v;
    }
  }

 private:
  static constexpr int kBuf = 32;  // 8 blocks of 4 words
  void refill() {
    simd::kernels().philox8(block_, hi_, key0_, key1_, buf_);
    block_ += 8;
    pos_ = 0;
  }

  uint64_t hi_;
  uint64_t block_ = 0;
  uint32_t key0_, key1_;
  uint32_t buf_[kBuf];
  int pos_ = kBuf;
};

// Single Philox4x32-10 block, exposed for known-answer tests.
std::array<uint32_t, 4> philox_block(const std::array<uint32_t, 4>& counter,
                                     const std::array<uint32_t, 2>& key);

}  // namespace dbm
