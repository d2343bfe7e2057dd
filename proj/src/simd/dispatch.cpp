#include <atomic>
#include <cstdlib>
#include <cstring>

#include "dbm/simd/kernels.hpp"

namespace dbm::simd {

bool avx2_available() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

namespace {

std::atomic<const Kernels*> g_active{nullptr};

const Kernels* resolve() {
  const char* env = std::getenv("DBM_SIMD");
  if (env && std::strcmp(env, "scalar") == 0) return &detail::scalar_kernels;
  if (avx2_available()) return &detail::avx2_kernels;
  return &detail::scalar_kernels;
}

}  // namespace

const Kernels& kernels() {
  const Kernels* k = g_active.load(std::memory_order_acquire);
  if (!k) {
    k = resolve();
    g_active.store(k, std::memory_order_release);
  }
  return *k;
}

Backend active_backend() {
  return &kernels() == &detail::scalar_kernels ? Backend::scalar : Backend::avx2;
}

void force_backend(Backend b) {
  g_active.store(b == Backend::scalar || !avx2_available() ? &detail::scalar_kernels
                                                           : &detail::avx2_kernels,
                 std::memory_order_release);
}

}  // namespace dbm::simd
