#pragma once

#include <cstddef>
#include <cstdint>

namespace dbm::simd {

enum class Backend { scalar, avx2 };

// Kernel bundle.  Both variants implement identical arithmetic: additions
// are associated the same way per element, and FMA contraction is disabled,
// so axpy/xpby/stencil/philox agree bit-for-bit across backends.  The
// horizontal reductions (dot, sum, max_abs) associate differently by lane
// and are compared under a tolerance instead.
struct Kernels {
  double (*dot)(const double* a, const double* b, size_t n);
  double (*sum)(const double* a, size_t n);
  double (*max_abs)(const double* a, size_t n);
  void (*axpy)(double alpha, const double* x, double* y, size_t n);   // y += alpha x
  void (*xpby)(const double* x, double beta, double* y, size_t n);    // y = x + beta y
  void (*scal)(double alpha, double* x, size_t n);
  // out = m .* (x - c * (x[i-1] + x[i+1] + x[i-sx] + x[i+sx])), rows [y0,y1)
  void (*stencil2d)(const double* x, const double* m, double* out, size_t sx, size_t y0,
                    size_t y1, double c);
  // 3D variant with the two extra neighbours at +-sxy, planes [z0,z1)
  void (*stencil3d)(const double* x, const double* m, double* out, size_t sx, size_t sxy,
                    size_t z0, size_t z1, double c);
  // 8 consecutive Philox4x32-10 blocks: counters (lo+k, hi), k = 0..7.
  void (*philox8)(uint64_t lo, uint64_t hi, uint32_t key0, uint32_t key1, uint32_t* out32);
};

const Kernels& kernels();           // active bundle (CPU-dispatched, overridable)
Backend active_backend();
void force_backend(Backend b);      // for tests; also honours env DBM_SIMD=scalar
bool avx2_available();

namespace detail {
extern const Kernels scalar_kernels;
extern const Kernels avx2_kernels;  // valid only if avx2_available()
}

}  // namespace dbm::simd
