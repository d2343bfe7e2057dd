#include "dbm/simd/kernels.hpp"

#ifdef DBM_HAVE_AVX2

#include <immintrin.h>

#include <cmath>

namespace dbm::simd {
namespace {

// No FMA intrinsics anywhere: each element goes through the same
// multiply-then-add sequence as the scalar reference, so the elementwise
// kernels match it bit-for-bit.

double dot_v(const double* a, const double* b, size_t n) {
  __m256d acc = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  alignas(32) double lane[4];
  _mm256_store_pd(lane, acc);
  double r = ((lane[0] + lane[1]) + lane[2]) + lane[3];
  for (; i < n; ++i) r += a[i] * b[i];
  return r;
}

double sum_v(const double* a, size_t n) {
  __m256d acc = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
  alignas(32) double lane[4];
  _mm256_store_pd(lane, acc);
  double r = ((lane[0] + lane[1]) + lane[2]) + lane[3];
  for (; i < n; ++i) r += a[i];
  return r;
}

double max_abs_v(const double* a, size_t n) {
  const __m256d signmask = _mm256_set1_pd(-0.0);
  __m256d acc = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_max_pd(acc, _mm256_andnot_pd(signmask, _mm256_loadu_pd(a + i)));
  }
  alignas(32) double lane[4];
  _mm256_store_pd(lane, acc);
  double r = std::max(std::max(lane[0], lane[1]), std::max(lane[2], lane[3]));
  for (; i < n; ++i) r = std::max(r, std::fabs(a[i]));
  return r;
}

void axpy_v(double alpha, const double* x, double* y, size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void xpby_v(const double* x, double beta, double* y, size_t n) {
  const __m256d vb = _mm256_set1_pd(beta);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod = _mm256_mul_pd(vb, _mm256_loadu_pd(y + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(x + i), prod));
  }
  for (; i < n; ++i) y[i] = x[i] + beta * y[i];
}

void scal_v(double alpha, double* x, size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) x[i] *= alpha;
}

void stencil2d_v(const double* x, const double* m, double* out, size_t sx, size_t y0, size_t y1,
                 double c) {
  const __m256d vc = _mm256_set1_pd(c);
  for (size_t r = y0; r < y1; ++r) {
    const size_t base = r * sx;
    size_t i = base + 1;
    const size_t end = base + sx - 1;
    for (; i + 4 <= end; i += 4) {
      const __m256d left = _mm256_loadu_pd(x + i - 1);
      const __m256d right = _mm256_loadu_pd(x + i + 1);
      const __m256d down = _mm256_loadu_pd(x + i - sx);
      const __m256d up = _mm256_loadu_pd(x + i + sx);
      const __m256d nbr = _mm256_add_pd(_mm256_add_pd(_mm256_add_pd(left, right), down), up);
      const __m256d val =
          _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_mul_pd(vc, nbr));
      _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(m + i), val));
    }
    for (; i < end; ++i) {
      const double nbr = ((x[i - 1] + x[i + 1]) + x[i - sx]) + x[i + sx];
      out[i] = m[i] * (x[i] - c * nbr);
    }
  }
}

void stencil3d_v(const double* x, const double* m, double* out, size_t sx, size_t sxy, size_t z0,
                 size_t z1, double c) {
  const __m256d vc = _mm256_set1_pd(c);
  const size_t sy = sxy / sx;
  for (size_t p = z0; p < z1; ++p) {
    for (size_t r = 1; r < sy - 1; ++r) {
      const size_t base = p * sxy + r * sx;
      size_t i = base + 1;
      const size_t end = base + sx - 1;
      for (; i + 4 <= end; i += 4) {
        const __m256d left = _mm256_loadu_pd(x + i - 1);
        const __m256d right = _mm256_loadu_pd(x + i + 1);
        const __m256d down = _mm256_loadu_pd(x + i - sx);
        const __m256d up = _mm256_loadu_pd(x + i + sx);
        const __m256d back = _mm256_loadu_pd(x + i - sxy);
        const __m256d front = _mm256_loadu_pd(x + i + sxy);
        __m256d nbr = _mm256_add_pd(_mm256_add_pd(_mm256_add_pd(left, right), down), up);
        nbr = _mm256_add_pd(_mm256_add_pd(nbr, back), front);
        const __m256d val = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_mul_pd(vc, nbr));
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(m + i), val));
      }
      for (; i < end; ++i) {
        const double nbr =
            ((((x[i - 1] + x[i + 1]) + x[i - sx]) + x[i + sx]) + x[i - sxy]) + x[i + sxy];
        out[i] = m[i] * (x[i] - c * nbr);
      }
    }
  }
}

constexpr uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr uint32_t kPhiloxW1 = 0xBB67AE85u;

// 8 blocks in lockstep, one 32-bit word vector per block position.
void philox8_v(uint64_t lo, uint64_t hi, uint32_t key0, uint32_t key1, uint32_t* out32) {
  alignas(32) uint32_t a0[8], a1[8];
  for (int k = 0; k < 8; ++k) {
    const uint64_t ctr = lo + uint64_t(k);
    a0[k] = uint32_t(ctr);
    a1[k] = uint32_t(ctr >> 32);
  }
  __m256i x0 = _mm256_load_si256(reinterpret_cast<const __m256i*>(a0));
  __m256i x1 = _mm256_load_si256(reinterpret_cast<const __m256i*>(a1));
  __m256i x2 = _mm256_set1_epi32(int32_t(uint32_t(hi)));
  __m256i x3 = _mm256_set1_epi32(int32_t(uint32_t(hi >> 32)));
  __m256i k0 = _mm256_set1_epi32(int32_t(key0));
  __m256i k1 = _mm256_set1_epi32(int32_t(key1));
  const __m256i m0 = _mm256_set1_epi32(int32_t(kPhiloxM0));
  const __m256i m1 = _mm256_set1_epi32(int32_t(kPhiloxM1));
  const __m256i himask = _mm256_set1_epi64x(int64_t(0xFFFFFFFF00000000ull));

  auto mulhilo = [&](__m256i x, __m256i m, __m256i& hi32, __m256i& lo32) {
    const __m256i even = _mm256_mul_epu32(x, m);
    const __m256i odd = _mm256_mul_epu32(_mm256_srli_epi64(x, 32), m);
    lo32 = _mm256_blend_epi32(even, _mm256_slli_epi64(odd, 32), 0xAA);
    hi32 = _mm256_blend_epi32(_mm256_srli_epi64(even, 32), _mm256_and_si256(odd, himask), 0xAA);
  };

  for (int r = 0; r < 10; ++r) {
    __m256i hi0, lo0, hi1, lo1;
    mulhilo(x0, m0, hi0, lo0);
    mulhilo(x2, m1, hi1, lo1);
    x0 = _mm256_xor_si256(_mm256_xor_si256(hi1, x1), k0);
    x1 = lo1;
    x2 = _mm256_xor_si256(_mm256_xor_si256(hi0, x3), k1);
    x3 = lo0;
    k0 = _mm256_add_epi32(k0, _mm256_set1_epi32(int32_t(kPhiloxW0)));
    k1 = _mm256_add_epi32(k1, _mm256_set1_epi32(int32_t(kPhiloxW1)));
  }

  alignas(32) uint32_t b0[8], b1[8], b2[8], b3[8];
  _mm256_store_si256(reinterpret_cast<__m256i*>(b0), x0);
  _mm256_store_si256(reinterpret_cast<__m256i*>(b1), x1);
  _mm256_store_si256(reinterpret_cast<__m256i*>(b2), x2);
  _mm256_store_si256(reinterpret_cast<__m256i*>(b3), x3);
  for (int k = 0; k < 8; ++k) {
    out32[4 * k + 0] = b0[k];
    out32[4 * k + 1] = b1[k];
    out32[4 * k + 2] = b2[k];
    out32[4 * k + 3] = b3[k];
  }
}

}  // namespace

namespace detail {
const Kernels avx2_kernels = {dot_v,  sum_v,       max_abs_v,   axpy_v,    xpby_v,
                              scal_v, stencil2d_v, stencil3d_v, philox8_v};
}

}  // namespace dbm::simd

#else  // !DBM_HAVE_AVX2

namespace dbm::simd::detail {
const Kernels avx2_kernels = scalar_kernels;
}

#endif
