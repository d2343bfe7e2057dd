#include <cmath>

#include "dbm/simd/kernels.hpp"

namespace dbm::simd {
namespace {

double dot_s(const double* a, const double* b, size_t n) {
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sum_s(const double* a, size_t n) {
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) acc += a[i];
  return acc;
}

double max_abs_s(const double* a, size_t n) {
  double m = 0.0;
  for (size_t i = 0; i < n; ++i) m = std::max(m, std::fabs(a[i]));
  return m;
}

void axpy_s(double alpha, const double* x, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void xpby_s(const double* x, double beta, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = x[i] + beta * y[i];
}

void scal_s(double alpha, double* x, size_t n) {
  for (size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void stencil2d_s(const double* x, const double* m, double* out, size_t sx, size_t y0, size_t y1,
                 double c) {
  for (size_t r = y0; r < y1; ++r) {
    const size_t base = r * sx;
    for (size_t i = base + 1; i < base + sx - 1; ++i) {
      const double nbr = ((x[i - 1] + x[i + 1]) + x[i - sx]) + x[i + sx];
      out[i] = m[i] * (x[i] - c * nbr);
    }
  }
}

void stencil3d_s(const double* x, const double* m, double* out, size_t sx, size_t sxy, size_t z0,
                 size_t z1, double c) {
  const size_t sy = sxy / sx;
  for (size_t p = z0; p < z1; ++p) {
    for (size_t r = 1; r < sy - 1; ++r) {
      const size_t base = p * sxy + r * sx;
      for (size_t i = base + 1; i < base + sx - 1; ++i) {
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

void philox8_s(uint64_t lo, uint64_t hi, uint32_t key0, uint32_t key1, uint32_t* out32) {
  for (int k = 0; k < 8; ++k) {
    const uint64_t ctr = lo + uint64_t(k);
    uint32_t x0 = uint32_t(ctr), x1 = uint32_t(ctr >> 32);
    uint32_t x2 = uint32_t(hi), x3 = uint32_t(hi >> 32);
    uint32_t k0 = key0, k1 = key1;
    for (int r = 0; r < 10; ++r) {
      const uint64_t p0 = uint64_t(kPhiloxM0) * x0;
      const uint64_t p1 = uint64_t(kPhiloxM1) * x2;
      const uint32_t hi0 = uint32_t(p0 >> 32), lo0 = uint32_t(p0);
      const uint32_t hi1 = uint32_t(p1 >> 32), lo1 = uint32_t(p1);
      x0 = hi1 ^ x1 ^ k0;
      x1 = lo1;
      x2 = hi0 ^ x3 ^ k1;
      x3 = lo0;
      k0 += kPhiloxW0;
      k1 += kPhiloxW1;
    }
    out32[4 * k + 0] = x0;
    out32[4 * k + 1] = x1;
    out32[4 * k + 2] = x2;
    out32[4 * k + 3] = x3;
  }
}

}  // namespace

namespace detail {
const Kernels scalar_kernels = {dot_s,  sum_s,       max_abs_s,   axpy_s,    xpby_s,
                                scal_s, stencil2d_s, stencil3d_s, philox8_s};
}

}  // namespace dbm::simd
