#include "dbm/dense.hpp"

#include <cmath>
#include <cstdlib>
#include <utility>

#include "dbm/error.hpp"
#include "dbm/simd/kernels.hpp"

namespace dbm {

DenseLU::DenseLU(std::vector<double> a, size_t n) : n_(n), lu_(std::move(a)), piv_(n) {
  if (lu_.size() != n * n) throw ContractViolation("DenseLU: matrix size mismatch");
  const simd::Kernels& k = simd::kernels();
  double min_piv = 0, max_piv = 0;
  for (size_t c = 0; c < n_; ++c) {
    size_t p = c;
    double best = std::abs(lu_[c * n_ + c]);
    for (size_t r = c + 1; r < n_; ++r) {
      const double v = std::abs(lu_[r * n_ + c]);
      if (v > best) { best = v; p = r; }
    }
    if (best == 0.0) throw SolverError("dense LU: singular matrix", 0.0);
    if (p != c)
      for (size_t j = 0; j < n_; ++j) std::swap(lu_[c * n_ + j], lu_[p * n_ + j]);
    piv_[c] = int(p);
    if (c == 0) { min_piv = best; max_piv = best; }
    min_piv = std::min(min_piv, best);
    max_piv = std::max(max_piv, best);
    const double d = lu_[c * n_ + c];
    for (size_t r = c + 1; r < n_; ++r) {
      const double f = lu_[r * n_ + c] / d;
      lu_[r * n_ + c] = f;
      if (f != 0.0 && c + 1 < n_)
        k.axpy(-f, &lu_[c * n_ + c + 1], &lu_[r * n_ + c + 1], n_ - c - 1);
    }
  }
  rcond_ = min_piv / max_piv;  // crude, flags near-singular systems in tests
}

void DenseLU::solve(std::vector<double>& rhs) const {
  if (rhs.size() != n_) throw ContractViolation("DenseLU: rhs size mismatch");
  for (size_t c = 0; c < n_; ++c) {
    std::swap(rhs[c], rhs[size_t(piv_[c])]);
    const double v = rhs[c];
    if (v != 0.0)
      for (size_t r = c + 1; r < n_; ++r) rhs[r] -= lu_[r * n_ + c] * v;
  }
  for (size_t c = n_; c-- > 0;) {
    double acc = rhs[c];
    for (size_t j = c + 1; j < n_; ++j) acc -= lu_[c * n_ + j] * rhs[j];
    rhs[c] = acc / lu_[c * n_ + c];
  }
}

}  // namespace dbm
