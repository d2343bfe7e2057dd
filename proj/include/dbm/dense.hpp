#pragma once

#include <cstddef>
#include <vector>

namespace dbm {

// Row-major dense LU with partial pivoting, enough for the equilibrium and
// capacitor systems (a few thousand unknowns at most).
class DenseLU {
 public:
  explicit DenseLU(std::vector<double> a, size_t n);  // takes the matrix, n*n

  void solve(std::vector<double>& rhs) const;  // in place
  double rcond_estimate() const { return rcond_; }

 private:
  size_t n_;
  std::vector<double> lu_;
  std::vector<int> piv_;
  double rcond_;
};

}  // namespace dbm
