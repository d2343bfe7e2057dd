#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "dbm/site.hpp"

namespace dbm::potential {

// Dense masked Dirichlet problem on the box |coord|_inf <= half + 1:
//
//   u(x) = (1/2d) * sum_nbr u  + source(x)   on DOF cells,
//   u(x) = fixed_value(x)                    elsewhere,
//
// solved as the SPD system (I - (1/2d) S) u = b by conjugate gradients on
// full-box arrays with a 0/1 mask (the operator diagonal is 1, so Jacobi
// preconditioning is the identity).  Fixed-cell values are folded into b;
// the unknown vector carries 0 at fixed cells throughout.
struct DirichletProblem {
  int dim = 2;
  int32_t half = 0;
  std::function<bool(const Site&)> is_dof;
  std::function<double(const Site&)> fixed_value;  // read only next to DOF cells
  std::vector<std::pair<Site, double>> sources;
};

class GridSolution {
 public:
  GridSolution(int dim, int32_t half);

  int dim() const { return dim_; }
  int32_t half() const { return half_; }
  double rel_residual = 0.0;
  int iters = 0;

  bool in_grid(const Site& s) const {
    return std::abs(s.x) <= half_ + 1 && std::abs(s.y) <= half_ + 1 &&
           (dim_ == 2 ? s.z == 0 : std::abs(s.z) <= half_ + 1);
  }
  // Solution value at a DOF cell; 0 at fixed cells and outside the grid.
  double at(const Site& s) const {
    return in_grid(s) ? u[index(s)] : 0.0;
  }
  bool is_dof(const Site& s) const { return in_grid(s) && mask[index(s)] != 0.0; }

  size_t index(const Site& s) const {
    const size_t ux = size_t(s.x + half_ + 1), uy = size_t(s.y + half_ + 1),
                 uz = dim_ == 2 ? 0 : size_t(s.z + half_ + 1);
    return (uz * sx_ + uy) * sx_ + ux;
  }

  std::vector<double> u;
  std::vector<double> mask;

 private:
  int dim_;
  int32_t half_;
  size_t sx_;
};

GridSolution solve_dirichlet(const DirichletProblem& p, double tol = 1e-10,
                             int max_iters = 0);

}  // namespace dbm::potential
