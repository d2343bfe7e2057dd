#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dbm {

// Precondition broken by the caller (bad argument, invalid state transition).
class ContractViolation : public std::invalid_argument {
 public:
  explicit ContractViolation(const std::string& what) : std::invalid_argument(what) {}
};

// Numerical machinery failed to reach its target (non-convergence, cap exceeded).
class SolverError : public std::runtime_error {
 public:
  explicit SolverError(const std::string& what, double residual = -1.0)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

// Shell-escape ladder ran out of budget; carries the last two normalized
// profiles (flat, in canonical boundary order) for post-mortems.
class LadderError : public SolverError {
 public:
  LadderError(const std::string& what, std::vector<double> prev, std::vector<double> last)
      : SolverError(what), prev_(std::move(prev)), last_(std::move(last)) {}
  const std::vector<double>& prev_profile() const { return prev_; }
  const std::vector<double>& last_profile() const { return last_; }

 private:
  std::vector<double> prev_, last_;
};

// Bad run configuration (unknown keys, out-of-range values, contradictory modes).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dbm
