#pragma once

// Adaptive Rosenbrock integration for stiff systems with positive states.
// Kept behind a plain interface: the backing stepper is compiled separately.

#include <functional>
#include <vector>

namespace sgns::detail {

using StateVec = std::vector<double>;

struct StiffSystem {
  std::function<void(const StateVec& x, StateVec& dxdt)> rhs;
  /// Row-major n×n Jacobian of rhs.
  std::function<void(const StateVec& x, StateVec& jac)> jacobian;
};

/// Integrates from t = 0, calling observe(t, x) at t = 0, dt, 2dt, ..., t_end.
/// Throws NumericalError if a component becomes non-positive or the step collapses.
void integrate_stiff(const StiffSystem& sys, StateVec x0, double t_end, double dt, double tol,
                     const std::function<void(double, const StateVec&)>& observe);

}  // namespace sgns::detail
