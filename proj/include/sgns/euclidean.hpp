#pragma once

#include <functional>
#include <memory>
#include <vector>

namespace sgns {

/// Positive decreasing radial profile on ℝ^d, sampled on a uniform grid
/// r_i = i·h over [0, rmax] and extended beyond by the linear decay
/// A·r^{-ν}K_ν(r), ν = d/2 - 1.
class RadialFunction {
 public:
  int d() const { return d_; }
  double p() const { return p_; }
  double rmax() const { return rmax_; }
  double step() const { return step_; }
  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<double>& values() const { return values_; }
  /// Radius past which values come from the decay tail rather than the shooting trajectory.
  double matched_at() const { return matched_at_; }
  double tail_amplitude() const { return tail_amplitude_; }

  double value(double r) const;
  double derivative(double r) const;
  double second_derivative(double r) const;

  /// sup over cell midpoints in (0, matched_at) of |u'' + (d-1)u'/r + u^{p-1} - u| / u(0).
  double el_residual() const;

 private:
  struct Interp;
  friend RadialFunction ground_state(int d, double p, double tol);

  int d_ = 0;
  double p_ = 0, rmax_ = 0, step_ = 0, matched_at_ = 0, tail_amplitude_ = 0;
  std::vector<double> nodes_, values_;
  std::shared_ptr<const Interp> interp_;
};

/// Positive decaying radial solution of -Δu + u = u^{p-1} on ℝ^d by shooting on u(0).
/// tol is the target pointwise accuracy of the trajectory.
RadialFunction ground_state(int d, double p, double tol = 1e-10);

/// Squared norms on ℝ^d: ∫|∇u|², ∫u², and ∫|u|^p (not squared).
struct RadialNorms {
  double kinetic;
  double mass;
  double power;
};

RadialNorms radial_norms(const RadialFunction& u);

struct EuclideanConstants {
  double K_pd;
  double C_GNS;
  double theta_star;
};

/// K = (‖∇v‖² + ‖v‖²)/‖v‖_p² and C = ‖∇v‖^{2θ⋆}‖v‖^{2(1-θ⋆)}/‖v‖_p², both at the ground state.
EuclideanConstants gns_constants(int d, double p);

/// |𝕊^d| = 2π^{(d+1)/2}/Γ((d+1)/2).
double sphere_area(int d);

/// 1 - θθ⋆.
double gamma_exponent(int d, double p, double theta);

/// Coefficient of λ^γ in the large-λ behaviour of the GNS1 constant: the
/// concentrated stereographic quotient with m → 1/√2, minimised over dilations.
double mu_infinity(int d, double p, double theta);

/// GNS1 quotient on 𝕊^d of the stereographic lift of the ground state rescaled
/// to concentration scale sqrt((p-2)/(4(λ-λ⋆))), λ⋆ = d(d-2)(p-2)/4, evaluated
/// by quadrature on the sphere. Tends to mu_infinity·λ^γ.
double prelimit_quotient(int d, double p, double theta, double lambda);

struct StereographicCheck {
  double sphere_dirichlet;
  double euclid_dirichlet;
  double sphere_lq;
  double euclid_lq;
  double residual_dirichlet;
  double residual_lq;
};

using RadialFn = std::function<double(double)>;

/// Lifts v to u on 𝕊^d with (u∘S⁻¹)(x) = m(r)^{d-2} v(x), m(r) = sqrt((1+r²)/2),
/// and compares ∫|∇u|² + d(d-2)/4 ∫u² with |𝕊^d|⁻¹∫|∇v|² and ∫|u|^q with
/// |𝕊^d|⁻¹∫|v|^q m^{-δ(q)}, δ(q) = 2d - q(d-2). Sphere integrals use the polar
/// variable z, Euclidean ones the radius.
StereographicCheck stereographic_check(int d, const RadialFn& v, const RadialFn& dv, double q);
StereographicCheck stereographic_check(int d, const RadialFunction& v, double q);

}  // namespace sgns
