#pragma once

#include "sgns/ultraspherical.hpp"

#include <span>
#include <string>
#include <string_view>

namespace sgns {

enum class Family { GNS0, GNS1, GNS2 };

std::string to_string(Family f);
/// Accepts "gns0", "GNS1", ... ; throws ParameterError otherwise.
Family parse_family(std::string_view name);

/// Family tag plus (d, p, theta, lambda).
struct InequalityParams {
  Family family = Family::GNS0;
  int d = 3;
  double p = 3.0;
  double theta = 1.0;
  double lambda = 1.0;

  /// Throws ParameterError naming the violated condition.
  void validate() const;
};

/// 2d/(d-2) for d >= 3, +inf otherwise.
double critical_exponent(int d);
double theta_star(int d, double p);
/// 2p theta / (2 - p(1-theta)); ParameterError when theta <= 1 - 2/p.
double q_exponent(double p, double theta);

struct QuotientReport {
  double value = 0;
  double kinetic = 0;  ///< ‖∇u‖₂²
  double mass = 0;     ///< ‖u‖₂²
  double lp = 0;       ///< ‖u‖_p
  double x_ratio = 0;  ///< ‖u‖_p^{2θ} / ‖u‖₂^{2θ}
};

/// The three integrals every quotient is built from.
struct ZonalNorms {
  double kinetic = 0;
  double mass = 0;
  double power = 0;  ///< ∫|u|^p
};
ZonalNorms zonal_norms(const Grid& g, const Vector& u, double p);

/// Quotient Q = A · M^{mass_exp} · S^{power_exp} with A = (p-2)‖∇u‖² + λ‖u‖², M = ‖u‖₂², S = ∫|u|^p.
struct QuotientExponents {
  double mass_exp;
  double power_exp;
};
QuotientExponents quotient_exponents(const InequalityParams& params);

QuotientReport quotient(const InequalityParams& params, const Grid& g, const ZonalFunction& u);
double deficit(const InequalityParams& params, const Grid& g, const ZonalFunction& u);

/// d-λ, d-λθ or dθ-λ: the sign of the second variation at constants along z.
double second_variation_coeff(const InequalityParams& params);

/// Limit of deficit(1+εz)/ε² as ε→0 by polynomial extrapolation in ε².
/// For GNS2 the positive factor (λ/(p-2))^{θ-1} is divided out, so in every
/// family the limit is second_variation_coeff/(d+1).
double perturbative_deficit(const InequalityParams& params, const GridPtr& g, std::span<const double> eps);

/// Coefficients of -Δu + linear·u = power·u^{p-1} at a critical point with quotient value mu.
struct ElCoefficients {
  double linear;
  double power;
};
ElCoefficients el_coefficients(const InequalityParams& params, const Grid& g, const ZonalFunction& u, double mu);

/// Euler–Lagrange residual of the family quotient, normalised by ‖u‖_∞^{p-1}.
ZonalFunction el_residual(const InequalityParams& params, const Grid& g, const ZonalFunction& u, double mu);

/// Residual of -Δu + λ/(p-2) u - u^{p-1}, normalised by ‖u‖_∞^{p-1}.
ZonalFunction el0_residual(double p, double lambda, const Grid& g, const ZonalFunction& u);

struct Reparametrization {
  double kappa = 0;
  double lambda = 0;
  double residual = 0;       ///< sup-norm EL0 residual of kappa·U
  double fitted_linear = 0;  ///< least-squares coefficients of -ΔU = -aU + bU^{p-1}
  double fitted_power = 0;
};

/// Maps a critical point U of a GNS1/GNS2 quotient with value mu to a
/// solution kappa·U of the GNS0 equation -Δu + λ/(p-2) u = u^{p-1}.
Reparametrization reparametrize(const ZonalFunction& U, const InequalityParams& params, double mu);

}  // namespace sgns
