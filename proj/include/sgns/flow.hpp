#pragma once

#include "sgns/functionals.hpp"
#include "sgns/ultraspherical.hpp"

#include <optional>
#include <vector>

namespace sgns {

struct MInterval {
  double lower;
  double upper;
};

/// [dp+2 ± sqrt(d(p-1)(2d-(d-2)p))] / ((d+2)p).
MInterval m_range(int d, double p);

/// Diffusion exponent m with the derived beta = 2/(2-p(1-m)) and kappa = beta(p-2)+1.
struct FlowParams {
  int d = 3;
  double p = 4;
  double m = 0.7;
  double beta = 2.5;
  double kappa = 6;
};

FlowParams flow_params(int d, double p, double m);

struct BECoeffs {
  double a, b, c;
  double discriminant;  ///< b² - ac
};

/// a = 1, b = (κ+β-1)(d-1)/(d+2), c = (κ+β-1)d/(d+2) + κ(β-1).
BECoeffs be_coeffs(const FlowParams& fp);

/// The two values of m where b² - ac vanishes; b² - ac < 0 between them
/// (the pole m = 1 - 2/p excluded when it falls inside).
MInterval be_discriminant_roots(int d, double p);

/// ∫ (Δu + κ|∇u|²/u)(Δu + (β-1)|∇u|²/u) dσ.
double k_functional(const Grid& g, const ZonalFunction& u, const FlowParams& fp);

/// ∫ (ℓ² - 2bℓ𝓂 + c𝓂²) dσ with ℓ = (1-z²)u'' and 𝓂 = (1-z²)u'²/u. For zonal u this
/// equals k[u] - d∫|∇u|², so the pointwise sign of the quadratic form decides the inequality.
double be_remainder(const Grid& g, const ZonalFunction& u, const FlowParams& fp);

struct Violator {
  bool found = false;
  double gap = 0;        ///< k[u] - d∫|∇u|² at the best candidate
  double amplitude = 0;  ///< a in u = (1+az)^s
  std::optional<ZonalFunction> u;
};

/// Tries u = (1+az)^s with s = 1/(1-b) (exp(az) when b = 1), which makes
/// ℓ/𝓂 = b pointwise, so the remainder integrand is 𝓂²(c - b²).
Violator find_be_violator(const GridPtr& g, const FlowParams& fp);

struct FlowTrace {
  FlowParams params;
  std::vector<double> times;
  std::vector<double> mass;        ///< ∫ w^{βp}
  std::vector<double> dirichlet;   ///< ∫ |∇w^β|²
  std::vector<double> l2beta;      ///< ∫ w^{2β}
  std::vector<double> production;  ///< ∫ |∇w|²
  std::vector<double> entropy;     ///< family deficit of w^β, when requested
  std::vector<ZonalFunction> states;
};

/// Integrates w_t = w^{2-2β}(Δw + κ|∇w|²/w) with a linearly implicit adaptive
/// Rosenbrock method, sampling every dt up to t_end.
FlowTrace evolve(const GridPtr& g, const FlowParams& fp, const ZonalFunction& w0, double t_end, double dt,
                 const std::optional<InequalityParams>& entropy_params = std::nullopt);

/// Integrates ρ_t = Δ(ρ^m) up to t_end and returns ρ(t_end).
ZonalFunction evolve_density(const GridPtr& g, double m, const ZonalFunction& rho0, double t_end);

/// Fourth-order centred differences of samples on a uniform time grid; the
/// two points at each end are NaN.
std::vector<double> time_derivative(const std::vector<double>& times, const std::vector<double>& values);

struct EntropyStep {
  double time = 0;
  double deficit = 0;
  double rate = 0;   ///< finite-difference rate of the deficit
  double bound = 0;  ///< dissipation bound; NaN when none is available
  bool ok = true;
};

struct EntropyReport {
  std::vector<EntropyStep> steps;
  bool bounds_hold = true;
  bool monotone = true;
  double terminal_deficit = 0;
  double max_excess = 0;  ///< largest rate - bound over checked steps, -inf if none
};

/// Checks the entropy dissipation bound along a flow trace:
/// GNS0: dF/dt ≤ -2β²(d-λ)∫|∇w|²; GNS1: dF/dt ≤ -2β²(d + λ((1-θ)x - 1))∫|∇w|².
EntropyReport entropy_report(const FlowTrace& trace, const InequalityParams& params);

}  // namespace sgns
