#include "sgns/functionals.hpp"

#include "sgns/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <vector>

namespace sgns {

std::string to_string(Family f) {
  switch (f) {
    case Family::GNS0: return "gns0";
    case Family::GNS1: return "gns1";
    case Family::GNS2: return "gns2";
  }
  return "?";
}

Family parse_family(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "gns0") return Family::GNS0;
  if (s == "gns1") return Family::GNS1;
  if (s == "gns2") return Family::GNS2;
  throw ParameterError("unknown family '" + std::string(name) + "' (expected gns0, gns1 or gns2)");
}

double critical_exponent(int d) {
  return d >= 3 ? 2.0 * d / (d - 2.0) : std::numeric_limits<double>::infinity();
}

double theta_star(int d, double p) {
  if (d < 1) throw ParameterError("theta_star: d must be >= 1");
  if (!(p > 2.0)) throw ParameterError("theta_star: p must be > 2");
  return d * (p - 2.0) / (2.0 * p);
}

double q_exponent(double p, double theta) {
  const double den = 2.0 - p * (1.0 - theta);
  if (!(den > 0.0)) throw ParameterError("q_exponent: requires theta > 1 - 2/p");
  return 2.0 * p * theta / den;
}

void InequalityParams::validate() const {
  if (d < 2) throw ParameterError("invariant violated: d >= 2 (got d=" + std::to_string(d) + ")");
  if (!std::isfinite(p) || !(p > 2.0)) throw ParameterError("invariant violated: p > 2");
  if (!(p < critical_exponent(d)))
    throw ParameterError("invariant violated: p < 2d/(d-2) (strictly subcritical), got p=" + std::to_string(p));
  if (!(theta >= 0.0 && theta <= 1.0)) throw ParameterError("invariant violated: theta in [0, 1]");
  if (!std::isfinite(lambda) || !(lambda > 0.0)) throw ParameterError("invariant violated: lambda > 0");
  if (family == Family::GNS0 && theta != 1.0) throw ParameterError("invariant violated: GNS0 forces theta = 1");
  if (family == Family::GNS2) {
    if (theta < theta_star(d, p)) throw ParameterError("invariant violated: GNS2 requires theta >= theta_star(d, p)");
    if (!(theta > 1.0 - 2.0 / p)) throw ParameterError("invariant violated: GNS2 requires theta > 1 - 2/p");
  }
}

ZonalNorms zonal_norms(const Grid& g, const Vector& u, double p) {
  const Vector c = g.coefficients(u);
  ZonalNorms n;
  n.kinetic = g.eigenvalues().dot(c.cwiseAbs2());
  n.mass = g.weights().dot(u.cwiseAbs2());
  n.power = g.weights().dot(u.cwiseAbs().array().pow(p).matrix());
  return n;
}

QuotientExponents quotient_exponents(const InequalityParams& params) {
  const double th = params.theta;
  if (params.family == Family::GNS2) return {1.0 / th - 1.0, -2.0 / (th * params.p)};
  return {-(1.0 - th), -2.0 * th / params.p};
}

namespace {

QuotientReport report_from(const InequalityParams& params, const ZonalNorms& n) {
  if (!(n.mass > 0.0)) throw ParameterError("quotient: zero function");
  QuotientReport r;
  r.kinetic = n.kinetic;
  r.mass = n.mass;
  r.lp = std::pow(n.power, 1.0 / params.p);
  r.x_ratio = std::pow(r.lp * r.lp / n.mass, params.theta);
  const double a = (params.p - 2.0) * n.kinetic + params.lambda * n.mass;
  const auto e = quotient_exponents(params);
  r.value = a * std::pow(n.mass, e.mass_exp) * std::pow(n.power, e.power_exp);
  if (!std::isfinite(r.value)) throw NumericalError("quotient evaluates non-finite");
  return r;
}

double sup_norm(const Vector& v) { return v.cwiseAbs().maxCoeff(); }

}  // namespace

QuotientReport quotient(const InequalityParams& params, const Grid& g, const ZonalFunction& u) {
  params.validate();
  require_same_grid(g, u);
  return report_from(params, zonal_norms(g, u.values(), params.p));
}

double deficit(const InequalityParams& params, const Grid& g, const ZonalFunction& u) {
  params.validate();
  require_same_grid(g, u);
  const ZonalNorms n = zonal_norms(g, u.values(), params.p);
  if (!(n.mass > 0.0)) throw ParameterError("deficit: zero function");
  const double L = params.lambda / (params.p - 2.0);
  const double lp2 = std::pow(n.power, 2.0 / params.p);
  const double th = params.theta;
  switch (params.family) {
    case Family::GNS0: return n.kinetic - L * (lp2 - n.mass);
    case Family::GNS1: return n.kinetic + L * (n.mass - std::pow(lp2, th) * std::pow(n.mass, 1.0 - th));
    case Family::GNS2:
      return std::pow(n.kinetic + L * n.mass, th) * std::pow(n.mass, 1.0 - th) - std::pow(L, th) * lp2;
  }
  return 0.0;
}

double second_variation_coeff(const InequalityParams& params) {
  params.validate();
  const double d = params.d;
  switch (params.family) {
    case Family::GNS0: return d - params.lambda;
    case Family::GNS1: return d - params.lambda * params.theta;
    case Family::GNS2: return d * params.theta - params.lambda;
  }
  return 0.0;
}

double perturbative_deficit(const InequalityParams& params, const GridPtr& g, std::span<const double> eps) {
  params.validate();
  if (eps.size() < 2) throw ParameterError("perturbative_deficit: need at least two eps values");
  std::vector<double> h, f;
  for (double e : eps) {
    if (!(e > 0.0 && e <= 0.1)) throw ParameterError("perturbative_deficit: eps values must lie in (0, 0.1]");
    const auto u = ZonalFunction::sample(g, [e](double z) { return 1.0 + e * z; });
    h.push_back(e * e);
    f.push_back(deficit(params, *g, u) / (e * e));
  }
  if (params.family == Family::GNS2) {
    const double L = params.lambda / (params.p - 2.0);
    for (double& v : f) v /= std::pow(L, params.theta - 1.0);
  }
  // Neville's scheme at h = 0; the diagonal gives successively higher-order estimates.
  const std::size_t n = h.size();
  std::vector<double> t = f;
  std::vector<double> diag{t[0]};
  for (std::size_t k = 1; k < n; ++k) {
    for (std::size_t i = 0; i + k < n; ++i) t[i] = (h[i + k] * t[i] - h[i] * t[i + 1]) / (h[i + k] - h[i]);
    diag.push_back(t[0]);
  }
  const double est = diag.back();
  const double change = std::abs(diag.back() - diag[diag.size() - 2]);
  if (!std::isfinite(est) || change > 1e-4 * std::max(1.0, std::abs(est)))
    throw NumericalError("perturbative_deficit: extrapolation did not settle (last correction " +
                         std::to_string(change) + ")");
  return est;
}

ElCoefficients el_coefficients(const InequalityParams& params, const Grid& g, const ZonalFunction& u, double mu) {
  params.validate();
  require_same_grid(g, u);
  if (!(mu > 0.0)) throw ParameterError("el_coefficients: mu must be positive");
  const ZonalNorms n = zonal_norms(g, u.values(), params.p);
  const auto e = quotient_exponents(params);
  const double a = mu * std::pow(n.mass, -e.mass_exp) * std::pow(n.power, -e.power_exp);
  const double pm2 = params.p - 2.0;
  return {(params.lambda + e.mass_exp * a / n.mass) / pm2, -e.power_exp * params.p * a / (2.0 * pm2 * n.power)};
}

ZonalFunction el_residual(const InequalityParams& params, const Grid& g, const ZonalFunction& u, double mu) {
  if (!u.is_positive()) throw ParameterError("el_residual: u must be positive");
  const ElCoefficients c = el_coefficients(params, g, u, mu);
  const Vector& v = u.values();
  Vector r = -laplace_beltrami(g, u).values() + c.linear * v - c.power * v.array().pow(params.p - 1.0).matrix();
  r /= std::pow(sup_norm(v), params.p - 1.0);
  return ZonalFunction(u.grid_ptr(), std::move(r));
}

ZonalFunction el0_residual(double p, double lambda, const Grid& g, const ZonalFunction& u) {
  require_same_grid(g, u);
  if (!u.is_positive()) throw ParameterError("el0_residual: u must be positive");
  const Vector& v = u.values();
  Vector r = -laplace_beltrami(g, u).values() + (lambda / (p - 2.0)) * v - v.array().pow(p - 1.0).matrix();
  r /= std::pow(sup_norm(v), p - 1.0);
  return ZonalFunction(u.grid_ptr(), std::move(r));
}

Reparametrization reparametrize(const ZonalFunction& U, const InequalityParams& params, double mu) {
  params.validate();
  if (!U.is_positive()) throw ParameterError("reparametrize: U must be positive");
  const Grid& g = U.grid();
  const Vector& v = U.values();
  const Vector pw = v.array().pow(params.p - 1.0).matrix();
  const Vector lap = laplace_beltrami(g, U).values();

  Reparametrization out;
  const double mean = g.weights().dot(v);
  const bool constant = sup_norm(v.array() - mean) <= 1e-10 * std::abs(mean);
  if (constant) {
    // -ΔU vanishes; only the combination a - b U^{p-2} is determined by the
    // equation, so the family's own multipliers fix both coefficients.
    const ElCoefficients c = el_coefficients(params, g, U, mu);
    out.fitted_linear = c.linear;
    out.fitted_power = c.power;
  } else {
    // Weighted least squares for -ΔU = -a U + b U^{p-1}.
    Eigen::Matrix2d m;
    Eigen::Vector2d rhs;
    const Vector& w = g.weights();
    m(0, 0) = w.dot(v.cwiseAbs2());
    m(0, 1) = m(1, 0) = -w.dot(v.cwiseProduct(pw));
    m(1, 1) = w.dot(pw.cwiseAbs2());
    rhs[0] = w.dot(v.cwiseProduct(lap));
    rhs[1] = -w.dot(pw.cwiseProduct(lap));
    const Eigen::Vector2d ab = m.ldlt().solve(rhs);
    out.fitted_linear = ab[0];
    out.fitted_power = ab[1];
  }
  if (!(out.fitted_power > 0.0)) throw NumericalError("reparametrize: degenerate branch (kappa <= 0)");
  out.lambda = (params.p - 2.0) * out.fitted_linear;
  if (!(out.lambda > 0.0)) throw NumericalError("reparametrize: degenerate branch (lambda <= 0)");
  out.kappa = std::pow(out.fitted_power, 1.0 / (params.p - 2.0));
  out.residual = sup_norm(el0_residual(params.p, out.lambda, g, U.scaled(out.kappa)).values());
  return out;
}

}  // namespace sgns
