#include "sgns/euclidean.hpp"

#include "sgns/error.hpp"
#include "sgns/functionals.hpp"

#include <boost/math/interpolators/quintic_hermite.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/bessel.hpp>
#include <boost/numeric/odeint/integrate/integrate_adaptive.hpp>
#include <boost/numeric/odeint/stepper/generation.hpp>
#include <boost/numeric/odeint/stepper/runge_kutta_dopri5.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

namespace sgns {

namespace odeint = boost::numeric::odeint;
namespace quad = boost::math::quadrature;

struct RadialFunction::Interp {
  boost::math::interpolators::quintic_hermite<std::vector<double>> spline;
};

namespace {

using Shot = std::array<double, 2>;

double signed_pow(double u, double e) { return std::copysign(std::pow(std::abs(u), e), u); }

struct RadialOde {
  int d;
  double p;
  void operator()(const Shot& y, Shot& dy, double r) const {
    dy[0] = y[1];
    dy[1] = -(d - 1) * y[1] / r + y[0] - signed_pow(y[0], p - 1.0);
  }
};

double second_from_ode(int d, double p, double r, double u, double du, bool linear) {
  if (r == 0.0) return (u - std::pow(u, p - 1.0)) / d;
  return -(d - 1) * du / r + u - (linear ? 0.0 : signed_pow(u, p - 1.0));
}

constexpr double kStart = 1e-3;
constexpr double kStep = 0.005;
constexpr double kHorizon = 100.0;

// Taylor start u0 + c2 r² + c4 r⁴ away from the coordinate singularity.
Shot series_start(int d, double p, double u0) {
  const double c2 = (u0 - std::pow(u0, p - 1.0)) / (2.0 * d);
  const double fp = 1.0 - (p - 1.0) * std::pow(u0, p - 2.0);
  const double c4 = fp * c2 / (4.0 * (d + 2.0));
  const double r = kStart;
  return {u0 + c2 * r * r + c4 * r * r * r * r, 2.0 * c2 * r + 4.0 * c4 * r * r * r};
}

enum class Outcome { Overshoot, Undershoot, Undecided };

Outcome classify(int d, double p, double u0, double tol) {
  auto stepper = odeint::make_controlled(tol, tol, odeint::runge_kutta_dopri5<Shot>());
  const RadialOde sys{d, p};
  Shot y = series_start(d, p, u0);
  double r = kStart, h = 1e-3;
  long guard = 0;
  while (r < kHorizon) {
    if (stepper.try_step(sys, y, r, h) == odeint::success) {
      if (y[0] < 0.0) return Outcome::Overshoot;
      if (y[1] > 0.0) return Outcome::Undershoot;
    }
    if (++guard > 10000000) throw NumericalError("ground_state: shooting integration stalled");
  }
  return Outcome::Undecided;
}

std::vector<Shot> trajectory(int d, double p, double u0, double tol, std::size_t n) {
  auto stepper = odeint::make_controlled(tol, tol, odeint::runge_kutta_dopri5<Shot>());
  const RadialOde sys{d, p};
  std::vector<Shot> out(n);
  out[0] = {u0, 0.0};
  Shot y = series_start(d, p, u0);
  double r = kStart;
  for (std::size_t i = 1; i < n; ++i) {
    const double target = i * kStep;
    odeint::integrate_adaptive(stepper, sys, y, r, target, 1e-3);
    r = target;
    out[i] = y;
  }
  return out;
}

double bessel_k(double nu, double r) { return boost::math::cyl_bessel_k(std::abs(nu), r); }

// r^{-ν}K_ν(r) solves u'' + (d-1)u'/r = u and decays.
double tail_shape(int d, double r) {
  const double nu = d / 2.0 - 1.0;
  return std::pow(r, -nu) * bessel_k(nu, r);
}

double tail_slope(int d, double r) {
  const double nu = d / 2.0 - 1.0;
  return -std::pow(r, -nu) * bessel_k(nu + 1.0, r);
}

double sphere_measure_const(int d) {
  return std::exp(std::lgamma((d + 1) / 2.0) - std::lgamma(d / 2.0)) / std::sqrt(std::numbers::pi);
}

double unit_sphere_area(int dim) {  // |𝕊^{dim}|
  return 2.0 * std::pow(std::numbers::pi, (dim + 1) / 2.0) / std::tgamma((dim + 1) / 2.0);
}

// ∫_0^rmax f(r) dr cell by cell on the profile's grid.
template <class F>
double grid_integral(const RadialFunction& u, F&& f) {
  const auto& r = u.nodes();
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < r.size(); ++i) s += quad::gauss<double, 10>::integrate(f, r[i], r[i + 1]);
  return s;
}

}  // namespace

double RadialFunction::value(double r) const {
  if (r < 0.0) throw ParameterError("RadialFunction: negative radius");
  if (r > rmax_) return tail_amplitude_ * tail_shape(d_, r);
  return interp_->spline(r);
}

double RadialFunction::derivative(double r) const {
  if (r < 0.0) throw ParameterError("RadialFunction: negative radius");
  if (r > rmax_) return tail_amplitude_ * tail_slope(d_, r);
  return interp_->spline.prime(r);
}

double RadialFunction::second_derivative(double r) const {
  if (r < 0.0) throw ParameterError("RadialFunction: negative radius");
  if (r > rmax_) return second_from_ode(d_, p_, r, value(r), derivative(r), true);
  return interp_->spline.double_prime(r);
}

double RadialFunction::el_residual() const {
  double worst = 0.0;
  for (std::size_t i = 0; i + 1 < nodes_.size() && nodes_[i + 1] <= matched_at_; ++i) {
    const double r = nodes_[i] + 0.5 * step_;
    const double u = value(r);
    const double res = second_derivative(r) + (d_ - 1) * derivative(r) / r + signed_pow(u, p_ - 1.0) - u;
    worst = std::max(worst, std::abs(res));
  }
  return worst / values_.front();
}

RadialFunction ground_state(int d, double p, double tol) {
  if (d < 1) throw ParameterError("ground_state: d must be >= 1");
  if (!(p > 2.0) || !(p < critical_exponent(d)))
    throw ParameterError("ground_state: requires 2 < p < 2d/(d-2)");
  if (!(tol > 0.0) || tol > 1e-4) throw ParameterError("ground_state: tol must lie in (0, 1e-4]");
  const double ode_tol = std::min(1e-13, 1e-3 * tol);

  // u(0) <= 1 stays at or below the constant solution, so it undershoots.
  double lo = 1.0, hi = 2.0;
  while (classify(d, p, hi, ode_tol) != Outcome::Overshoot) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e8) throw NumericalError("ground_state: shooting bracket not found");
  }
  for (int it = 0; it < 200 && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    const Outcome o = classify(d, p, mid, ode_tol);
    if (o == Outcome::Overshoot) {
      hi = mid;
    } else if (o == Outcome::Undershoot) {
      lo = mid;
    } else {
      lo = hi = mid;
    }
  }

  const auto n = static_cast<std::size_t>(std::ceil(kHorizon / kStep)) + 1;
  const auto a = trajectory(d, p, lo, ode_tol, n);
  const auto b = trajectory(d, p, hi, ode_tol, n);

  // The two bracketing shots agree until their exponential separation sets in.
  // Past that point, or once the dropped u^{p-1} term is below tol, the profile
  // is continued by the linear decay.
  const double u_switch = a[0][0] * std::pow(tol, 1.0 / (p - 1.0));
  std::size_t m = 1;
  while (m + 1 < n) {
    const double ua = a[m + 1][0], ub = b[m + 1][0];
    const double avg = 0.5 * (ua + ub);
    if (!(avg > 0.0) || std::abs(ua - ub) > tol * a[0][0] || a[m + 1][1] >= 0.0 || b[m + 1][1] >= 0.0) break;
    ++m;
    if (avg < u_switch) break;
  }
  if (m < 200) throw NumericalError("ground_state: shooting trajectory resolved only up to r=" + std::to_string(m * kStep));

  RadialFunction out;
  out.d_ = d;
  out.p_ = p;
  out.step_ = kStep;
  out.matched_at_ = m * kStep;
  const double u0 = 0.5 * (lo + hi);
  const double um = 0.5 * (a[m][0] + b[m][0]);
  out.tail_amplitude_ = um / tail_shape(d, out.matched_at_);

  std::vector<double> y, dy, d2y;
  for (std::size_t i = 0;; ++i) {
    const double r = i * kStep;
    double u, du;
    const bool tail = i > m;
    if (tail) {
      u = out.tail_amplitude_ * tail_shape(d, r);
      du = out.tail_amplitude_ * tail_slope(d, r);
    } else {
      u = 0.5 * (a[i][0] + b[i][0]);
      du = 0.5 * (a[i][1] + b[i][1]);
    }
    out.nodes_.push_back(r);
    y.push_back(u);
    dy.push_back(du);
    d2y.push_back(second_from_ode(d, p, r, u, du, tail));
    if (tail && u < 1e-13 * u0) break;
    if (i > 100000) throw NumericalError("ground_state: tail does not decay");
  }
  out.rmax_ = out.nodes_.back();
  out.values_ = y;
  for (std::size_t i = 1; i < y.size(); ++i)
    if (!(y[i] < y[i - 1]) || !(y[i] > 0.0)) throw NumericalError("ground_state: profile is not strictly decreasing");
  // The cardinal variant of this interpolator mis-scales its second derivative
  // in Boost 1.74, so the general one is used with explicit abscissae.
  std::vector<double> x = out.nodes_;
  out.interp_ = std::make_shared<const RadialFunction::Interp>(RadialFunction::Interp{
      boost::math::interpolators::quintic_hermite<std::vector<double>>(std::move(x), std::move(y), std::move(dy),
                                                                       std::move(d2y))});
  return out;
}

RadialNorms radial_norms(const RadialFunction& u) {
  const int d = u.d();
  const double p = u.p();
  const double area = d == 1 ? 2.0 : unit_sphere_area(d - 1);
  auto w = [d](double r) { return std::pow(r, d - 1); };
  RadialNorms n;
  n.kinetic = area * grid_integral(u, [&](double r) { return std::pow(u.derivative(r), 2) * w(r); });
  n.mass = area * grid_integral(u, [&](double r) { return std::pow(u.value(r), 2) * w(r); });
  n.power = area * grid_integral(u, [&](double r) { return std::pow(std::abs(u.value(r)), p) * w(r); });
  return n;
}

EuclideanConstants gns_constants(int d, double p) {
  const auto v = ground_state(d, p);
  const auto n = radial_norms(v);
  EuclideanConstants c;
  c.theta_star = theta_star(d, p);
  const double lp2 = std::pow(n.power, 2.0 / p);
  c.K_pd = (n.kinetic + n.mass) / lp2;
  c.C_GNS = std::pow(n.kinetic, c.theta_star) * std::pow(n.mass, 1.0 - c.theta_star) / lp2;
  return c;
}

double sphere_area(int d) {
  if (d < 1) throw ParameterError("sphere_area: d must be >= 1");
  return unit_sphere_area(d);
}

double gamma_exponent(int d, double p, double theta) {
  if (!(theta >= 0.0 && theta <= 1.0)) throw ParameterError("gamma_exponent: theta must lie in [0, 1]");
  if (!(p < critical_exponent(d))) throw ParameterError("gamma_exponent: p must be subcritical");
  return 1.0 - theta * theta_star(d, p);
}

double mu_infinity(int d, double p, double theta) {
  const double t = 1.0 - gamma_exponent(d, p, theta);
  const double delta = 2.0 * d - p * (d - 2.0);
  const double C = gns_constants(d, p).C_GNS;
  // m → 1/√2 turns every weight into a power of 2; the remaining dilation
  // optimum of (s a + b)s^{-t} gives t^{-t}(1-t)^{t-1} a^t b^{1-t}.
  return 4.0 * std::pow(4.0 / (p - 2.0), -t) * std::pow(sphere_area(d), -theta * (1.0 - 2.0 / p)) *
         std::pow(2.0, -delta * theta / p) * std::pow(4.0, -(1.0 - theta)) * std::pow(t, -t) *
         std::pow(1.0 - t, t - 1.0) * std::pow(C, theta);
}

double prelimit_quotient(int d, double p, double theta, double lambda) {
  if (!(theta > 0.0 && theta <= 1.0)) throw ParameterError("prelimit_quotient: theta must lie in (0, 1]");
  const double lstar = 0.25 * d * (d - 2.0) * (p - 2.0);
  if (!(lambda > lstar)) throw ParameterError("prelimit_quotient: requires lambda > d(d-2)(p-2)/4");
  const double t = 1.0 - gamma_exponent(d, p, theta);
  const auto v = ground_state(d, p);
  const auto n = radial_norms(v);
  // Dilation v(hx) minimising the limit quotient, then concentration by S.
  const double h = std::sqrt(t * n.mass / ((1.0 - t) * n.kinetic));
  const double scale = h * 2.0 * std::sqrt((lambda - lstar) / (p - 2.0));
  const double cd = sphere_measure_const(d) * std::pow(2.0, d);

  // Sphere integrals in the stereographic radius r = s/scale: dσ = c_d 2^d r^{d-1}(1+r²)^{-d} dr.
  auto sphere = [&](auto&& f) {
    return grid_integral(v, [&](double s) {
      const double r = s / scale;
      return cd * f(s, r) * std::pow(r, d - 1) * std::pow(1.0 + r * r, -d) / scale;
    });
  };
  auto lift = [&](double s, double r) { return std::pow(0.5 * (1.0 + r * r), 0.5 * (d - 2.0)) * v.value(s); };
  const double grad = sphere([&](double s, double r) {
    const double m = std::sqrt(0.5 * (1.0 + r * r));
    const double du = (d - 2.0) * std::pow(m, d - 3.0) * (r / (2.0 * m)) * v.value(s) +
                      std::pow(m, d - 2.0) * v.derivative(s) * scale;
    return std::pow(m, 4) * du * du;
  });
  const double l2 = sphere([&](double s, double r) { return std::pow(lift(s, r), 2); });
  const double lp = sphere([&](double s, double r) { return std::pow(lift(s, r), p); });
  return ((p - 2.0) * grad + lambda * l2) / (std::pow(lp, 2.0 * theta / p) * std::pow(l2, 1.0 - theta));
}

StereographicCheck stereographic_check(int d, const RadialFn& v, const RadialFn& dv, double q) {
  if (d < 3) throw ParameterError("stereographic_check: requires d >= 3");
  if (!(q >= 1.0)) throw ParameterError("stereographic_check: requires q >= 1");
  const double cd = sphere_measure_const(d);
  const double ratio = unit_sphere_area(d - 1) / unit_sphere_area(d);
  const double delta = 2.0 * d - q * (d - 2.0);
  auto m_of = [](double r) { return std::sqrt(0.5 * (1.0 + r * r)); };
  auto r_of = [](double z) { return std::sqrt((1.0 + z) / (1.0 - z)); };
  auto u_of = [&](double r) { return std::pow(m_of(r), d - 2.0) * v(r); };
  auto du_dz = [&](double r) {
    const double m = m_of(r);
    const double du_dr = (d - 2.0) * std::pow(m, d - 3.0) * (r / (2.0 * m)) * v(r) + std::pow(m, d - 2.0) * dv(r);
    return du_dr * std::pow(1.0 + r * r, 2) / (4.0 * r);
  };

  quad::tanh_sinh<double> ts;
  quad::exp_sinh<double> es;
  const double qtol = 1e-12;
  double err = 0.0, l1 = 0.0;
  auto guard = [&](double value, const char* what) {
    if (!std::isfinite(value) || err > 1e-8 * std::max(std::abs(value), 1e-300))
      throw NumericalError(std::string("stereographic_check: insufficient decay of v for quadrature (") + what + ")");
    return value;
  };

  StereographicCheck c;
  c.sphere_dirichlet = guard(cd * ts.integrate([&](double z) {
    if (z <= -1.0 || z >= 1.0) return 0.0;
    const double r = r_of(z), s = 1.0 - z * z;
    const double u = u_of(r), g = du_dz(r);
    const double f = (s * g * g + 0.25 * d * (d - 2.0) * u * u) * std::pow(s, 0.5 * d - 1.0);
    return std::isfinite(f) ? f : 0.0;
  }, -1.0, 1.0, qtol, &err, &l1), "sphere dirichlet");
  c.euclid_dirichlet = guard(ratio * es.integrate([&](double r) {
    const double g = dv(r);
    const double f = g * g * std::pow(r, d - 1);
    return std::isfinite(f) ? f : 0.0;  // far tail: 0·∞ from under/overflow
  }, 0.0, std::numeric_limits<double>::infinity(), qtol, &err, &l1), "euclidean dirichlet");
  c.sphere_lq = guard(cd * ts.integrate([&](double z) {
    if (z <= -1.0 || z >= 1.0) return 0.0;
    const double f = std::pow(std::abs(u_of(r_of(z))), q) * std::pow(1.0 - z * z, 0.5 * d - 1.0);
    return std::isfinite(f) ? f : 0.0;
  }, -1.0, 1.0, qtol, &err, &l1), "sphere lq");
  c.euclid_lq = guard(ratio * es.integrate([&](double r) {
    const double f = std::pow(std::abs(v(r)), q) * std::pow(m_of(r), -delta) * std::pow(r, d - 1);
    return std::isfinite(f) ? f : 0.0;
  }, 0.0, std::numeric_limits<double>::infinity(), qtol, &err, &l1), "euclidean lq");
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); };
  c.residual_dirichlet = rel(c.sphere_dirichlet, c.euclid_dirichlet);
  c.residual_lq = rel(c.sphere_lq, c.euclid_lq);
  return c;
}

StereographicCheck stereographic_check(int d, const RadialFunction& v, double q) {
  if (v.d() != d) throw ParameterError("stereographic_check: profile dimension differs from d");
  return stereographic_check(
      d, [&v](double r) { return v.value(r); }, [&v](double r) { return v.derivative(r); }, q);
}

}  // namespace sgns
