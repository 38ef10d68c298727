#include "sgns/flow.hpp"

#include "sgns/error.hpp"

#include "stiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace sgns {

MInterval m_range(int d, double p) {
  if (d < 2) throw ParameterError("m_range: d must be >= 2");
  const double rad = d * (p - 1.0) * (2.0 * d - (d - 2.0) * p);
  if (!(p >= 1.0) || rad < 0.0) throw ParameterError("m_range: requires 1 <= p <= 2d/(d-2)");
  const double s = std::sqrt(rad);
  const double den = (d + 2.0) * p;
  return {(d * p + 2.0 - s) / den, (d * p + 2.0 + s) / den};
}

FlowParams flow_params(int d, double p, double m) {
  if (d < 2) throw ParameterError("flow_params: d must be >= 2");
  if (!(m > 0.0)) throw ParameterError("flow_params: m must be positive");
  const double den = 2.0 - p * (1.0 - m);
  if (std::abs(den) < 1e-12)
    throw ParameterError("flow_params: unsupported exceptional case, beta has a pole at m = 1 - 2/p");
  if (!(p > 1.0) || !(p < critical_exponent(d)))
    throw ParameterError("flow_params: requires 1 < p < 2d/(d-2)");
  FlowParams fp;
  fp.d = d;
  fp.p = p;
  fp.m = m;
  fp.beta = 2.0 / den;
  fp.kappa = fp.beta * (p - 2.0) + 1.0;
  return fp;
}

BECoeffs be_coeffs(const FlowParams& fp) {
  const double d = fp.d;
  const double s = fp.kappa + fp.beta - 1.0;
  BECoeffs c;
  c.a = 1.0;
  c.b = s * (d - 1.0) / (d + 2.0);
  c.c = s * d / (d + 2.0) + fp.kappa * (fp.beta - 1.0);
  c.discriminant = c.b * c.b - c.a * c.c;
  return c;
}

MInterval be_discriminant_roots(int d, double p) {
  if (d < 2 || !(p > 1.0)) throw ParameterError("be_discriminant_roots: requires d >= 2, p > 1");
  // With κ = β(p-2)+1 the discriminant is Aβ² + Bβ + 1.
  const double dd = d;
  const double A = std::pow((p - 1.0) * (dd - 1.0) / (dd + 2.0), 2) - (p - 2.0);
  const double B = (p - 3.0) - (p - 1.0) * dd / (dd + 2.0);
  if (std::abs(A) < 1e-14) throw ParameterError("be_discriminant_roots: degenerate (linear) discriminant");
  const double disc = B * B - 4.0 * A;
  if (disc < 0.0) throw ParameterError("be_discriminant_roots: discriminant has no real root");
  const double q = -0.5 * (B + std::copysign(std::sqrt(disc), B));
  const double beta1 = q / A, beta2 = 1.0 / q;
  auto to_m = [p](double beta) { return 1.0 + (2.0 / p) * (1.0 / beta - 1.0); };
  const double m1 = to_m(beta1), m2 = to_m(beta2);
  return {std::min(m1, m2), std::max(m1, m2)};
}

namespace {

Vector one_minus_z2(const Grid& g) { return (1.0 - g.nodes().array().square()).matrix(); }

void require_positive(const ZonalFunction& u, const char* who) {
  if (!u.is_positive()) throw ParameterError(std::string(who) + ": function must be positive");
}

}  // namespace

double k_functional(const Grid& g, const ZonalFunction& u, const FlowParams& fp) {
  require_same_grid(g, u);
  require_positive(u, "k_functional");
  const Vector lap = laplace_beltrami(g, u).values();
  const Vector du = g.diff() * u.values();
  const Vector grad2 = one_minus_z2(g).cwiseProduct(du.cwiseAbs2()).cwiseQuotient(u.values());
  const Vector f1 = lap + fp.kappa * grad2;
  const Vector f2 = lap + (fp.beta - 1.0) * grad2;
  return g.weights().dot(f1.cwiseProduct(f2));
}

double be_remainder(const Grid& g, const ZonalFunction& u, const FlowParams& fp) {
  require_same_grid(g, u);
  require_positive(u, "be_remainder");
  const BECoeffs c = be_coeffs(fp);
  const Vector du = g.diff() * u.values();
  const Vector d2u = g.diff() * du;
  const Vector s = one_minus_z2(g);
  const Vector l = s.cwiseProduct(d2u);
  const Vector m = s.cwiseProduct(du.cwiseAbs2()).cwiseQuotient(u.values());
  const Vector q = l.cwiseAbs2() - 2.0 * c.b * l.cwiseProduct(m) + c.c * m.cwiseAbs2();
  return g.weights().dot(q);
}

Violator find_be_violator(const GridPtr& g, const FlowParams& fp) {
  const BECoeffs c = be_coeffs(fp);
  const bool exponential = std::abs(1.0 - c.b) < 1e-12;
  const double s = exponential ? 0.0 : 1.0 / (1.0 - c.b);
  Violator best;
  best.gap = std::numeric_limits<double>::infinity();
  for (double a : {0.02, 0.05, 0.1, 0.2, 0.3, 0.45, 0.6, 0.75, 0.9}) {
    // Keep the dynamic range of u moderate so the grid resolves it.
    const double spread = exponential ? 2.0 * a : std::abs(s) * std::log((1.0 + a) / (1.0 - a));
    if (spread > 30.0) continue;
    const auto u = ZonalFunction::sample(g, [&](double z) { return exponential ? std::exp(a * z) : std::pow(1.0 + a * z, s); });
    const double gap = k_functional(*g, u, fp) - g->d() * grad_seminorm_sq(*g, u);
    if (gap < best.gap) {
      best.gap = gap;
      best.amplitude = a;
      best.u = u;
    }
  }
  if (best.u) {
    const double scale = g->d() * grad_seminorm_sq(*g, *best.u);
    best.found = best.gap < -1e-9 * std::max(scale, 1e-300);
  }
  return best;
}

namespace {

using detail::StateVec;

Matrix laplacian_matrix(const Grid& g) {
  return -(g.sqrt_weights().cwiseInverse().asDiagonal() * g.stiffness() * g.sqrt_weights().asDiagonal());
}

Eigen::Map<const Vector> view(const StateVec& x) { return {x.data(), static_cast<Eigen::Index>(x.size())}; }

void store(const Matrix& j, StateVec& out) {
  out.resize(j.size());
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(out.data(), j.rows(), j.cols()) = j;
}

void store(const Vector& v, StateVec& out) { out.assign(v.data(), v.data() + v.size()); }

constexpr double kTol = 1e-12;

// w_t = w^{2-2β}(Δw + κ(1-z²)w'²/w)
detail::StiffSystem weighted_flow(const Matrix& lap, const Matrix& D, const Vector& s, double beta, double kappa) {
  detail::StiffSystem sys;
  sys.rhs = [&lap, &D, s, beta, kappa](const StateVec& x, StateVec& dxdt) {
    const auto w = view(x);
    if (w.minCoeff() <= 0.0) {
      dxdt.assign(x.size(), 1e300);  // forces step rejection
      return;
    }
    const Vector dw = D * w;
    const Vector g2 = s.cwiseProduct(dw.cwiseAbs2());
    const Vector f = (w.array().pow(2.0 - 2.0 * beta) * ((lap * w).array() + kappa * g2.array() / w.array())).matrix();
    store(f, dxdt);
  };
  sys.jacobian = [&lap, &D, s, beta, kappa](const StateVec& x, StateVec& jac) {
    const Vector w = view(x).cwiseAbs();
    const Vector dw = D * w;
    const Vector g2 = s.cwiseProduct(dw.cwiseAbs2());
    const Vector inner = lap * w + kappa * g2.cwiseQuotient(w);
    Matrix dinner = lap;
    dinner += kappa * ((2.0 * s.cwiseProduct(dw).cwiseQuotient(w)).asDiagonal() * D);
    dinner.diagonal() -= kappa * g2.cwiseQuotient(w.cwiseAbs2());
    Matrix j = w.array().pow(2.0 - 2.0 * beta).matrix().asDiagonal() * dinner;
    j.diagonal() += ((2.0 - 2.0 * beta) * w.array().pow(1.0 - 2.0 * beta) * inner.array()).matrix();
    store(j, jac);
  };
  return sys;
}

// ρ_t = Δ(ρ^m)
detail::StiffSystem density_flow(const Matrix& lap, double m) {
  detail::StiffSystem sys;
  sys.rhs = [&lap, m](const StateVec& x, StateVec& dxdt) {
    const auto r = view(x);
    if (r.minCoeff() <= 0.0) {
      dxdt.assign(x.size(), 1e300);
      return;
    }
    store(Vector(lap * r.array().pow(m).matrix()), dxdt);
  };
  sys.jacobian = [&lap, m](const StateVec& x, StateVec& jac) {
    const Vector r = view(x).cwiseAbs();
    store(Matrix(lap * (m * r.array().pow(m - 1.0)).matrix().asDiagonal()), jac);
  };
  return sys;
}

void check_times(double t_end, double dt) {
  if (!(t_end > 0.0) || !(dt > 0.0) || dt > t_end) throw ParameterError("flow: requires 0 < dt <= t_end");
  if (t_end / dt > 1e6) throw ParameterError("flow: more than 1e6 samples requested");
  if (std::abs(t_end / dt - std::round(t_end / dt)) > 1e-9 * (t_end / dt))
    throw ParameterError("flow: t_end must be a multiple of dt");
}

}  // namespace

FlowTrace evolve(const GridPtr& g, const FlowParams& fp, const ZonalFunction& w0, double t_end, double dt,
                 const std::optional<InequalityParams>& entropy_params) {
  require_same_grid(*g, w0);
  require_positive(w0, "evolve");
  check_times(t_end, dt);
  if (fp.d != g->d()) throw ParameterError("evolve: flow parameters and grid have different dimensions");
  if (entropy_params) {
    entropy_params->validate();
    if (entropy_params->d != fp.d || entropy_params->p != fp.p)
      throw ParameterError("evolve: entropy parameters do not match the flow (d, p)");
  }
  const Matrix lap = laplacian_matrix(*g);
  const auto sys = weighted_flow(lap, g->diff(), one_minus_z2(*g), fp.beta, fp.kappa);

  FlowTrace tr;
  tr.params = fp;
  const Vector& w = g->weights();
  StateVec x0;
  store(w0.values(), x0);
  detail::integrate_stiff(sys, x0, t_end, dt, kTol, [&](double t, const StateVec& x) {
    ZonalFunction st(g, view(x));
    const Vector wb = st.values().array().pow(fp.beta);
    tr.times.push_back(t);
    tr.mass.push_back(w.dot(st.values().array().pow(fp.beta * fp.p).matrix()));
    tr.dirichlet.push_back(grad_seminorm_sq(*g, ZonalFunction(g, wb)));
    tr.l2beta.push_back(w.dot(wb.cwiseAbs2()));
    tr.production.push_back(grad_seminorm_sq(*g, st));
    if (entropy_params) tr.entropy.push_back(deficit(*entropy_params, *g, ZonalFunction(g, wb)));
    tr.states.push_back(std::move(st));
  });
  return tr;
}

ZonalFunction evolve_density(const GridPtr& g, double m, const ZonalFunction& rho0, double t_end) {
  require_same_grid(*g, rho0);
  require_positive(rho0, "evolve_density");
  if (!(m > 0.0)) throw ParameterError("evolve_density: m must be positive");
  check_times(t_end, t_end);
  const Matrix lap = laplacian_matrix(*g);
  StateVec x0;
  store(rho0.values(), x0);
  Vector out;
  detail::integrate_stiff(density_flow(lap, m), x0, t_end, t_end, kTol, [&](double, const StateVec& x) { out = view(x); });
  return ZonalFunction(g, out);
}

std::vector<double> time_derivative(const std::vector<double>& times, const std::vector<double>& values) {
  const std::size_t n = times.size();
  if (values.size() != n) throw ParameterError("time_derivative: size mismatch");
  if (n < 5) throw ParameterError("time_derivative: needs at least 5 samples");
  const double h = (times.back() - times.front()) / static_cast<double>(n - 1);
  for (std::size_t i = 1; i < n; ++i)
    if (std::abs(times[i] - times[i - 1] - h) > 1e-9 * h) throw ParameterError("time_derivative: non-uniform samples");
  std::vector<double> out(n, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 2; i + 2 < n; ++i)
    out[i] = (values[i - 2] - 8.0 * values[i - 1] + 8.0 * values[i + 1] - values[i + 2]) / (12.0 * h);
  return out;
}

EntropyReport entropy_report(const FlowTrace& trace, const InequalityParams& params) {
  params.validate();
  const FlowParams& fp = trace.params;
  if (params.d != fp.d || params.p != fp.p) throw ParameterError("entropy_report: mismatched parameters (d, p)");
  const std::size_t n = trace.times.size();
  if (n < 5) throw ParameterError("entropy_report: trace too short");
  const Grid& g = trace.states.front().grid();

  std::vector<double> f(n), x(n);
  for (std::size_t i = 0; i < n; ++i) {
    const ZonalFunction v(trace.states[i].grid_ptr(), trace.states[i].values().array().pow(fp.beta));
    f[i] = trace.entropy.size() == n ? trace.entropy[i] : deficit(params, g, v);
    x[i] = quotient(params, g, v).x_ratio;
  }
  const std::vector<double> rate = time_derivative(trace.times, f);

  EntropyReport rep;
  rep.max_excess = -std::numeric_limits<double>::infinity();
  const double b2 = 2.0 * fp.beta * fp.beta;
  for (std::size_t i = 0; i < n; ++i) {
    EntropyStep st;
    st.time = trace.times[i];
    st.deficit = f[i];
    st.rate = rate[i];
    if (i > 0 && f[i] > f[i - 1] + 1e-13 * std::max(1.0, std::abs(f[i - 1]))) rep.monotone = false;
    switch (params.family) {
      case Family::GNS0: st.bound = -b2 * (params.d - params.lambda) * trace.production[i]; break;
      case Family::GNS1:
        st.bound = -b2 * (params.d + params.lambda * ((1.0 - params.theta) * x[i] - 1.0)) * trace.production[i];
        break;
      case Family::GNS2: st.bound = std::numeric_limits<double>::quiet_NaN(); break;
    }
    if (std::isfinite(st.bound) && std::isfinite(st.rate)) {
      const double excess = st.rate - st.bound;
      const double tol = 1e-5 * (std::abs(st.rate) + std::abs(st.bound)) + 1e-11;
      st.ok = excess <= tol;
      rep.max_excess = std::max(rep.max_excess, excess);
      rep.bounds_hold = rep.bounds_hold && st.ok;
    }
    rep.steps.push_back(st);
  }
  rep.terminal_deficit = f.back();
  return rep;
}

}  // namespace sgns
