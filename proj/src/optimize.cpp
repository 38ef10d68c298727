#include "sgns/optimize.hpp"

#include "sgns/error.hpp"
#include "sgns/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <random>

namespace sgns {

namespace {

// The quotient is minimised in the coordinates y = sqrt(w)·u, in which the
// L² inner product is Euclidean and the Dirichlet form is the dense matrix
// Grid::stiffness(). f = log Q is 0-homogeneous in y.
struct Eval {
  double f = 0, A = 0, M = 0, S = 0;
  Vector u, upow, grad, ga, gm, gs;
};

class Objective {
 public:
  Objective(const InequalityParams& params, const Grid& g)
      : params_(params), g_(g), e_(quotient_exponents(params)) {
    denom_ = ((params.p - 2.0) * g.eigenvalues().array() + params.lambda).matrix();
  }

  Eval eval(const Vector& y) const {
    const double p = params_.p;
    Eval e;
    e.u = y.cwiseQuotient(g_.sqrt_weights());
    const Vector ky = g_.stiffness() * y;
    const double kin = y.dot(ky);
    e.M = y.squaredNorm();
    e.upow = e.u.cwiseAbs().array().pow(p - 2.0).matrix();
    e.S = g_.weights().dot(e.upow.cwiseProduct(e.u.cwiseAbs2()));
    e.A = (p - 2.0) * kin + params_.lambda * e.M;
    e.f = std::log(e.A) + e_.mass_exp * std::log(e.M) + e_.power_exp * std::log(e.S);
    e.ga = (2.0 / e.A) * ((p - 2.0) * ky + params_.lambda * y);
    e.gm = (2.0 / e.M) * y;
    e.gs = (p / e.S) * g_.sqrt_weights().cwiseProduct(e.upow).cwiseProduct(e.u);
    e.grad = e.ga + e_.mass_exp * e.gm + e_.power_exp * e.gs;
    return e;
  }

  Matrix hessian(const Eval& e) const {
    const double p = params_.p;
    Matrix h = (2.0 * (p - 2.0) / e.A) * g_.stiffness();
    Vector diag = Vector::Constant(h.rows(), 2.0 * params_.lambda / e.A + e_.mass_exp * 2.0 / e.M);
    diag += (e_.power_exp * p * (p - 1.0) / e.S) * e.upow;
    h.diagonal() += diag;
    h.noalias() -= e.ga * e.ga.transpose();
    h.noalias() -= e_.mass_exp * (e.gm * e.gm.transpose());
    h.noalias() -= e_.power_exp * (e.gs * e.gs.transpose());
    return h;
  }

  /// Leading part of the Hessian, P = 2((p-2)S + λ)/A.
  Matrix precond(const Eval& e) const {
    Matrix m = (2.0 * (params_.p - 2.0) / e.A) * g_.stiffness();
    m.diagonal().array() += 2.0 * params_.lambda / e.A;
    return m;
  }
  Vector precond_solve(const Vector& v, double A) const {
    const Vector c = g_.modal() * v;
    return (0.5 * A) * (g_.modal().transpose() * c.cwiseQuotient(denom_));
  }
  double precond_dot(const Vector& s, double A) const {
    const double kin = s.dot(g_.stiffness() * s);
    return (2.0 / A) * ((params_.p - 2.0) * kin + params_.lambda * s.squaredNorm());
  }

  /// Rescales so that ‖u‖_p = 1.
  Vector normalize(const Vector& y) const {
    const Vector u = y.cwiseQuotient(g_.sqrt_weights());
    const double s = g_.weights().dot(u.cwiseAbs().array().pow(params_.p).matrix());
    return y / std::pow(s, 1.0 / params_.p);
  }

  /// Strong-form Euler–Lagrange residual, normalised as in el_residual.
  double strong_residual(const Eval& e) const {
    const Vector r = (e.A / (2.0 * (params_.p - 2.0))) * e.grad.cwiseQuotient(g_.sqrt_weights());
    return r.cwiseAbs().maxCoeff() / std::pow(e.u.cwiseAbs().maxCoeff(), params_.p - 1.0);
  }

 private:
  const InequalityParams& params_;
  const Grid& g_;
  QuotientExponents e_;
  Vector denom_;
};

bool finite(const Eval& e) { return std::isfinite(e.f) && e.grad.allFinite(); }

struct Descent {
  Vector y;
  int iterations = 0;
};

Descent descend(const Objective& obj, Vector y, const MinOptions& opts) {
  Descent out;
  y = obj.normalize(y);
  Eval e = obj.eval(y);
  if (!finite(e)) throw NumericalError("quotient evaluates non-finite at the starting point");

  // Preconditioned Barzilai–Borwein with a nonmonotone Armijo test.
  std::deque<double> history{e.f};
  Vector gp = obj.precond_solve(e.grad, e.A);
  double alpha = 1.0;
  for (int it = 0; it < opts.bb_max_iter; ++it) {
    const double gnorm2 = e.grad.dot(gp);
    if (!(gnorm2 > opts.bb_tol * opts.bb_tol)) break;
    const double fref = *std::max_element(history.begin(), history.end());
    double step = alpha;
    bool accepted = false;
    Vector ynew;
    for (int k = 0; k < 40; ++k) {
      ynew = y - step * gp;
      const Eval trial = obj.eval(ynew);
      if (finite(trial) && trial.f <= fref - 1e-4 * step * gnorm2) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    ynew = obj.normalize(ynew);
    Eval enew = obj.eval(ynew);
    const Vector s = ynew - y;
    const double sy = s.dot(enew.grad - e.grad);
    const double sps = obj.precond_dot(s, enew.A);
    alpha = sy > 0.0 ? std::clamp(sps / sy, 1e-4, 1e4) : 1.0;
    y = std::move(ynew);
    e = std::move(enew);
    gp = obj.precond_solve(e.grad, e.A);
    history.push_back(e.f);
    if (history.size() > 10) history.pop_front();
    ++out.iterations;
  }

  // Take the nonnegative representative; the quotient only sees |u|.
  y = y.cwiseAbs();
  e = obj.eval(y);

  // Newton with a rank-one term along the scaling direction and a Levenberg shift if needed.
  for (int it = 0; it < opts.newton_max_iter; ++it) {
    if (obj.strong_residual(e) < 1e-13) break;
    Matrix h = obj.hessian(e);
    h.noalias() += (2.0 / (e.M * e.M)) * (y * y.transpose());
    Eigen::LLT<Matrix> llt(h);
    if (llt.info() != Eigen::Success) {
      const Matrix p = obj.precond(e);
      for (double tau = 1e-8; tau < 1e8; tau *= 10.0) {
        llt.compute(h + tau * p);
        if (llt.info() == Eigen::Success) break;
      }
      if (llt.info() != Eigen::Success) throw NumericalError("Newton: no positive definite shift found");
    }
    Vector delta = -llt.solve(e.grad);
    double slope = e.grad.dot(delta);
    if (!(slope < 0.0)) {
      delta = -obj.precond_solve(e.grad, e.A);
      slope = e.grad.dot(delta);
    }
    if (-slope < 1e-26) break;
    double step = 1.0;
    bool accepted = false;
    Eval trial;
    for (int k = 0; k < 40; ++k) {
      trial = obj.eval(y + step * delta);
      if (finite(trial) && trial.f <= e.f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    ++out.iterations;
    if (!accepted) break;
    y = obj.normalize((y + step * delta).cwiseAbs());
    e = obj.eval(y);
  }
  out.y = std::move(y);
  return out;
}

MinResult finalize(const InequalityParams& params, const GridPtr& g, Vector u, int iterations, const MinOptions& opts,
                   std::string start) {
  u = u.cwiseAbs().cwiseMax(std::numeric_limits<double>::min());
  const double lp = std::pow(g->weights().dot(u.array().pow(params.p).matrix()), 1.0 / params.p);
  ZonalFunction f(g, u / lp);
  const QuotientReport rep = quotient(params, *g, f);
  const double res = el_residual(params, *g, f, rep.value).values().cwiseAbs().maxCoeff();
  const double mean = g->weights().dot(f.values());
  const bool sym = (f.values().array() - mean).abs().maxCoeff() < opts.tol_sym * std::abs(mean);
  return MinResult{.mu = rep.value,
                   .minimizer = std::move(f),
                   .iterations = iterations,
                   .el_residual_norm = res,
                   .symmetric = sym,
                   .start = std::move(start),
                   .report = rep};
}

MinResult run_descent(const InequalityParams& params, const GridPtr& g, const Vector& u0, const MinOptions& opts,
                      std::string label) {
  const Objective obj(params, *g);
  const Descent d = descend(obj, g->sqrt_weights().cwiseProduct(u0), opts);
  return finalize(params, g, d.y.cwiseQuotient(g->sqrt_weights()), d.iterations, opts, std::move(label));
}

Vector constant_start(const GridPtr& g) { return Vector::Ones(g->size()); }

Vector jitter_start(const GridPtr& g, const MinOptions& opts) {
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal;
  const double a2 = 0.3 * normal(rng), a3 = 0.3 * normal(rng), a4 = 0.3 * normal(rng);
  Vector u(g->size());
  for (int i = 0; i < g->size(); ++i) {
    const double z = g->nodes()[i];
    const Vector b = g->basis(z, 5);
    u[i] = 1.0 + opts.jitter * (b[1] + a2 * b[2] + a3 * b[3] + a4 * b[4]) / 4.0;
  }
  return u;
}

Vector spike_start(const InequalityParams& params, const GridPtr& g) {
  const double n = g->size();
  const double s = std::clamp(params.lambda / (params.p - 2.0), 1.0, n * n / 20.0);
  Vector u(g->size());
  for (int i = 0; i < g->size(); ++i) u[i] = std::exp(-s * (1.0 - g->nodes()[i]));
  return u;
}

Vector on_grid(const ZonalFunction& f, const GridPtr& g) {
  if (f.grid_ptr() == g || (f.grid().size() == g->size() && f.grid().d() == g->d())) return f.values();
  return resample(f, g).values();
}

bool converged(const MinResult& r, const MinOptions& opts) {
  return std::isfinite(r.mu) && r.el_residual_norm < opts.residual_tol;
}

MinResult select(std::vector<MinResult> cands, const MinOptions& opts, double lambda) {
  const MinResult* best_sym = nullptr;
  const MinResult* best_broken = nullptr;
  double best_failed = std::numeric_limits<double>::infinity();
  for (const auto& c : cands) {
    if (!converged(c, opts)) {
      best_failed = std::min(best_failed, c.mu);
      continue;
    }
    const MinResult*& slot = c.symmetric ? best_sym : best_broken;
    if (!slot || c.mu < slot->mu) slot = &c;
  }
  if (!best_sym && !best_broken) throw NumericalError("minimize: no start converged");
  const double best_ok = std::min(best_sym ? best_sym->mu : INFINITY, best_broken ? best_broken->mu : INFINITY);
  if (best_failed < best_ok - 1e-6 * std::abs(best_ok))
    throw NumericalError("minimize: a start reached a lower value without converging (mu=" +
                         std::to_string(best_failed) + " vs " + std::to_string(best_ok) + ")");
  MinResult out = [&] {
    if (!best_sym) return *best_broken;
    if (!best_broken || best_broken->mu >= best_sym->mu + opts.tie_margin) return *best_sym;
    if (best_broken->mu < best_sym->mu - opts.tie_margin) {
      MinResult r = *best_broken;
      r.alternative_mu = best_sym->mu;
      return r;
    }
    MinResult r = *best_sym;
    r.ambiguous = true;
    r.alternative_mu = best_broken->mu;
    return r;
  }();
  int total = 0;
  for (const auto& c : cands) total += c.iterations;
  out.iterations = total;
  if (out.mu > lambda * (1.0 + 1e-12) + 1e-10)
    throw NumericalError("minimize: result exceeds the constant bound mu <= lambda");
  return out;
}

std::vector<MinResult> independent_candidates(const InequalityParams& params, const GridPtr& g,
                                              const MinOptions& opts) {
  std::vector<MinResult> c;
  c.push_back(finalize(params, g, constant_start(g), 0, opts, "constant"));
  auto attempt = [&](const Vector& u0, const char* label) {
    try {
      c.push_back(run_descent(params, g, u0, opts, label));
    } catch (const NumericalError&) {
    }
  };
  attempt(jitter_start(g, opts), "perturbed-constant");
  attempt(spike_start(params, g), "spike");
  return c;
}

void check_resolution(MinResult& r, const InequalityParams& params, const GridPtr& g, const MinOptions& opts) {
  const GridPtr fine = make_grid(g->d(), 2 * g->size());
  const MinResult rf = run_descent(params, fine, resample(r.minimizer, fine).values(), opts, r.start);
  r.resolution_change = std::abs(rf.mu - r.mu) / std::abs(r.mu);
}

}  // namespace

MinResult local_minimize(const InequalityParams& params, const GridPtr& g, const ZonalFunction& init,
                         const MinOptions& opts) {
  params.validate();
  if (init.grid().d() != g->d()) throw ParameterError("local_minimize: initial guess has the wrong dimension");
  const Vector u0 = on_grid(init, g);
  if (u0.cwiseAbs().maxCoeff() == 0.0) throw ParameterError("local_minimize: zero initial guess");
  MinResult r = run_descent(params, g, u0, opts, "given");
  if (!converged(r, opts))
    throw NumericalError("local_minimize: Euler-Lagrange residual " + std::to_string(r.el_residual_norm) +
                         " above tolerance");
  return r;
}

MinResult minimize(const InequalityParams& params, const GridPtr& g, const Start& init, const MinOptions& opts) {
  params.validate();
  std::vector<MinResult> cands;
  if (opts.multistart) {
    cands = independent_candidates(params, g, opts);
  } else if (const Preset* p = std::get_if<Preset>(&init)) {
    switch (*p) {
      case Preset::Constant: cands.push_back(finalize(params, g, constant_start(g), 0, opts, "constant")); break;
      case Preset::Spike: cands.push_back(run_descent(params, g, spike_start(params, g), opts, "spike")); break;
      case Preset::Continuation:
        throw ParameterError("minimize: continuation preset needs a previous minimizer");
    }
  }
  if (const ZonalFunction* f = std::get_if<ZonalFunction>(&init)) {
    if (f->grid().d() != g->d()) throw ParameterError("minimize: initial guess has the wrong dimension");
    try {
      cands.push_back(run_descent(params, g, on_grid(*f, g), opts, "continuation"));
    } catch (const NumericalError&) {
      if (!opts.multistart) throw;
    }
  }
  MinResult r = select(std::move(cands), opts, params.lambda);
  if (opts.resolution_check) check_resolution(r, params, g, opts);
  return r;
}

Branch branch_sweep(Family family, int d, double p, double theta, std::span<const double> lambdas, const GridPtr& g,
                    const MinOptions& opts) {
  Branch b{family, d, p, theta, {}};
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    b.params_at(lambdas[i]).validate();
    if (i > 0 && !(lambdas[i] > lambdas[i - 1])) throw ParameterError("branch_sweep: lambdas must be strictly increasing");
  }
  const int n = static_cast<int>(lambdas.size());
  std::vector<std::vector<MinResult>> independent(n);
  parallel_for(n, thread_count(opts.threads),
               [&](int i) { independent[i] = independent_candidates(b.params_at(lambdas[i]), g, opts); });

  std::optional<ZonalFunction> previous;
  for (int i = 0; i < n; ++i) {
    const InequalityParams params = b.params_at(lambdas[i]);
    BranchPoint pt;
    pt.lambda = lambdas[i];
    std::vector<MinResult> cands = std::move(independent[i]);
    if (previous) {
      try {
        cands.push_back(run_descent(params, g, previous->values(), opts, "continuation"));
      } catch (const NumericalError&) {
      }
    }
    try {
      MinResult r = select(std::move(cands), opts, params.lambda);
      if (opts.resolution_check) check_resolution(r, params, g, opts);
      pt.mu = r.mu;
      pt.symmetric = r.symmetric;
      pt.mass = r.report.mass;
      pt.kinetic = r.report.kinetic;
      pt.el_residual = r.el_residual_norm;
      pt.ambiguous = r.ambiguous;
      previous = r.minimizer;
      pt.minimizer = std::move(r.minimizer);
    } catch (const NumericalError& e) {
      pt.error = e.what();
    }
    b.points.push_back(std::move(pt));
  }
  return b;
}

std::vector<std::string> branch_violations(const Branch& b) {
  std::vector<std::string> out;
  std::vector<const BranchPoint*> ok;
  for (const auto& pt : b.points) {
    if (!pt.error.empty()) {
      out.push_back("lambda=" + std::to_string(pt.lambda) + ": " + pt.error);
      continue;
    }
    ok.push_back(&pt);
    if (pt.mu > pt.lambda * (1.0 + 1e-12) + 1e-10) out.push_back("mu > lambda at lambda=" + std::to_string(pt.lambda));
    if (pt.symmetric && std::abs(pt.mu - pt.lambda) >= 1e-8)
      out.push_back("symmetric point with mu != lambda at lambda=" + std::to_string(pt.lambda));
  }
  for (std::size_t i = 1; i < ok.size(); ++i)
    if (ok[i]->mu < ok[i - 1]->mu - 1e-10)
      out.push_back("mu decreases between lambda=" + std::to_string(ok[i - 1]->lambda) + " and " +
                    std::to_string(ok[i]->lambda));
  if (b.family == Family::GNS0) {
    for (std::size_t i = 1; i + 1 < ok.size(); ++i) {
      const double h0 = ok[i]->lambda - ok[i - 1]->lambda, h1 = ok[i + 1]->lambda - ok[i]->lambda;
      const double s0 = (ok[i]->mu - ok[i - 1]->mu) / h0, s1 = (ok[i + 1]->mu - ok[i]->mu) / h1;
      const double second = (s1 - s0) * 0.5 * (h0 + h1);
      if (second > 1e-8) out.push_back("concavity fails at lambda=" + std::to_string(ok[i]->lambda));
    }
  }
  return out;
}

ThresholdResult detect_threshold(const Branch& branch, const GridPtr& g, double tol, const MinOptions& opts) {
  if (!(tol > 0.0)) throw ParameterError("detect_threshold: tol must be positive");
  auto broken = [&](double lambda, double mu, bool symmetric) {
    return !symmetric && mu < lambda - opts.tie_margin;
  };
  const BranchPoint* lo = nullptr;
  const BranchPoint* hi = nullptr;
  bool any_sym = false, any_broken = false;
  for (const auto& pt : branch.points) {
    if (!pt.error.empty()) continue;
    const bool br = broken(pt.lambda, pt.mu, pt.symmetric);
    any_sym |= !br;
    any_broken |= br;
    if (!br && !hi) lo = &pt;
    if (br && !hi) hi = &pt;
  }
  if (!any_broken) throw NumericalError("detect_threshold: no threshold, branch entirely symmetric");
  if (!any_sym || !lo) throw NumericalError("detect_threshold: no threshold, branch entirely broken");

  ThresholdResult r;
  r.lower = lo->lambda;
  r.upper = hi->lambda;
  std::optional<ZonalFunction> warm = hi->minimizer;
  while (r.upper - r.lower >= tol) {
    const double mid = 0.5 * (r.lower + r.upper);
    const InequalityParams params = branch.params_at(mid);
    const MinResult m = warm ? minimize(params, g, *warm, opts) : minimize(params, g, Preset::Spike, opts);
    ++r.evaluations;
    if (broken(mid, m.mu, m.symmetric)) {
      r.upper = mid;
      warm = m.minimizer;
    } else {
      r.lower = mid;
    }
  }
  r.estimate = 0.5 * (r.lower + r.upper);
  return r;
}

double bifurcation_lambda(Family family, int d, double theta) {
  if (d < 1) throw ParameterError("bifurcation_lambda: d must be >= 1");
  if (!(theta >= 0.0 && theta <= 1.0)) throw ParameterError("bifurcation_lambda: theta must lie in [0, 1]");
  switch (family) {
    case Family::GNS0: return d;
    case Family::GNS1: return theta == 0.0 ? std::numeric_limits<double>::infinity() : d / theta;
    case Family::GNS2: return theta * d;
  }
  return 0.0;
}

AsymptoticFit asymptotic_fit(const Branch& branch) {
  std::vector<double> x, y;
  for (const auto& pt : branch.points) {
    if (!pt.error.empty()) continue;
    if (pt.symmetric) throw ParameterError("asymptotic_fit: branch contains symmetric points");
    x.push_back(std::log(pt.lambda));
    y.push_back(std::log(pt.mu));
  }
  if (x.size() < 3 || x.back() - x.front() < std::log(10.0) - 1e-9)
    throw ParameterError("asymptotic_fit: insufficient range (need three points over one decade)");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i] / n, my += y[i] / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) sxx += (x[i] - mx) * (x[i] - mx), sxy += (x[i] - mx) * (y[i] - my);
  AsymptoticFit fit;
  fit.gamma_hat = sxy / sxx;
  const double intercept = my - fit.gamma_hat * mx;
  fit.prefactor_hat = std::exp(intercept);
  double ss = 0;
  for (std::size_t i = 0; i < x.size(); ++i) ss += std::pow(y[i] - intercept - fit.gamma_hat * x[i], 2);
  fit.rms = std::sqrt(ss / n);
  return fit;
}

}  // namespace sgns
