#include "sgns/ultraspherical.hpp"

#include "sgns/error.hpp"

#include <cmath>
#include <string>

namespace sgns {

namespace {

// Off-diagonal of the Jacobi matrix for the probability-normalised weight
// (1-z^2)^a with a = d/2 - 1; entry k couples degrees k-1 and k.
double jacobi_offdiag(int k, double a) {
  const double kk = k;
  return std::sqrt(kk * (kk + 2 * a) / ((2 * kk + 2 * a + 1) * (2 * kk + 2 * a - 1)));
}

// P_N(z) and P_N'(z) by the three-term recurrence.
std::pair<double, double> top_poly(const Vector& b, int n, double z) {
  double p0 = 1.0, p1 = z / b[1];
  double d0 = 0.0, d1 = 1.0 / b[1];
  for (int k = 1; k < n; ++k) {
    const double p2 = (z * p1 - b[k] * p0) / b[k + 1];
    const double d2 = (p1 + z * d1 - b[k] * d0) / b[k + 1];
    p0 = p1;
    p1 = p2;
    d0 = d1;
    d1 = d2;
  }
  return {p1, d1};
}

}  // namespace

GridPtr make_grid(int d, int n) {
  if (d < 2) throw ParameterError("make_grid: dimension d must be >= 2, got " + std::to_string(d));
  if (n < 8) throw ParameterError("make_grid: node count N must be >= 8, got " + std::to_string(n));

  auto g = std::shared_ptr<Grid>(new Grid());
  g->d_ = d;
  const double a = 0.5 * d - 1.0;

  g->recurrence_.resize(n + 1);
  g->recurrence_[0] = 0.0;
  for (int k = 1; k <= n; ++k) g->recurrence_[k] = jacobi_offdiag(k, a);
  const Vector& b = g->recurrence_;

  // Golub–Welsch for the nodes, then Newton on P_N to polish them.
  Eigen::SelfAdjointEigenSolver<Matrix> eig;
  eig.computeFromTridiagonal(Vector::Zero(n), b.segment(1, n - 1), Eigen::EigenvaluesOnly);
  Vector z = eig.eigenvalues();
  for (int i = 0; i < n; ++i) {
    for (int it = 0; it < 4; ++it) {
      const auto [p, dp] = top_poly(b, n, z[i]);
      const double step = p / dp;
      z[i] -= step;
      if (std::abs(step) < 1e-17) break;
    }
  }
  // Exact symmetry of the rule.
  for (int i = 0; i < n / 2; ++i) {
    const double s = 0.5 * (z[n - 1 - i] - z[i]);
    z[i] = -s;
    z[n - 1 - i] = s;
  }
  if (n % 2 == 1) z[n / 2] = 0.0;
  g->nodes_ = z;

  // Orthonormal basis at the nodes; Christoffel weights.
  Matrix phi(n, n);
  for (int i = 0; i < n; ++i) phi.col(i) = g->basis(z[i], n);
  Vector w(n);
  for (int i = 0; i < n; ++i) w[i] = 1.0 / phi.col(i).squaredNorm();
  w /= w.sum();
  g->weights_ = w;
  g->sqrt_weights_ = w.cwiseSqrt();

  g->modal_ = phi * g->sqrt_weights_.asDiagonal();
  g->eigenvalues_.resize(n);
  for (int l = 0; l < n; ++l) g->eigenvalues_[l] = static_cast<double>(l) * (l + d - 1);
  g->stiffness_ = g->modal_.transpose() * g->eigenvalues_.asDiagonal() * g->modal_;
  g->stiffness_ = 0.5 * (g->stiffness_ + g->stiffness_.transpose()).eval();

  // Barycentric weights in the log domain, then the collocation derivative.
  Vector logw(n), sign(n);
  for (int j = 0; j < n; ++j) {
    double s = 0.0;
    for (int k = 0; k < n; ++k)
      if (k != j) s -= std::log(std::abs(z[j] - z[k]));
    logw[j] = s;
    sign[j] = ((n - 1 - j) % 2 == 0) ? 1.0 : -1.0;
  }
  Matrix& D = g->diff_;
  D.resize(n, n);
  for (int i = 0; i < n; ++i) {
    double abssum = 0.0;
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      D(i, j) = sign[i] * sign[j] * std::exp(logw[j] - logw[i]) / (z[i] - z[j]);
      abssum += std::abs(D(i, j));
    }
    // Round the row to a common binary grid fine enough to hold every partial
    // sum exactly; the row then sums to zero in any evaluation order.
    const double quantum = std::ldexp(1.0, std::ilogb(2.0 * abssum) - 52);
    double rowsum = 0.0;
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      D(i, j) = std::nearbyint(D(i, j) / quantum) * quantum;
      rowsum += D(i, j);
    }
    D(i, i) = -rowsum;
  }
  return g;
}

Vector Grid::basis(double z, int n) const {
  Vector p(n);
  p[0] = 1.0;
  if (n > 1) p[1] = z / recurrence_[1];
  for (int k = 1; k + 1 < n; ++k) p[k + 1] = (z * p[k] - recurrence_[k] * p[k - 1]) / recurrence_[k + 1];
  return p;
}

Vector Grid::coefficients(const Vector& values) const {
  return modal_ * sqrt_weights_.cwiseProduct(values);
}

double Grid::evaluate(const Vector& coeffs, double z) const {
  if (coeffs.size() > size()) throw ParameterError("evaluate: more coefficients than grid degree");
  return coeffs.dot(basis(z, static_cast<int>(coeffs.size())));
}

ZonalFunction::ZonalFunction(GridPtr grid, Vector values) : grid_(std::move(grid)), values_(std::move(values)) {
  if (!grid_) throw ParameterError("zonal function without a grid");
  if (values_.size() != grid_->size())
    throw ParameterError("zonal function length " + std::to_string(values_.size()) + " does not match grid size " +
                         std::to_string(grid_->size()));
}

ZonalFunction ZonalFunction::constant(GridPtr grid, double c) {
  const int n = grid->size();
  return ZonalFunction(std::move(grid), Vector::Constant(n, c));
}

void require_same_grid(const Grid& g, const ZonalFunction& f) {
  if (&f.grid() == &g) return;
  if (f.grid().d() != g.d() || f.grid().size() != g.size())
    throw ParameterError("grid mismatch: function lives on (d=" + std::to_string(f.grid().d()) +
                         ", N=" + std::to_string(f.grid().size()) + "), grid is (d=" + std::to_string(g.d()) +
                         ", N=" + std::to_string(g.size()) + ")");
}

double integrate(const Grid& g, const ZonalFunction& f) {
  require_same_grid(g, f);
  return g.weights().dot(f.values());
}

double lq_norm(const Grid& g, const ZonalFunction& f, double q) {
  require_same_grid(g, f);
  if (!(q >= 1.0)) throw ParameterError("lq_norm: exponent q must be >= 1");
  const double scale = f.values().cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  const Vector r = (f.values().cwiseAbs() / scale).array().pow(q).matrix();
  return scale * std::pow(g.weights().dot(r), 1.0 / q);
}

double grad_seminorm_sq(const Grid& g, const ZonalFunction& f) {
  require_same_grid(g, f);
  const Vector df = g.diff() * f.values();
  const Vector one_minus = (1.0 - g.nodes().array().square()).matrix();
  return g.weights().dot(one_minus.cwiseProduct(df.cwiseAbs2()));
}

ZonalFunction laplace_beltrami(const Grid& g, const ZonalFunction& f) {
  require_same_grid(g, f);
  // Constants are in the kernel; removing the mean keeps endpoint roundoff proportional to |f - mean|.
  const double mean = g.weights().dot(f.values());
  const Vector y = g.sqrt_weights().cwiseProduct((f.values().array() - mean).matrix());
  Vector out = -(g.stiffness() * y);
  out = out.cwiseQuotient(g.sqrt_weights());
  return ZonalFunction(f.grid_ptr(), std::move(out));
}

ZonalFunction derivative(const Grid& g, const ZonalFunction& f) {
  require_same_grid(g, f);
  return ZonalFunction(f.grid_ptr(), g.diff() * f.values());
}

ZonalFunction resample(const ZonalFunction& f, const GridPtr& target) {
  if (target->d() != f.grid().d()) throw ParameterError("resample: dimension mismatch");
  const Vector c = f.grid().coefficients(f.values());
  Vector out(target->size());
  for (int i = 0; i < target->size(); ++i) out[i] = f.grid().evaluate(c, target->nodes()[i]);
  return ZonalFunction(target, std::move(out));
}

ZonalFunction random_positive_zonal(const GridPtr& g, std::mt19937_64& rng, int degree, double amplitude) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.2, 1.0);
  Vector a(degree + 1);
  for (int k = 0; k <= degree; ++k) a[k] = normal(rng);
  a[0] = 0.0;
  Vector q(g->size());
  for (int i = 0; i < g->size(); ++i) {
    const double z = g->nodes()[i];
    double s = 0.0, zk = 1.0;
    for (int k = 0; k <= degree; ++k, zk *= z) s += a[k] * zk;
    q[i] = s;
  }
  const double m = q.cwiseAbs().maxCoeff();
  if (m > 0) q *= amplitude * unif(rng) / m;
  const double c = 0.5 + 1.5 * unif(rng);
  return ZonalFunction(g, c * q.array().exp().matrix());
}

double moment(int d, int k) {
  if (k % 2 == 1) return 0.0;
  const double m = 0.5 * k;
  // B(m+1/2, d/2) / B(1/2, d/2)
  return std::exp(std::lgamma(m + 0.5) - std::lgamma(m + 0.5 + 0.5 * d) - std::lgamma(0.5) + std::lgamma(0.5 + 0.5 * d));
}

}  // namespace sgns
