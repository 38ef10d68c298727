#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <random>

namespace sgns {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Gauss–Jacobi discretisation of zonal functions on S^d.
///
/// A zonal function depends only on z = cos(angle to the axis). The uniform
/// probability measure becomes c_d (1-z^2)^{d/2-1} dz, and the nodes and weights
/// are the N-point Gauss rule for that weight. Besides the collocation
/// derivative the grid keeps an orthonormal modal transform: row l of
/// `modal()` holds sqrt(w_i) P_l(z_i), where P_l are the orthonormal
/// Gegenbauer polynomials, so the matrix is orthogonal.
class Grid {
 public:
  int d() const noexcept { return d_; }
  int size() const noexcept { return static_cast<int>(nodes_.size()); }

  const Vector& nodes() const noexcept { return nodes_; }
  const Vector& weights() const noexcept { return weights_; }
  const Vector& sqrt_weights() const noexcept { return sqrt_weights_; }
  /// Collocation derivative d/dz.
  const Matrix& diff() const noexcept { return diff_; }
  const Matrix& modal() const noexcept { return modal_; }
  /// l(l+d-1) for l = 0..N-1.
  const Vector& eigenvalues() const noexcept { return eigenvalues_; }
  /// Dirichlet form in sqrt(w)-scaled nodal coordinates: y^T S y = ∫|∇u|² for y = sqrt(w) u.
  const Matrix& stiffness() const noexcept { return stiffness_; }

  /// Gegenbauer coefficients c_l = ∫ f P_l dσ.
  Vector coefficients(const Vector& values) const;
  /// Sum of c_l P_l(z) at an arbitrary z in [-1, 1].
  double evaluate(const Vector& coeffs, double z) const;
  /// Values of P_0..P_{n-1} at z.
  Vector basis(double z, int n) const;

 private:
  friend std::shared_ptr<const Grid> make_grid(int d, int n);
  Grid() = default;

  int d_ = 0;
  Vector nodes_, weights_, sqrt_weights_, eigenvalues_, recurrence_;
  Matrix diff_, modal_, stiffness_;
};

using GridPtr = std::shared_ptr<const Grid>;

GridPtr make_grid(int d, int n);

/// Node values of a zonal function together with the grid they live on.
class ZonalFunction {
 public:
  ZonalFunction(GridPtr grid, Vector values);

  template <class F>
  static ZonalFunction sample(GridPtr grid, F&& f) {
    Vector v(grid->size());
    for (int i = 0; i < grid->size(); ++i) v[i] = f(grid->nodes()[i]);
    return ZonalFunction(std::move(grid), std::move(v));
  }
  static ZonalFunction constant(GridPtr grid, double c);

  const Grid& grid() const noexcept { return *grid_; }
  const GridPtr& grid_ptr() const noexcept { return grid_; }
  const Vector& values() const noexcept { return values_; }
  int size() const noexcept { return static_cast<int>(values_.size()); }
  double operator[](int i) const { return values_[i]; }

  bool is_positive() const { return values_.minCoeff() > 0.0; }
  ZonalFunction scaled(double c) const { return ZonalFunction(grid_, c * values_); }

 private:
  GridPtr grid_;
  Vector values_;
};

/// Throws ParameterError if f does not live on g.
void require_same_grid(const Grid& g, const ZonalFunction& f);

double integrate(const Grid& g, const ZonalFunction& f);
double lq_norm(const Grid& g, const ZonalFunction& f, double q);
/// ∫(1-z²)|f'|² dσ through the collocation derivative.
double grad_seminorm_sq(const Grid& g, const ZonalFunction& f);
/// (1-z²)f'' - d z f', applied spectrally (exact on the polynomial interpolant).
ZonalFunction laplace_beltrami(const Grid& g, const ZonalFunction& f);
ZonalFunction derivative(const Grid& g, const ZonalFunction& f);

/// Interpolates f onto another grid of the same dimension.
ZonalFunction resample(const ZonalFunction& f, const GridPtr& target);

/// exp of a random low-degree polynomial: smooth and strictly positive.
ZonalFunction random_positive_zonal(const GridPtr& g, std::mt19937_64& rng, int degree = 5,
                                    double amplitude = 0.6);

/// ∫ z^k dσ on S^d in closed form.
double moment(int d, int k);

}  // namespace sgns
