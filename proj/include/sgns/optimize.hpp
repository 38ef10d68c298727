#pragma once

#include "sgns/functionals.hpp"
#include "sgns/ultraspherical.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace sgns {

enum class Preset { Constant, Spike, Continuation };

struct MinOptions {
  int bb_max_iter = 600;
  int newton_max_iter = 60;
  double bb_tol = 1e-6;         ///< preconditioned gradient norm that ends the first-order phase
  double residual_tol = 1e-6;   ///< sup-norm Euler–Lagrange residual required for success
  double tol_sym = 1e-7;        ///< symmetric flag: ‖u - mean‖_∞ < tol_sym·|mean|
  double tie_margin = 1e-9;     ///< broken minimum must beat the constant by this much
  double jitter = 0.05;         ///< amplitude of the perturbation of the constant start
  std::uint64_t seed = 42;
  bool multistart = true;       ///< always try constant and spike starts as well
  bool resolution_check = false;///< re-solve at 2N and record the relative change of mu
  int threads = 0;              ///< 0: SPHERE_GNS_THREADS or hardware
};

struct MinResult {
  double mu = 0;
  ZonalFunction minimizer;  ///< normalised to ‖u‖_p = 1
  int iterations = 0;
  double el_residual_norm = 0;
  bool symmetric = false;
  bool ambiguous = false;  ///< a broken candidate came within tie_margin of the constant
  double alternative_mu = std::numeric_limits<double>::quiet_NaN();
  std::string start;       ///< which start produced the reported minimizer
  double resolution_change = std::numeric_limits<double>::quiet_NaN();
  QuotientReport report;
};

using Start = std::variant<Preset, ZonalFunction>;

/// Minimises the family quotient over zonal functions. The candidate set is the
/// exact constant, a perturbed constant, a concentrated profile at z = 1 and,
/// when `init` is a function, descent from it. The best candidate wins; a broken
/// candidate must beat the constant by tie_margin.
MinResult minimize(const InequalityParams& params, const GridPtr& g, const Start& init, const MinOptions& opts = {});

/// Single descent (first-order phase, then Newton) from `init`.
MinResult local_minimize(const InequalityParams& params, const GridPtr& g, const ZonalFunction& init,
                         const MinOptions& opts = {});

struct BranchPoint {
  double lambda = 0;
  double mu = std::numeric_limits<double>::quiet_NaN();
  bool symmetric = false;
  double mass = 0;
  double kinetic = 0;
  double el_residual = 0;
  bool ambiguous = false;
  std::optional<ZonalFunction> minimizer;
  std::string error;  ///< non-empty when minimisation failed at this point
};

struct Branch {
  Family family = Family::GNS0;
  int d = 3;
  double p = 3;
  double theta = 1;
  std::vector<BranchPoint> points;

  InequalityParams params_at(double lambda) const { return {family, d, p, theta, lambda}; }
};

/// One minimisation per lambda. Independent starts run concurrently; a
/// sequential pass then adds continuation from the previous point.
Branch branch_sweep(Family family, int d, double p, double theta, std::span<const double> lambdas, const GridPtr& g,
                    const MinOptions& opts = {});

/// Human-readable list of violated branch invariants (empty when all hold).
std::vector<std::string> branch_violations(const Branch& b);

struct ThresholdResult {
  double estimate = 0;
  double lower = 0;  ///< largest lambda found symmetric
  double upper = 0;  ///< smallest lambda found broken
  int evaluations = 0;
};

/// Bisection between the last symmetric and first broken point of the branch
/// until the bracket is narrower than tol.
ThresholdResult detect_threshold(const Branch& branch, const GridPtr& g, double tol, const MinOptions& opts = {});

/// lambda at which the second variation at constants vanishes.
double bifurcation_lambda(Family family, int d, double theta);

struct AsymptoticFit {
  double gamma_hat = 0;
  double prefactor_hat = 0;
  double rms = 0;
};

/// Least-squares fit of log mu = log C + gamma log lambda.
AsymptoticFit asymptotic_fit(const Branch& branch);

}  // namespace sgns
