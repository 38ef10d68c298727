#include <doctest.h>

#include "sgns/error.hpp"
#include "sgns/flow.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace sgns;

namespace {

// Root of the discriminant in m found by bisection, independent of the closed form.
double disc_root(int d, double p, double lo, double hi) {
  auto f = [&](double m) { return be_coeffs(flow_params(d, p, m)).discriminant; };
  double flo = f(lo);
  REQUIRE(flo * f(hi) < 0);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

struct Case {
  int d;
  double p;
};
constexpr Case kCases[] = {{2, 4.0}, {3, 4.0}, {3, 3.0}, {4, 3.5}, {5, 2.8}};

}  // namespace

TEST_CASE("m_range and flow_params examples") {
  const auto r = m_range(3, 4);
  CHECK(r.lower == doctest::Approx((14 - std::sqrt(18.0)) / 20).epsilon(1e-14));
  CHECK(r.upper == doctest::Approx((14 + std::sqrt(18.0)) / 20).epsilon(1e-14));

  const auto fp = flow_params(3, 4, 0.7);
  CHECK(fp.beta == doctest::Approx(2.5).epsilon(1e-14));
  CHECK(fp.kappa == doctest::Approx(6).epsilon(1e-14));
  const auto c = be_coeffs(fp);
  CHECK(c.a == 1);
  CHECK(c.b == doctest::Approx(3).epsilon(1e-14));
  CHECK(c.c == doctest::Approx(13.5).epsilon(1e-14));
  CHECK(c.discriminant == doctest::Approx(-4.5).epsilon(1e-14));

  const auto fp2 = flow_params(3, 4, 0.75);
  CHECK(fp2.beta == doctest::Approx(2).epsilon(1e-14));
  CHECK(fp2.kappa == doctest::Approx(5).epsilon(1e-14));
  const auto crit = m_range(3, 6);
  CHECK(crit.lower == doctest::Approx(2.0 / 3).epsilon(1e-14));
  CHECK(crit.upper == doctest::Approx(2.0 / 3).epsilon(1e-14));
  const auto two = m_range(2, 4);
  CHECK(two.lower == doctest::Approx((10 - std::sqrt(24.0)) / 16).epsilon(1e-14));
  CHECK(two.upper == doctest::Approx((10 + std::sqrt(24.0)) / 16).epsilon(1e-14));

  // m = 1 gives the heat flow: beta = 1, kappa = p - 1.
  const auto heat = flow_params(3, 3, 1.0);
  CHECK(heat.beta == doctest::Approx(1).epsilon(1e-15));
  CHECK(heat.kappa == doctest::Approx(2).epsilon(1e-15));
}

TEST_CASE("flow_params errors") {
  CHECK_THROWS_AS(flow_params(3, 4, 0.5), ParameterError);  // pole of beta
  CHECK_THROWS_AS(flow_params(3, 6, 2.0 / 3), ParameterError);
  CHECK_THROWS_AS(flow_params(3, 4, 0.0), ParameterError);
  CHECK_THROWS_AS(flow_params(3, 6.5, 0.7), ParameterError);
  CHECK_THROWS_AS(flow_params(1, 4, 0.7), ParameterError);
  CHECK_THROWS_AS(m_range(3, 7), ParameterError);
}

TEST_CASE("discriminant roots agree with bisection and enclose the admissible window") {
  for (const auto& [d, p] : kCases) {
    CAPTURE(d);
    CAPTURE(p);
    const auto roots = be_discriminant_roots(d, p);
    const auto win = m_range(d, p);
    const double pole = 1 - 2 / p;
    // The window lies strictly inside the roots but not on them.
    CHECK(roots.lower < win.lower - 1e-3);
    CHECK(roots.upper > win.upper + 1e-3);
    for (double m : {roots.lower, roots.upper}) {
      // Bracket away from the pole so the discriminant is continuous.
      double lo = std::max(m - 0.02, 0.5 * m), hi = m + 0.02;
      if (pole > lo && pole < hi) (pole < m ? lo : hi) = pole + (pole < m ? 1e-3 : -1e-3);
      CHECK(disc_root(d, p, lo, hi) == doctest::Approx(m).epsilon(1e-12));
    }
    for (int k = 0; k <= 40; ++k) {
      const double m = win.lower + (win.upper - win.lower) * k / 40.0;
      if (std::abs(m - pole) < 1e-9) continue;
      CHECK(be_coeffs(flow_params(d, p, m)).discriminant < 0);
    }
  }
}

TEST_CASE("carre du champ: k[u] >= d |grad u|^2 for random positive u in the window") {
  std::mt19937_64 rng(42);
  for (const auto& [d, p] : kCases) {
    const auto g = make_grid(d, 96);
    const auto win = m_range(d, p);
    for (double m : {win.lower, 0.5 * (win.lower + win.upper), win.upper}) {
      if (std::abs(m - (1 - 2 / p)) < 1e-9) continue;
      const auto fp = flow_params(d, p, m);
      for (int i = 0; i < 100; ++i) {
        const auto u = random_positive_zonal(g, rng);
        const double kin = grad_seminorm_sq(*g, u);
        CHECK(k_functional(*g, u, fp) - d * kin >= -1e-9 * std::max(1.0, kin));
      }
    }
  }
}

TEST_CASE("k_functional examples") {
  const auto g = make_grid(3, 64);
  const auto fp = flow_params(3, 4, 0.7);
  CHECK(k_functional(*g, ZonalFunction::constant(g, 2.0), fp) == doctest::Approx(0).scale(1));
  // The first harmonic saturates the inequality at leading order.
  const double eps = 1e-3;
  const auto u = ZonalFunction::sample(g, [eps](double z) { return 1 + eps * z; });
  CHECK(k_functional(*g, u, fp) == doctest::Approx(eps * eps * 9 / 4).epsilon(1e-2));
  CHECK(3 * grad_seminorm_sq(*g, u) == doctest::Approx(eps * eps * 9 / 4).epsilon(1e-12));
  CHECK_THROWS_AS(k_functional(*g, ZonalFunction::sample(g, [](double z) { return z; }), fp), ParameterError);
}

TEST_CASE("zonal remainder identity") {
  std::mt19937_64 rng(7);
  for (const auto& [d, p] : kCases) {
    const auto g = make_grid(d, 96);
    for (double m : {0.3, 0.7, 0.95, 1.3}) {
      if (std::abs(m - (1 - 2 / p)) < 1e-3) continue;
      const auto fp = flow_params(d, p, m);
      for (int i = 0; i < 20; ++i) {
        const auto u = random_positive_zonal(g, rng);
        const double lhs = k_functional(*g, u, fp) - d * grad_seminorm_sq(*g, u);
        const double rhs = be_remainder(*g, u, fp);
        const double scale = std::abs(k_functional(*g, u, fp)) + d * grad_seminorm_sq(*g, u);
        CHECK(std::abs(lhs - rhs) <= 1e-9 * scale);
      }
    }
  }
}

TEST_CASE("violators exist beyond the discriminant roots and not inside the window") {
  const auto g = make_grid(3, 128);
  const auto roots = be_discriminant_roots(3, 4);
  for (double m : {roots.upper + 0.1, roots.upper + 0.5, roots.lower - 0.1}) {
    CAPTURE(m);
    const auto v = find_be_violator(g, flow_params(3, 4, m));
    CHECK(v.found);
    CHECK(v.gap < 0);
    REQUIRE(v.u.has_value());
    CHECK(v.u->is_positive());
  }
  const auto win = m_range(3, 4);
  for (double m : {win.lower, 0.7, win.upper}) {
    CAPTURE(m);
    CHECK_FALSE(find_be_violator(g, flow_params(3, 4, m)).found);
  }
}

TEST_CASE("time_derivative is exact on quartics") {
  std::vector<double> t, v;
  for (int i = 0; i <= 20; ++i) {
    const double s = 0.1 * i;
    t.push_back(s);
    v.push_back(1 + 2 * s - s * s + 0.5 * s * s * s - 0.25 * s * s * s * s);
  }
  const auto dv = time_derivative(t, v);
  CHECK(std::isnan(dv[0]));
  CHECK(std::isnan(dv[20]));
  for (int i = 2; i <= 18; ++i) {
    const double s = t[i];
    CHECK(dv[i] == doctest::Approx(2 - 2 * s + 1.5 * s * s - s * s * s).epsilon(1e-11));
  }
  CHECK_THROWS_AS(time_derivative({0, 1, 2}, {0, 1, 2}), ParameterError);
  CHECK_THROWS_AS(time_derivative({0, 1, 2, 3, 5}, {0, 1, 2, 3, 4}), ParameterError);
}

TEST_CASE("flow identities for nonconstant data") {
  const auto g = make_grid(3, 64);
  const auto fp = flow_params(3, 4, 0.7);
  const auto w0 = ZonalFunction::sample(g, [](double z) { return 1 + 0.3 * z + 0.2 * z * z * z; });
  const double t_end = 0.5, dt = 2.5e-4;
  const auto tr = evolve(g, fp, w0, t_end, dt);
  REQUIRE(tr.times.size() == 2001);

  const double drift = std::abs(tr.mass.back() - tr.mass.front()) / tr.mass.front();
  CHECK(drift / t_end < 1e-8);

  const auto rate = time_derivative(tr.times, tr.l2beta);
  for (std::size_t i = 2; i + 2 < tr.times.size(); ++i) {
    const double expected = 2 * fp.beta * fp.beta * (fp.p - 2) * tr.production[i];
    CHECK(std::abs(rate[i] - expected) <= 1e-5 * std::abs(expected));
  }
  for (std::size_t i = 1; i < tr.times.size(); ++i) CHECK(tr.dirichlet[i] < tr.dirichlet[i - 1]);
  for (const auto& s : tr.states) CHECK(s.is_positive());
}

TEST_CASE("dirichlet energy decreases from (1+z/2)^{1/beta} across the window") {
  const auto g = make_grid(3, 64);
  const auto win = m_range(3, 4);
  for (double m : {win.lower + 0.01, 0.7, win.upper - 0.01}) {
    const auto fp = flow_params(3, 4, m);
    const auto w0 = ZonalFunction::sample(g, [&](double z) { return std::pow(1 + 0.5 * z, 1 / fp.beta); });
    const auto tr = evolve(g, fp, w0, 1.0, 0.02);
    for (std::size_t i = 1; i < tr.times.size(); ++i) CHECK(tr.dirichlet[i] < tr.dirichlet[i - 1]);
  }
}

TEST_CASE("constant data is stationary") {
  const auto g = make_grid(4, 32);
  const auto tr = evolve(g, flow_params(4, 3, 0.8), ZonalFunction::constant(g, 1.7), 1.0, 0.25);
  for (const auto& s : tr.states)
    for (Eigen::Index i = 0; i < s.size(); ++i) CHECK(s[i] == doctest::Approx(1.7).epsilon(1e-13));
}

TEST_CASE("weighted flow matches the density flow after time rescaling") {
  const auto g = make_grid(3, 64);
  for (double m : {0.6, 0.7, 0.9}) {
    const auto fp = flow_params(3, 4, m);
    const auto w0 = ZonalFunction::sample(g, [](double z) { return 1.2 - 0.4 * z * z + 0.1 * z; });
    // ρ = w^{βp} solves the density equation with ρ(t) = w(mt)^{βp}.
    const auto tr = evolve(g, fp, w0, m, m / 10);
    const auto rho0 = ZonalFunction(g, w0.values().array().pow(fp.beta * fp.p));
    const auto rho_at = evolve_density(g, m, rho0, 1.0);
    const auto& w_end = tr.states.back();
    for (Eigen::Index i = 0; i < g->size(); ++i)
      CHECK(rho_at[i] == doctest::Approx(std::pow(w_end[i], fp.beta * fp.p)).epsilon(1e-9));
    CHECK(integrate(*g, rho_at) == doctest::Approx(integrate(*g, rho0)).epsilon(1e-10));
  }
}

TEST_CASE("entropy decays under the flow: GNS0 below d and GNS1 below d/theta") {
  const auto g = make_grid(3, 64);
  const auto fp = flow_params(3, 4, 0.7);
  const auto w0 = ZonalFunction::sample(g, [](double z) { return 1 + 0.3 * z + 0.2 * z * z * z; });
  for (const InequalityParams ip : {InequalityParams{Family::GNS0, 3, 4, 1, 2}, InequalityParams{Family::GNS1, 3, 4, 0.5, 5}}) {
    CAPTURE(to_string(ip.family));
    // The bound is sharp near constants, so the time step must keep the
    // finite-difference error well below the 1e-5 tolerance.
    const auto tr = evolve(g, fp, w0, 6.0, 0.01, ip);
    const auto rep = entropy_report(tr, ip);
    CHECK(rep.monotone);
    CHECK(rep.bounds_hold);
    CHECK(rep.terminal_deficit >= -1e-12);
    CHECK(rep.terminal_deficit < 1e-8);
    CHECK(rep.max_excess <= 1e-11);
  }
}

TEST_CASE("entropy at the GNS0 threshold is nonincreasing") {
  const auto g = make_grid(3, 64);
  const auto fp = flow_params(3, 4, 0.7);
  const InequalityParams ip{Family::GNS0, 3, 4, 1, 3};
  const auto w0 = ZonalFunction::sample(g, [&](double z) { return std::pow(1 + 0.5 * z, 1 / fp.beta); });
  const auto rep = entropy_report(evolve(g, fp, w0, 2.0, 0.01, ip), ip);
  CHECK(rep.monotone);
  CHECK(rep.bounds_hold);
  for (const auto& st : rep.steps)
    if (std::isfinite(st.bound)) CHECK(st.bound == 0);
  CHECK_THROWS_AS(entropy_report(evolve(g, fp, w0, 0.1, 0.01), InequalityParams{Family::GNS0, 3, 3, 1, 2}),
                  ParameterError);
}

TEST_CASE("evolve errors") {
  const auto g = make_grid(3, 32);
  const auto fp = flow_params(3, 4, 0.7);
  const auto w0 = ZonalFunction::constant(g, 1.0);
  CHECK_THROWS_AS(evolve(g, fp, ZonalFunction::sample(g, [](double z) { return z; }), 1, 0.1), ParameterError);
  CHECK_THROWS_AS(evolve(g, fp, w0, 1, 0), ParameterError);
  CHECK_THROWS_AS(evolve(g, fp, w0, 1, 0.3), ParameterError);
  CHECK_THROWS_AS(evolve(make_grid(4, 32), fp, ZonalFunction::constant(make_grid(4, 32), 1.0), 1, 0.1),
                  ParameterError);
  CHECK_THROWS_AS(evolve(g, fp, w0, 1, 0.1, InequalityParams{Family::GNS0, 3, 3, 1, 2}), ParameterError);
  CHECK_THROWS_AS(evolve_density(g, -1, w0, 1), ParameterError);
}
