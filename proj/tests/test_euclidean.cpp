#include <doctest.h>

#include "sgns/error.hpp"
#include "sgns/euclidean.hpp"
#include "sgns/functionals.hpp"

#include <boost/math/tools/minima.hpp>

#include <cmath>
#include <numbers>

using namespace sgns;

TEST_CASE("ground_state in one dimension is the sech soliton") {
  const auto v = ground_state(1, 4);
  double worst = 0;
  for (double r = 0; r < v.rmax() + 5; r += 0.0137) worst = std::max(worst, std::abs(v.value(r) - std::sqrt(2.0) / std::cosh(r)));
  CHECK(worst < 1e-8);
  const auto n = radial_norms(v);
  CHECK(n.mass == doctest::Approx(4).epsilon(1e-9));
  CHECK(n.kinetic == doctest::Approx(4.0 / 3).epsilon(1e-9));
  CHECK(n.power == doctest::Approx(16.0 / 3).epsilon(1e-9));

  // General p: u = ((p/2) sech²((p-2)x/2))^{1/(p-2)}.
  for (double p : {3.0, 6.0}) {
    const auto w = ground_state(1, p);
    double e = 0;
    for (double r = 0; r < 20; r += 0.0173) {
      const double exact = std::pow(0.5 * p / std::pow(std::cosh(0.5 * (p - 2) * r), 2), 1 / (p - 2));
      e = std::max(e, std::abs(w.value(r) - exact));
    }
    CHECK(e < 1e-8);
  }
}

TEST_CASE("ground_state profiles: residual, decay and Pohozaev identities") {
  const auto v = ground_state(3, 4);
  CHECK(v.values().front() == doctest::Approx(4.33738768).epsilon(1e-8));
  CHECK(v.el_residual() < 1e-8);
  for (auto [d, p] : {std::pair{2, 3.0}, {3, 2.5}, {3, 3.0}, {3, 4.0}, {4, 3.0}, {5, 2.8}}) {
    CAPTURE(d);
    CAPTURE(p);
    const auto u = ground_state(d, p);
    const auto& y = u.values();
    for (std::size_t i = 1; i < y.size(); ++i) REQUIRE(y[i] < y[i - 1]);
    CHECK(y.back() < 1e-10 * y.front());
    CHECK(u.el_residual() < 1e-7);
    const auto n = radial_norms(u);
    const double ts = theta_star(d, p);
    // Testing the equation against u and against the dilation generator.
    CHECK(n.kinetic + n.mass == doctest::Approx(n.power).epsilon(1e-9));
    CHECK(n.kinetic / n.mass == doctest::Approx(ts / (1 - ts)).epsilon(1e-9));
  }
}

TEST_CASE("gns_constants: closed form, theta-star relation and scaling optimality") {
  CHECK(gns_constants(1, 4).K_pd == doctest::Approx(4 / std::sqrt(3.0)).epsilon(1e-8));
  for (double p : {2.5, 3.0, 4.0}) {
    const auto c = gns_constants(3, p);
    const double ts = c.theta_star;
    CHECK(ts == doctest::Approx(3 * (p - 2) / (2 * p)));
    CHECK(std::pow(ts, ts) * std::pow(1 - ts, 1 - ts) * c.K_pd == doctest::Approx(c.C_GNS).epsilon(1e-10));

    // u_h(x) = h^{d/p} u(hx) keeps ‖u‖_p; the quotient is minimal at h = 1.
    const auto n = radial_norms(ground_state(3, p));
    const double d = 3;
    auto q = [&](double h) {
      return (std::pow(h, 2 * d / p + 2 - d) * n.kinetic + std::pow(h, 2 * d / p - d) * n.mass) /
             std::pow(n.power, 2 / p);
    };
    const auto [h, qmin] = boost::math::tools::brent_find_minima(q, 0.5, 2.0, 40);
    CHECK(h == doctest::Approx(1).epsilon(1e-6));
    CHECK(qmin == doctest::Approx(c.K_pd).epsilon(1e-12));
  }
}

TEST_CASE("gamma_exponent and sphere_area") {
  CHECK(gamma_exponent(3, 4, 1) == doctest::Approx(0.25));
  CHECK(gamma_exponent(3, 4, 0) == 1);
  CHECK(gamma_exponent(3, 3, 0.5) == doctest::Approx(0.75));
  CHECK_THROWS_AS(gamma_exponent(3, 3, 1.5), ParameterError);
  CHECK_THROWS_AS(gamma_exponent(3, 6, 0.5), ParameterError);
  CHECK(sphere_area(1) == doctest::Approx(2 * std::numbers::pi));
  CHECK(sphere_area(2) == doctest::Approx(4 * std::numbers::pi));
  CHECK(sphere_area(3) == doctest::Approx(2 * std::numbers::pi * std::numbers::pi));
}

TEST_CASE("mu_infinity: positivity, endpoints and continuity") {
  for (double th : {0.1, 0.5, 0.9, 1.0}) CHECK(mu_infinity(3, 3, th) > 0);
  CHECK(mu_infinity(3, 3, 0) == doctest::Approx(1).epsilon(1e-14));
  CHECK(mu_infinity(3, 4, 1 - 1e-10) == doctest::Approx(mu_infinity(3, 4, 1)).epsilon(1e-8));

  // At p = 3 the theta = 1 constant is |𝕊^d|^{-(p-2)/p} C / (θ⋆^θ⋆ (1-θ⋆)^{1-θ⋆}).
  const auto c = gns_constants(3, 3);
  const double ts = c.theta_star;
  const double expected = std::pow(sphere_area(3), -1.0 / 3) * c.C_GNS / (std::pow(ts, ts) * std::pow(1 - ts, 1 - ts));
  CHECK(mu_infinity(3, 3, 1) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("prelimit quotient at lambda = 1e6 approaches the symbolic limit") {
  for (auto [d, p, th] : {std::tuple{3, 3.0, 1.0}, {3, 3.0, 0.5}, {3, 4.0, 0.7}, {2, 4.0, 0.5}, {4, 2.8, 0.3}}) {
    CAPTURE(d);
    CAPTURE(p);
    CAPTURE(th);
    const double lambda = 1e6;
    const double lstar = 0.25 * d * (d - 2) * (p - 2);
    const double limit = mu_infinity(d, p, th) * std::pow(lambda - lstar, gamma_exponent(d, p, th));
    CHECK(prelimit_quotient(d, p, th, lambda) == doctest::Approx(limit).epsilon(1e-5));
  }
  CHECK_THROWS_AS(prelimit_quotient(3, 3, 0, 1e6), ParameterError);
  CHECK_THROWS_AS(prelimit_quotient(3, 3, 1, 0.5), ParameterError);
}

TEST_CASE("stereographic identities") {
  // u ≡ 1 on 𝕊⁴ lifts from v = m^{-2} = 2/(1+r²); both sides equal d(d-2)/4 = 2.
  const auto one = stereographic_check(
      4, [](double r) { return 2 / (1 + r * r); }, [](double r) { return -4 * r / std::pow(1 + r * r, 2); }, 2);
  CHECK(one.sphere_dirichlet == doctest::Approx(2).epsilon(1e-10));
  CHECK(one.euclid_dirichlet == doctest::Approx(2).epsilon(1e-10));
  CHECK(one.sphere_lq == doctest::Approx(1).epsilon(1e-10));
  CHECK(one.residual_lq < 1e-10);

  const auto v = ground_state(3, 4);
  for (double q : {2.0, 3.0, 4.0}) {
    const auto s = stereographic_check(3, v, q);
    CHECK(s.residual_dirichlet < 1e-6);
    CHECK(s.residual_lq < 1e-6);
  }
  for (int d : {3, 5, 6}) {
    const auto g = stereographic_check(
        d, [](double r) { return std::exp(-r * r); }, [](double r) { return -2 * r * std::exp(-r * r); }, 2.5);
    CHECK(g.residual_dirichlet < 1e-8);
    CHECK(g.residual_lq < 1e-8);
  }
}

TEST_CASE("euclidean errors") {
  CHECK_THROWS_AS(ground_state(3, 6), ParameterError);
  CHECK_THROWS_AS(ground_state(3, 2), ParameterError);
  CHECK_THROWS_AS(ground_state(0, 3), ParameterError);
  CHECK_THROWS_AS(ground_state(3, 3, 0), ParameterError);
  CHECK_THROWS_AS(stereographic_check(2, ground_state(2, 3), 2), ParameterError);
  CHECK_THROWS_AS(stereographic_check(4, ground_state(3, 3), 2), ParameterError);
  CHECK_THROWS_AS(stereographic_check(3, [](double) { return 1.0; }, [](double) { return 0.0; }, 4), NumericalError);
}
