#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "polylab/dickman.hpp"
#include "polylab/quadrature.hpp"
#include "polylab/rng.hpp"
#include "polylab/walk_lattice.hpp"

using namespace polylab;

TEST_CASE("density at s=1 is the flat e^{-gamma}") {
  for (double t : {0.01, 0.2, 0.5, 0.9, 0.999})
    CHECK(std::fabs(dickman_density(1.0, t) - 0.5614594836) <= 1e-10);
}

TEST_CASE("density rejects arguments outside its domain") {
  CHECK_THROWS_AS((void)dickman_density(0.0, 0.5), std::domain_error);
  CHECK_THROWS_AS((void)dickman_density(-1.0, 0.5), std::domain_error);
  CHECK_THROWS_AS((void)dickman_density(1.0, 0.0), std::domain_error);
  CHECK_THROWS_AS((void)dickman_density(1.0, 1.0), std::domain_error);
  CHECK_THROWS_AS((void)dickman_density(1.0, 1.2), std::domain_error);
}

TEST_CASE("mass below one: quadrature matches the closed form and decreases") {
  double prev = 1.0;
  for (double s : {0.5, 1.0, 2.0, 4.0}) {
    // substitute t = z^2 so the s = 1/2 edge singularity integrates exactly
    auto q = integrate(
        [&](double z) { return 2.0 * z * dickman_density(s, z * z); }, 1e-9,
        1.0 - 1e-12, 1e-11, 1e-12, 20000);
    double closed = dickman_mass_below_one(s);
    CHECK(std::fabs(q.value - closed) <= 1e-8);
    CHECK(closed <= 1.0);
    CHECK(closed < prev);
    prev = closed;
  }
  CHECK(std::fabs(dickman_mass_below_one(1.0) - 0.5614594836) <= 1e-10);
}

TEST_CASE("spacetime density factorizes through the heat kernel") {
  Rng rng(17);
  for (int i = 0; i < 50; ++i) {
    double s = 0.1 + 3.0 * rng.uniform();
    double t = 0.05 + 0.9 * rng.uniform();
    double x1 = 2.0 * rng.uniform() - 1.0;
    double x2 = 2.0 * rng.uniform() - 1.0;
    double lhs = dickman_density_spacetime(s, t, x1, x2);
    double rhs = dickman_density(s, t) * heat_kernel(0.25 * t, x1, x2);
    REQUIRE(lhs == rhs);
  }
}

TEST_CASE("G evaluator matches a direct quadrature of the s-integral") {
  GThetaEvaluator G(0.0);
  auto direct = integrate_to_inf(
      [](double s) { return dickman_density(s, 0.5); }, 1e-300, 1e-11, 1e-12,
      20000);
  CHECK(std::fabs(G(0.5) - direct.value) <= 1e-8);
}

TEST_CASE("G is increasing in theta pointwise") {
  GThetaEvaluator a(-1.0), b(0.0), c(1.5);
  for (double w : {1e-6, 1e-3, 0.1, 0.5, 1.0}) {
    REQUIRE(a(w) < b(w));
    REQUIRE(b(w) < c(w));
    REQUIRE(a(w) > 0.0);
  }
}

TEST_CASE("G domain checks") {
  GThetaEvaluator G(0.0);
  CHECK_THROWS_AS((void)G(0.0), std::domain_error);
  CHECK_THROWS_AS((void)G(1.5), std::domain_error);
  CHECK_THROWS_AS(GThetaEvaluator(8.0), std::domain_error);
}

TEST_CASE("small-w expansion of G becomes exact") {
  for (double theta : {-1.0, 0.3}) {
    GThetaEvaluator G(theta);
    double prev_rel = 1e300;
    for (double w : {1e-3, 1e-5, 1e-8}) {
      double L = std::log(1.0 / w);
      double model = (1.0 / (w * L * L)) * (1.0 + 2.0 * theta / L);
      double rel = std::fabs(G(w) / model - 1.0);
      CHECK(rel < prev_rel);
      prev_rel = rel;
    }
    CHECK(prev_rel < 0.05);
  }
}

TEST_CASE("integral of G agrees with nested quadrature away from zero") {
  // The mass of G below any cutoff eps only decays like 1/log(1/eps), so
  // the cross-check differences the closed form over [w0, w].
  GThetaEvaluator G(0.7);
  const double w0 = 0.05;
  for (double w : {0.3, 1.0}) {
    auto nested = integrate([&](double t) { return G(t); }, w0, w, 1e-10,
                            1e-11, 20000);
    double closed = G.integral_0_to(w) - G.integral_0_to(w0);
    CHECK(std::fabs(closed - nested.value) <= 1e-7);
  }
  CHECK(G.intermittency_constant() == G.integral_0_to(1.0));
  CHECK(G.intermittency_constant() > 0.0);
}

TEST_CASE("quadrature self-consistency under tolerance halving") {
  GThetaEvaluator coarse(0.0, 1e-7), fine(0.0, 5e-8);
  for (double w : {1e-4, 0.2, 1.0}) {
    auto rc = coarse.eval(w);
    CHECK(std::fabs(rc.value - fine.eval(w).value) <= std::max(rc.error, 1e-12));
  }
}

TEST_CASE("envelope bound is certified and monotone in theta") {
  double prev = 0.0;
  for (double theta : {-2.0, 0.0, 2.0}) {
    GThetaBound b = g_theta_bound(theta);
    REQUIRE(b.certified);
    CHECK(b.c_theta >= 1.049 * b.grid_max);
    CHECK(b.c_theta > prev);
    prev = b.c_theta;
  }
}

TEST_CASE("envelope dominates G at random points") {
  GThetaBound b = g_theta_bound(0.5);
  GThetaEvaluator G(0.5);
  Rng rng(4);
  for (int i = 0; i < 40; ++i) {
    double w = std::exp(-20.0 * rng.uniform());  // log-uniform in [e^-20, 1]
    REQUIRE(G(w) <= g_theta_hat(b.c_theta, w) * (1.0 + 1e-9));
  }
}

TEST_CASE("hat-G is strictly decreasing") {
  GThetaBound b = g_theta_bound(0.0);
  double prev = 1e300;
  for (int i = 0; i <= 1000; ++i) {
    double t = std::exp(-10.0 + 10.0 * static_cast<double>(i) / 1000.0);
    double v = g_theta_hat(b.c_theta, t);
    REQUIRE(v < prev);
    prev = v;
  }
}

TEST_CASE("euler constant self-audit") {
  auto [a, b] = euler_gamma_self_audit();
  CHECK(std::fabs(a - kEulerGamma) <= 1e-10);
  CHECK(std::fabs(b - kEulerGamma) <= 1e-10);
}

TEST_CASE("spacetime G factorizes") {
  GThetaEvaluator G(0.2);
  Rng rng(9);
  for (int i = 0; i < 20; ++i) {
    double w = 0.05 + 0.95 * rng.uniform();
    double x1 = rng.normal(), x2 = rng.normal();
    CHECK(std::fabs(G.spacetime(w, x1, x2) -
                    G(w) * heat_kernel(0.25 * w, x1, x2)) <=
          1e-12 * G.spacetime(w, x1, x2) + 1e-300);
  }
}
