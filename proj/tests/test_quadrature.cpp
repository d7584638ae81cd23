#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "polylab/quadrature.hpp"

using polylab::integrate;
using polylab::integrate_to_inf;
using polylab::QuadResult;

TEST_CASE("polynomial is exact") {
  auto r = integrate([](double x) { return x * x; }, 0.0, 1.0, 1e-12);
  REQUIRE(r.converged);
  CHECK(std::fabs(r.value - 1.0 / 3.0) < 1e-14);
}

TEST_CASE("sine over a period") {
  auto r = integrate([](double x) { return std::sin(x); }, 0.0,
                     std::numbers::pi, 1e-12);
  REQUIRE(r.converged);
  CHECK(std::fabs(r.value - 2.0) < 1e-12);
}

TEST_CASE("error estimate covers the true error on a peaked integrand") {
  // Gaussian of width 0.01 centered inside the interval.
  const double c = 0.3, w = 0.01;
  auto f = [&](double x) {
    double t = (x - c) / w;
    return std::exp(-0.5 * t * t);
  };
  double truth = w * std::sqrt(2.0 * std::numbers::pi);  // tails < 1e-200
  auto r = integrate(f, 0.0, 1.0, 1e-12);
  REQUIRE(r.converged);
  CHECK(std::fabs(r.value - truth) <= std::max(r.error, 1e-12));
}

TEST_CASE("integrable endpoint singularity") {
  auto r = integrate([](double x) { return 1.0 / std::sqrt(x); }, 1e-300, 1.0,
                     1e-9, 1e-12, 100000);
  CHECK(std::fabs(r.value - 2.0) < 1e-6);
}

TEST_CASE("semi-infinite exponential") {
  auto r = integrate_to_inf([](double x) { return std::exp(-x); }, 0.0, 1e-12);
  REQUIRE(r.converged);
  CHECK(std::fabs(r.value - 1.0) < 1e-11);
}

TEST_CASE("semi-infinite gaussian from an offset") {
  auto r = integrate_to_inf([](double x) { return std::exp(-x * x); }, 0.5,
                            1e-12);
  REQUIRE(r.converged);
  double truth = 0.5 * std::sqrt(std::numbers::pi) * std::erfc(0.5);
  CHECK(std::fabs(r.value - truth) < 1e-11);
}

TEST_CASE("semi-infinite slow polynomial decay") {
  auto r = integrate_to_inf([](double x) { return 1.0 / (1.0 + x * x); }, 0.0,
                            1e-11);
  REQUIRE(r.converged);
  CHECK(std::fabs(r.value - 0.5 * std::numbers::pi) < 1e-10);
}

TEST_CASE("halving the tolerance moves the value by less than the estimate") {
  auto f = [](double x) { return std::log(1.0 + x) / (0.01 + x); };
  auto coarse = integrate(f, 0.0, 2.0, 1e-6);
  auto fine = integrate(f, 0.0, 2.0, 1e-12);
  REQUIRE(coarse.converged);
  REQUIRE(fine.converged);
  CHECK(std::fabs(coarse.value - fine.value) <= coarse.error);
}

TEST_CASE("empty interval integrates to zero") {
  auto r = integrate([](double x) { return x; }, 1.0, 1.0);
  CHECK(r.value == 0.0);
  CHECK(r.converged);
}
