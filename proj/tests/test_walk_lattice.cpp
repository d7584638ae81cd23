#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>
#include <string>

#include "doctest.h"
#include "polylab/quadrature.hpp"
#include "polylab/rng.hpp"
#include "polylab/walk_lattice.hpp"

using namespace polylab;

namespace {
const WalkKernelTable& shared_table() {
  static const WalkKernelTable t = WalkKernelTable::build(256);
  return t;
}
}  // namespace

TEST_CASE("one- and two-step probabilities") {
  const WalkKernelTable& t = shared_table();
  CHECK(t.q(0, 0, 0) == 1.0);
  CHECK(t.q(1, 1, 0) == 0.25);
  CHECK(t.q(1, 0, -1) == 0.25);
  CHECK(t.q(2, 0, 0) == 0.25);   // 4 of the 16 two-step paths return
  CHECK(t.q(2, 1, 0) == 0.0);    // parity
  CHECK(t.q(2, 1, 1) == 0.125);  // 2 of 16
  CHECK(t.q(2, 2, 0) == 0.0625);
}

TEST_CASE("parity and reach give exact zeros") {
  const WalkKernelTable& t = shared_table();
  CHECK(t.q(7, 0, 0) == 0.0);
  CHECK(t.q(7, 1, 1) == 0.0);
  CHECK(t.q(3, 4, 0) == 0.0);  // out of reach
  CHECK(t.q(5, -6, 1) == 0.0);
  CHECK(even_site(2, 1, 1));
  CHECK(!even_site(2, 1, 0));
}

TEST_CASE("rows sum to one") {
  const WalkKernelTable& t = shared_table();
  for (int n = 0; n <= 64; ++n) CHECK(std::fabs(t.row_sum(n) - 1.0) <= 1e-14);
  for (int n = 65; n <= 256; ++n) CHECK(std::fabs(t.row_sum(n) - 1.0) <= 1e-13);
}

TEST_CASE("values are nonnegative and symmetric") {
  const WalkKernelTable& t = shared_table();
  t.for_each_site(37, [](long, long, double v) { REQUIRE(v >= 0.0); });
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    long n = 1 + static_cast<long>(rng.below(100));
    long x1 = static_cast<long>(rng.below(2 * n + 1)) - n;
    long x2 = static_cast<long>(rng.below(2 * n + 1)) - n;
    double v = t.q(n, x1, x2);
    CHECK(t.q(n, -x1, x2) == v);
    CHECK(t.q(n, x1, -x2) == v);
    CHECK(t.q(n, x2, x1) == v);
    CHECK(t.q(n, -x2, -x1) == v);
  }
}

TEST_CASE("table matches the exact binomial product for small n") {
  const WalkKernelTable& t = shared_table();
  for (long n = 1; n <= 12; ++n) {
    std::vector<double> row = binom_half_row(n);
    t.for_each_site(static_cast<int>(n), [&](long x1, long x2, double v) {
      double a = row[static_cast<std::size_t>((x1 + x2 + n) / 2)];
      double b = row[static_cast<std::size_t>((x1 - x2 + n) / 2)];
      REQUIRE(std::fabs(v - a * b) <= 1e-15);
    });
  }
}

TEST_CASE("table matches the lgamma closed form at larger n") {
  const WalkKernelTable& t = shared_table();
  Rng rng(3);
  for (long n : {64L, 129L, 256L}) {
    for (int trial = 0; trial < 100; ++trial) {
      long x1 = static_cast<long>(rng.below(static_cast<std::uint64_t>(n))) -
                n / 2;
      long x2 = static_cast<long>(rng.below(static_cast<std::uint64_t>(n))) -
                n / 2;
      if (!even_site(n, x1, x2)) ++x2;
      double a = t.q(n, x1, x2);
      double b = walk_prob(n, x1, x2);
      REQUIRE(std::fabs(a - b) <= 1e-10 * std::max(1e-30, std::fabs(a)) + 1e-300);
    }
  }
}

TEST_CASE("time outside the horizon throws") {
  const WalkKernelTable& t = shared_table();
  CHECK_THROWS_AS((void)t.q(257, 0, 0), std::out_of_range);
  CHECK_THROWS_AS((void)t.q(-1, 0, 0), std::out_of_range);
}

TEST_CASE("memory budget is enforced") {
  CHECK_THROWS_AS((void)WalkKernelTable::build(4000, 1u << 20),
                  std::length_error);
  CHECK(WalkKernelTable::bytes_needed(64) < WalkKernelTable::bytes_needed(65));
}

TEST_CASE("local central limit theorem decays like 1/n^2") {
  // Frozen regression constant: the measured max of n^2|q_n - 2 g_{n/2}|
  // over |x| <= 3 sqrt(n) is 0.318 at each of n = 64, 128, 256. C = 0.40
  // keeps margin while pinning the 1/n^2 rate.
  const WalkKernelTable& t = shared_table();
  const double C = 0.40;
  for (long n : {64L, 128L, 256L}) {
    double worst = 0.0;
    double rad = 3.0 * std::sqrt(static_cast<double>(n));
    for (long x1 = -static_cast<long>(rad); x1 <= static_cast<long>(rad);
         ++x1) {
      for (long x2 = -static_cast<long>(rad); x2 <= static_cast<long>(rad);
           ++x2) {
        if (x1 * x1 + x2 * x2 > rad * rad) continue;
        double approx = even_site(n, x1, x2)
                            ? 2.0 * heat_kernel(0.5 * n, static_cast<double>(x1),
                                                static_cast<double>(x2))
                            : 0.0;
        worst = std::max(worst, std::fabs(t.q(n, x1, x2) - approx));
      }
    }
    CHECK(worst <= C / (static_cast<double>(n) * static_cast<double>(n)));
  }
}

TEST_CASE("overlap from table and closed form agree") {
  OverlapTable a = OverlapTable::from_table(shared_table());  // N = 128
  OverlapTable b = OverlapTable::closed_form(128);
  REQUIRE(a.size() == 128);
  for (long n = 0; n <= 128; ++n) {
    CHECK(std::fabs(a.u_sq[static_cast<std::size_t>(n)] -
                    b.u_sq[static_cast<std::size_t>(n)]) <= 1e-13);
  }
  CHECK(std::fabs(a.R(128) - b.R(128)) <= 1e-12);
}

TEST_CASE("overlap equals the sum of squared kernel values") {
  const WalkKernelTable& t = shared_table();
  OverlapTable o = OverlapTable::from_table(t);
  for (long n : {1L, 2L, 3L, 17L, 64L, 128L}) {
    double s = 0.0;
    t.for_each_site(static_cast<int>(n),
                    [&](long, long, double v) { s += v * v; });
    CHECK(std::fabs(s - o.u_sq[static_cast<std::size_t>(n)]) <= 1e-13);
  }
}

TEST_CASE("overlap values and asymptotics") {
  OverlapTable o = OverlapTable::closed_form(1000);
  CHECK(o.u_sq[1] == 0.25);
  CHECK(std::fabs(o.u_sq[1000] - 1.0 / (std::numbers::pi * 1000.0)) <=
        1e-2 / (std::numbers::pi * 1000.0));
  for (long n = 2; n <= 1000; ++n) {
    REQUIRE(o.u_sq[static_cast<std::size_t>(n)] <
            o.u_sq[static_cast<std::size_t>(n) - 1]);
    REQUIRE(o.R(n) > o.R(n - 1));
  }
}

TEST_CASE("overlap partial sums approach the constant alpha over pi") {
  OverlapTable o = OverlapTable::closed_form(1000000);
  CHECK(std::fabs(alpha_constant() - 0.2082117335) <= 1e-9);
  CHECK(std::fabs(o.alpha_diagnostic(1000000) - alpha_constant() / std::numbers::pi) <=
        5e-3);
}

TEST_CASE("heat kernel values and normalization") {
  CHECK(std::fabs(heat_kernel(1.0, 0.0, 0.0) - 1.0 / (2.0 * std::numbers::pi)) <=
        1e-15);
  CHECK_THROWS_AS((void)heat_kernel(0.0, 1.0, 1.0), std::domain_error);
  CHECK_THROWS_AS((void)heat_kernel(-2.0, 0.0, 0.0), std::domain_error);
  for (double u : {0.1, 1.0, 10.0}) {
    // radial reduction of the 2d integral
    auto r = integrate_to_inf(
        [&](double rr) {
          return 2.0 * std::numbers::pi * rr * heat_kernel(u, rr, 0.0);
        },
        0.0, 1e-10);
    REQUIRE(r.converged);
    CHECK(std::fabs(r.value - 1.0) <= 1e-8);
    // product structure vs the 1d density
    CHECK(std::fabs(heat_kernel(u, 0.7, -1.1) -
                    gauss1d(u, 0.7) * gauss1d(u, -1.1)) <= 1e-16);
  }
}

TEST_CASE("product identity for heat kernels") {
  double t = 0.7;
  double x1 = 1, x2 = 2, y1 = -0.3, y2 = 0.4;
  double lhs = heat_kernel(t, x1, x2) * heat_kernel(t, y1, y2);
  double rhs = 4.0 * heat_kernel(2.0 * t, x1 - y1, x2 - y2) *
               heat_kernel(2.0 * t, x1 + y1, x2 + y2);
  CHECK(std::fabs(lhs - rhs) <= 1e-12);
}

TEST_CASE("cache round trip") {
  WalkKernelTable t = WalkKernelTable::build(20);
  std::string path = "walk_cache_test.bin";
  t.save(path);
  WalkKernelTable u = WalkKernelTable::load(path);
  REQUIRE(u.horizon() == 20);
  for (int n = 0; n <= 20; ++n) {
    bool same = true;
    t.for_each_site(n, [&](long x1, long x2, double v) {
      if (u.q(n, x1, x2) != v) same = false;
    });
    REQUIRE(same);
  }
  std::remove(path.c_str());
  CHECK_THROWS_AS((void)WalkKernelTable::load("no_such_file.bin"),
                  std::runtime_error);
}
