#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "polylab/rng.hpp"

using polylab::Rng;

TEST_CASE("same seed reproduces the stream") {
  Rng a(12345), b(12345);
  for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("uniform stays in [0,1) and has the right mean and variance") {
  Rng rng(7);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    s += u;
    s2 += u * u;
  }
  double mean = s / n;
  double var = s2 / n - mean * mean;
  // 4-sigma bands: sd(mean) = sqrt(1/12n)
  CHECK(std::fabs(mean - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / n));
  CHECK(std::fabs(var - 1.0 / 12.0) < 4.0 * std::sqrt(1.0 / 180.0 / n));
}

TEST_CASE("uniform_pos never returns zero") {
  Rng rng(99);
  for (int i = 0; i < 100000; ++i) REQUIRE(rng.uniform_pos() > 0.0);
}

TEST_CASE("normal moments") {
  Rng rng(2024);
  const int n = 400000;
  double s = 0, s2 = 0, s3 = 0, s4 = 0;
  for (int i = 0; i < n; ++i) {
    double z = rng.normal();
    s += z;
    s2 += z * z;
    s3 += z * z * z;
    s4 += z * z * z * z;
  }
  double m = s / n;
  CHECK(std::fabs(m) < 4.0 / std::sqrt(static_cast<double>(n)));
  CHECK(std::fabs(s2 / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
  CHECK(std::fabs(s3 / n) < 4.0 * std::sqrt(15.0 / n));
  CHECK(std::fabs(s4 / n - 3.0) < 4.0 * std::sqrt(96.0 / n));
}

TEST_CASE("below(n) is in range and roughly uniform") {
  Rng rng(5);
  std::vector<int> counts(10, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    std::uint64_t v = rng.below(10);
    REQUIRE(v < 10);
    ++counts[static_cast<std::size_t>(v)];
  }
  for (int c : counts) CHECK(std::fabs(c - n / 10.0) < 4.0 * std::sqrt(n * 0.1 * 0.9));
}

TEST_CASE("split streams are distinct and decorrelated") {
  Rng base(42);
  Rng a = base.split(0);
  Rng b = base.split(1);
  const int n = 100000;
  double sa = 0, sb = 0, sab = 0;
  bool identical = true;
  for (int i = 0; i < n; ++i) {
    double x = a.uniform() - 0.5;
    double y = b.uniform() - 0.5;
    if (x != y) identical = false;
    sa += x * x;
    sb += y * y;
    sab += x * y;
  }
  REQUIRE(!identical);
  double corr = sab / std::sqrt(sa * sb);
  CHECK(std::fabs(corr) < 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("split is deterministic and order-independent") {
  Rng base(42);
  Rng a1 = base.split(3);
  Rng tmp = base.split(7);
  (void)tmp.next_u64();
  Rng a2 = base.split(3);
  for (int i = 0; i < 100; ++i) REQUIRE(a1.next_u64() == a2.next_u64());
}
