#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "lir/rng.hpp"

using lir::Rng;

TEST_CASE("same seed gives the same sequence") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(43);
  bool all_equal = true;
  Rng a2(42);
  for (int i = 0; i < 10; ++i) all_equal &= (a2.next_u64() == c.next_u64());
  CHECK_FALSE(all_equal);
}

TEST_CASE("split streams do not depend on parent consumption") {
  Rng parent1(7);
  for (int i = 0; i < 5; ++i) parent1.next_u64();
  Rng child1 = parent1.split(3);

  Rng parent2(7);
  Rng child2 = parent2.split(3);

  for (int i = 0; i < 20; ++i) CHECK(child1.next_u64() == child2.next_u64());
}

TEST_CASE("distinct streams differ from each other and the parent") {
  Rng parent(11);
  Rng a = parent.split(0);
  Rng b = parent.split(1);
  int agree = 0;
  for (int i = 0; i < 64; ++i) agree += (a.next_u64() == b.next_u64());
  CHECK(agree == 0);
}

TEST_CASE("uniform doubles stay in range with a sane mean") {
  Rng rng(1);
  double sum = 0;
  for (int i = 0; i < 20000; ++i) {
    const double u = rng.next_double();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(sum / 20000 == doctest::Approx(0.5).epsilon(0.05));

  for (int i = 0; i < 1000; ++i) {
    const double u = rng.next_open_double();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("next_int covers its range and rejects bad arguments") {
  Rng rng(2);
  std::set<int> seen;
  for (int i = 0; i < 400; ++i) {
    const int v = rng.next_int(7);
    REQUIRE(v >= 0);
    REQUIRE(v < 7);
    seen.insert(v);
  }
  CHECK(seen.size() == 7);
  CHECK_THROWS_AS(rng.next_int(0), std::invalid_argument);
  CHECK_THROWS_AS(rng.next_int(-3), std::invalid_argument);
}

TEST_CASE("normal and exponential draws are finite and sane") {
  Rng rng(3);
  double sum = 0, sumsq = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.next_normal();
    REQUIRE(std::isfinite(x));
    sum += x;
    sumsq += x * x;
  }
  CHECK(sum / n == doctest::Approx(0.0).epsilon(0.05));
  CHECK(sumsq / n == doctest::Approx(1.0).epsilon(0.05));

  double esum = 0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.next_exp(2.0);
    REQUIRE(x > 0);
    esum += x;
  }
  CHECK(esum / n == doctest::Approx(0.5).epsilon(0.05));
  CHECK_THROWS_AS(rng.next_exp(0.0), std::invalid_argument);
}

TEST_CASE("simplex draws are normalized and interior") {
  Rng rng(4);
  for (int k : {1, 2, 5}) {
    const auto v = rng.next_simplex(k);
    REQUIRE(static_cast<int>(v.size()) == k);
    double total = 0;
    for (double x : v) {
      REQUIRE(x > 0);
      total += x;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("sampling without replacement yields distinct values") {
  Rng rng(5);
  const auto pick = rng.sample_without_replacement(10, 6);
  REQUIRE(pick.size() == 6);
  std::set<int> s(pick.begin(), pick.end());
  CHECK(s.size() == 6);
  for (int v : pick) {
    CHECK(v >= 0);
    CHECK(v < 10);
  }
  CHECK_THROWS_AS(rng.sample_without_replacement(3, 4), std::invalid_argument);
}
