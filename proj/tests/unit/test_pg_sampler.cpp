#include <doctest.h>

#include <cmath>
#include <vector>

#include "markovpg/errors.hpp"
#include "markovpg/pg_sampler.hpp"
#include "oracles.hpp"

using namespace markovpg;

TEST_CASE("moments have the closed forms and the small-c limits") {
  CHECK(pg_mean({1, 0.0}) == doctest::Approx(0.25));
  CHECK(pg_mean({3, 0.0}) == doctest::Approx(0.75));
  CHECK(pg_variance({1, 0.0}) == doctest::Approx(1.0 / 24.0));
  CHECK(pg_mean({1, 2.0}) == doctest::Approx(std::tanh(1.0) / 4.0));
  // continuous through the switch-over to the limit
  CHECK(pg_mean({1, 1e-7}) == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(pg_variance({1, 1e-4}) == doctest::Approx(1.0 / 24.0).epsilon(1e-6));
  CHECK(pg_mean({1, -3.0}) == pg_mean({1, 3.0}));
}

TEST_CASE("draws depend on |c| only and are reproducible") {
  Rng a(11), b(11);
  for (int i = 0; i < 1000; ++i) CHECK(draw_pg1(2.5, a) == draw_pg1(-2.5, b));
  Rng c(5), d(5);
  for (int i = 0; i < 100; ++i) CHECK(draw_pg({2, 0.7}, c) == draw_pg({2, 0.7}, d));
}

TEST_CASE("draws are positive and finite over a wide tilt range") {
  Rng rng(3);
  for (double c : {0.0, 1e-12, 1e-3, 0.64, 1.0, 5.0, 40.0, 300.0, 1e4}) {
    for (int i = 0; i < 2000; ++i) {
      const double w = draw_pg1(c, rng);
      REQUIRE(std::isfinite(w));
      REQUIRE(w > 0.0);
    }
  }
}

TEST_CASE("large tilt concentrates at the mean") {
  Rng rng(9);
  const double c = 200.0;
  double s = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) s += draw_pg1(c, rng);
  const double se = std::sqrt(pg_variance({1, c}) / n);
  CHECK(std::abs(s / n - pg_mean({1, c})) < 4.0 * se);
}

TEST_CASE("b > 1 sums b independent draws") {
  Rng rng(21);
  const int n = 40000;
  const PGParams p{4, 1.5};
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double w = draw_pg(p, rng);
    s += w;
    s2 += w * w;
  }
  const double mean = s / n;
  CHECK(std::abs(mean - pg_mean(p)) < 4.0 * std::sqrt(pg_variance(p) / n));
  CHECK((s2 / n - mean * mean) == doctest::Approx(pg_variance(p)).epsilon(0.05));
}

TEST_CASE("distribution matches the truncated series") {
  for (double c : {0.3, 4.0}) {
    CAPTURE(c);
    const std::size_t n = 20000;
    Rng rng(100 + static_cast<std::uint64_t>(c * 10));
    std::mt19937_64 gen(77);
    std::vector<double> ours(n), ref(n);
    for (auto& w : ours) w = draw_pg1(c, rng);
    for (auto& w : ref) w = oracle::series_pg(1.0, c, 400, gen);
    CHECK(oracle::ks_statistic(ours, ref) < oracle::ks_critical_01(n, n));
  }
}

TEST_CASE("invalid parameters are rejected") {
  Rng rng(1);
  CHECK_THROWS_AS(draw_pg({0, 1.0}, rng), ParameterError);
  CHECK_THROWS_AS(draw_pg1(std::nan(""), rng), ParameterError);
  CHECK_THROWS_AS(draw_pg1(INFINITY, rng), ParameterError);
  CHECK_THROWS_AS(pg_mean({-1, 1.0}), ParameterError);
}
