#include <doctest.h>

#include <cmath>

#include "regen/rng.hpp"
#include "regen/verify.hpp"

using namespace regen;

TEST_CASE("rate_fit discriminates planted signals") {
  std::vector<double> horizons = {256, 1024, 4096, 16384};
  CounterRng rng = CounterRng::seeded(61);
  SUBCASE("planted 3 log t is LOG-CONSISTENT") {
    std::vector<std::vector<double>> sups;
    for (double t : horizons) {
      std::vector<double> s(200);
      for (auto& v : s) v = 3.0 * std::log(t) + 0.2 * rng.normal();
      sups.push_back(s);
    }
    RateFit f = rate_fit(horizons, sups);
    CHECK(f.log_consistent);
    CHECK(f.c == doctest::Approx(3.0).epsilon(0.05));
    CHECK(f.verdict == "LOG-CONSISTENT");
  }
  SUBCASE("planted sqrt(t) is not") {
    std::vector<std::vector<double>> sups;
    for (double t : horizons) {
      std::vector<double> s(200);
      for (auto& v : s) v = std::sqrt(t) * (1.0 + 0.05 * rng.normal());
      sups.push_back(s);
    }
    RateFit f = rate_fit(horizons, sups);
    CHECK_FALSE(f.log_consistent);
    CHECK(f.loglog_exponent == doctest::Approx(0.5).epsilon(0.05));
  }
  SUBCASE("design preconditions") {
    std::vector<std::vector<double>> sups(2, std::vector<double>(200, 1.0));
    CHECK_THROWS_AS(rate_fit({256, 512}, sups), Error);
  }
}

TEST_CASE("tail_fit discriminates exponential from heavy tails") {
  CounterRng rng = CounterRng::seeded(62);
  const double t = 4096.0, c = 1.0;
  SUBCASE("planted Exp(2) tail passes with b near 2") {
    std::vector<double> s(4000);
    for (auto& v : s) v = c * std::log(t) + rng.exponential(2.0);
    TailFitResult f = tail_fit(s, c, t);
    CHECK(f.pass);
    CHECK(f.b == doctest::Approx(2.0).epsilon(0.2));
  }
  SUBCASE("planted half-Cauchy tail fails") {
    std::vector<double> s(4000);
    for (auto& v : s) {
      const double u = rng.uniform01();
      v = c * std::log(t) + std::abs(std::tan(3.14159265358979 * (u - 0.5)));
    }
    TailFitResult f = tail_fit(s, c, t);
    CHECK_FALSE(f.pass);
  }
  SUBCASE("replicate floor") {
    std::vector<double> s(100, 1.0);
    CHECK_THROWS_AS(tail_fit(s, c, t), Error);
  }
}

TEST_CASE("poisson_tail_check validates the inverse-Poisson tail bound") {
  CounterRng rng = CounterRng::seeded(63);
  SUBCASE("unit fixture") {
    auto rep = poisson_tail_check(1.0, 1.0, 1.0, 1.0, {32.0}, 10000, rng);
    CHECK(rep.pass);
    CHECK(rep.rep_consistency_z <= 3.0);
    for (const auto& row : rep.rows) CHECK(row.pass);
  }
  SUBCASE("small t makes the bound vacuous") {
    auto rep = poisson_tail_check(1.0, 1.0, 1.0, 0.01, {2.0}, 2000, rng);
    for (const auto& row : rep.rows) CHECK(row.bound == 1.0);
    CHECK(rep.pass);
  }
}

TEST_CASE("window_max_check behaviour") {
  CounterRng rng = CounterRng::seeded(64);
  SUBCASE("gaussian law passes") {
    GaussianStep law(0.0, 1.0);
    auto rep = window_max_check(law, {1 << 10}, 2.0, 0.5, 300, rng);
    CHECK(rep.pass);
    CHECK(rep.rows[0].tail_b > 0.0);
  }
  SUBCASE("centered exponential passes with growing median") {
    GammaStep law(1.0, 1.0, -1.0);  // Exp(1) - 1
    auto rep = window_max_check(law, {1 << 8, 1 << 10, 1 << 12}, 2.0, 0.5, 250, rng);
    CHECK(rep.pass);
    CHECK(rep.median_slope_on_logn > 0.0);
  }
  SUBCASE("constant-zero law degenerates safely") {
    GaussianStep law(0.0, 0.0);
    auto rep = window_max_check(law, {1 << 8}, 2.0, 0.5, 100, rng);
    CHECK(rep.pass);
    CHECK(rep.rows[0].degenerate);
    CHECK(rep.rows[0].median == 0.0);
  }
}

TEST_CASE("covariance_check calibration") {
  CounterRng base = CounterRng::seeded(65);
  const std::vector<double> times = {1.0, 2.0, 4.0};
  const std::vector<std::pair<std::size_t, std::size_t>> pairs = {{0, 0}, {0, 1}, {1, 2}, {2, 2}};
  SUBCASE("exact brownian sampler passes") {
    std::vector<std::vector<Vec>> samples;
    for (std::size_t r = 0; r < 4000; ++r) {
      CounterRng rng = base.fork(r);
      double w = 0.0;
      std::vector<Vec> row;
      double prev_t = 0.0;
      for (double t : times) {
        w += std::sqrt(t - prev_t) * rng.normal();
        prev_t = t;
        row.push_back(Vec{w});
      }
      samples.push_back(row);
    }
    auto rep = covariance_check(samples, times, pairs);
    CHECK(rep.pass);
  }
  SUBCASE("planted variance 1.2 fails at large replicate counts") {
    std::vector<std::vector<Vec>> samples;
    for (std::size_t r = 0; r < 20000; ++r) {
      CounterRng rng = base.fork(1000000 + r);
      double w = 0.0;
      std::vector<Vec> row;
      double prev_t = 0.0;
      for (double t : times) {
        w += std::sqrt(1.2 * (t - prev_t)) * rng.normal();
        prev_t = t;
        row.push_back(Vec{w});
      }
      samples.push_back(row);
    }
    auto rep = covariance_check(samples, times, pairs);
    CHECK_FALSE(rep.pass);
  }
  SUBCASE("replicate floor") {
    std::vector<std::vector<Vec>> samples(10, std::vector<Vec>(3, Vec{0.0}));
    CHECK_THROWS_AS(covariance_check(samples, times, pairs), Error);
  }
}

TEST_CASE("verdicts are deterministic given seed and inputs") {
  CounterRng a = CounterRng::seeded(66);
  CounterRng b = CounterRng::seeded(66);
  auto r1 = poisson_tail_check(1.0, 1.0, 1.0, 1.0, {16.0}, 2000, a);
  auto r2 = poisson_tail_check(1.0, 1.0, 1.0, 1.0, {16.0}, 2000, b);
  CHECK(r1.rows[0].empirical == r2.rows[0].empirical);
  CHECK(r1.rows[0].gamma_rep == r2.rows[0].gamma_rep);
}
