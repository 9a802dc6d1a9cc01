#include <doctest.h>

#include <cmath>

#include "regen/linalg.hpp"
#include "regen/rng.hpp"
#include "regen/special.hpp"

using namespace regen;

namespace {

Mat random_psd(std::size_t d, CounterRng& rng) {
  Mat g(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) g(i, j) = rng.normal();
  return g * g.transpose();
}

// Gauss-Jordan inverse, used only as a test oracle.
Mat invert_oracle(Mat a) {
  const std::size_t n = a.rows();
  Mat inv = Mat::identity(n);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
    for (std::size_t j = 0; j < n; ++j) {
      std::swap(a(col, j), a(piv, j));
      std::swap(inv(col, j), inv(piv, j));
    }
    const double d = a(col, col);
    for (std::size_t j = 0; j < n; ++j) {
      a(col, j) /= d;
      inv(col, j) /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a(r, col);
      for (std::size_t j = 0; j < n; ++j) {
        a(r, j) -= f * a(col, j);
        inv(r, j) -= f * inv(col, j);
      }
    }
  }
  return inv;
}

}  // namespace

TEST_CASE("psd_sqrt on identity and diagonal matrices") {
  Mat id = Mat::identity(3);
  CHECK(max_abs_diff(psd_sqrt(id), id) < 1e-14);

  Mat d(2, 2);
  d(0, 0) = 4.0;
  d(1, 1) = 9.0;
  Mat r = psd_sqrt(d);
  CHECK(r(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(r(1, 1) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(std::abs(r(0, 1)) < 1e-12);
}

TEST_CASE("psd_sqrt reproduces [[2,1],[1,2]] to 1e-12") {
  Mat m(2, 2);
  m(0, 0) = m(1, 1) = 2.0;
  m(0, 1) = m(1, 0) = 1.0;
  Mat r = psd_sqrt(m);
  CHECK(max_abs_diff(r * r, m) < 1e-12);
}

TEST_CASE("psd_sqrt rejects indefinite input") {
  Mat m(2, 2);
  m(0, 0) = 1.0;
  m(1, 1) = -1.0;
  CHECK_THROWS_AS(psd_sqrt(m), Error);
}

TEST_CASE("psd_sqrt of square is identity on random PSD matrices") {
  CounterRng rng = CounterRng::seeded(11);
  for (int it = 0; it < 40; ++it) {
    const std::size_t d = 1 + it % 4;
    Mat m = random_psd(d, rng);
    Mat r = psd_sqrt(m);
    CHECK(max_abs_diff(r * r, m) < 1e-10 * std::max(1.0, m.max_abs()));
  }
}

TEST_CASE("pseudo_inverse basics") {
  Mat id = Mat::identity(2);
  CHECK(max_abs_diff(pseudo_inverse(id), id) < 1e-13);

  Mat zero(3, 3);
  CHECK(pseudo_inverse(zero).max_abs() == 0.0);

  Mat d(2, 2);
  d(0, 0) = 2.0;
  Mat p = pseudo_inverse(d);
  CHECK(p(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::abs(p(1, 1)) < 1e-14);
}

TEST_CASE("pseudo_inverse of an invertible matrix equals its inverse") {
  CounterRng rng = CounterRng::seeded(12);
  for (int it = 0; it < 30; ++it) {
    const std::size_t d = 2 + it % 3;
    Mat a(d, d);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) a(i, j) = rng.normal();
      a(i, i) += 3.0;  // keep well-conditioned
    }
    CHECK(max_abs_diff(pseudo_inverse(a), invert_oracle(a)) < 1e-10);
  }
}

TEST_CASE("pseudo_inverse satisfies the four Moore-Penrose identities") {
  CounterRng rng = CounterRng::seeded(13);
  for (int it = 0; it < 30; ++it) {
    const std::size_t d = 1 + it % 4;
    Mat a(d, d);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) a(i, j) = rng.normal();
    if (it % 3 == 0)  // make it rank-deficient
      for (std::size_t j = 0; j < d; ++j) a(d - 1, j) = a(0, j);
    Mat ap = pseudo_inverse(a);
    const double scale = std::max(1.0, a.max_abs());
    CHECK(max_abs_diff(a * ap * a, a) < 1e-10 * scale);
    CHECK(max_abs_diff(ap * a * ap, ap) < 1e-10 * scale);
    CHECK(sym_residual(a * ap) < 1e-10 * scale);
    CHECK(sym_residual(ap * a) < 1e-10 * scale);
  }
}

TEST_CASE("eigen_sym recovers a planted spectrum") {
  // plant eigenvalues {1, 4, 10} through a rotation
  Mat m(3, 3);
  m(0, 0) = 1;
  m(1, 1) = 4;
  m(2, 2) = 10;
  CounterRng rng = CounterRng::seeded(14);
  Mat g(3, 3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) g(i, j) = rng.normal();
  Svd s = svd(g);  // s.u is orthogonal
  Mat rot = s.u;
  Mat planted = rot * m * rot.transpose();
  EigenSym es = eigen_sym(planted);
  CHECK(es.values[0] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(es.values[1] == doctest::Approx(4.0).epsilon(1e-10));
  CHECK(es.values[2] == doctest::Approx(10.0).epsilon(1e-10));
}

TEST_CASE("special functions match reference values") {
  CHECK(lgamma_pos(1.0) == doctest::Approx(0.0).epsilon(1e-13));
  CHECK(lgamma_pos(5.0) == doctest::Approx(std::log(24.0)).epsilon(1e-13));
  CHECK(log_factorial(10) == doctest::Approx(std::log(3628800.0)).epsilon(1e-13));
  CHECK(gamma_p(1.0, 1.0) == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-12));
  CHECK(gamma_quantile(1.0, 1.0 - std::exp(-2.5)) == doctest::Approx(2.5).epsilon(1e-10));
  CHECK(beta_i(2.0, 2.0, 0.5) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(beta_quantile(3.0, 5.0, beta_i(3.0, 5.0, 0.37)) == doctest::Approx(0.37).epsilon(1e-10));
  CHECK(normal_cdf(normal_quantile(0.975)) == doctest::Approx(0.975).epsilon(1e-12));
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0));
}

TEST_CASE("discrete quantiles match CDF scans") {
  // Poisson(3.7): quantile must be the smallest k with CDF >= p
  const double mu = 3.7;
  for (double p : {0.01, 0.2, 0.5, 0.8, 0.99, 0.999999}) {
    double acc = 0.0;
    std::int64_t k = 0;
    while (true) {
      acc += std::exp(k * std::log(mu) - mu - log_factorial(k));
      if (acc >= p || k > 200) break;
      ++k;
    }
    CHECK(poisson_quantile(mu, p) == k);
  }
  // Binomial(12, 0.3)
  for (double p : {0.05, 0.4, 0.77, 0.995}) {
    double acc = 0.0;
    std::int64_t k = 0;
    while (k <= 12) {
      acc += std::exp(log_factorial(12) - log_factorial(k) - log_factorial(12 - k) + k * std::log(0.3) +
                      (12 - k) * std::log(0.7));
      if (acc >= p) break;
      ++k;
    }
    CHECK(binomial_quantile(12, 0.3, p) == k);
  }
}
