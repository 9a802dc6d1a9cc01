#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <mutex>
#include <vector>

#include "regen/common.hpp"
#include "regen/rng.hpp"

namespace regen {

// Log-gamma for x > 0, Lanczos approximation (g = 7, n = 9). Self-contained
// so results are identical across libm versions and thread-safe.
inline double lgamma_pos(double x) {
  static const double c[9] = {
      0.99999999999980993,      676.5203681218851,     -1259.1392167224028,
      771.32342877765313,       -176.61502916214059,   12.507343278686905,
      -0.13857109526572012,     9.9843695780195716e-6, 1.5056327351493116e-7};
  if (x < 0.5) {
    // reflection; only hit for x in (0, 0.5)
    return std::log(3.14159265358979323846 / std::sin(3.14159265358979323846 * x)) - lgamma_pos(1.0 - x);
  }
  x -= 1.0;
  double a = c[0];
  const double t = x + 7.5;
  for (int i = 1; i < 9; ++i) a += c[i] / (x + i);
  return 0.9189385332046727418 + (x + 0.5) * std::log(t) - t + std::log(a);
}

// log(n!) with a cached table; falls back to lgamma_pos beyond the table.
inline double log_factorial(std::int64_t n) {
  constexpr std::int64_t kTable = 1 << 16;
  static std::vector<double> table;
  static std::once_flag once;
  std::call_once(once, [] {
    table.resize(kTable);
    long double acc = 0.0L;
    table[0] = 0.0;
    for (std::int64_t i = 1; i < kTable; ++i) {
      acc += std::log(static_cast<long double>(i));
      table[i] = static_cast<double>(acc);
    }
  });
  if (n < 0) return std::numeric_limits<double>::quiet_NaN();
  if (n < kTable) return table[n];
  return lgamma_pos(static_cast<double>(n) + 1.0);
}

namespace detail {

// Regularized lower incomplete gamma P(a,x) by series (x < a+1) or
// continued fraction (modified Lentz) for the complement.
inline double igamma_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int i = 0; i < 500; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - lgamma_pos(a));
}

inline double igamma_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - lgamma_pos(a)) * h;
}

}  // namespace detail

// Regularized lower incomplete gamma P(a,x), a > 0, x >= 0.
inline double gamma_p(double a, double x) {
  if (x <= 0.0) return 0.0;
  if (x < a + 1.0) return detail::igamma_series(a, x);
  return 1.0 - detail::igamma_cf(a, x);
}

// Quantile of Gamma(shape a, rate 1): smallest x with P(a,x) >= p.
// Wilson-Hilferty start plus safeguarded Newton.
inline double gamma_quantile(double a, double p) {
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  const double z = normal_quantile(p);
  const double wh = 1.0 - 1.0 / (9.0 * a) + z * std::sqrt(1.0 / (9.0 * a));
  double x = a * wh * wh * wh;
  if (!(x > 0.0)) x = a * std::exp((std::log(p) + lgamma_pos(a + 1.0)) / a);
  if (!(x > 0.0) || !std::isfinite(x)) x = 1e-12;
  double lo = 0.0, hi = std::numeric_limits<double>::infinity();
  const double lg = lgamma_pos(a);
  for (int it = 0; it < 100; ++it) {
    const double f = gamma_p(a, x) - p;
    if (f > 0.0) hi = x; else lo = x;
    const double logpdf = (a - 1.0) * std::log(x) - x - lg;
    double step = f * std::exp(-logpdf);
    if (!std::isfinite(step)) step = 0.0;
    double xn = x - step;
    if (!(xn > lo && (xn < hi))) xn = std::isfinite(hi) ? 0.5 * (lo + hi) : (lo > 0 ? 2.0 * x : x * 0.5 + 0.5);
    if (std::abs(xn - x) <= 1e-14 * (std::abs(x) + 1e-300)) { x = xn; break; }
    x = xn;
  }
  return x;
}

namespace detail {

inline double betacf(double a, double b, double x) {
  const double tiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 500; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return h;
}

}  // namespace detail

// Regularized incomplete beta I_x(a,b).
inline double beta_i(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double lnbeta = lgamma_pos(a) + lgamma_pos(b) - lgamma_pos(a + b);
  const double front = std::exp(a * std::log(x) + b * std::log(1.0 - x) - lnbeta);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * detail::betacf(a, b, x) / a;
  }
  return 1.0 - front * detail::betacf(b, a, 1.0 - x) / b;
}

// Quantile of Beta(a,b): safeguarded Newton on I_x(a,b) = p.
inline double beta_quantile(double a, double b, double p) {
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  const double mean = a / (a + b);
  const double var = a * b / ((a + b) * (a + b) * (a + b + 1.0));
  double x = mean + normal_quantile(p) * std::sqrt(var);
  if (!(x > 0.0 && x < 1.0)) x = mean;
  double lo = 0.0, hi = 1.0;
  const double lnbeta = lgamma_pos(a) + lgamma_pos(b) - lgamma_pos(a + b);
  for (int it = 0; it < 100; ++it) {
    const double f = beta_i(a, b, x) - p;
    if (f > 0.0) hi = x; else lo = x;
    const double logpdf = (a - 1.0) * std::log(x) + (b - 1.0) * std::log(1.0 - x) - lnbeta;
    double step = f * std::exp(-logpdf);
    if (!std::isfinite(step)) step = 0.0;
    double xn = x - step;
    if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
    if (std::abs(xn - x) <= 1e-15) { x = xn; break; }
    x = xn;
  }
  return x;
}

// Generic discrete quantile for laws supported on [lo, hi] (hi may be huge),
// with unimodal pmf. `log_pmf(k)` must be valid for k in [lo, hi]. Scans the
// CDF over a window around the mode that carries all but ~1e-15 of the mass.
template <typename LogPmf>
std::int64_t discrete_quantile_scan(double p, std::int64_t lo, std::int64_t hi, std::int64_t mode,
                                    LogPmf log_pmf) {
  if (hi <= lo) return lo;
  if (mode < lo) mode = lo;
  if (mode > hi) mode = hi;
  // Grow a window [wl, wr] around the mode until it carries all but ~1e-15
  // of the mass, tracked through pmf values.
  std::vector<double> left, right;  // pmf at mode-1, mode-2, ... and mode+1, ...
  const double pm = std::exp(log_pmf(mode));
  double mass = pm;
  std::int64_t wl = mode, wr = mode;
  double last_l = pm, last_r = pm;
  while (true) {
    bool grew = false;
    if (wl > lo && (last_l > mass * 1e-17 || mass <= 0.0)) {
      --wl;
      last_l = std::exp(log_pmf(wl));
      left.push_back(last_l);
      mass += last_l;
      grew = true;
    }
    if (wr < hi && (last_r > mass * 1e-17 || mass <= 0.0)) {
      ++wr;
      last_r = std::exp(log_pmf(wr));
      right.push_back(last_r);
      mass += last_r;
      grew = true;
    }
    if (!grew) break;
  }
  // CDF scan from the left edge of the window. Mass below the window is
  // negligible by construction.
  const double target = p * mass;
  double acc = 0.0;
  for (std::int64_t k = wl; k <= wr; ++k) {
    double pk;
    if (k < mode) pk = left[static_cast<std::size_t>(mode - k - 1)];
    else if (k == mode) pk = pm;
    else pk = right[static_cast<std::size_t>(k - mode - 1)];
    acc += pk;
    if (acc >= target) return k;
  }
  return wr;
}

// Poisson(mu) quantile.
inline std::int64_t poisson_quantile(double mu, double p) {
  if (mu <= 0.0) return 0;
  const std::int64_t mode = static_cast<std::int64_t>(mu);
  const std::int64_t hi = std::numeric_limits<std::int64_t>::max() / 4;
  const double lmu = std::log(mu);
  return discrete_quantile_scan(p, 0, hi, mode, [&](std::int64_t k) {
    return k * lmu - mu - log_factorial(k);
  });
}

// Binomial(n, q) quantile.
inline std::int64_t binomial_quantile(std::int64_t n, double q, double p) {
  if (n <= 0) return 0;
  if (q <= 0.0) return 0;
  if (q >= 1.0) return n;
  const std::int64_t mode = static_cast<std::int64_t>((n + 1) * q);
  const double lq = std::log(q), l1q = std::log1p(-q);
  return discrete_quantile_scan(p, 0, n, std::min(mode, n), [&](std::int64_t k) {
    return log_factorial(n) - log_factorial(k) - log_factorial(n - k) + k * lq + (n - k) * l1q;
  });
}

// Hypergeometric quantile: number of successes in `draws` from a population
// of size `total` containing `succ` successes.
inline std::int64_t hypergeometric_quantile(std::int64_t total, std::int64_t succ, std::int64_t draws,
                                            double p) {
  const std::int64_t lo = std::max<std::int64_t>(0, draws + succ - total);
  const std::int64_t hi = std::min(draws, succ);
  if (hi <= lo) return lo;
  const std::int64_t mode =
      std::min(hi, std::max(lo, static_cast<std::int64_t>((draws + 1.0) * (succ + 1.0) / (total + 2.0))));
  const double lchoose_nd = log_factorial(total) - log_factorial(draws) - log_factorial(total - draws);
  return discrete_quantile_scan(p, lo, hi, mode, [&](std::int64_t k) {
    return log_factorial(succ) - log_factorial(k) - log_factorial(succ - k) + log_factorial(total - succ) -
           log_factorial(draws - k) - log_factorial(total - succ - draws + k) - lchoose_nd;
  });
}

// Poisson sampler via quantile transform (one uniform per draw).
inline std::int64_t poisson_sample(double mu, CounterRng& rng) {
  return poisson_quantile(mu, rng.uniform01());
}

}  // namespace regen
