#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "regen/common.hpp"
#include "regen/cycle_sim.hpp"
#include "regen/linalg.hpp"
#include "regen/model_core.hpp"
#include "regen/rng.hpp"

namespace regen {

// ---------------------------------------------------------------------------
// Rate/observable expressions: a small arithmetic grammar over the state n.
//
//   expr    := term (('+'|'-') term)*
//   term    := factor (('*'|'/') factor)*
//   factor  := '-' factor | power
//   power   := primary ('^' factor)?
//   primary := number | 'n' | ident '(' expr (',' expr)? ')' | '(' expr ')'
//
// Functions: sqrt, exp, log, abs, min, max. Parsed by recursive descent into
// a closure; parse errors carry the offending position.
// ---------------------------------------------------------------------------

using RateFn = std::function<double(double)>;

namespace bd_detail {

struct Parser {
  const std::string& src;
  std::size_t pos = 0;

  explicit Parser(const std::string& s) : src(s) {}

  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(ErrorCode::ConfigError,
                "expression parse error at position " + std::to_string(pos) + ": " + msg + " in '" + src + "'");
  }

  void skip_ws() {
    while (pos < src.size() && (src[pos] == ' ' || src[pos] == '\t')) ++pos;
  }

  bool eat(char c) {
    skip_ws();
    if (pos < src.size() && src[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }

  RateFn parse() {
    RateFn e = expr();
    skip_ws();
    if (pos != src.size()) fail("trailing input");
    return e;
  }

  RateFn expr() {
    RateFn lhs = term();
    while (true) {
      if (eat('+')) {
        RateFn rhs = term();
        lhs = [lhs, rhs](double n) { return lhs(n) + rhs(n); };
      } else if (eat('-')) {
        RateFn rhs = term();
        lhs = [lhs, rhs](double n) { return lhs(n) - rhs(n); };
      } else {
        return lhs;
      }
    }
  }

  RateFn term() {
    RateFn lhs = factor();
    while (true) {
      if (eat('*')) {
        RateFn rhs = factor();
        lhs = [lhs, rhs](double n) { return lhs(n) * rhs(n); };
      } else if (eat('/')) {
        RateFn rhs = factor();
        lhs = [lhs, rhs](double n) { return lhs(n) / rhs(n); };
      } else {
        return lhs;
      }
    }
  }

  RateFn factor() {
    if (eat('-')) {
      RateFn f = factor();
      return [f](double n) { return -f(n); };
    }
    return power();
  }

  RateFn power() {
    RateFn base = primary();
    if (eat('^')) {
      RateFn e = factor();
      return [base, e](double n) { return std::pow(base(n), e(n)); };
    }
    return base;
  }

  RateFn primary() {
    skip_ws();
    if (pos >= src.size()) fail("unexpected end of input");
    const char c = src[pos];
    if (c == '(') {
      ++pos;
      RateFn e = expr();
      if (!eat(')')) fail("expected ')'");
      return e;
    }
    if ((c >= '0' && c <= '9') || c == '.') {
      std::size_t used = 0;
      double val;
      try {
        val = std::stod(src.substr(pos), &used);
      } catch (...) {
        fail("bad number");
      }
      pos += used;
      return [val](double) { return val; };
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t start = pos;
      while (pos < src.size() && std::isalnum(static_cast<unsigned char>(src[pos]))) ++pos;
      const std::string name = src.substr(start, pos - start);
      if (name == "n") return [](double n) { return n; };
      if (!eat('(')) fail("expected '(' after function name '" + name + "'");
      RateFn a = expr();
      if (name == "min" || name == "max") {
        if (!eat(',')) fail("expected ',' in " + name);
        RateFn b = expr();
        if (!eat(')')) fail("expected ')'");
        if (name == "min") return [a, b](double n) { return std::min(a(n), b(n)); };
        return [a, b](double n) { return std::max(a(n), b(n)); };
      }
      if (!eat(')')) fail("expected ')'");
      if (name == "sqrt") return [a](double n) { return std::sqrt(a(n)); };
      if (name == "exp") return [a](double n) { return std::exp(a(n)); };
      if (name == "log") return [a](double n) { return std::log(a(n)); };
      if (name == "abs") return [a](double n) { return std::abs(a(n)); };
      fail("unknown function '" + name + "'");
    }
    fail("unexpected character");
  }
};

}  // namespace bd_detail

inline RateFn parse_rate_expression(const std::string& s) {
  bd_detail::Parser p(s);
  return p.parse();
}

// Birth-death specification: strictly positive rates up to the truncation
// level, and an observable of at most linear growth.
struct BirthDeathSpec {
  RateFn birth;  // lambda_n for n >= 0
  RateFn death;  // mu_n for n >= 1
  std::size_t n_max = 0;
  RateFn f;

  double lam(std::size_t n) const { return birth(static_cast<double>(n)); }
  double mu(std::size_t n) const { return death(static_cast<double>(n)); }
  double fn(std::size_t n) const { return f(static_cast<double>(n)); }

  void validate() const {
    if (n_max < 2) throw Error(ErrorCode::ConfigError, "n_max must be at least 2");
    for (std::size_t n = 0; n <= n_max + 1; ++n) {
      if (!(lam(n) > 0.0) || !std::isfinite(lam(n)))
        throw Error(ErrorCode::ConfigError, "birth rate must be positive at n=" + std::to_string(n));
      if (n >= 1 && (!(mu(n) > 0.0) || !std::isfinite(mu(n))))
        throw Error(ErrorCode::ConfigError, "death rate must be positive at n=" + std::to_string(n));
    }
    // linear growth bound on |f|, with the constant reported on failure
    double c = 0.0;
    for (std::size_t n = 0; n <= n_max; ++n) c = std::max(c, std::abs(fn(n)) / (1.0 + n));
    if (!std::isfinite(c)) throw Error(ErrorCode::ConfigError, "observable is not finite on [0, n_max]");
  }

  double linear_growth_constant() const {
    double c = 0.0;
    for (std::size_t n = 0; n <= n_max; ++n) c = std::max(c, std::abs(fn(n)) / (1.0 + n));
    return c;
  }
};

// Potentials pi_n = lambda_0...lambda_{n-1} / (mu_1...mu_n), in log space.
inline std::vector<double> potentials_log(const BirthDeathSpec& spec) {
  std::vector<double> logpi(spec.n_max + 1, 0.0);
  for (std::size_t n = 1; n <= spec.n_max; ++n) {
    logpi[n] = logpi[n - 1] + std::log(spec.lam(n - 1)) - std::log(spec.mu(n));
    if (!std::isfinite(logpi[n]))
      throw Error(ErrorCode::Overflow, "log-potential overflow at n=" + std::to_string(n));
  }
  return logpi;
}

inline std::vector<double> potentials(const BirthDeathSpec& spec) {
  std::vector<double> logpi = potentials_log(spec);
  std::vector<double> pi(logpi.size());
  for (std::size_t n = 0; n < logpi.size(); ++n) {
    pi[n] = std::exp(logpi[n]);
    if (!std::isfinite(pi[n]))
      throw Error(ErrorCode::Overflow, "potential overflow at n=" + std::to_string(n));
  }
  return pi;
}

struct StationaryLaw {
  std::vector<double> pi;        // potentials, pi_0 = 1
  std::vector<double> pi_tilde;  // normalized over {0..n_max}
  double tail_mass_bound = 0.0;
  double tail_ratio = 0.0;  // detected geometric ratio beyond n_max
};

// Normalized stationary law with a geometric tail bound beyond n_max.
inline StationaryLaw stationary(const BirthDeathSpec& spec, double mass_tol = 1e-8) {
  std::vector<double> logpi = potentials_log(spec);
  StationaryLaw law;
  // detect the tail ratio from the last quarter of the range
  const std::size_t w0 = spec.n_max - std::max<std::size_t>(1, spec.n_max / 4);
  double ratio_max = 0.0;
  bool increasing = true;
  double prev_ratio = 0.0;
  for (std::size_t n = w0; n <= spec.n_max; ++n) {
    const double rho = spec.lam(n) / spec.mu(n + 1);  // pi_{n+1}/pi_n
    ratio_max = std::max(ratio_max, rho);
    if (n > w0) increasing = increasing && rho >= prev_ratio - 1e-12;
    prev_ratio = rho;
  }
  if (ratio_max >= 1.0) {
    if (increasing || prev_ratio >= 1.0)
      throw Error(ErrorCode::NotSummable, "potential ratios at n_max do not decay: series diverges");
    throw Error(ErrorCode::TailTooHeavy, "tail ratio >= 1 but decreasing: raise n_max");
  }
  // log-sum-exp normalization
  const double m = *std::max_element(logpi.begin(), logpi.end());
  double z = 0.0;
  for (double lp : logpi) z += std::exp(lp - m);
  const double logz = m + std::log(z);
  law.pi.resize(logpi.size());
  law.pi_tilde.resize(logpi.size());
  for (std::size_t n = 0; n < logpi.size(); ++n) {
    law.pi[n] = std::exp(logpi[n]);
    law.pi_tilde[n] = std::exp(logpi[n] - logz);
  }
  law.tail_ratio = ratio_max;
  // geometric bound on the missing mass: pi_{n_max} ratio/(1-ratio) / Z
  law.tail_mass_bound = law.pi_tilde[spec.n_max] * ratio_max / (1.0 - ratio_max);
  if (law.tail_mass_bound > mass_tol)
    throw Error(ErrorCode::TailTooHeavy,
                "estimated tail mass " + std::to_string(law.tail_mass_bound) + " exceeds tolerance: raise n_max");
  return law;
}

struct ConditionMargin {
  std::vector<double> margins;  // per n
  double limit_estimate = 0.0;  // min (liminf) or max (limsup) over the last window
  std::string verdict;          // PASS / FAIL / INDETERMINATE
  bool pass = false;
};

// Van Doorn separation condition: liminf (lambda_n + mu_n
//   - sqrt(lambda_{n-1} mu_n) - sqrt(lambda_n mu_{n+1})) > 0,
// which makes the return-time Laplace transform analytic at the origin.
inline ConditionMargin van_doorn_margin(const BirthDeathSpec& spec) {
  ConditionMargin out;
  for (std::size_t n = 1; n + 1 <= spec.n_max; ++n) {
    const double margin = spec.lam(n) + spec.mu(n) - std::sqrt(spec.lam(n - 1) * spec.mu(n)) -
                          std::sqrt(spec.lam(n) * spec.mu(n + 1));
    out.margins.push_back(margin);
  }
  const std::size_t w = std::max<std::size_t>(1, out.margins.size() / 4);
  const std::size_t w0 = out.margins.size() - w;
  double lim = out.margins.back();
  for (std::size_t i = w0; i < out.margins.size(); ++i) lim = std::min(lim, out.margins[i]);
  out.limit_estimate = lim;
  // a monotone shrink across the window means the finite evidence cannot
  // separate "positive liminf" from "decays to zero"
  bool decreasing = true;
  for (std::size_t i = w0 + 1; i < out.margins.size(); ++i)
    decreasing = decreasing && out.margins[i] <= out.margins[i - 1] + 1e-12;
  const bool shrinking = decreasing && lim < 0.9 * out.margins[w0];
  if (lim <= 0.0)
    out.verdict = "FAIL";
  else if (shrinking)
    out.verdict = "INDETERMINATE";
  else
    out.verdict = "PASS";
  out.pass = out.verdict == "PASS";
  return out;
}

// Exponential potential decay: limsup (lambda_n pi_n)^{1/n} < 1, which
// gives the between-return running maximum a finite exponential moment.
inline ConditionMargin exp_moment_margin(const BirthDeathSpec& spec) {
  ConditionMargin out;
  std::vector<double> logpi = potentials_log(spec);
  for (std::size_t n = 1; n <= spec.n_max; ++n)
    out.margins.push_back(std::exp((std::log(spec.lam(n)) + logpi[n]) / static_cast<double>(n)));
  const std::size_t w = std::max<std::size_t>(1, out.margins.size() / 4);
  const std::size_t w0 = out.margins.size() - w;
  double lim = 0.0;
  for (std::size_t i = w0; i < out.margins.size(); ++i) lim = std::max(lim, out.margins[i]);
  out.limit_estimate = lim;
  bool increasing = true;
  for (std::size_t i = w0 + 1; i < out.margins.size(); ++i)
    increasing = increasing && out.margins[i] >= out.margins[i - 1] - 1e-12;
  const bool growing = increasing && lim > out.margins[w0] / 0.9;
  if (lim >= 1.0)
    out.verdict = "FAIL";
  else if (growing)
    out.verdict = "INDETERMINATE";
  else
    out.verdict = "PASS";
  out.pass = out.verdict == "PASS";
  return out;
}

// kappa_f = sum f(n) pi~_n, with the truncation tail folded into an error bar.
struct KappaF {
  double value = 0.0;
  double error_bar = 0.0;
};

inline KappaF kappa_f(const BirthDeathSpec& spec, const StationaryLaw& law) {
  KappaF out;
  for (std::size_t n = 0; n <= spec.n_max; ++n) out.value += spec.fn(n) * law.pi_tilde[n];
  out.error_bar = spec.linear_growth_constant() * (2.0 + spec.n_max) * law.tail_mass_bound;
  return out;
}

// ---------------------------------------------------------------------------
// sigma_f^2 by two independent routes.
// ---------------------------------------------------------------------------

// Route 1: the tridiagonal Poisson equation A g = -(f - kappa), solved in
// closed form through the flow identity Delta_n = -(sum_{k<=n} pi~_k h_k) /
// (lambda_n pi~_n), under reflecting truncation at n_max. The centering uses
// the truncated stationary mean so the system is exactly consistent.
struct PoissonSolve {
  double sigma_f2 = 0.0;
  double kappa_centered = 0.0;
  std::vector<double> g;
};

inline PoissonSolve sigma_f2_poisson_equation(const BirthDeathSpec& spec, const StationaryLaw& law) {
  const std::size_t n_max = spec.n_max;
  PoissonSolve out;
  double kap = 0.0;
  for (std::size_t n = 0; n <= n_max; ++n) kap += spec.fn(n) * law.pi_tilde[n];
  out.kappa_centered = kap;
  std::vector<double> h(n_max + 1);
  for (std::size_t n = 0; n <= n_max; ++n) h[n] = spec.fn(n) - kap;
  // cumulative pi~ h from below and above; use whichever side is smaller for
  // numerical stability (the total is zero by centering)
  std::vector<double> cum_lo(n_max + 1), cum_hi(n_max + 1);
  double acc = 0.0;
  for (std::size_t n = 0; n <= n_max; ++n) {
    acc += law.pi_tilde[n] * h[n];
    cum_lo[n] = acc;
  }
  acc = 0.0;
  for (std::size_t n = n_max + 1; n-- > 0;) {
    cum_hi[n] = acc;  // sum over k > n
    acc += law.pi_tilde[n] * h[n];
  }
  std::vector<double> delta(n_max, 0.0);
  for (std::size_t n = 0; n < n_max; ++n) {
    const double flow = (n < n_max / 2) ? cum_lo[n] : -cum_hi[n];
    const double denom = spec.lam(n) * law.pi_tilde[n];
    if (!(denom > 0.0) || !std::isfinite(flow / denom))
      throw Error(ErrorCode::SingularSystem, "Poisson-equation flow broke down at n=" + std::to_string(n));
    delta[n] = -flow / denom;
  }
  out.g.assign(n_max + 1, 0.0);
  for (std::size_t n = 1; n <= n_max; ++n) out.g[n] = out.g[n - 1] + delta[n - 1];
  // centering pi~ . g = 0
  double mean_g = 0.0;
  for (std::size_t n = 0; n <= n_max; ++n) mean_g += law.pi_tilde[n] * out.g[n];
  for (std::size_t n = 0; n <= n_max; ++n) out.g[n] -= mean_g;
  for (std::size_t n = 0; n <= n_max; ++n) out.sigma_f2 += 2.0 * law.pi_tilde[n] * h[n] * out.g[n];
  return out;
}

// Route 2: sigma_f^2 = 2 int_0^T cov(f(X_0), f(X_s)) ds by quadrature, with
// the autocovariance evaluated through the symmetrized spectral form of the
// matrix exponential and the tail beyond T extrapolated from the fitted
// exponential decay of the integrand.
struct QuadratureResult {
  double sigma_f2 = 0.0;
  double integral_to_T = 0.0;
  double tail_estimate = 0.0;
  double decay_rate = 0.0;
  double horizon = 0.0;
};

inline QuadratureResult sigma_f2_matrix_exponential(const BirthDeathSpec& spec, const StationaryLaw& law,
                                                    double horizon = 0.0, std::size_t steps = 400) {
  const std::size_t n = spec.n_max + 1;
  // Symmetrization S = D A D^{-1} with D = diag(sqrt(pi~)): S is tridiagonal
  // with off-diagonal sqrt(lambda_n mu_{n+1}), diagonal -(lambda_n + mu_n)
  // (reflecting truncation: no birth at n_max).
  Mat s(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double diag = -(spec.lam(i) + (i > 0 ? spec.mu(i) : 0.0));
    if (i == spec.n_max) diag = -(i > 0 ? spec.mu(i) : 0.0);
    s(i, i) = diag;
    if (i + 1 < n) {
      const double off = std::sqrt(spec.lam(i) * spec.mu(i + 1));
      s(i, i + 1) = off;
      s(i + 1, i) = off;
    }
  }
  EigenSym es = eigen_sym(s);
  // w = Q^T D f; cov(s) = sum_i w_i^2 e^{s ev_i} minus the stationary mode
  Vec df(n);
  for (std::size_t i = 0; i < n; ++i) df[i] = std::sqrt(law.pi_tilde[i]) * spec.fn(i);
  Vec w(n, 0.0);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i) w[k] += es.vectors(i, k) * df[i];
  // identify the zero mode (largest eigenvalue) and drop it: that is the
  // kappa_f^2 constant
  const std::size_t zero_mode = n - 1;
  auto cov_at = [&](double t) {
    double c = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == zero_mode) continue;
      c += w[k] * w[k] * std::exp(t * es.values[k]);
    }
    return c;
  };
  // spectral gap sets the natural horizon when none is given
  const double gap = n >= 2 ? std::abs(es.values[n - 2]) : 1.0;
  QuadratureResult out;
  out.horizon = horizon > 0.0 ? horizon : std::max(8.0, 30.0 / std::max(gap, 1e-6));
  const double h = out.horizon / steps;
  // composite Simpson
  double integral = cov_at(0.0) + cov_at(out.horizon);
  for (std::size_t i = 1; i < steps; ++i) integral += (i % 2 ? 4.0 : 2.0) * cov_at(i * h);
  integral *= h / 3.0;
  out.integral_to_T = 2.0 * integral;
  // tail: fit exp decay from the last two sample points
  const double c1 = cov_at(out.horizon - h), c2 = cov_at(out.horizon);
  if (c2 > 0.0 && c1 > c2) {
    out.decay_rate = std::log(c1 / c2) / h;
    out.tail_estimate = 2.0 * c2 / out.decay_rate;
  }
  out.sigma_f2 = out.integral_to_T + out.tail_estimate;
  return out;
}

// Both routes with a cross-check; disagreement beyond the tolerance retries
// with a doubled truncation level before giving up.
struct SigmaF2Result {
  double poisson_equation = 0.0;
  double quadrature = 0.0;
  double rel_disagreement = 0.0;
  std::size_t n_max_used = 0;
  bool conditions_pass = true;
};

inline SigmaF2Result sigma_f2(const BirthDeathSpec& spec_in, double rel_tol = 1e-3,
                              std::size_t n_max_cap = 2048) {
  BirthDeathSpec spec = spec_in;
  SigmaF2Result out;
  out.conditions_pass = van_doorn_margin(spec).pass && exp_moment_margin(spec).pass;
  while (true) {
    StationaryLaw law = stationary(spec);
    out.poisson_equation = sigma_f2_poisson_equation(spec, law).sigma_f2;
    out.quadrature = sigma_f2_matrix_exponential(spec, law).sigma_f2;
    const double scale = std::max({std::abs(out.poisson_equation), std::abs(out.quadrature), 1e-12});
    out.rel_disagreement = std::abs(out.poisson_equation - out.quadrature) / scale;
    out.n_max_used = spec.n_max;
    if (out.rel_disagreement <= rel_tol) return out;
    if (spec.n_max * 2 > n_max_cap)
      throw Error(ErrorCode::OracleDisagreement,
                  "sigma_f2 routes disagree by " + std::to_string(out.rel_disagreement) +
                      " at n_max=" + std::to_string(spec.n_max));
    spec.n_max *= 2;
  }
}

// ---------------------------------------------------------------------------
// Exact event-driven simulation and regeneration cycles.
// ---------------------------------------------------------------------------

struct Trajectory {
  std::vector<double> times;   // jump epochs, increasing; times[0] = 0 is the start
  std::vector<std::int64_t> states;  // states[i] holds on [times[i], times[i+1])
  double horizon = 0.0;
};

struct SsaInit {
  enum class Kind { Fixed, Stationary } kind = Kind::Fixed;
  std::int64_t state = 0;
  static SsaInit fixed(std::int64_t n) { return {Kind::Fixed, n}; }
  static SsaInit stationary_draw() { return {Kind::Stationary, 0}; }
};

inline Trajectory simulate_ssa(const BirthDeathSpec& spec, double horizon, const SsaInit& init,
                               CounterRng& rng, const StationaryLaw* law = nullptr) {
  if (!(horizon > 0.0)) throw Error(ErrorCode::ConfigError, "horizon must be positive");
  Trajectory tr;
  tr.horizon = horizon;
  std::int64_t state = init.state;
  if (init.kind == SsaInit::Kind::Stationary) {
    if (!law) throw Error(ErrorCode::ConfigError, "stationary init needs a StationaryLaw");
    const double u = rng.uniform01();
    double acc = 0.0;
    state = static_cast<std::int64_t>(spec.n_max);
    for (std::size_t n = 0; n <= spec.n_max; ++n) {
      acc += law->pi_tilde[n];
      if (u <= acc) {
        state = static_cast<std::int64_t>(n);
        break;
      }
    }
  }
  double t = 0.0;
  tr.times.push_back(0.0);
  tr.states.push_back(state);
  while (true) {
    const std::size_t n = static_cast<std::size_t>(state);
    const double up = spec.lam(n);
    const double down = state > 0 ? spec.mu(n) : 0.0;
    const double rate = up + down;
    t += rng.exponential(rate);
    if (t > horizon) break;
    state += (rng.uniform01() * rate < up) ? 1 : -1;
    if (state > static_cast<std::int64_t>(spec.n_max))
      throw Error(ErrorCode::StateOverflow,
                  "trajectory exceeded n_max=" + std::to_string(spec.n_max) + " at t=" + std::to_string(t));
    tr.times.push_back(t);
    tr.states.push_back(state);
  }
  return tr;
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
  os << "time,state\n";
  for (std::size_t i = 0; i < tr.times.size(); ++i) os << tr.times[i] << ',' << tr.states[i] << '\n';
}

struct BdCycles {
  std::vector<CycleSample> cycles;
  double discarded_initial = 0.0;  // time before the first visit to zero
};

// Regeneration cycles at returns to zero; xi is the exact piecewise-constant
// integral of f over the cycle, eta the exact running-integral sup, and the
// within-cycle path is recorded at every jump.
inline BdCycles bd_cycles(const BirthDeathSpec& spec, const Trajectory& tr, bool keep_paths = false) {
  BdCycles out;
  std::size_t i = 0;
  // drop any initial segment before the first visit to zero (stationary init)
  while (i < tr.states.size() && tr.states[i] != 0) ++i;
  if (i == tr.states.size())
    throw Error(ErrorCode::NoReturn, "trajectory never visits zero within the horizon");
  out.discarded_initial = tr.times[i];
  std::size_t cycle_start = i;
  double integral = 0.0;
  double eta = 0.0;
  std::vector<std::pair<double, Vec>> path;
  for (std::size_t k = i; k < tr.states.size(); ++k) {
    const double seg_end = (k + 1 < tr.times.size()) ? tr.times[k + 1] : tr.horizon;
    const double seg_len = seg_end - tr.times[k];
    integral += spec.fn(static_cast<std::size_t>(tr.states[k])) * seg_len;
    eta = std::max(eta, std::abs(integral));
    if (k + 1 < tr.states.size()) {
      if (keep_paths) path.emplace_back(seg_end - tr.times[cycle_start], Vec{integral});
      if (tr.states[k + 1] == 0) {
        CycleSample c;
        c.tau = seg_end - tr.times[cycle_start];
        c.xi = {integral};
        c.eta = eta;
        if (keep_paths) c.path = path;
        out.cycles.push_back(std::move(c));
        cycle_start = k + 1;
        integral = 0.0;
        eta = 0.0;
        path.clear();
      }
    }
  }
  if (out.cycles.empty())
    throw Error(ErrorCode::NoReturn, "no completed return-to-zero cycle within the horizon");
  return out;
}

// A CycleModel adapter: repeated SSA runs started at zero, one cycle each.
inline CycleModel bd_cycle_model(const BirthDeathSpec& spec, double cycle_horizon_cap = 1e6) {
  CycleModel m;
  m.d = 1;
  m.sampler = [spec, cycle_horizon_cap](CounterRng& rng) {
    // simulate until the first return to zero
    double t = 0.0;
    std::int64_t state = 0;
    double integral = 0.0, eta = 0.0;
    while (true) {
      const std::size_t n = static_cast<std::size_t>(state);
      const double up = spec.lam(n);
      const double down = state > 0 ? spec.mu(n) : 0.0;
      const double rate = up + down;
      const double hold = rng.exponential(rate);
      integral += spec.fn(n) * hold;
      eta = std::max(eta, std::abs(integral));
      t += hold;
      if (t > cycle_horizon_cap) throw Error(ErrorCode::NoReturn, "cycle exceeded the horizon cap");
      state += (rng.uniform01() * rate < up) ? 1 : -1;
      if (state > static_cast<std::int64_t>(spec.n_max))
        throw Error(ErrorCode::StateOverflow, "cycle exceeded n_max");
      if (state == 0) {
        CycleSample c;
        c.tau = t;
        c.xi = {integral};
        c.eta = eta;
        return c;
      }
    }
  };
  return m;
}

// Long-run variance of the time average of f from one stream of SSA cycles,
// by the classical regenerative estimator sigma^2 = E[(xi - kappa tau)^2]/E tau
// with kappa = sum xi / sum tau. Kept as plain running sums so it is an
// arithmetic path independent of the moment/parameter machinery.
struct SsaVarianceEstimate {
  double sigma2 = 0.0;
  double kappa = 0.0;
  std::size_t cycles = 0;
};

inline SsaVarianceEstimate ssa_longrun_variance(const BirthDeathSpec& spec, std::size_t n_cycles,
                                                CounterRng& rng) {
  CycleModel model = bd_cycle_model(spec);
  std::vector<double> taus(n_cycles), xis(n_cycles);
  double sum_tau = 0.0, sum_xi = 0.0;
  for (std::size_t i = 0; i < n_cycles; ++i) {
    CycleSample c = model.sampler(rng);
    taus[i] = c.tau;
    xis[i] = c.xi[0];
    sum_tau += c.tau;
    sum_xi += c.xi[0];
  }
  SsaVarianceEstimate out;
  out.cycles = n_cycles;
  out.kappa = sum_xi / sum_tau;
  double acc = 0.0;
  for (std::size_t i = 0; i < n_cycles; ++i) {
    const double z = xis[i] - out.kappa * taus[i];
    acc += z * z;
  }
  out.sigma2 = acc / sum_tau;
  return out;
}

}  // namespace regen
