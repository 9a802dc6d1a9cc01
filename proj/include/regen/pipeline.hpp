#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "regen/common.hpp"
#include "regen/cycle_sim.hpp"
#include "regen/dyadic.hpp"
#include "regen/laws.hpp"
#include "regen/model_core.hpp"
#include "regen/rng.hpp"
#include "regen/util.hpp"
#include "regen/verify.hpp"
#include "regen/wstar.hpp"

namespace regen {

enum class CouplerKind { Dyadic, Independent };

inline const char* coupler_name(CouplerKind k) {
  return k == CouplerKind::Dyadic ? "dyadic" : "independent";
}

// A stopped-sum cycle model in the shape the dyadic coupler needs: the
// centered xi-block coordinates and the tau block are mutually independent
// scalar step laws with computable conditional splits (the
// beta-orthogonalization makes the blocks uncorrelated; here they are fully
// independent by construction, so the coordinate-wise coupling is exact).
// Empty xi law lists encode the degenerate xi == tau model (d = 1).
struct DecoupledStoppedSum {
  StepLawPtr tau_law;
  std::vector<StepLawPtr> xi_laws;           // marginal xi laws per coordinate
  std::vector<StepLawPtr> xi_centered_laws;  // laws of xi_i - E xi_i
  std::string label;

  bool xi_equals_tau() const { return xi_centered_laws.empty(); }
  std::size_t dim() const { return xi_equals_tau() ? 1 : xi_centered_laws.size(); }

  CycleMoments moments() const {
    const std::size_t d = dim();
    CycleMoments m;
    m.d = d;
    m.mean_tau = tau_law->mean();
    m.var_tau = tau_law->variance();
    m.cov_xi = Mat(d, d);
    m.cov_xi_tau.assign(d, 0.0);
    m.mean_xi.assign(d, 0.0);
    if (xi_equals_tau()) {
      m.mean_xi[0] = m.mean_tau;
      m.cov_xi(0, 0) = m.var_tau;
      m.cov_xi_tau[0] = m.var_tau;
    } else {
      for (std::size_t i = 0; i < d; ++i) {
        m.mean_xi[i] = xi_laws[i]->mean();
        m.cov_xi(i, i) = xi_laws[i]->variance();
      }
    }
    m.n_samples = 0;
    return m;
  }
};

inline DecoupledStoppedSum poisson_exp_stopped_sum(double xi_rate = 1.0, double tau_rate = 1.0) {
  DecoupledStoppedSum m;
  m.tau_law = std::make_shared<GammaStep>(1.0, tau_rate);
  m.xi_laws = {std::make_shared<PoissonStep>(xi_rate)};
  m.xi_centered_laws = {std::make_shared<PoissonStep>(xi_rate, -xi_rate)};
  m.label = "stopped_sum_poisson_exp";
  return m;
}

inline DecoupledStoppedSum degenerate_xi_tau_model(double tau_rate = 1.0) {
  DecoupledStoppedSum m;
  m.tau_law = std::make_shared<GammaStep>(1.0, tau_rate);
  m.label = "stopped_sum_xi_equals_tau";
  return m;
}

struct PipelineConfig {
  CouplerKind coupler = CouplerKind::Dyadic;
  double grid_step = 1.0;
  int wstar_j_min = -12;
  double wstar_coarse_factor = 512.0;
  int sub_resolution = -6;  // refinement level for real-argument Brownian queries
  double walk_margin = 64.0;
  std::size_t threads = 1;
};

// One coupled (S, W) realization with the sup-norms of the eight-term
// decomposition of S(u) - kappa u - sigma W_u, plus the intermediate
// coupling targets measured as diagnostics.
struct CoupledRealization {
  double horizon = 0.0;
  std::array<double, 8> phi_sups{};
  double total_sup = 0.0;
  double identity_gap = 0.0;  // max |total - sum of phi terms| over the grid
  bool index_clamped = false;
  double sup_gamma_n_minus_t = 0.0;   // sup_u |gamma N_u - T_[u]|
  double sup_m_minus_y = 0.0;         // sup_u |m(u) - y(u)|
  double sup_m_inverse_residual = 0.0;  // sup_u |m(u) - u/mu - Wtilde_u/(lambda sqrt(gamma))|
  double sum_phi_sups() const {
    double s = 0.0;
    for (double v : phi_sups) s += v;
    return s;
  }
};

namespace detail {

inline constexpr std::uint64_t kTagBtilde = 1;
inline constexpr std::uint64_t kTagNLeaf = 2;
inline constexpr std::uint64_t kTagB = 3;
inline constexpr std::uint64_t kTagAtom = 4;
inline constexpr std::uint64_t kTagWcirc = 5;
inline constexpr std::uint64_t kTagIndepTau = 6;
inline constexpr std::uint64_t kTagIndepXi = 7;
inline constexpr std::uint64_t kTagNExtend = 8;

}  // namespace detail

// One replicate of the coupling pipeline at horizon t. All randomness comes
// from forks of `rep_rng`; the same stream reproduces the same realization.
// The d+1 blocks are coupled coordinate-wise: the tau walk against the
// scalar Brownian path that also drives the Poisson process, each centered
// xi coordinate against its own coordinate of the d-dimensional path that
// feeds the count-scale Wiener construction. Sup norms are max-norms.
inline CoupledRealization run_replicate(const DecoupledStoppedSum& model, const AsymptoticParams& p,
                                        double t, const PipelineConfig& cfg, CounterRng rep_rng) {
  if (!(t >= 2.718281828459045))
    throw Error(ErrorCode::ConfigError, "horizons below e are excluded");
  const std::size_t d = model.dim();
  const double mu = p.mu, gamma = p.gamma, lambda = p.lambda;

  const std::int64_t K = next_pow2(std::max(t, 2.0 * t / mu) * 1.25 + cfg.walk_margin);
  const int top_k = log2_exact(K);
  DyadicBrownianPath btilde(1, top_k, cfg.sub_resolution, rep_rng.fork(detail::kTagBtilde));
  CountingPath counts =
      couple_poisson_brownian(lambda, static_cast<double>(K), btilde, rep_rng.fork(detail::kTagNLeaf));

  const std::int64_t l_max = static_cast<std::int64_t>(std::floor(t / gamma)) + 2;
  if (counts.core_count() < l_max + 1)
    throw Error(ErrorCode::InsufficientResolution, "Poisson path too sparse for the requested horizon");
  const std::int64_t t_b = next_pow2(std::max(static_cast<double>(K), cfg.wstar_coarse_factor * l_max / lambda));
  const int top_b = log2_exact(t_b);
  DyadicBrownianPath bx(d, top_b, cfg.wstar_j_min - 1, rep_rng.fork(detail::kTagB));

  // walks: T_k and the centered xi-block walks Q_k per coordinate
  std::vector<double> walk_t;
  std::vector<std::vector<double>> walk_q(d);
  const bool degenerate = model.xi_equals_tau();
  if (cfg.coupler == CouplerKind::Dyadic) {
    walk_t = couple_sums_dyadic(*model.tau_law, K, btilde);
    for (std::size_t c = 0; c < d; ++c)
      walk_q[c] = degenerate ? std::vector<double>(static_cast<std::size_t>(K) + 1, 0.0)
                             : couple_sums_dyadic(*model.xi_centered_laws[c], K, bx, c);
  } else {
    CounterRng tau_rng = rep_rng.fork(detail::kTagIndepTau);
    walk_t = sample_walk(*model.tau_law, K, tau_rng);
    for (std::size_t c = 0; c < d; ++c) {
      if (degenerate) {
        walk_q[c].assign(static_cast<std::size_t>(K) + 1, 0.0);
      } else {
        CounterRng xi_rng = rep_rng.fork(detail::kTagIndepXi).fork(c);
        walk_q[c] = sample_walk(*model.xi_centered_laws[c], K, xi_rng);
      }
    }
  }
  if (!(walk_t.back() > t))
    throw Error(ErrorCode::HorizonOverflow, "cycle walk did not cover the horizon");

  // cycle partial sums: xi_k = dQ_k + beta tau_k - alpha mu, coordinate-wise
  std::vector<std::vector<double>> sp(d, std::vector<double>(static_cast<std::size_t>(K) + 1, 0.0));
  for (std::int64_t k = 1; k <= K; ++k) {
    const double tau_k = walk_t[k] - walk_t[k - 1];
    for (std::size_t c = 0; c < d; ++c) {
      const double dq = walk_q[c][k] - walk_q[c][k - 1];
      sp[c][k] = sp[c][k - 1] + dq + p.beta[c] * tau_k - p.alpha[c] * mu;
    }
  }

  counts.extend_to(static_cast<double>(t_b), rep_rng.fork(detail::kTagNExtend));
  WstarPath wstar(bx, counts, l_max, cfg.wstar_j_min, top_b, rep_rng.fork(detail::kTagAtom));
  const std::int64_t t_circ = next_pow2(t + 2.0);
  DyadicBrownianPath wcirc(d, log2_exact(t_circ), cfg.sub_resolution, rep_rng.fork(detail::kTagWcirc));
  LimitWienerComposer composer(p);

  // evaluation points: the regular grid, the regeneration points, and the
  // jump points of u -> y(u)
  std::vector<double> us;
  for (double u = 0.0; u <= t + 1e-12; u += cfg.grid_step) us.push_back(std::min(u, t));
  for (std::int64_t k = 1; k <= K && walk_t[k] <= t; ++k) us.push_back(walk_t[k]);
  for (std::int64_t i = 1; i * gamma <= t; ++i) us.push_back(i * gamma);
  us.push_back(t);
  std::sort(us.begin(), us.end());
  us.erase(std::unique(us.begin(), us.end()), us.end());

  CoupledRealization out;
  out.horizon = t;
  const double sqrt_lambda = std::sqrt(lambda);
  const double sqrt_gamma = std::sqrt(gamma);
  const double sqrt_mu = std::sqrt(mu);
  std::size_t m_idx = 0;
  Vec phi(8);
  for (double u : us) {
    while (m_idx + 1 <= static_cast<std::size_t>(K) && walk_t[m_idx + 1] <= u) ++m_idx;
    const std::int64_t iy = static_cast<std::int64_t>(std::floor(u / gamma));
    const std::int64_t ny = iy + 1;
    const double y = counts.arrival(ny);
    std::size_t ky = static_cast<std::size_t>(std::floor(y));
    if (ky > static_cast<std::size_t>(K)) {
      ky = static_cast<std::size_t>(K);
      out.index_clamped = true;
    }
    const Vec& b_y = bx.value(bx.snap(y));
    const double wtilde_u = -sqrt_mu * btilde.scalar(btilde.snap(u / mu));
    const Vec& wstar_ny = wstar.at_integer(ny);
    const Vec wstar_ug = wstar.at(u / gamma);
    const Vec v_by = p.v * b_y;
    const Vec v_wny = p.v * wstar_ny;
    const Vec v_wug = p.v * wstar_ug;
    const double y_resid = y - u / (lambda * gamma) - wtilde_u / (lambda * sqrt_gamma);

    const Vec w_u = composer.at(wstar_ug, wtilde_u, wcirc.value(wcirc.snap(u)));
    // per-coordinate terms, folded into max-norm sups
    for (int q = 0; q < 8; ++q) phi[q] = 0.0;
    double total_norm = 0.0, gap_norm = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double phi1 = 0.0;  // pure-jump paths: S(u) = S(T_m(u)) exactly
      const double phi2 = sp[c][m_idx] - sp[c][ky];
      const double phi3 = sp[c][ky] - p.beta[c] * walk_t[ky] + p.alpha[c] * mu * y - v_by[c];
      const double phi4 = p.beta[c] * (walk_t[ky] - gamma * ny);
      const double phi5 = -p.alpha[c] * mu * y_resid;
      const double phi6 = v_by[c] - v_wny[c] / sqrt_lambda;
      const double phi7 = (v_wny[c] - v_wug[c]) / sqrt_lambda;
      const double phi8 = p.beta[c] * (gamma * ny - u);
      double sigma_w = 0.0;
      for (std::size_t j = 0; j < d; ++j) sigma_w += p.sigma(c, j) * w_u[j];
      const double total = sp[c][m_idx] - p.kappa[c] * u - sigma_w;
      const double terms[8] = {phi1, phi2, phi3, phi4, phi5, phi6, phi7, phi8};
      double phi_sum = 0.0;
      for (int q = 0; q < 8; ++q) {
        phi[q] = std::max(phi[q], std::abs(terms[q]));
        phi_sum += terms[q];
      }
      total_norm = std::max(total_norm, std::abs(total));
      gap_norm = std::max(gap_norm, std::abs(total - phi_sum));
    }
    for (int q = 0; q < 8; ++q) out.phi_sups[q] = std::max(out.phi_sups[q], phi[q]);
    out.total_sup = std::max(out.total_sup, total_norm);
    out.identity_gap = std::max(out.identity_gap, gap_norm);
    out.sup_m_minus_y = std::max(out.sup_m_minus_y, std::abs(static_cast<double>(m_idx) - y));
    out.sup_m_inverse_residual =
        std::max(out.sup_m_inverse_residual,
                 std::abs(static_cast<double>(m_idx) - u / mu - wtilde_u / (lambda * sqrt_gamma)));
  }
  // the gamma N - T coupling target over integer times
  for (std::int64_t iu = 1; iu <= static_cast<std::int64_t>(t); ++iu) {
    const std::size_t idx = static_cast<std::size_t>(std::min<std::int64_t>(iu, K));
    out.sup_gamma_n_minus_t =
        std::max(out.sup_gamma_n_minus_t,
                 std::abs(gamma * counts.count_at(static_cast<double>(iu)) - walk_t[idx]));
  }
  return out;
}

struct CouplingStudy {
  std::vector<double> horizons;
  std::vector<std::vector<CoupledRealization>> realizations;  // [horizon][replicate]
  RateFit fit;
  bool fit_available = false;
};

// Empirical exponential-moment screen on tau and |xi|: probes must stay
// finite on a small s-grid before the pipeline is allowed to run.
inline void screen_exponential_moments(const DecoupledStoppedSum& model, std::uint64_t seed) {
  CounterRng rng = CounterRng::seeded(seed).fork(0xb5c4ee);
  for (double s : {0.05, 0.1, 0.2}) {
    double acc_tau = 0.0, acc_xi = 0.0;
    for (int i = 0; i < 2000; ++i) {
      const double tau = model.tau_law->sample(rng);
      double xi_max = std::abs(tau);
      if (!model.xi_equals_tau())
        for (const auto& law : model.xi_laws) xi_max = std::max(xi_max, std::abs(law->sample(rng)));
      acc_tau += std::exp(s * tau);
      acc_xi += std::exp(s * xi_max);
    }
    if (!std::isfinite(acc_tau) || !std::isfinite(acc_xi))
      throw Error(ErrorCode::UnsupportedLaw,
                  "exponential-moment probe diverged at s=" + std::to_string(s));
  }
}

inline CouplingStudy run_coupling_study(const DecoupledStoppedSum& model, const std::vector<double>& horizons,
                                   const PipelineConfig& cfg, std::size_t replicates, std::uint64_t seed) {
  for (double t : horizons)
    if (!(t >= 2.718281828459045)) throw Error(ErrorCode::ConfigError, "horizons below e are excluded");
  screen_exponential_moments(model, seed);
  const AsymptoticParams p = derive_asymptotics(model.moments());
  CouplingStudy res;
  res.horizons = horizons;
  res.realizations.assign(horizons.size(), std::vector<CoupledRealization>(replicates));
  CounterRng base = CounterRng::seeded(seed);
  const std::size_t total = horizons.size() * replicates;
  parallel_for(total, cfg.threads, [&](std::size_t task) {
    const std::size_t hi = task / replicates;
    const std::size_t r = task % replicates;
    CounterRng rep = base.fork(hi).fork(r);
    res.realizations[hi][r] = run_replicate(model, p, horizons[hi], cfg, rep);
  });
  if (horizons.size() >= 4 && replicates >= 50 && horizons.back() / horizons.front() >= 8.0) {
    std::vector<std::vector<double>> sups(horizons.size());
    for (std::size_t h = 0; h < horizons.size(); ++h)
      for (const auto& r : res.realizations[h]) sups[h].push_back(r.total_sup);
    res.fit = rate_fit(horizons, sups);
    res.fit_available = true;
  }
  return res;
}

// Walk-level coupling study: sup_k |Q_k - mean k - sd B_k| per replicate and
// horizon, for a bare step law (no renewal structure). This is the cleanest
// probe of the conditional-quantile construction itself.
inline CouplingStudy run_walk_study(const StepLaw& law, const std::vector<double>& horizons,
                                    CouplerKind coupler, std::size_t replicates, std::size_t threads,
                                    CounterRng base) {
  const double mean = law.mean();
  const double sd = std::sqrt(law.variance());
  CouplingStudy res;
  res.horizons = horizons;
  res.realizations.assign(horizons.size(), std::vector<CoupledRealization>(replicates));
  parallel_for(horizons.size() * replicates, threads, [&](std::size_t task) {
    const std::size_t h = task / replicates;
    const std::size_t r = task % replicates;
    const std::int64_t n = static_cast<std::int64_t>(horizons[h]);
    if ((n & (n - 1)) != 0) throw Error(ErrorCode::ConfigError, "walk horizons must be powers of two");
    CounterRng rr = base.fork(coupler == CouplerKind::Dyadic ? 1 : 2).fork(h).fork(r);
    DyadicBrownianPath bm(1, log2_exact(n), 0, rr.fork(1));
    std::vector<double> q;
    if (coupler == CouplerKind::Dyadic) {
      q = couple_sums_dyadic(law, n, bm);
    } else {
      CounterRng wrng = rr.fork(2);
      q = sample_walk(law, n, wrng);
    }
    double sup = 0.0;
    for (std::int64_t k = 0; k <= n; ++k)
      sup = std::max(sup, std::abs(q[static_cast<std::size_t>(k)] - mean * k -
                                   sd * bm.scalar(static_cast<double>(k))));
    CoupledRealization real;
    real.horizon = horizons[h];
    real.total_sup = sup;
    res.realizations[h][r] = real;
  });
  if (horizons.size() >= 4 && replicates >= 50 && horizons.back() / horizons.front() >= 8.0) {
    std::vector<std::vector<double>> sups(horizons.size());
    for (std::size_t h = 0; h < horizons.size(); ++h)
      for (const auto& r : res.realizations[h]) sups[h].push_back(r.total_sup);
    res.fit = rate_fit(horizons, sups);
    res.fit_available = true;
  }
  return res;
}

// Empirical truncation monitor for the count-scale Wiener construction:
// Var(W*_l)/l over fresh Poisson/Brownian replicates at the given levels.
inline double wstar_variance_probe(double lambda, std::int64_t l, std::size_t replicates, int j_min,
                                   double coarse_factor, std::uint64_t seed) {
  const std::int64_t t_b = next_pow2(coarse_factor * (l + 1) / lambda);
  const int top_b = log2_exact(t_b);
  const double core = std::max(64.0, 2.0 * (l + 1) / lambda);
  CounterRng base = CounterRng::seeded(seed);
  double m2 = 0.0;
  std::size_t used = 0;
  for (std::size_t r = 0; r < replicates; ++r) {
    CounterRng rr = base.fork(r);
    CounterRng prng = rr.fork(1);
    CountingPath n = poisson_process(lambda, core, prng);
    if (n.core_count() < l + 2) continue;
    n.extend_to(static_cast<double>(t_b), rr.fork(2));
    DyadicBrownianPath bx(1, top_b, j_min - 1, rr.fork(3));
    WstarPath w(bx, n, l + 1, j_min, top_b, rr.fork(4));
    const double x = w.at_integer(l)[0];
    m2 += x * x;
    ++used;
  }
  return m2 / used / static_cast<double>(l);
}

// Constants of the moment condition used to split diagnostics into the
// moderate and large-deviation regimes: s1 with a finite empirical
// exponential moment of |xi - kappa tau| and r with
// r log E exp(s1 |xi - kappa tau|) < s1/6, found by bisection.
struct RegimeConstants {
  double s1 = 0.0;
  double r = 0.0;
  double log_phi = 0.0;  // log E exp(s1 |xi - kappa tau|)
};

inline RegimeConstants select_regime_constants(const std::vector<double>& centered_abs_samples,
                                               double s1) {
  RegimeConstants rc;
  rc.s1 = s1;
  double acc = 0.0;
  for (double x : centered_abs_samples) acc += std::exp(s1 * x);
  rc.log_phi = std::log(acc / centered_abs_samples.size());
  const double cap = s1 / 6.0;
  double lo = 0.0, hi = rc.log_phi > 0.0 ? cap / rc.log_phi : 1e6;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid * rc.log_phi < cap * 0.5)
      lo = mid;  // keep a factor-2 margin inside the strict inequality
    else
      hi = mid;
  }
  rc.r = lo;
  return rc;
}

}  // namespace regen
