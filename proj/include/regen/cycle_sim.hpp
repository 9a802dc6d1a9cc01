#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <utility>
#include <vector>

#include "regen/common.hpp"
#include "regen/model_core.hpp"
#include "regen/rng.hpp"

namespace regen {

// A cycle generator: independent stream states yield i.i.d. cycles.
struct CycleModel {
  std::size_t d = 1;
  std::function<CycleSample(CounterRng&)> sampler;
  std::optional<CycleMoments> analytic_moments;
};

struct StopRule {
  enum class Kind { Count, Horizon } kind = Kind::Count;
  std::uint64_t count = 0;
  double horizon = 0.0;

  static StopRule by_count(std::uint64_t n) { return {Kind::Count, n, 0.0}; }
  static StopRule by_horizon(double t) { return {Kind::Horizon, 0, t}; }
};

// Under horizon stopping the full overshooting cycle is returned, so the
// (m(t)+1)-th eta is available downstream.
inline std::vector<CycleSample> sample_cycles(const CycleModel& model, const StopRule& stop,
                                              CounterRng& rng, std::uint64_t cycle_cap = 100000000ull) {
  std::vector<CycleSample> out;
  if (stop.kind == StopRule::Kind::Count) {
    if (stop.count < 1) throw Error(ErrorCode::ConfigError, "cycle count must be >= 1");
    out.reserve(stop.count);
    for (std::uint64_t k = 0; k < stop.count; ++k) out.push_back(model.sampler(rng));
    return out;
  }
  if (!(stop.horizon > 0.0)) throw Error(ErrorCode::ConfigError, "horizon must be positive");
  double total = 0.0;
  while (total <= stop.horizon) {
    if (out.size() >= cycle_cap)
      throw Error(ErrorCode::HorizonOverflow, "cycle count cap exceeded before reaching horizon");
    out.push_back(model.sampler(rng));
    total += out.back().tau;
  }
  return out;
}

// A realized cumulative-process path: regeneration skeleton plus S on a grid.
// Between regeneration points with no recorded within-cycle samples, S holds
// its last value (pure-jump convention).
struct CumulativePath {
  double horizon = 0.0;
  std::vector<double> regen_times;  // T_0 = 0 < T_1 < ...
  std::vector<Vec> cycle_increments;
  std::vector<double> etas;
  std::vector<double> grid;
  std::vector<Vec> values;  // S(u) per grid point
  std::vector<Vec> cycle_partial_sums;  // S(T_k), k = 0..#cycles

  std::size_t d() const { return cycle_increments.empty() ? 0 : cycle_increments[0].size(); }

  // m(u) = max{k : T_k <= u}.
  std::size_t renewal_count(double u) const {
    if (u < 0.0 || u > horizon + 1e-12 * std::max(1.0, horizon))
      throw Error(ErrorCode::OutOfHorizon, "renewal_count query outside [0, horizon]");
    const auto it = std::upper_bound(regen_times.begin(), regen_times.end(), u);
    return static_cast<std::size_t>(it - regen_times.begin()) - 1;
  }

  // S(u) with the step conventions above.
  Vec value_at(double u) const {
    const std::size_t m = renewal_count(u);
    return value_in_cycle(m, u);
  }

  // S at time u known to satisfy T_m <= u < T_{m+1}.
  Vec value_in_cycle(std::size_t m, double u) const {
    Vec s = cycle_partial_sums[m];
    if (m < within_cycle.size() && within_cycle[m]) {
      const auto& path = *within_cycle[m];
      const double off = u - regen_times[m];
      // last recorded sample with offset <= off
      std::size_t lo = 0, hi = path.size();
      while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        if (path[mid].first <= off) lo = mid + 1; else hi = mid;
      }
      if (lo > 0)
        for (std::size_t i = 0; i < s.size(); ++i) s[i] += path[lo - 1].second[i];
    }
    return s;
  }

  std::vector<std::optional<std::vector<std::pair<double, Vec>>>> within_cycle;
};

inline std::size_t renewal_count(const CumulativePath& path, double u) { return path.renewal_count(u); }

inline CumulativePath build_path(const std::vector<CycleSample>& cycles, double t, double grid_step) {
  if (!(grid_step > 0.0)) throw Error(ErrorCode::ConfigError, "grid_step must be positive");
  double total = 0.0;
  for (const auto& c : cycles) total += c.tau;
  if (!(total > t)) throw Error(ErrorCode::InsufficientCycles, "cycles do not cover the horizon");

  CumulativePath p;
  p.horizon = t;
  p.regen_times.push_back(0.0);
  const std::size_t d = cycles.empty() ? 0 : cycles[0].xi.size();
  p.cycle_partial_sums.push_back(Vec(d, 0.0));
  Vec acc(d, 0.0);
  double tt = 0.0;
  for (const auto& c : cycles) {
    tt += c.tau;
    p.regen_times.push_back(tt);
    for (std::size_t i = 0; i < d; ++i) acc[i] += c.xi[i];
    p.cycle_increments.push_back(c.xi);
    p.etas.push_back(c.eta);
    p.cycle_partial_sums.push_back(acc);
    p.within_cycle.push_back(c.path);
    if (tt > t) break;
  }
  const std::size_t n_grid = static_cast<std::size_t>(std::floor(t / grid_step + 1e-9)) + 1;
  p.grid.reserve(n_grid);
  p.values.reserve(n_grid);
  for (std::size_t i = 0; i < n_grid; ++i) {
    const double u = std::min(i * grid_step, t);
    p.grid.push_back(u);
    p.values.push_back(p.value_at(u));
  }
  return p;
}

// Stopped-sum model: cycles are (tau, xi) pairs with eta = |xi| and the
// jump placed at the cycle end.
inline CycleModel stopped_sum_model(std::size_t d,
                                    std::function<std::pair<Vec, double>(CounterRng&)> joint_sampler,
                                    std::optional<CycleMoments> analytic = std::nullopt) {
  CycleModel m;
  m.d = d;
  m.analytic_moments = std::move(analytic);
  m.sampler = [joint_sampler = std::move(joint_sampler)](CounterRng& rng) {
    auto [xi, tau] = joint_sampler(rng);
    if (!(tau > 0.0)) throw Error(ErrorCode::NonPositiveTau, "stopped-sum sampler produced tau <= 0");
    CycleSample c;
    c.tau = tau;
    c.xi = std::move(xi);
    c.eta = max_abs(c.xi);
    return c;
  };
  return m;
}

struct ExpMomentProbe {
  double s = 0.0;
  double mean_exp_tau = 0.0;
  double mean_exp_eta = 0.0;
};

struct EmpiricalMoments {
  CycleMoments moments;
  std::vector<ExpMomentProbe> probes;  // exponential-moment screen
};

inline EmpiricalMoments empirical_moments(const std::vector<CycleSample>& cycles,
                                          const std::vector<double>& probe_s = {0.05, 0.1, 0.2}) {
  if (cycles.size() < 2) throw Error(ErrorCode::TooFewSamples, "need at least 2 cycles");
  const std::size_t n = cycles.size();
  const std::size_t d = cycles[0].xi.size();
  EmpiricalMoments out;
  CycleMoments& m = out.moments;
  m.d = d;
  m.n_samples = n;
  m.mean_xi.assign(d, 0.0);
  m.cov_xi_tau.assign(d, 0.0);
  m.cov_xi = Mat(d, d);
  for (const auto& c : cycles) {
    m.mean_tau += c.tau;
    for (std::size_t i = 0; i < d; ++i) m.mean_xi[i] += c.xi[i];
  }
  m.mean_tau /= n;
  for (std::size_t i = 0; i < d; ++i) m.mean_xi[i] /= n;
  for (const auto& c : cycles) {
    const double dt = c.tau - m.mean_tau;
    m.var_tau += dt * dt;
    for (std::size_t i = 0; i < d; ++i) {
      const double dx = c.xi[i] - m.mean_xi[i];
      m.cov_xi_tau[i] += dx * dt;
      for (std::size_t j = i; j < d; ++j) m.cov_xi(i, j) += dx * (c.xi[j] - m.mean_xi[j]);
    }
  }
  const double denom = static_cast<double>(n - 1);
  m.var_tau /= denom;
  for (std::size_t i = 0; i < d; ++i) {
    m.cov_xi_tau[i] /= denom;
    for (std::size_t j = i; j < d; ++j) {
      m.cov_xi(i, j) /= denom;
      m.cov_xi(j, i) = m.cov_xi(i, j);
    }
  }
  for (double s : probe_s) {
    ExpMomentProbe pr;
    pr.s = s;
    for (const auto& c : cycles) {
      pr.mean_exp_tau += std::exp(s * c.tau);
      pr.mean_exp_eta += std::exp(s * c.eta);
    }
    pr.mean_exp_tau /= n;
    pr.mean_exp_eta /= n;
    out.probes.push_back(pr);
  }
  return out;
}

inline void write_cycles_csv(std::ostream& os, const std::vector<CycleSample>& cycles) {
  const std::size_t d = cycles.empty() ? 0 : cycles[0].xi.size();
  os << "k,T_k,tau_k";
  for (std::size_t i = 0; i < d; ++i) os << ",xi_" << i;
  os << ",eta_k\n";
  double t = 0.0;
  for (std::size_t k = 0; k < cycles.size(); ++k) {
    t += cycles[k].tau;
    os << (k + 1) << ',' << t << ',' << cycles[k].tau;
    for (std::size_t i = 0; i < d; ++i) os << ',' << cycles[k].xi[i];
    os << ',' << cycles[k].eta << '\n';
  }
}

inline void write_path_csv(std::ostream& os, const CumulativePath& p) {
  const std::size_t d = p.d();
  os << "u";
  for (std::size_t i = 0; i < d; ++i) os << ",S_" << i;
  os << '\n';
  for (std::size_t g = 0; g < p.grid.size(); ++g) {
    os << p.grid[g];
    for (std::size_t i = 0; i < d; ++i) os << ',' << p.values[g][i];
    os << '\n';
  }
}

}  // namespace regen
