#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <map>
#include <optional>
#include <unordered_map>
#include <vector>

#include "regen/common.hpp"
#include "regen/laws.hpp"
#include "regen/linalg.hpp"
#include "regen/rng.hpp"
#include "regen/special.hpp"

namespace regen {

// A d-dimensional Brownian path on the dyadic grid of [0, 2^top_level],
// materialized lazily by midpoint refinement down to level j_min. Node
// Gaussians are keyed by the node index, so values are a pure function of
// the stream key: query order and thread schedule cannot change them.
class DyadicBrownianPath {
 public:
  DyadicBrownianPath(std::size_t d, int top_level, int j_min, CounterRng stream)
      : d_(d), top_level_(top_level), j_min_(j_min), stream_(stream) {
    if (d < 1 || d > 8) throw Error(ErrorCode::ConfigError, "dimension must be in [1, 8]");
    if (j_min > top_level) throw Error(ErrorCode::ConfigError, "j_min above top level");
    depth_ = top_level - j_min;
    if (depth_ > 62) throw Error(ErrorCode::ConfigError, "dyadic tree too deep");
    max_index_ = std::uint64_t(1) << depth_;
  }

  std::size_t dim() const { return d_; }
  double horizon() const { return std::ldexp(1.0, top_level_); }
  double resolution() const { return std::ldexp(1.0, j_min_); }
  int j_min() const { return j_min_; }
  int top_level() const { return top_level_; }

  // Value at time t, which must sit on the dyadic grid.
  const Vec& value(double t) {
    const double scaled = std::ldexp(t, -j_min_);
    const std::uint64_t idx = static_cast<std::uint64_t>(std::llround(scaled));
    if (std::abs(scaled - static_cast<double>(idx)) > 1e-9 * std::max(1.0, std::abs(scaled)) ||
        idx > max_index_)
      throw Error(ErrorCode::InsufficientResolution, "time not on the dyadic grid of this path");
    return value_at_index(idx);
  }

  double scalar(double t) { return value(t)[0]; }

  // Largest grid time <= t; evaluation there stands in for t, with the
  // inter-grid fluctuation folded into the log-sized slack the sup policy
  // allows.
  double snap(double t) const {
    const double r = resolution();
    return std::floor(t / r) * r;
  }

  const Vec& value_at_index(std::uint64_t idx) {
    auto it = cache_.find(idx);
    if (it != cache_.end()) return it->second;
    Vec val(d_);
    if (idx == 0) {
      // zero at the origin
    } else if (idx == max_index_) {
      const double sd = std::sqrt(horizon());
      for (std::size_t c = 0; c < d_; ++c) val[c] = sd * node_gauss(idx, c);
    } else {
      const std::uint64_t bit = idx & (~idx + 1);
      const Vec& lo = value_at_index(idx - bit);
      const Vec& hi = value_at_index(idx + bit);
      const double sd = std::sqrt(std::ldexp(1.0, j_min_) * static_cast<double>(bit) / 2.0);
      for (std::size_t c = 0; c < d_; ++c)
        val[c] = 0.5 * (lo[c] + hi[c]) + sd * node_gauss(idx, c);
    }
    return cache_.emplace(idx, std::move(val)).first->second;
  }

 private:
  double node_gauss(std::uint64_t idx, std::size_t coord) const {
    return stream_.normal_at(idx * 8 + coord);
  }

  std::size_t d_;
  int top_level_, j_min_, depth_;
  std::uint64_t max_index_;
  CounterRng stream_;
  std::unordered_map<std::uint64_t, Vec> cache_;
};

// A counting process: jump times fully resolved on the core [0, core_horizon],
// with counts at points beyond the core materialized lazily by exact binomial
// thinning (used by the W* construction, whose coarse dyadic cells reach far
// beyond the horizon of interest).
class CountingPath {
 public:
  CountingPath(double rate, std::vector<double> jump_times, double core_horizon)
      : rate_(rate), jump_times_(std::move(jump_times)), core_horizon_(core_horizon) {}

  double rate() const { return rate_; }
  double core_horizon() const { return core_horizon_; }
  const std::vector<double>& jump_times() const { return jump_times_; }
  std::int64_t core_count() const { return static_cast<std::int64_t>(jump_times_.size()); }

  // Enable count queries on (core_horizon, top_horizon].
  void extend_to(double top_horizon, CounterRng stream) {
    if (top_horizon <= core_horizon_) return;
    ext_stream_ = stream;
    ext_counts_.clear();
    ext_counts_[core_horizon_] = 0;
    CounterRng root = stream.fork(0x746f70);
    ext_counts_[top_horizon] = poisson_sample(rate_ * (top_horizon - core_horizon_), root);
    extended_ = true;
  }

  std::int64_t count_at(double t) {
    if (t <= 0.0) return 0;
    if (t <= core_horizon_) {
      const auto it = std::upper_bound(jump_times_.begin(), jump_times_.end(), t);
      return static_cast<std::int64_t>(it - jump_times_.begin());
    }
    if (!extended_ || t > ext_counts_.rbegin()->first + 1e-9)
      throw Error(ErrorCode::InsufficientResolution, "count query beyond the counting path horizon");
    return core_count() + ext_count_at(t);
  }

  // Time of the i-th jump (1-based), restricted to the resolved core.
  double arrival(std::int64_t i) const {
    if (i < 1 || i > core_count())
      throw Error(ErrorCode::InsufficientResolution, "arrival index outside the resolved core");
    return jump_times_[static_cast<std::size_t>(i - 1)];
  }

  // Inverse path: time of the ([w]+1)-th jump, a sum of [w]+1 exponentials.
  double inverse(double w) const { return arrival(static_cast<std::int64_t>(std::floor(w)) + 1); }

 private:
  std::int64_t ext_count_at(double t) {
    auto hit = ext_counts_.find(t);
    if (hit != ext_counts_.end()) return hit->second;
    auto up = ext_counts_.upper_bound(t);
    if (up == ext_counts_.end()) return ext_counts_.rbegin()->second;
    auto lo = std::prev(up);
    const double t0 = lo->first, t1 = up->first;
    const std::int64_t n01 = up->second - lo->second;
    std::int64_t left = 0;
    if (n01 > 0) {
      std::uint64_t bits;
      static_assert(sizeof(double) == sizeof(std::uint64_t));
      std::memcpy(&bits, &t, sizeof(bits));
      const double p = ext_stream_->fork(bits).uniform01();
      left = binomial_quantile(n01, (t - t0) / (t1 - t0), p);
    }
    const std::int64_t val = lo->second + left;
    ext_counts_[t] = val;
    return val;
  }

  double rate_;
  std::vector<double> jump_times_;
  double core_horizon_;
  bool extended_ = false;
  std::optional<CounterRng> ext_stream_;
  std::map<double, std::int64_t> ext_counts_;
};

// Plain Poisson process on [0, horizon] via exponential gaps.
inline CountingPath poisson_process(double rate, double horizon, CounterRng& rng) {
  std::vector<double> jumps;
  jumps.reserve(static_cast<std::size_t>(rate * horizon * 1.2) + 16);
  double t = rng.exponential(rate);
  while (t <= horizon) {
    jumps.push_back(t);
    t += rng.exponential(rate);
  }
  return CountingPath(rate, std::move(jumps), horizon);
}

// Couple a Poisson process to a given Brownian path: N(T) is the quantile
// transform of the endpoint Gaussian, interior counts follow by Binomial
// splits against the Brownian-bridge midpoints down to unit cells, and jump
// times are uniform order statistics within each unit cell. Marginally N is
// exactly Poisson(rate) and the Brownian path is untouched.
inline CountingPath couple_poisson_brownian(double rate, double horizon, DyadicBrownianPath& bm,
                                            CounterRng stream) {
  if (!(rate > 0.0)) throw Error(ErrorCode::ConfigError, "rate must be positive");
  const double T = horizon;
  if (T > bm.horizon() + 1e-9)
    throw Error(ErrorCode::InsufficientResolution, "Brownian path does not cover the horizon");
  const std::int64_t n_cells = static_cast<std::int64_t>(std::llround(T));
  if (std::abs(T - static_cast<double>(n_cells)) > 1e-9 || (n_cells & (n_cells - 1)) != 0)
    throw Error(ErrorCode::ConfigError, "horizon must be a power of two");

  const double p_root = normal_cdf(bm.scalar(T) / std::sqrt(T));
  std::vector<std::int64_t> counts(static_cast<std::size_t>(n_cells), 0);
  // stack of (lo, hi, count over [lo,hi))
  struct Cell {
    std::int64_t lo, hi;
    std::int64_t n;
  };
  std::vector<Cell> stack;
  stack.push_back({0, n_cells, poisson_quantile(rate * T, p_root)});
  while (!stack.empty()) {
    const Cell cell = stack.back();
    stack.pop_back();
    if (cell.hi - cell.lo == 1) {
      counts[static_cast<std::size_t>(cell.lo)] = cell.n;
      continue;
    }
    const std::int64_t mid = (cell.lo + cell.hi) / 2;
    std::int64_t left = 0;
    if (cell.n > 0) {
      const double blo = bm.scalar(static_cast<double>(cell.lo));
      const double bhi = bm.scalar(static_cast<double>(cell.hi));
      const double bmid = bm.scalar(static_cast<double>(mid));
      const double sd = std::sqrt((cell.hi - cell.lo) / 4.0);
      const double p = normal_cdf((bmid - 0.5 * (blo + bhi)) / sd);
      left = binomial_quantile(cell.n, 0.5, p);
    }
    stack.push_back({cell.lo, mid, left});
    stack.push_back({mid, cell.hi, cell.n - left});
  }

  std::vector<double> jumps;
  for (std::int64_t cellidx = 0; cellidx < n_cells; ++cellidx) {
    const std::int64_t c = counts[static_cast<std::size_t>(cellidx)];
    if (c == 0) continue;
    CounterRng cell_rng = stream.fork(0x6c656166u).fork(static_cast<std::uint64_t>(cellidx));
    std::vector<double> us(static_cast<std::size_t>(c));
    for (auto& u : us) u = cell_rng.uniform01();
    std::sort(us.begin(), us.end());
    for (double u : us) jumps.push_back(static_cast<double>(cellidx) + u);
  }
  return CountingPath(rate, std::move(jumps), T);
}

// Dyadic conditional-quantile coupling of a random walk to a Brownian path.
// The walk total is the quantile transform of the endpoint Gaussian; each
// dyadic midpoint is the conditional quantile transform of the corresponding
// Brownian-bridge midpoint. The walk is marginally exact and the Brownian
// path keeps its own law.
inline std::vector<double> couple_sums_dyadic(const StepLaw& law, std::int64_t n,
                                              DyadicBrownianPath& bm, std::size_t coord = 0) {
  if (n < 1 || (n & (n - 1)) != 0)
    throw Error(ErrorCode::ConfigError, "step count must be a power of two");
  if (static_cast<double>(n) > bm.horizon() + 1e-9)
    throw Error(ErrorCode::InsufficientResolution, "Brownian path does not cover the walk");
  std::vector<double> q(static_cast<std::size_t>(n) + 1, 0.0);
  const double bn = bm.value(static_cast<double>(n))[coord];
  q[static_cast<std::size_t>(n)] = law.sum_quantile(n, normal_cdf(bn / std::sqrt(static_cast<double>(n))));
  struct Cell {
    std::int64_t lo, hi;
  };
  std::vector<Cell> stack;
  stack.push_back({0, n});
  while (!stack.empty()) {
    const Cell cell = stack.back();
    stack.pop_back();
    if (cell.hi - cell.lo <= 1) continue;
    const std::int64_t mid = (cell.lo + cell.hi) / 2;
    const double blo = bm.value(static_cast<double>(cell.lo))[coord];
    const double bhi = bm.value(static_cast<double>(cell.hi))[coord];
    const double bmid = bm.value(static_cast<double>(mid))[coord];
    const double sd = std::sqrt((cell.hi - cell.lo) / 4.0);
    const double p = normal_cdf((bmid - 0.5 * (blo + bhi)) / sd);
    const double total = q[static_cast<std::size_t>(cell.hi)] - q[static_cast<std::size_t>(cell.lo)];
    q[static_cast<std::size_t>(mid)] =
        q[static_cast<std::size_t>(cell.lo)] + law.half_quantile(cell.hi - cell.lo, total, p);
    stack.push_back({cell.lo, mid});
    stack.push_back({mid, cell.hi});
  }
  return q;
}

// Independent-coupling baseline: the walk is sampled directly from the law.
inline std::vector<double> sample_walk(const StepLaw& law, std::int64_t n, CounterRng& rng) {
  std::vector<double> q(static_cast<std::size_t>(n) + 1, 0.0);
  for (std::int64_t k = 1; k <= n; ++k)
    q[static_cast<std::size_t>(k)] = q[static_cast<std::size_t>(k - 1)] + law.sample(rng);
  return q;
}

}  // namespace regen
