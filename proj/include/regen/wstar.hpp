#pragma once

#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "regen/common.hpp"
#include "regen/dyadic.hpp"
#include "regen/linalg.hpp"
#include "regen/model_core.hpp"

namespace regen {

// The W* construction: a d-dimensional Wiener process in count scale built
// from the midpoint-displacement Gaussians of a Brownian path and the cell
// counts of a counting process,
//
//   Y_{j,k} = 2 B_{(k+1/2)2^j} - B_{(k+1)2^j} - B_{k 2^j},
//   a = N((k+1/2)2^j) - N(k 2^j),  b = N((k+1)2^j) - N((k+1/2)2^j),
//
// with the two-step weight function f_{j,k} on count space (a zero
// denominator makes the whole term zero). Terms are accumulated with the
// isonormal normalization Z_{j,k} = Y_{j,k} 2^{-j/2} against the unit-norm
// version of f_{j,k}; for unit-spaced jumps this reduces exactly to the
// Haar expansion of a Brownian motion. Values at integer counts come from
// the expansion; non-integer counts are filled by an independent
// within-atom bridge, keyed so evaluation order does not matter.
class WstarPath {
 public:
  WstarPath(DyadicBrownianPath& bm, CountingPath& counts, std::int64_t l_max, int j_min, int j_max,
            CounterRng atom_stream)
      : bm_(bm), counts_(counts), l_max_(l_max), j_min_(j_min), j_max_(j_max), atom_stream_(atom_stream) {
    if (j_min_ - 1 < bm_.j_min())
      throw Error(ErrorCode::InsufficientResolution, "Brownian path resolution coarser than j_min-1");
    if (std::ldexp(1.0, j_max_) > bm_.horizon() + 1e-9)
      throw Error(ErrorCode::InsufficientResolution, "Brownian path horizon below 2^j_max");
    values_.assign(static_cast<std::size_t>(l_max_) + 1, Vec(bm_.dim(), 0.0));
    build();
  }

  std::size_t dim() const { return bm_.dim(); }
  std::int64_t l_max() const { return l_max_; }

  const Vec& at_integer(std::int64_t l) const {
    if (l < 0 || l > l_max_) throw Error(ErrorCode::GridMismatch, "W* index out of range");
    return values_[static_cast<std::size_t>(l)];
  }

  // W* at a real count argument; the fractional part is served by the
  // within-atom bridge at resolution 2^-6.
  Vec at(double l) {
    if (l < 0.0 || l > static_cast<double>(l_max_))
      throw Error(ErrorCode::GridMismatch, "W* argument out of range");
    const double fl = std::floor(l);
    const std::int64_t n = static_cast<std::int64_t>(fl);
    double frac = l - fl;
    if (frac == 0.0) return at_integer(n);
    const Vec& lo = at_integer(n);
    const Vec& hi = at_integer(std::min(n + 1, l_max_));
    const int inner = std::max(1, std::min(kAtomRes - 1, static_cast<int>(std::lround(frac * kAtomRes))));
    Vec bridge = atom_bridge(n, 0, kAtomRes, inner);
    Vec out(dim());
    const double w = static_cast<double>(inner) / kAtomRes;
    for (std::size_t c = 0; c < dim(); ++c) out[c] = lo[c] + w * (hi[c] - lo[c]) + bridge[c];
    return out;
  }

 private:
  static constexpr int kAtomRes = 64;

  void build() {
    const std::size_t d = bm_.dim();
    const std::int64_t core_count = counts_.core_count();
    for (std::int64_t l = 1; l <= l_max_; ++l) {
      if (l + 1 > core_count)
        throw Error(ErrorCode::InsufficientResolution, "counting path core does not resolve l_max+1 jumps");
      const double a_l = counts_.arrival(l);
      const double a_next = counts_.arrival(l + 1);
      Vec acc(d, 0.0);
      for (int j = j_min_; j <= j_max_; ++j) {
        const double width = std::ldexp(1.0, j);
        const double kf = std::floor(a_l / width);
        const double left = kf * width;
        const double right = left + width;
        if (a_next > right) continue;  // jumps l and l+1 not in one cell: no straddle at this level
        const double midt = left + 0.5 * width;
        const std::int64_t c0 = counts_.count_at(left);
        const std::int64_t c1 = counts_.count_at(midt);
        const std::int64_t c2 = counts_.count_at(right);
        if (!(c0 < l && l < c2)) continue;
        const std::int64_t a = c1 - c0;
        const std::int64_t b = c2 - c1;
        if (a == 0 || b == 0) continue;  // zero denominator: term is zero
        const double p1 = static_cast<double>(std::min<std::int64_t>(a, l - c0));
        const double p2 = static_cast<double>(std::max<std::int64_t>(0, std::min<std::int64_t>(b, l - c1)));
        const double denom = static_cast<double>(a) * static_cast<double>(b) * static_cast<double>(a + b);
        const double integral = (static_cast<double>(b) * p1 - static_cast<double>(a) * p2) / denom;
        const double coef = std::sqrt(denom) * integral * std::exp2(-0.5 * j);
        if (coef == 0.0) continue;
        const Vec& bl = bm_.value(left);
        const Vec& br = bm_.value(right);
        const Vec& bmid = bm_.value(midt);
        for (std::size_t c = 0; c < d; ++c) acc[c] += coef * (2.0 * bmid[c] - bl[c] - br[c]);
      }
      values_[static_cast<std::size_t>(l)] = acc;
    }
  }

  // Brownian bridge inside atom [n, n+1], pinned to zero at both ends,
  // evaluated at inner/kAtomRes. Deterministically keyed per (atom, node).
  Vec atom_bridge(std::int64_t atom, int lo, int hi, int target) {
    const std::uint64_t key = (static_cast<std::uint64_t>(atom) << 8) | static_cast<std::uint64_t>(target);
    auto it = atom_cache_.find(key);
    if (it != atom_cache_.end()) return it->second;
    Vec val(dim(), 0.0);
    if (target != lo && target != hi) {
      // walk down from [0, kAtomRes] to the cell whose midpoint is target
      int a = 0, b = kAtomRes;
      Vec va(dim(), 0.0), vb(dim(), 0.0);
      while (true) {
        const int mid = (a + b) / 2;
        Vec vm(dim());
        const double sd = std::sqrt(static_cast<double>(b - a) / kAtomRes / 4.0);
        const std::uint64_t mkey = (static_cast<std::uint64_t>(atom) << 8) | static_cast<std::uint64_t>(mid);
        auto mit = atom_cache_.find(mkey);
        if (mit != atom_cache_.end()) {
          vm = mit->second;
        } else {
          CounterRng node = atom_stream_.fork(mkey);
          for (std::size_t c = 0; c < dim(); ++c) vm[c] = 0.5 * (va[c] + vb[c]) + sd * node.normal_at(c);
          atom_cache_.emplace(mkey, vm);
        }
        if (mid == target) { val = vm; break; }
        if (target < mid) { b = mid; vb = vm; } else { a = mid; va = vm; }
      }
    }
    atom_cache_.emplace(key, val);
    return val;
  }

  DyadicBrownianPath& bm_;
  CountingPath& counts_;
  std::int64_t l_max_;
  int j_min_, j_max_;
  CounterRng atom_stream_;
  std::vector<Vec> values_;
  std::unordered_map<std::uint64_t, Vec> atom_cache_;
};

// Matrices of the limit-Wiener composition
//   W_t = sigma+ (lambda^{-1/2} v W*_{t/gamma} - lambda^{-1} gamma^{-1/2} mu alpha Wtilde_t)
//         + (I - sigma+ sigma) Wcirc_t.
struct LimitWienerComposer {
  Mat m_wstar;   // sigma+ v / sqrt(lambda)
  Vec m_wtilde;  // -sigma+ alpha * mu / (lambda sqrt(gamma))
  Mat m_wcirc;   // I - sigma+ sigma

  explicit LimitWienerComposer(const AsymptoticParams& p) {
    m_wstar = (p.sigma_pinv * p.v).scaled(1.0 / std::sqrt(p.lambda));
    const Vec pa = p.sigma_pinv * p.alpha;
    m_wtilde.resize(pa.size());
    const double c = -p.mu / (p.lambda * std::sqrt(p.gamma));
    for (std::size_t i = 0; i < pa.size(); ++i) m_wtilde[i] = c * pa[i];
    m_wcirc = Mat::identity(p.d()) - p.sigma_pinv * p.sigma;
  }

  Vec at(const Vec& wstar_val, double wtilde_val, const Vec& wcirc_val) const {
    Vec out = m_wstar * wstar_val;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += m_wtilde[i] * wtilde_val;
    const Vec extra = m_wcirc * wcirc_val;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += extra[i];
    return out;
  }
};

// Pointwise evaluation of the composition on a grid of pre-evaluated inputs.
inline std::vector<Vec> compose_limit_wiener(const std::vector<Vec>& wstar_at_t_over_gamma,
                                             const std::vector<double>& wtilde_at_t,
                                             const std::vector<Vec>& wcirc_at_t,
                                             const AsymptoticParams& p) {
  if (wstar_at_t_over_gamma.size() != wtilde_at_t.size() || wtilde_at_t.size() != wcirc_at_t.size())
    throw Error(ErrorCode::GridMismatch, "composition inputs have different grid lengths");
  LimitWienerComposer comp(p);
  std::vector<Vec> out;
  out.reserve(wtilde_at_t.size());
  for (std::size_t i = 0; i < wtilde_at_t.size(); ++i)
    out.push_back(comp.at(wstar_at_t_over_gamma[i], wtilde_at_t[i], wcirc_at_t[i]));
  return out;
}

}  // namespace regen
