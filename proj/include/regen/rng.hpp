#pragma once

#include <cmath>
#include <cstdint>

namespace regen {

namespace detail {

// SplitMix64 output function. With state_n = key + n*GOLDEN this is the
// standard SplitMix64 stream, which doubles as a counter-based generator:
// output n is a pure function of (key, n).
inline std::uint64_t splitmix_finalize(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

inline std::uint64_t mix_key(std::uint64_t key, std::uint64_t tag) {
  return splitmix_finalize(key ^ splitmix_finalize(tag * kGolden + 0x632be59bd9b4e019ull));
}

}  // namespace detail

// Inverse normal CDF, Wichura's algorithm AS 241 (PPND16). Accurate to
// about 1e-16 relative over (0,1).
inline double normal_quantile(double p) {
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    const double num =
        (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r + 6.7265770927008700853e4) * r +
             4.5921953931549871457e4) * r + 1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
          1.3314166789178437745e2) * r + 3.3871328727963666080e0);
    const double den =
        (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r + 3.9307895800092710610e4) * r +
             2.1213794301586595867e4) * r + 5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
          4.2313330701600911252e1) * r + 1.0);
    return q * num / den;
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    const double num =
        (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r + 2.41780725177450611770e-1) * r +
             1.27045825245236838258e0) * r + 3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
          4.63033784615654529590e0) * r + 1.42343711074968357734e0);
    const double den =
        (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r + 1.51986665636164571966e-2) * r +
             1.48103976427480074590e-1) * r + 6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
          2.05319162663775882187e0) * r + 1.0);
    val = num / den;
  } else {
    r -= 5.0;
    const double num =
        (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 1.24266094738807843860e-3) * r +
             2.65321895265761230930e-2) * r + 2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
          5.46378491116411436990e0) * r + 6.65790464350110377720e0);
    const double den =
        (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r + 1.84631831751005468180e-5) * r +
             7.86869131145613259100e-4) * r + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
          5.99832206555887937690e-1) * r + 1.0);
    val = num / den;
  }
  return (q < 0.0) ? -val : val;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * 0.7071067811865475244); }

// Counter-based random stream: outputs are pure functions of (key, counter),
// and fork(tag) derives an independent stream. Replicates and lazily refined
// paths key their randomness this way, so results do not depend on thread
// scheduling or query order.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  static CounterRng seeded(std::uint64_t seed) {
    return CounterRng(detail::mix_key(0x243f6a8885a308d3ull, seed));
  }

  CounterRng fork(std::uint64_t tag) const { return CounterRng(detail::mix_key(key_, tag)); }

  std::uint64_t key() const { return key_; }

  std::uint64_t next_u64() { return at(counter_++); }

  // n-th output without advancing.
  std::uint64_t at(std::uint64_t n) const {
    return detail::splitmix_finalize(key_ + (n + 1) * detail::kGolden);
  }

  // Uniform on the open interval (0,1).
  double uniform01() { return to_unit(next_u64()); }

  double normal() { return normal_quantile(uniform01()); }

  double exponential(double rate) { return -std::log(uniform01()) / rate; }

  // Stateless draws keyed by an index; used for lazily materialized paths.
  double uniform01_at(std::uint64_t n) const { return to_unit(at(n)); }
  double normal_at(std::uint64_t n) const { return normal_quantile(to_unit(at(n))); }

 private:
  static double to_unit(std::uint64_t u) {
    return (static_cast<double>(u >> 11) + 0.5) * 0x1.0p-53;
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace regen
