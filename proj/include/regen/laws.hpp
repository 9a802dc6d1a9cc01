#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "regen/common.hpp"
#include "regen/rng.hpp"
#include "regen/special.hpp"

namespace regen {

// A scalar i.i.d. step law exposing what the dyadic conditional-quantile
// coupler needs: the exact quantile of the k-step sum, and for each dyadic
// split, the conditional quantile of the first k/2 steps given the k-step
// total. Marginal exactness of the coupled walk follows level by level.
class StepLaw {
 public:
  virtual ~StepLaw() = default;
  virtual double mean() const = 0;
  virtual double variance() const = 0;
  virtual double sample(CounterRng& rng) const = 0;
  virtual double sum_quantile(std::int64_t k, double p) const = 0;
  virtual double half_quantile(std::int64_t k, double total, double p) const = 0;
  virtual std::string name() const = 0;
};

using StepLawPtr = std::shared_ptr<const StepLaw>;

// Gaussian steps: the quantile transform is affine, so the coupled walk is
// exactly mean*k + sd*B_k.
class GaussianStep final : public StepLaw {
 public:
  GaussianStep(double mean, double sd) : mean_(mean), sd_(sd) {}
  double mean() const override { return mean_; }
  double variance() const override { return sd_ * sd_; }
  double sample(CounterRng& rng) const override { return mean_ + sd_ * rng.normal(); }
  double sum_quantile(std::int64_t k, double p) const override {
    return k * mean_ + sd_ * std::sqrt(static_cast<double>(k)) * normal_quantile(p);
  }
  double half_quantile(std::int64_t k, double total, double p) const override {
    return 0.5 * total + sd_ * std::sqrt(k / 4.0) * normal_quantile(p);
  }
  std::string name() const override { return "gaussian"; }

 private:
  double mean_, sd_;
};

// Poisson(rate) + shift per step. k-step sum is Poisson(k*rate) + k*shift;
// the half given the total is Binomial(total, 1/2).
class PoissonStep final : public StepLaw {
 public:
  explicit PoissonStep(double rate, double shift = 0.0) : rate_(rate), shift_(shift) {}
  double mean() const override { return rate_ + shift_; }
  double variance() const override { return rate_; }
  double sample(CounterRng& rng) const override {
    return static_cast<double>(poisson_sample(rate_, rng)) + shift_;
  }
  double sum_quantile(std::int64_t k, double p) const override {
    return static_cast<double>(poisson_quantile(k * rate_, p)) + k * shift_;
  }
  double half_quantile(std::int64_t k, double total, double p) const override {
    const std::int64_t base = std::llround(total - k * shift_);
    return static_cast<double>(binomial_quantile(base, 0.5, p)) + (k / 2) * shift_;
  }
  std::string name() const override { return "poisson"; }

 private:
  double rate_, shift_;
};

// Bernoulli(q) + shift per step. k-step sum is Binomial(k, q) + k*shift; the
// half given the total is hypergeometric and does not depend on q.
class BernoulliStep final : public StepLaw {
 public:
  explicit BernoulliStep(double q, double shift = 0.0) : q_(q), shift_(shift) {}
  double mean() const override { return q_ + shift_; }
  double variance() const override { return q_ * (1.0 - q_); }
  double sample(CounterRng& rng) const override {
    return (rng.uniform01() < q_ ? 1.0 : 0.0) + shift_;
  }
  double sum_quantile(std::int64_t k, double p) const override {
    return static_cast<double>(binomial_quantile(k, q_, p)) + k * shift_;
  }
  double half_quantile(std::int64_t k, double total, double p) const override {
    const std::int64_t succ = std::llround(total - k * shift_);
    return static_cast<double>(hypergeometric_quantile(k, succ, k / 2, p)) + (k / 2) * shift_;
  }
  std::string name() const override { return "bernoulli"; }

 private:
  double q_, shift_;
};

// Gamma(shape, rate) + shift per step. k-step sum is Gamma(k*shape, rate);
// the half given the total is total * Beta(k*shape/2, k*shape/2).
class GammaStep final : public StepLaw {
 public:
  GammaStep(double shape, double rate, double shift = 0.0) : shape_(shape), rate_(rate), shift_(shift) {}
  double mean() const override { return shape_ / rate_ + shift_; }
  double variance() const override { return shape_ / (rate_ * rate_); }
  double sample(CounterRng& rng) const override {
    return gamma_quantile(shape_, rng.uniform01()) / rate_ + shift_;
  }
  double sum_quantile(std::int64_t k, double p) const override {
    return gamma_quantile(k * shape_, p) / rate_ + k * shift_;
  }
  double half_quantile(std::int64_t k, double total, double p) const override {
    const double base = total - k * shift_;
    const double a = k * shape_ * 0.5;
    return base * beta_quantile(a, a, p) + (k / 2) * shift_;
  }
  std::string name() const override { return "gamma"; }

 private:
  double shape_, rate_, shift_;
};

// Bounded lattice law: values offset + {0,...,L-1} * span with given weights.
// Dyadic sums are tabulated by doubling convolutions; the conditional half
// given the total follows from the pair pmf. Memory is capped by `budget`
// table entries, exceeding it is UnsupportedLaw.
class LatticeStep final : public StepLaw {
 public:
  LatticeStep(std::vector<double> weights, double offset, double span, std::int64_t max_steps,
              std::size_t budget = (1u << 24))
      : weights_(std::move(weights)), offset_(offset), span_(span) {
    if (weights_.size() < 2 || !(span_ > 0.0))
      throw Error(ErrorCode::UnsupportedLaw, "lattice law needs >= 2 points and positive span");
    double tot = 0.0;
    for (double w : weights_) {
      if (w < 0.0) throw Error(ErrorCode::UnsupportedLaw, "negative lattice weight");
      tot += w;
    }
    for (double& w : weights_) w /= tot;
    std::size_t entries = 0;
    for (std::int64_t k = 1; k <= max_steps; k *= 2) entries += k * (weights_.size() - 1) + 1;
    if (entries > budget)
      throw Error(ErrorCode::UnsupportedLaw, "lattice convolution tables exceed the configured budget");
    pmf_.push_back(weights_);
    std::int64_t k = 1;
    while (k < max_steps) {
      pmf_.push_back(convolve(pmf_.back(), pmf_.back()));
      k *= 2;
    }
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      mean_ += (offset_ + span_ * i) * weights_[i];
    }
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      const double dv = offset_ + span_ * i - mean_;
      var_ += dv * dv * weights_[i];
    }
  }

  double mean() const override { return mean_; }
  double variance() const override { return var_; }

  double sample(CounterRng& rng) const override {
    double u = rng.uniform01();
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      u -= weights_[i];
      if (u <= 0.0) return offset_ + span_ * i;
    }
    return offset_ + span_ * (weights_.size() - 1);
  }

  double sum_quantile(std::int64_t k, double p) const override {
    const auto& pmf = level_pmf(k);
    double acc = 0.0;
    for (std::size_t i = 0; i < pmf.size(); ++i) {
      acc += pmf[i];
      if (acc >= p) return k * offset_ + span_ * i;
    }
    return k * offset_ + span_ * (pmf.size() - 1);
  }

  double half_quantile(std::int64_t k, double total, double p) const override {
    const std::int64_t t = std::llround((total - k * offset_) / span_);
    const auto& half = level_pmf(k / 2);
    const std::int64_t lo = std::max<std::int64_t>(0, t - static_cast<std::int64_t>(half.size()) + 1);
    const std::int64_t hi = std::min<std::int64_t>(static_cast<std::int64_t>(half.size()) - 1, t);
    double norm = 0.0;
    for (std::int64_t i = lo; i <= hi; ++i) norm += half[i] * half[t - i];
    double acc = 0.0;
    for (std::int64_t i = lo; i <= hi; ++i) {
      acc += half[i] * half[t - i];
      if (acc >= p * norm) return (k / 2) * offset_ + span_ * i;
    }
    return (k / 2) * offset_ + span_ * hi;
  }

  std::string name() const override { return "lattice"; }

 private:
  static std::vector<double> convolve(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> r(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i] == 0.0) continue;
      for (std::size_t j = 0; j < b.size(); ++j) r[i + j] += a[i] * b[j];
    }
    return r;
  }

  const std::vector<double>& level_pmf(std::int64_t k) const {
    std::int64_t kk = 1;
    std::size_t idx = 0;
    while (kk < k) {
      kk *= 2;
      ++idx;
    }
    if (kk != k || idx >= pmf_.size())
      throw Error(ErrorCode::UnsupportedLaw, "lattice pmf requested at a non-dyadic step count");
    return pmf_[idx];
  }

  std::vector<double> weights_;
  double offset_, span_;
  double mean_ = 0.0, var_ = 0.0;
  std::vector<std::vector<double>> pmf_;  // pmf of 2^i-step sums
};

}  // namespace regen
