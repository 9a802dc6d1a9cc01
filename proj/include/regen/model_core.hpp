#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "regen/common.hpp"
#include "regen/linalg.hpp"

namespace regen {

// One regeneration cycle: duration tau, increment vector xi, within-cycle
// max eta, optionally the recorded within-cycle path (offset in (0,tau],
// value of the running increment at that offset).
struct CycleSample {
  double tau = 0.0;
  Vec xi;
  double eta = 0.0;
  std::optional<std::vector<std::pair<double, Vec>>> path;

  void validate() const {
    if (!(tau > 0.0)) throw Error(ErrorCode::NonPositiveTau, "cycle duration must be positive");
    if (eta < max_abs(xi) - 1e-12 * (1.0 + max_abs(xi)))
      throw Error(ErrorCode::NumericError, "eta below |xi| in max norm");
    if (path) {
      if (path->empty() || max_abs(vec_sub(path->back().second, xi)) > 1e-12 * (1.0 + max_abs(xi)))
        throw Error(ErrorCode::NumericError, "within-cycle path must end at xi");
      double prev = 0.0;
      for (const auto& [off, val] : *path) {
        (void)val;
        if (!(off > prev - 1e-15) || off > tau + 1e-12 * tau)
          throw Error(ErrorCode::NumericError, "path offsets must be increasing within (0, tau]");
        prev = off;
      }
    }
  }
};

// First and second moments of (xi, tau). n_samples == 0 marks analytic moments.
struct CycleMoments {
  std::size_t d = 0;
  Vec mean_xi;
  double mean_tau = 0.0;
  Mat cov_xi;
  double var_tau = 0.0;
  Vec cov_xi_tau;
  std::uint64_t n_samples = 0;
};

// Derived asymptotic parameters: drift kappa, asymptotic covariance sigma2
// with its square root and pseudo-inverse, and the auxiliary block
// (beta, v2, gamma, lambda, alpha) used by the coupling pipeline.
struct AsymptoticParams {
  double mu = 0.0;
  Vec kappa;
  Mat sigma2;
  Mat sigma;
  Mat sigma_pinv;
  Vec beta;
  Mat v2;
  Mat v;
  double gamma = 0.0;
  double lambda = 0.0;
  Vec alpha;

  std::size_t d() const { return kappa.size(); }
};

inline AsymptoticParams derive_asymptotics(const CycleMoments& m, const Tolerances& tol = {}) {
  if (m.d == 0 || m.mean_xi.size() != m.d || m.cov_xi.rows() != m.d || m.cov_xi_tau.size() != m.d)
    throw Error(ErrorCode::ConfigError, "inconsistent moment dimensions");
  if (!(m.mean_tau > 0.0)) throw Error(ErrorCode::ConfigError, "mean_tau must be positive");
  if (!(m.var_tau > 0.0))
    throw Error(ErrorCode::DegenerateTau, "Var(tau) = 0: use a plain i.i.d.-sum method instead");
  const double cov_scale = std::max(m.cov_xi.max_abs(), 1e-300);
  if (sym_residual(m.cov_xi) > tol.sym_rel * cov_scale)
    throw Error(ErrorCode::NonPSD, "cov_xi not symmetric within tolerance");
  {
    EigenSym es = eigen_sym(m.cov_xi);
    if (es.values.front() < -tol.psd_rel * cov_scale)
      throw Error(ErrorCode::NonPSD, "cov_xi has a negative eigenvalue beyond tolerance");
  }

  AsymptoticParams p;
  p.mu = m.mean_tau;
  p.kappa.resize(m.d);
  for (std::size_t i = 0; i < m.d; ++i) p.kappa[i] = m.mean_xi[i] / p.mu;

  // sigma2 = Var(xi - kappa tau) / mu, written out symmetrically.
  p.sigma2 = (m.cov_xi - Mat::outer(m.cov_xi_tau, p.kappa) - Mat::outer(p.kappa, m.cov_xi_tau) +
              Mat::outer(p.kappa, p.kappa).scaled(m.var_tau))
                 .scaled(1.0 / p.mu);
  p.sigma = psd_sqrt(p.sigma2, tol.psd_rel);
  p.sigma_pinv = pseudo_inverse(p.sigma, tol.pinv_cutoff_rel);

  p.beta.resize(m.d);
  for (std::size_t i = 0; i < m.d; ++i) p.beta[i] = m.cov_xi_tau[i] / m.var_tau;
  p.v2 = m.cov_xi - Mat::outer(m.cov_xi_tau, p.beta) - Mat::outer(p.beta, m.cov_xi_tau) +
         Mat::outer(p.beta, p.beta).scaled(m.var_tau);
  p.v = psd_sqrt(p.v2, tol.psd_rel);

  p.gamma = m.var_tau / p.mu;
  p.lambda = p.mu * p.mu / m.var_tau;
  p.alpha.resize(m.d);
  for (std::size_t i = 0; i < m.d; ++i) p.alpha[i] = p.beta[i] - p.kappa[i];
  return p;
}

struct ValidationEntry {
  std::string name;
  double residual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct ValidationReport {
  std::vector<ValidationEntry> entries;
  bool all_pass() const {
    for (const auto& e : entries)
      if (!e.pass) return false;
    return true;
  }
};

// Residuals of the identities the derivation must satisfy: per-coordinate
// beta-orthogonality cov(xi - beta tau, tau) = 0, the projections
// sigma sigma+ v = v and sigma sigma+ alpha = alpha, and lambda gamma = mu.
inline ValidationReport validate_params(const AsymptoticParams& p, const CycleMoments& m,
                                        double tolerance = 1e-10) {
  ValidationReport rep;
  auto push = [&](const std::string& name, double residual) {
    rep.entries.push_back({name, residual, tolerance, residual <= tolerance});
  };
  double orth = 0.0;
  for (std::size_t i = 0; i < m.d; ++i)
    orth = std::max(orth, std::abs(m.cov_xi_tau[i] - p.beta[i] * m.var_tau));
  push("beta_orthogonality", orth);
  const Mat proj = p.sigma * p.sigma_pinv;
  push("sigma_pinv_v", max_abs_diff(proj * p.v, p.v));
  {
    const Vec pa = proj * p.alpha;
    push("sigma_pinv_alpha", max_abs(vec_sub(pa, p.alpha)));
  }
  push("lambda_gamma_mu", std::abs(p.lambda * p.gamma - p.mu));
  return rep;
}

// --- JSON (field names match the type definitions; matrices row-major) ---

inline nlohmann::json mat_to_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

inline Mat mat_from_json(const nlohmann::json& j) {
  const std::size_t r = j.size();
  const std::size_t c = r ? j.at(0).size() : 0;
  Mat m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t k = 0; k < c; ++k) m(i, k) = j.at(i).at(k).get<double>();
  return m;
}

inline nlohmann::json to_json(const CycleMoments& m) {
  return nlohmann::json{{"d", m.d},
                        {"mean_xi", m.mean_xi},
                        {"mean_tau", m.mean_tau},
                        {"cov_xi", mat_to_json(m.cov_xi)},
                        {"var_tau", m.var_tau},
                        {"cov_xi_tau", m.cov_xi_tau},
                        {"n_samples", m.n_samples}};
}

inline CycleMoments cycle_moments_from_json(const nlohmann::json& j) {
  CycleMoments m;
  m.d = j.at("d").get<std::size_t>();
  m.mean_xi = j.at("mean_xi").get<Vec>();
  m.mean_tau = j.at("mean_tau").get<double>();
  m.cov_xi = mat_from_json(j.at("cov_xi"));
  m.var_tau = j.at("var_tau").get<double>();
  m.cov_xi_tau = j.at("cov_xi_tau").get<Vec>();
  m.n_samples = j.at("n_samples").get<std::uint64_t>();
  return m;
}

inline nlohmann::json to_json(const AsymptoticParams& p) {
  return nlohmann::json{{"mu", p.mu},
                        {"kappa", p.kappa},
                        {"sigma2", mat_to_json(p.sigma2)},
                        {"sigma", mat_to_json(p.sigma)},
                        {"sigma_pinv", mat_to_json(p.sigma_pinv)},
                        {"beta", p.beta},
                        {"v2", mat_to_json(p.v2)},
                        {"v", mat_to_json(p.v)},
                        {"gamma", p.gamma},
                        {"lambda", p.lambda},
                        {"alpha", p.alpha}};
}

inline AsymptoticParams asymptotic_params_from_json(const nlohmann::json& j) {
  AsymptoticParams p;
  p.mu = j.at("mu").get<double>();
  p.kappa = j.at("kappa").get<Vec>();
  p.sigma2 = mat_from_json(j.at("sigma2"));
  p.sigma = mat_from_json(j.at("sigma"));
  p.sigma_pinv = mat_from_json(j.at("sigma_pinv"));
  p.beta = j.at("beta").get<Vec>();
  p.v2 = mat_from_json(j.at("v2"));
  p.v = mat_from_json(j.at("v"));
  p.gamma = j.at("gamma").get<double>();
  p.lambda = j.at("lambda").get<double>();
  p.alpha = j.at("alpha").get<Vec>();
  return p;
}

inline nlohmann::json to_json(const ValidationReport& r) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : r.entries)
    entries.push_back({{"name", e.name}, {"residual", e.residual}, {"tolerance", e.tolerance}, {"pass", e.pass}});
  return nlohmann::json{{"entries", entries}, {"all_pass", r.all_pass()}};
}

}  // namespace regen
