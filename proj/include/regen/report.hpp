#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "regen/common.hpp"
#include "regen/pipeline.hpp"
#include "regen/verify.hpp"

namespace regen {

// The timestamp lives only inside the metadata block, so reports can be
// compared byte-for-byte after dropping it.
inline nlohmann::json make_metadata(const std::string& command, const std::string& digest,
                                    std::uint64_t seed) {
  const auto now = std::chrono::system_clock::now();
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
  return nlohmann::json{{"command", command},
                        {"config_digest", digest},
                        {"seed", seed},
                        {"version", kVersion},
                        {"timestamp_unix", secs}};
}

inline nlohmann::json strip_metadata(nlohmann::json j) {
  j.erase("metadata");
  return j;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::ConfigError, "cannot write file '" + path + "'");
  out << text;
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

inline nlohmann::json to_json(const RateFit& f) {
  return nlohmann::json{{"horizons", f.horizons},
                        {"mean_sup", f.mean_sup},
                        {"median_sup", f.median_sup},
                        {"q90_sup", f.q90_sup},
                        {"c", f.c},
                        {"c_median", f.c_median},
                        {"intercept", f.intercept},
                        {"r2", f.r2},
                        {"loglog_exponent", f.loglog_exponent},
                        {"loglog_r2", f.loglog_r2},
                        {"verdict", f.verdict}};
}

inline nlohmann::json to_json(const TailFitResult& f) {
  return nlohmann::json{{"x", f.x},       {"survival", f.survival}, {"a", f.a},
                        {"b", f.b},       {"b_se", f.b_se},         {"r2_exp", f.r2_exp},
                        {"r2_pow", f.r2_pow}, {"pass", f.pass}};
}

inline nlohmann::json to_json(const CoupledRealization& r) {
  return nlohmann::json{{"horizon", r.horizon},
                        {"phi_sups", r.phi_sups},
                        {"total_sup", r.total_sup},
                        {"identity_gap", r.identity_gap},
                        {"index_clamped", r.index_clamped},
                        {"sup_gamma_n_minus_t", r.sup_gamma_n_minus_t},
                        {"sup_m_minus_y", r.sup_m_minus_y},
                        {"sup_m_inverse_residual", r.sup_m_inverse_residual}};
}

inline std::string phi_csv(const CouplingStudy& res) {
  std::string out = "replicate,t,phi_1,phi_2,phi_3,phi_4,phi_5,phi_6,phi_7,phi_8,total_sup\n";
  for (std::size_t h = 0; h < res.horizons.size(); ++h) {
    for (std::size_t r = 0; r < res.realizations[h].size(); ++r) {
      const auto& real = res.realizations[h][r];
      out += std::to_string(r) + "," + std::to_string(real.horizon);
      for (double phi : real.phi_sups) out += "," + std::to_string(phi);
      out += "," + std::to_string(real.total_sup) + "\n";
    }
  }
  return out;
}

// Flat (x, empirical survival, fitted bound) rows for external plotting.
inline std::string tail_csv(const TailFitResult& f) {
  std::string out = "x,survival,fitted\n";
  for (std::size_t i = 0; i < f.x.size(); ++i)
    out += std::to_string(f.x[i]) + "," + std::to_string(f.survival[i]) + "," +
           std::to_string(f.a * std::exp(-f.b * f.x[i])) + "\n";
  return out;
}

}  // namespace regen
