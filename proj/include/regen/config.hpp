#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "regen/birth_death.hpp"
#include "regen/common.hpp"
#include "regen/pipeline.hpp"

namespace regen {

// ---------------------------------------------------------------------------
// Minimal TOML subset: [section] headers, key = value, with numbers,
// booleans, quoted strings and flat arrays of those. Comments start with '#'.
// Enough for experiment files; JSON configs are accepted as-is.
// ---------------------------------------------------------------------------

namespace config_detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline nlohmann::json parse_toml_scalar(const std::string& raw, int line_no) {
  const std::string v = trim(raw);
  if (v.empty()) throw Error(ErrorCode::ConfigError, "empty value at line " + std::to_string(line_no));
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"')
      throw Error(ErrorCode::ConfigError, "unterminated string at line " + std::to_string(line_no));
    return v.substr(1, v.size() - 2);
  }
  if (v == "true") return true;
  if (v == "false") return false;
  try {
    std::size_t used = 0;
    if (v.find('.') == std::string::npos && v.find('e') == std::string::npos &&
        v.find('E') == std::string::npos) {
      const long long i = std::stoll(v, &used);
      if (used == v.size()) return i;
    }
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (...) {
  }
  throw Error(ErrorCode::ConfigError, "cannot parse value '" + v + "' at line " + std::to_string(line_no));
}

inline std::vector<std::string> split_top_level(const std::string& s) {
  std::vector<std::string> parts;
  std::string cur;
  bool in_str = false;
  for (char c : s) {
    if (c == '"') in_str = !in_str;
    if (c == ',' && !in_str) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty()) parts.push_back(cur);
  return parts;
}

}  // namespace config_detail

inline nlohmann::json parse_toml(const std::string& text) {
  nlohmann::json root = nlohmann::json::object();
  nlohmann::json* section = &root;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) {
      // keep '#' inside quoted strings
      bool in_str = false;
      std::size_t cut = std::string::npos;
      for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_str = !in_str;
        if (line[i] == '#' && !in_str) {
          cut = i;
          break;
        }
      }
      if (cut != std::string::npos) line = line.substr(0, cut);
    }
    const std::string t = config_detail::trim(line);
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw Error(ErrorCode::ConfigError, "bad section header at line " + std::to_string(line_no));
      const std::string name = config_detail::trim(t.substr(1, t.size() - 2));
      if (name.empty())
        throw Error(ErrorCode::ConfigError, "empty section name at line " + std::to_string(line_no));
      root[name] = nlohmann::json::object();
      section = &root[name];
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::ConfigError, "expected key = value at line " + std::to_string(line_no));
    const std::string key = config_detail::trim(t.substr(0, eq));
    const std::string val = config_detail::trim(t.substr(eq + 1));
    if (key.empty())
      throw Error(ErrorCode::ConfigError, "empty key at line " + std::to_string(line_no));
    if (!val.empty() && val.front() == '[') {
      if (val.back() != ']')
        throw Error(ErrorCode::ConfigError, "unterminated array at line " + std::to_string(line_no));
      nlohmann::json arr = nlohmann::json::array();
      for (const std::string& part : config_detail::split_top_level(val.substr(1, val.size() - 2)))
        arr.push_back(config_detail::parse_toml_scalar(part, line_no));
      (*section)[key] = arr;
    } else {
      (*section)[key] = config_detail::parse_toml_scalar(val, line_no);
    }
  }
  return root;
}

inline nlohmann::json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  // JSON if it parses as JSON, else treat as TOML
  if (!text.empty() && config_detail::trim(text).front() == '{') {
    try {
      return nlohmann::json::parse(text);
    } catch (const std::exception& e) {
      throw Error(ErrorCode::ConfigError, std::string("JSON parse error: ") + e.what());
    }
  }
  return parse_toml(text);
}

// ---------------------------------------------------------------------------
// Experiment configuration.
// ---------------------------------------------------------------------------

struct ExperimentConfig {
  nlohmann::json raw;
  std::string model_type;  // stopped_sum | birth_death | bernoulli_walk
  std::vector<double> horizons;
  std::size_t replicates = 100;
  CouplerKind coupler = CouplerKind::Dyadic;
  double grid_step = 1.0;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::string out_dir = "out";
};

namespace config_detail {

template <typename T>
T require(const nlohmann::json& j, const std::string& section, const std::string& key) {
  if (!j.contains(section) || !j.at(section).contains(key))
    throw Error(ErrorCode::ConfigError, "missing field " + section + "." + key);
  try {
    return j.at(section).at(key).get<T>();
  } catch (const std::exception&) {
    throw Error(ErrorCode::ConfigError, "field " + section + "." + key + " has the wrong type");
  }
}

template <typename T>
T optional(const nlohmann::json& j, const std::string& section, const std::string& key, T fallback) {
  if (!j.contains(section) || !j.at(section).contains(key)) return fallback;
  try {
    return j.at(section).at(key).get<T>();
  } catch (const std::exception&) {
    throw Error(ErrorCode::ConfigError, "field " + section + "." + key + " has the wrong type");
  }
}

}  // namespace config_detail

inline ExperimentConfig experiment_config(const nlohmann::json& j) {
  ExperimentConfig c;
  c.raw = j;
  c.model_type = config_detail::require<std::string>(j, "model", "type");
  if (c.model_type != "stopped_sum" && c.model_type != "birth_death" && c.model_type != "bernoulli_walk")
    throw Error(ErrorCode::ConfigError, "model.type must be stopped_sum, birth_death or bernoulli_walk");
  c.horizons = config_detail::optional<std::vector<double>>(j, "experiment", "horizons", {});
  for (double t : c.horizons)
    if (!(t >= 2.718281828459045))
      throw Error(ErrorCode::ConfigError, "experiment.horizons must all be >= e");
  c.replicates = config_detail::optional<std::size_t>(j, "experiment", "replicates", 100);
  if (c.replicates < 1) throw Error(ErrorCode::ConfigError, "experiment.replicates must be >= 1");
  const std::string coupler = config_detail::optional<std::string>(j, "experiment", "coupler", "dyadic");
  if (coupler == "dyadic")
    c.coupler = CouplerKind::Dyadic;
  else if (coupler == "independent")
    c.coupler = CouplerKind::Independent;
  else
    throw Error(ErrorCode::ConfigError, "experiment.coupler must be dyadic or independent");
  c.grid_step = config_detail::optional<double>(j, "experiment", "grid_step", 1.0);
  if (!(c.grid_step > 0.0)) throw Error(ErrorCode::ConfigError, "experiment.grid_step must be positive");
  c.seed = config_detail::optional<std::uint64_t>(j, "experiment", "seed", 1);
  c.threads = config_detail::optional<std::size_t>(j, "experiment", "threads", 1);
  c.out_dir = config_detail::optional<std::string>(j, "output", "dir", "");
  return c;
}

// Rate/observable entry: either an expression string or a numeric table.
inline RateFn rate_from_config(const nlohmann::json& model, const std::string& key) {
  if (!model.contains(key)) throw Error(ErrorCode::ConfigError, "missing field model." + key);
  const auto& v = model.at(key);
  if (v.is_string()) return parse_rate_expression(v.get<std::string>());
  if (v.is_array()) {
    std::vector<double> table;
    try {
      table = v.get<std::vector<double>>();
    } catch (const std::exception&) {
      throw Error(ErrorCode::ConfigError, "field model." + key + " table must be numeric");
    }
    return [table, key](double n) {
      const std::size_t i = static_cast<std::size_t>(n);
      if (i >= table.size())
        throw Error(ErrorCode::ConfigError, "model." + key + " table too short for n=" + std::to_string(i));
      return table[i];
    };
  }
  if (v.is_number()) {
    const double x = v.get<double>();
    return [x](double) { return x; };
  }
  throw Error(ErrorCode::ConfigError, "field model." + key + " must be an expression, number or table");
}

inline BirthDeathSpec bd_spec_from_config(const nlohmann::json& j) {
  if (!j.contains("model")) throw Error(ErrorCode::ConfigError, "missing [model] section");
  const auto& model = j.at("model");
  BirthDeathSpec spec;
  spec.birth = rate_from_config(model, "birth");
  spec.death = rate_from_config(model, "death");
  spec.f = model.contains("f") ? rate_from_config(model, "f") : RateFn([](double n) { return n; });
  spec.n_max = config_detail::require<std::size_t>(j, "model", "n_max");
  spec.validate();
  return spec;
}

inline StepLawPtr step_law_from_config(const nlohmann::json& model, const std::string& prefix) {
  const std::string kind = model.contains(prefix) ? model.at(prefix).get<std::string>() : "";
  auto get = [&](const std::string& key, double fallback, bool required = false) {
    const std::string full = prefix + "_" + key;
    if (!model.contains(full)) {
      if (required) throw Error(ErrorCode::ConfigError, "missing field model." + full);
      return fallback;
    }
    return model.at(full).get<double>();
  };
  if (kind == "poisson") return std::make_shared<PoissonStep>(get("rate", 1.0), get("shift", 0.0));
  if (kind == "gaussian") return std::make_shared<GaussianStep>(get("mean", 0.0), get("sd", 1.0));
  if (kind == "bernoulli") return std::make_shared<BernoulliStep>(get("p", 0.5), get("shift", 0.0));
  if (kind == "exp" || kind == "gamma")
    return std::make_shared<GammaStep>(get("shape", 1.0), get("rate", 1.0), get("shift", 0.0));
  throw Error(ErrorCode::ConfigError, "unknown step law model." + prefix + " = '" + kind + "'");
}

inline DecoupledStoppedSum stopped_sum_from_config(const nlohmann::json& j) {
  if (!j.contains("model")) throw Error(ErrorCode::ConfigError, "missing [model] section");
  const auto& model = j.at("model");
  DecoupledStoppedSum m;
  m.tau_law = step_law_from_config(model, "tau");
  if (!(m.tau_law->mean() > 0.0))
    throw Error(ErrorCode::ConfigError, "model.tau must have a positive mean");
  const std::string xi = model.contains("xi") ? model.at("xi").get<std::string>() : "";
  if (xi == "tau") {
    // empty law lists encode xi == tau
    m.label = "stopped_sum_xi_equals_tau";
    return m;
  }
  m.xi_laws = {step_law_from_config(model, "xi")};
  // centered version of the same law
  if (xi == "poisson") {
    const double rate = model.contains("xi_rate") ? model.at("xi_rate").get<double>() : 1.0;
    m.xi_centered_laws = {std::make_shared<PoissonStep>(rate, -rate)};
  } else if (xi == "gaussian") {
    m.xi_centered_laws = {std::make_shared<GaussianStep>(0.0, std::sqrt(m.xi_laws[0]->variance()))};
  } else if (xi == "bernoulli") {
    const double p = model.at("xi_p").get<double>();
    m.xi_centered_laws = {std::make_shared<BernoulliStep>(p, -p)};
  } else if (xi == "exp" || xi == "gamma") {
    const double shape = model.contains("xi_shape") ? model.at("xi_shape").get<double>() : 1.0;
    const double rate = model.contains("xi_rate") ? model.at("xi_rate").get<double>() : 1.0;
    m.xi_centered_laws = {std::make_shared<GammaStep>(shape, rate, -shape / rate)};
  } else {
    throw Error(ErrorCode::ConfigError, "unknown step law model.xi = '" + xi + "'");
  }
  m.label = "stopped_sum_" + xi;
  return m;
}

// FNV-1a digest of the canonical config serialization: the manifest key.
inline std::string config_digest(const nlohmann::json& j) {
  const std::string s = j.dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace regen
