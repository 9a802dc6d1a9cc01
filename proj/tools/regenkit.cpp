// Batch front end: model ingestion, experiment orchestration, seed
// management, artifact emission. Subcommands: params, couple, bd, verify,
// selftest. Exit codes: 0 pass, 1 verification fail, 2 config error,
// 3 runtime numeric error.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "regen/birth_death.hpp"
#include "regen/config.hpp"
#include "regen/pipeline.hpp"
#include "regen/report.hpp"
#include "regen/verify.hpp"

namespace {

using nlohmann::json;

struct CliOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::optional<std::string> out_dir;
  std::optional<std::vector<double>> horizons;
  std::optional<std::size_t> replicates;
};

void write_manifest(const regen::ExperimentConfig& cfg, const std::string& command) {
  regen::write_json_file(cfg.out_dir + "/manifest.json",
                         json{{"metadata", regen::make_metadata(command, regen::config_digest(cfg.raw),
                                                                cfg.seed)},
                              {"threads", cfg.threads},
                              {"config", cfg.raw}});
}

regen::ExperimentConfig load_and_override(const CliOptions& opt) {
  json j = regen::load_config_file(opt.config_path);
  regen::ExperimentConfig cfg = regen::experiment_config(j);
  if (opt.seed) cfg.seed = *opt.seed;
  if (opt.threads) cfg.threads = *opt.threads;
  if (opt.out_dir) cfg.out_dir = *opt.out_dir;
  if (opt.horizons) cfg.horizons = *opt.horizons;
  if (opt.replicates) cfg.replicates = *opt.replicates;
  if (cfg.out_dir.empty()) {
    const char* env = std::getenv("REGENKIT_OUT_DIR");
    cfg.out_dir = env ? env : "out";
  }
  for (double t : cfg.horizons)
    if (!(t >= 2.718281828459045))
      throw regen::Error(regen::ErrorCode::ConfigError, "horizons must all be >= e");
  return cfg;
}

json params_payload_stopped_sum(const regen::ExperimentConfig& cfg) {
  regen::DecoupledStoppedSum model = regen::stopped_sum_from_config(cfg.raw);
  const regen::CycleMoments m = model.moments();
  const regen::AsymptoticParams p = regen::derive_asymptotics(m);
  const regen::ValidationReport rep = regen::validate_params(p, m);
  return json{{"model", model.label},
              {"moments", regen::to_json(m)},
              {"params", regen::to_json(p)},
              {"validation", regen::to_json(rep)}};
}

json params_payload_bd(const regen::ExperimentConfig& cfg) {
  regen::BirthDeathSpec spec = regen::bd_spec_from_config(cfg.raw);
  regen::StationaryLaw law = regen::stationary(spec);
  const auto vd = regen::van_doorn_margin(spec);
  const auto em = regen::exp_moment_margin(spec);
  const auto kf = regen::kappa_f(spec, law);
  const auto s2 = regen::sigma_f2(spec);
  return json{{"model", "birth_death"},
              {"n_max", spec.n_max},
              {"van_doorn_condition", {{"verdict", vd.verdict}, {"limit_estimate", vd.limit_estimate}}},
              {"exp_moment_condition", {{"verdict", em.verdict}, {"limit_estimate", em.limit_estimate}}},
              {"kappa_f", kf.value},
              {"kappa_f_error_bar", kf.error_bar},
              {"sigma_f2_poisson_equation", s2.poisson_equation},
              {"sigma_f2_quadrature", s2.quadrature},
              {"sigma_f2_rel_disagreement", s2.rel_disagreement},
              {"tail_mass_bound", law.tail_mass_bound}};
}

int cmd_params(const CliOptions& opt) {
  regen::ExperimentConfig cfg = load_and_override(opt);
  write_manifest(cfg, "params");
  json payload = cfg.model_type == "birth_death" ? params_payload_bd(cfg) : params_payload_stopped_sum(cfg);
  json report = {{"metadata", regen::make_metadata("params", regen::config_digest(cfg.raw), cfg.seed)},
                 {"report", payload}};
  regen::write_json_file(cfg.out_dir + "/params.json", report);
  std::cout << payload.dump(2) << "\n";
  return 0;
}

int cmd_couple(const CliOptions& opt) {
  regen::ExperimentConfig cfg = load_and_override(opt);
  write_manifest(cfg, "couple");
  if (cfg.model_type == "birth_death")
    throw regen::Error(regen::ErrorCode::CouplerUnavailable,
                       "birth-death cycle sums have no computable conditional split; use the "
                       "stopped-sum fixtures or coupler = independent via a stopped-sum law");
  if (cfg.horizons.empty())
    throw regen::Error(regen::ErrorCode::ConfigError, "experiment.horizons is required for couple");

  std::string model_label;
  regen::CouplingStudy res;
  if (cfg.model_type == "bernoulli_walk") {
    // bare-walk study of the conditional-quantile coupling itself
    const double p = cfg.raw.contains("model") && cfg.raw["model"].contains("p")
                         ? cfg.raw["model"]["p"].get<double>()
                         : 0.5;
    regen::BernoulliStep law(p);
    res = regen::run_walk_study(law, cfg.horizons, cfg.coupler, cfg.replicates, cfg.threads,
                                regen::CounterRng::seeded(cfg.seed));
    model_label = "bernoulli_walk";
  } else {
    regen::DecoupledStoppedSum model = regen::stopped_sum_from_config(cfg.raw);
    regen::PipelineConfig pcfg;
    pcfg.coupler = cfg.coupler;
    pcfg.grid_step = cfg.grid_step;
    pcfg.threads = cfg.threads;
    res = regen::run_coupling_study(model, cfg.horizons, pcfg, cfg.replicates, cfg.seed);
    model_label = model.label;
  }

  json payload = {{"model", model_label},
                  {"coupler", regen::coupler_name(cfg.coupler)},
                  {"horizons", cfg.horizons},
                  {"replicates", cfg.replicates}};
  if (cfg.model_type != "bernoulli_walk") payload["wtilde"] = "time-inversion proxy";
  if (res.fit_available) payload["rate_fit"] = regen::to_json(res.fit);
  // tail fit at the largest horizon when the replicate budget allows
  if (cfg.replicates >= 500) {
    std::vector<double> sups;
    for (const auto& r : res.realizations.back()) sups.push_back(r.total_sup);
    const double c = res.fit_available ? res.fit.c : 0.0;
    const regen::TailFitResult tf = regen::tail_fit(sups, c, cfg.horizons.back());
    payload["tail_fit"] = regen::to_json(tf);
    regen::write_text_file(cfg.out_dir + "/tail.csv", regen::tail_csv(tf));
  }
  double max_gap = 0.0;
  bool triangle_ok = true;
  for (const auto& per_h : res.realizations)
    for (const auto& r : per_h) {
      max_gap = std::max(max_gap, r.identity_gap);
      triangle_ok = triangle_ok && r.total_sup <= r.sum_phi_sups() + 1e-9;
    }
  payload["max_identity_gap"] = max_gap;
  payload["triangle_inequality_exact"] = triangle_ok;

  json report = {{"metadata", regen::make_metadata("couple", regen::config_digest(cfg.raw), cfg.seed)},
                 {"report", payload}};
  regen::write_json_file(cfg.out_dir + "/ratefit.json", report);
  regen::write_text_file(cfg.out_dir + "/phi.csv", regen::phi_csv(res));
  std::cout << payload.dump(2) << "\n";
  if (res.fit_available && cfg.coupler == regen::CouplerKind::Dyadic && !res.fit.log_consistent) return 1;
  return 0;
}

int cmd_bd(const CliOptions& opt) {
  regen::ExperimentConfig cfg = load_and_override(opt);
  write_manifest(cfg, "bd");
  if (cfg.model_type != "birth_death")
    throw regen::Error(regen::ErrorCode::ConfigError, "bd requires model.type = birth_death");
  regen::BirthDeathSpec spec = regen::bd_spec_from_config(cfg.raw);
  json payload;
  try {
    payload = params_payload_bd(cfg);
  } catch (const regen::Error& e) {
    if (e.code() == regen::ErrorCode::NotSummable) {
      payload = {{"model", "birth_death"}, {"error", "NotSummable"}, {"detail", e.what()}};
      json report = {{"metadata", regen::make_metadata("bd", regen::config_digest(cfg.raw), cfg.seed)},
                     {"report", payload}};
      regen::write_json_file(cfg.out_dir + "/bd.json", report);
      std::cout << payload.dump(2) << "\n";
      return 0;  // a clean negative result, not a failure
    }
    throw;
  }
  // optional SSA validation run
  const std::size_t ssa_cycles =
      cfg.raw.contains("experiment") && cfg.raw["experiment"].contains("ssa_cycles")
          ? cfg.raw["experiment"]["ssa_cycles"].get<std::size_t>()
          : 0;
  if (ssa_cycles > 0) {
    regen::CounterRng rng = regen::CounterRng::seeded(cfg.seed);
    const auto est = regen::ssa_longrun_variance(spec, ssa_cycles, rng);
    payload["ssa"] = {{"cycles", est.cycles},
                      {"kappa", est.kappa},
                      {"sigma2", est.sigma2},
                      {"rel_gap_vs_poisson_equation",
                       std::abs(est.sigma2 - payload["sigma_f2_poisson_equation"].get<double>()) /
                           payload["sigma_f2_poisson_equation"].get<double>()}};
  }
  // optional trajectory export
  const double traj_horizon =
      cfg.raw.contains("experiment") && cfg.raw["experiment"].contains("trajectory_horizon")
          ? cfg.raw["experiment"]["trajectory_horizon"].get<double>()
          : 0.0;
  if (traj_horizon > 0.0) {
    regen::CounterRng rng = regen::CounterRng::seeded(cfg.seed).fork(0x747261);
    regen::StationaryLaw law = regen::stationary(spec);
    auto tr = regen::simulate_ssa(spec, traj_horizon, regen::SsaInit::stationary_draw(), rng, &law);
    std::ostringstream os;
    regen::write_trajectory_csv(os, tr);
    regen::write_text_file(cfg.out_dir + "/trajectory.csv", os.str());
  }
  json report = {{"metadata", regen::make_metadata("bd", regen::config_digest(cfg.raw), cfg.seed)},
                 {"report", payload}};
  regen::write_json_file(cfg.out_dir + "/bd.json", report);
  std::cout << payload.dump(2) << "\n";
  return 0;
}

int run_selftest(std::uint64_t seed, json* out) {
  regen::CounterRng base = regen::CounterRng::seeded(seed);
  json checks = json::array();
  bool all = true;

  {  // planted log signal
    std::vector<double> horizons = {256, 1024, 4096, 16384};
    std::vector<std::vector<double>> sups;
    regen::CounterRng rng = base.fork(1);
    for (double t : horizons) {
      std::vector<double> s(200);
      for (auto& v : s) v = 3.0 * std::log(t) + 0.2 * rng.normal();
      sups.push_back(s);
    }
    auto f = regen::rate_fit(horizons, sups);
    const bool ok = f.log_consistent && std::abs(f.c - 3.0) < 0.2;
    checks.push_back({{"name", "planted_log_signal"}, {"pass", ok}, {"c", f.c}});
    all = all && ok;
  }
  {  // planted diffusive null
    std::vector<double> horizons = {256, 1024, 4096, 16384};
    std::vector<std::vector<double>> sups;
    regen::CounterRng rng = base.fork(2);
    for (double t : horizons) {
      std::vector<double> s(200);
      for (auto& v : s) v = std::sqrt(t) * (1.0 + 0.05 * rng.normal());
      sups.push_back(s);
    }
    auto f = regen::rate_fit(horizons, sups);
    const bool ok = !f.log_consistent && std::abs(f.loglog_exponent - 0.5) < 0.1;
    checks.push_back({{"name", "planted_sqrt_null"}, {"pass", ok}, {"exponent", f.loglog_exponent}});
    all = all && ok;
  }
  {  // planted exponential tail
    regen::CounterRng rng = base.fork(3);
    std::vector<double> s(4000);
    for (auto& v : s) v = std::log(4096.0) + rng.exponential(2.0);
    auto f = regen::tail_fit(s, 1.0, 4096.0);
    const bool ok = f.pass && std::abs(f.b - 2.0) < 0.5;
    checks.push_back({{"name", "planted_exponential_tail"}, {"pass", ok}, {"b", f.b}});
    all = all && ok;
  }
  {  // planted heavy tail must fail
    regen::CounterRng rng = base.fork(4);
    std::vector<double> s(4000);
    for (auto& v : s)
      v = std::log(4096.0) + std::abs(std::tan(3.14159265358979 * (rng.uniform01() - 0.5)));
    auto f = regen::tail_fit(s, 1.0, 4096.0);
    checks.push_back({{"name", "planted_heavy_tail_rejected"}, {"pass", !f.pass}});
    all = all && !f.pass;
  }
  {  // brownian covariance calibration and a planted defect
    regen::CounterRng rng = base.fork(5);
    const std::vector<double> times = {1.0, 2.0, 4.0};
    const std::vector<std::pair<std::size_t, std::size_t>> pairs = {{0, 0}, {0, 1}, {1, 2}, {2, 2}};
    auto sample = [&](double var_scale, std::size_t reps) {
      std::vector<std::vector<regen::Vec>> samples;
      for (std::size_t r = 0; r < reps; ++r) {
        regen::CounterRng rr = rng.fork(r + static_cast<std::uint64_t>(var_scale * 1000));
        double w = 0.0, prev = 0.0;
        std::vector<regen::Vec> row;
        for (double t : times) {
          w += std::sqrt(var_scale * (t - prev)) * rr.normal();
          prev = t;
          row.push_back(regen::Vec{w});
        }
        samples.push_back(row);
      }
      return samples;
    };
    auto good = regen::covariance_check(sample(1.0, 4000), times, pairs);
    auto bad = regen::covariance_check(sample(1.2, 20000), times, pairs);
    checks.push_back({{"name", "covariance_calibration"}, {"pass", good.pass && !bad.pass}});
    all = all && good.pass && !bad.pass;
  }
  if (out) *out = {{"checks", checks}, {"all_pass", all}};
  return all ? 0 : 1;
}

int cmd_verify(const CliOptions& opt) {
  regen::ExperimentConfig cfg = load_and_override(opt);
  write_manifest(cfg, "verify");
  json payload;
  bool all = true;

  json self;
  const int self_rc = run_selftest(cfg.seed, &self);
  payload["selftest"] = self;
  all = all && self_rc == 0;

  if (cfg.model_type == "stopped_sum" || cfg.model_type == "bernoulli_walk") {
    regen::DecoupledStoppedSum model = regen::stopped_sum_from_config(cfg.raw);
    const regen::AsymptoticParams p = regen::derive_asymptotics(model.moments());
    // inverse-Poisson tail bound with the regime constants from the model
    regen::CounterRng rng = regen::CounterRng::seeded(cfg.seed).fork(100);
    std::vector<double> centered;
    {
      regen::CounterRng srng = rng.fork(1);
      for (int i = 0; i < 20000; ++i) {
        const double tau = model.tau_law->sample(srng);
        const double xi = model.xi_equals_tau() ? tau : model.xi_laws[0]->sample(srng);
        centered.push_back(std::abs(xi - p.kappa[0] * tau));
      }
    }
    const auto rc = regen::select_regime_constants(centered, 0.25);
    const auto poisson_rep =
        regen::poisson_tail_check(p.gamma, p.mu, p.lambda, rc.r, {32.0, 64.0}, 10000, rng.fork(2));
    payload["regime_constants"] = {{"s1", rc.s1}, {"r", rc.r}, {"log_phi", rc.log_phi}};
    payload["poisson_tail"] = {{"pass", poisson_rep.pass}};
    all = all && poisson_rep.pass;

    // window-maxima check on the model's centered xi law
    if (!model.xi_equals_tau()) {
      auto wm = regen::window_max_check(*model.xi_centered_laws[0], {1 << 8, 1 << 10}, 2.0, 0.5, 250,
                                        rng.fork(3));
      payload["window_max"] = {{"pass", wm.pass}, {"median_slope", wm.median_slope_on_logn}};
      all = all && wm.pass;
    }
  }

  json report = {{"metadata", regen::make_metadata("verify", regen::config_digest(cfg.raw), cfg.seed)},
                 {"report", payload}};
  regen::write_json_file(cfg.out_dir + "/verify.json", report);
  std::cout << payload.dump(2) << "\n";
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"regenkit: simulation, coupling and statistical verification for cumulative processes"};
  app.require_subcommand(1);

  CliOptions opt;
  std::vector<double> horizons_flag;
  std::uint64_t seed_flag = 0;
  std::size_t threads_flag = 0, reps_flag = 0;
  std::string out_flag;

  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    auto* c = cmd->add_option("--config", opt.config_path, "experiment file (TOML or JSON)");
    if (needs_config) c->required();
    cmd->add_option("--seed", seed_flag, "seed override");
    cmd->add_option("--threads", threads_flag, "worker threads");
    cmd->add_option("--out", out_flag, "output directory");
    cmd->add_option("--horizons", horizons_flag, "horizon list override");
    cmd->add_option("--replicates", reps_flag, "replicate count override");
  };
  auto collect_overrides = [&](CLI::App* cmd) {
    if (cmd->count("--seed")) opt.seed = seed_flag;
    if (cmd->count("--threads")) opt.threads = threads_flag;
    if (cmd->count("--out")) opt.out_dir = out_flag;
    if (cmd->count("--horizons")) opt.horizons = horizons_flag;
    if (cmd->count("--replicates")) opt.replicates = reps_flag;
  };

  CLI::App* params = app.add_subcommand("params", "derive and validate asymptotic parameters");
  add_common(params, true);
  CLI::App* couple = app.add_subcommand("couple", "run the coupling pipeline and fit rates");
  add_common(couple, true);
  CLI::App* bd = app.add_subcommand("bd", "birth-death analysis bundle");
  add_common(bd, true);
  CLI::App* verify = app.add_subcommand("verify", "run the statistical check suite");
  add_common(verify, true);
  CLI::App* selftest = app.add_subcommand("selftest", "planted-signal calibration of every check");
  add_common(selftest, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) ? 2 : 0;
  }

  for (CLI::App* cmd : {params, couple, bd, verify, selftest})
    if (cmd->parsed()) collect_overrides(cmd);

  try {
    if (params->parsed()) return cmd_params(opt);
    if (couple->parsed()) return cmd_couple(opt);
    if (bd->parsed()) return cmd_bd(opt);
    if (verify->parsed()) return cmd_verify(opt);
    if (selftest->parsed()) {
      json out;
      const int rc = run_selftest(opt.seed.value_or(1), &out);
      std::cout << out.dump(2) << "\n";
      return rc;
    }
  } catch (const regen::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == regen::ErrorCode::ConfigError ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
