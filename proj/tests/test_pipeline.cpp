#include <doctest.h>

#include <cmath>
#include <memory>

#include "regen/pipeline.hpp"

using namespace regen;

TEST_CASE("degenerate xi == tau model: total reduces to sup|S - kappa u|") {
  auto model = degenerate_xi_tau_model();
  const AsymptoticParams p = derive_asymptotics(model.moments());
  CHECK(std::abs(p.sigma(0, 0)) < 1e-9);
  PipelineConfig cfg;
  cfg.grid_step = 0.5;
  CoupledRealization r = run_replicate(model, p, 32.0, cfg, CounterRng::seeded(71));
  // sigma = 0: the Brownian term vanishes, phi3 is driven by the tau side only
  CHECK(r.total_sup > 0.0);
  CHECK(r.identity_gap < 1e-8 * std::max(1.0, r.total_sup));
  CHECK(r.total_sup <= r.sum_phi_sups() + 1e-9);
}

TEST_CASE("phi bounds and triangle inequality on the lattice fixture") {
  auto model = poisson_exp_stopped_sum();
  const AsymptoticParams p = derive_asymptotics(model.moments());
  PipelineConfig cfg;
  cfg.grid_step = 1.0;
  CounterRng base = CounterRng::seeded(72);
  for (std::size_t r = 0; r < 8; ++r) {
    CoupledRealization real = run_replicate(model, p, 64.0, cfg, base.fork(r));
    CHECK(real.total_sup <= real.sum_phi_sups() + 1e-9);
    CHECK(real.identity_gap < 1e-8 * std::max(1.0, real.total_sup));
    // phi8 <= |beta| gamma always
    CHECK(real.phi_sups[7] <= std::abs(p.beta[0]) * p.gamma + 1e-12);
    // pure-jump: phi1 identically zero
    CHECK(real.phi_sups[0] == 0.0);
  }
}

TEST_CASE("coupling-target diagnostics track the construction") {
  auto model = poisson_exp_stopped_sum();
  PipelineConfig dyadic;
  dyadic.grid_step = 2.0;
  PipelineConfig indep = dyadic;
  indep.coupler = CouplerKind::Independent;
  auto res_d = run_coupling_study(model, {256.0}, dyadic, 30, 777);
  auto res_i = run_coupling_study(model, {256.0}, indep, 30, 777);
  double gn_d = 0, gn_i = 0, my_d = 0;
  for (const auto& r : res_d.realizations[0]) {
    gn_d += r.sup_gamma_n_minus_t;
    my_d += r.sup_m_minus_y;
  }
  for (const auto& r : res_i.realizations[0]) gn_i += r.sup_gamma_n_minus_t;
  gn_d /= 30;
  gn_i /= 30;
  my_d /= 30;
  // gamma N and T are driven by the same Brownian skeleton under the dyadic
  // coupler, and unrelated under the null
  CHECK(gn_d < 0.5 * gn_i);
  CHECK(my_d < 0.5 * gn_i);
  CHECK(gn_d > 0.0);
}

TEST_CASE("dyadic coupling beats the independent baseline") {
  auto model = poisson_exp_stopped_sum();
  PipelineConfig dyadic;
  dyadic.grid_step = 2.0;
  PipelineConfig indep = dyadic;
  indep.coupler = CouplerKind::Independent;
  const std::vector<double> horizons = {256.0};
  auto res_d = run_coupling_study(model, horizons, dyadic, 40, 1234);
  auto res_i = run_coupling_study(model, horizons, indep, 40, 1234);
  double mean_d = 0.0, mean_i = 0.0;
  for (const auto& r : res_d.realizations[0]) mean_d += r.total_sup;
  for (const auto& r : res_i.realizations[0]) mean_i += r.total_sup;
  mean_d /= res_d.realizations[0].size();
  mean_i /= res_i.realizations[0].size();
  CHECK(mean_d < mean_i);
}

TEST_CASE("run_coupling_study is reproducible and thread-count independent") {
  auto model = poisson_exp_stopped_sum();
  PipelineConfig one;
  one.grid_step = 2.0;
  one.threads = 1;
  PipelineConfig two = one;
  two.threads = 2;
  const std::vector<double> horizons = {32.0, 64.0};
  auto r1 = run_coupling_study(model, horizons, one, 6, 555);
  auto r2 = run_coupling_study(model, horizons, two, 6, 555);
  for (std::size_t h = 0; h < horizons.size(); ++h)
    for (std::size_t r = 0; r < 6; ++r) {
      CHECK(r1.realizations[h][r].total_sup == r2.realizations[h][r].total_sup);
      for (int q = 0; q < 8; ++q)
        CHECK(r1.realizations[h][r].phi_sups[q] == r2.realizations[h][r].phi_sups[q]);
    }
}

TEST_CASE("horizons below e are rejected") {
  auto model = poisson_exp_stopped_sum();
  PipelineConfig cfg;
  CHECK_THROWS_AS(run_coupling_study(model, {2.0}, cfg, 2, 1), Error);
}

TEST_CASE("two-dimensional pipeline: identity, triangle and reproducibility") {
  DecoupledStoppedSum model;
  model.tau_law = std::make_shared<GammaStep>(1.0, 1.0);
  model.xi_laws = {std::make_shared<PoissonStep>(1.0), std::make_shared<GaussianStep>(0.5, 2.0)};
  model.xi_centered_laws = {std::make_shared<PoissonStep>(1.0, -1.0),
                            std::make_shared<GaussianStep>(0.0, 2.0)};
  model.label = "stopped_sum_d2";
  const AsymptoticParams p = derive_asymptotics(model.moments());
  CHECK(p.d() == 2);
  PipelineConfig cfg;
  cfg.grid_step = 1.0;
  CounterRng base = CounterRng::seeded(74);
  for (std::size_t r = 0; r < 4; ++r) {
    CoupledRealization real = run_replicate(model, p, 64.0, cfg, base.fork(r));
    CHECK(real.identity_gap < 1e-8 * std::max(1.0, real.total_sup));
    CHECK(real.total_sup <= real.sum_phi_sups() + 1e-9);
    CHECK(real.phi_sups[0] == 0.0);
  }
  CoupledRealization a = run_replicate(model, p, 64.0, cfg, base.fork(0));
  CoupledRealization b = run_replicate(model, p, 64.0, cfg, base.fork(0));
  CHECK(a.total_sup == b.total_sup);
}

TEST_CASE("walk study couples tightly and the truncation probe is calibrated") {
  BernoulliStep law(0.5);
  auto dy = run_walk_study(law, {64.0, 128.0}, CouplerKind::Dyadic, 20, 2, CounterRng::seeded(75));
  auto ind = run_walk_study(law, {64.0, 128.0}, CouplerKind::Independent, 20, 2, CounterRng::seeded(75));
  double md = 0, mi = 0;
  for (const auto& r : dy.realizations[1]) md += r.total_sup;
  for (const auto& r : ind.realizations[1]) mi += r.total_sup;
  CHECK(md < mi);
  CHECK_THROWS_AS(run_walk_study(law, {100.0}, CouplerKind::Dyadic, 2, 1, CounterRng::seeded(1)), Error);

  const double ratio = wstar_variance_probe(1.0, 16, 600, -10, 512.0, 76);
  CHECK(ratio > 0.85);
  CHECK(ratio < 1.15);
}

TEST_CASE("regime constants satisfy the selection inequality") {
  CounterRng rng = CounterRng::seeded(73);
  std::vector<double> samples(20000);
  for (auto& s : samples) s = std::abs(rng.normal());
  RegimeConstants rc = select_regime_constants(samples, 0.5);
  CHECK(rc.r > 0.0);
  CHECK(rc.r * rc.log_phi < rc.s1 / 6.0);
}
