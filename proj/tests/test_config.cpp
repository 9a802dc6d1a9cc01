#include <doctest.h>

#include "regen/config.hpp"
#include "regen/report.hpp"

using namespace regen;

TEST_CASE("toml subset parser") {
  const std::string src = R"(
# experiment file
[model]
type = "stopped_sum"   # inline comment
xi = "poisson"
xi_rate = 1.0
tau = "exp"
tau_rate = 1.0

[experiment]
horizons = [64, 128, 256]
replicates = 50
coupler = "dyadic"
seed = 42
flag = true
label = "a # not a comment"
)";
  nlohmann::json j = parse_toml(src);
  CHECK(j["model"]["type"] == "stopped_sum");
  CHECK(j["model"]["xi_rate"] == 1.0);
  CHECK(j["experiment"]["horizons"].size() == 3);
  CHECK(j["experiment"]["horizons"][2] == 256);
  CHECK(j["experiment"]["replicates"] == 50);
  CHECK(j["experiment"]["flag"] == true);
  CHECK(j["experiment"]["label"] == "a # not a comment");
}

TEST_CASE("toml parse errors carry line numbers") {
  CHECK_THROWS_WITH_AS(parse_toml("[model\n"), doctest::Contains("line 1"), Error);
  CHECK_THROWS_WITH_AS(parse_toml("\nkey value\n"), doctest::Contains("line 2"), Error);
  CHECK_THROWS_WITH_AS(parse_toml("k = [1, 2\n"), doctest::Contains("line 1"), Error);
}

TEST_CASE("experiment config validation") {
  nlohmann::json j = parse_toml(R"(
[model]
type = "stopped_sum"
xi = "poisson"
xi_rate = 1.0
tau = "exp"
tau_rate = 1.0

[experiment]
horizons = [64, 128]
replicates = 10
seed = 7
)");
  ExperimentConfig c = experiment_config(j);
  CHECK(c.model_type == "stopped_sum");
  CHECK(c.horizons.size() == 2);
  CHECK(c.seed == 7);
  CHECK(c.coupler == CouplerKind::Dyadic);

  SUBCASE("missing field paths are reported") {
    nlohmann::json bad = j;
    bad["model"].erase("type");
    CHECK_THROWS_WITH_AS(experiment_config(bad), doctest::Contains("model.type"), Error);
  }
  SUBCASE("horizons below e are rejected") {
    nlohmann::json bad = j;
    bad["experiment"]["horizons"] = {1.0, 64.0};
    CHECK_THROWS_AS(experiment_config(bad), Error);
  }
  SUBCASE("bad coupler name") {
    nlohmann::json bad = j;
    bad["experiment"]["coupler"] = "telepathic";
    CHECK_THROWS_AS(experiment_config(bad), Error);
  }
}

TEST_CASE("model builders from config") {
  SUBCASE("stopped sum fixture") {
    nlohmann::json j = parse_toml(R"(
[model]
type = "stopped_sum"
xi = "poisson"
xi_rate = 1.0
tau = "exp"
tau_rate = 1.0
)");
    DecoupledStoppedSum m = stopped_sum_from_config(j);
    CHECK(m.xi_laws[0]->mean() == doctest::Approx(1.0));
    CHECK(m.xi_centered_laws[0]->mean() == doctest::Approx(0.0));
    CHECK(m.tau_law->mean() == doctest::Approx(1.0));
  }
  SUBCASE("xi equals tau") {
    nlohmann::json j = parse_toml(R"(
[model]
type = "stopped_sum"
xi = "tau"
tau = "exp"
tau_rate = 1.0
)");
    DecoupledStoppedSum m = stopped_sum_from_config(j);
    CHECK(m.xi_equals_tau());
  }
  SUBCASE("birth-death expressions and tables") {
    nlohmann::json j = parse_toml(R"(
[model]
type = "birth_death"
birth = "1"
death = "2"
f = "n"
n_max = 40
)");
    BirthDeathSpec s = bd_spec_from_config(j);
    CHECK(s.lam(7) == 1.0);
    CHECK(s.mu(3) == 2.0);
    CHECK(s.fn(5) == 5.0);
    nlohmann::json j2 = j;
    j2["model"]["birth"] = std::vector<double>{1.0, 1.0};  // table too short for n_max
    CHECK_THROWS_WITH_AS(bd_spec_from_config(j2), doctest::Contains("model.birth"), Error);
  }
  SUBCASE("malformed rate table reports the field") {
    nlohmann::json j = parse_toml(R"(
[model]
type = "birth_death"
death = "2"
n_max = 10
)");
    CHECK_THROWS_WITH_AS(bd_spec_from_config(j), doctest::Contains("model.birth"), Error);
  }
}

TEST_CASE("config digest is stable and order-insensitive at the json level") {
  nlohmann::json a = {{"b", 1}, {"a", 2}};
  nlohmann::json b = {{"a", 2}, {"b", 1}};
  CHECK(config_digest(a) == config_digest(b));  // nlohmann objects sort keys
  nlohmann::json c = {{"a", 3}, {"b", 1}};
  CHECK(config_digest(a) != config_digest(c));
}

TEST_CASE("metadata strip removes only the metadata block") {
  nlohmann::json rep = {{"metadata", make_metadata("cmd", "deadbeef", 1)}, {"payload", 42}};
  nlohmann::json stripped = strip_metadata(rep);
  CHECK_FALSE(stripped.contains("metadata"));
  CHECK(stripped["payload"] == 42);
}
