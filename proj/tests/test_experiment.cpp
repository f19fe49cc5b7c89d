#include "mcert/error.hpp"
#include "mcert/experiment.hpp"
#include "mcert/numerics.hpp"
#include "mcert/parallel.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

using namespace mcert;

namespace {

ExperimentConfig small_fig2() {
  ExperimentConfig c;
  c.experiment.kind = "fig2";
  c.experiment.reps = 4;
  c.experiment.n = 200;
  c.experiment.seed = 21;
  return c;
}

json versioned(json j) {
  if (!j.contains("schema_version"))
    j["schema_version"] = config_schema_version;
  return j;
}

std::string error_of(const json &j) {
  try {
    (void)config_from_json(versioned(j));
  } catch (const ConfigError &e) {
    return e.what();
  }
  return {};
}

} // namespace

TEST_CASE("config: round trip is bit-exact") {
  ExperimentConfig c = small_fig2();
  c.experiment.budget = 777;
  c.experiment.y_tune = 0.1 + 0.2; // not representable exactly in decimal
  c.model.target.params["center"] = 1.0 / 3.0;
  const auto j = to_json(c);
  const auto back = config_from_json(j);
  CHECK(to_json(back).dump() == j.dump());
  CHECK(*back.experiment.y_tune == *c.experiment.y_tune);
  CHECK(back.model.target.params.at("center") == 1.0 / 3.0);
  CHECK(config_from_json(json::parse(j.dump())).experiment.budget == 777u);
}

TEST_CASE("config: defaults describe the Gaussian example") {
  const auto c = config_from_json(versioned(json::object()));
  CHECK(c.schema_version == config_schema_version);
  CHECK(c.model.target.family == "gaussian");
  CHECK(c.model.target.params.at("center") == 1.0);
  CHECK(c.model.target.params.at("variance") == 0.5);
  CHECK(c.model.lyapunov.params.at("s") == 0.4);
  const auto h = build_target(c.model);
  CHECK(h.log_h(1.0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(build_lyapunov(c.model)(2.5) == doctest::Approx(std::exp(1.0)).epsilon(1e-15));
}

TEST_CASE("config: errors name the offending field") {
  CHECK(error_of({{"experiment", {{"n", -3}}}}).find("experiment.n") != std::string::npos);
  CHECK(error_of({{"experiment", {{"nn", 3}}}}).find("nn") != std::string::npos);
  CHECK(error_of({{"schema_version", 99}}).find("schema_version") != std::string::npos);
  CHECK(error_of({{"model", {{"target", {{"family", "student_t"}}}}}}).find("model.target") !=
        std::string::npos);
  CHECK(error_of({{"model", {{"lyapunov", {{"family", "exp_abs"}, {"params", {{"s", "x"}}}}}}}})
            .find("model.lyapunov") != std::string::npos);
  CHECK(error_of({{"experiment", {{"x_dev", 1.0}}}}).find("experiment.x_dev") !=
        std::string::npos);
  CHECK(error_of({{"experiment", {{"variant", "eq5"}}}}).find("experiment.variant") !=
        std::string::npos);
  try {
    (void)config_from_json(json::object());
    FAIL("expected ConfigError");
  } catch (const ConfigError &e) {
    CHECK(std::string(e.what()).find("schema_version") != std::string::npos);
  }
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("fig2: smoke run matches the result schema") {
  const auto r = run_three_sampler_experiment(small_fig2());
  const auto j = to_json(r);
  CHECK(j.at("schema") == result_schema_tag);
  CHECK(j.at("experiment") == "fig2");
  CHECK(j.at("records").size() == 12);
  REQUIRE(j.at("summary").size() == 3);
  for (const auto &s : j.at("summary")) {
    CHECK(s.at("count") == 4);
    for (const char *k : {"mean", "se", "median", "iqr", "mean_accepted_fraction"})
      CHECK(s.contains(k));
    for (const char *k : {"q05", "q25", "q50", "q75", "q95"})
      CHECK(s.at("quantiles").contains(k));
  }
  std::vector<std::string> groups;
  for (const auto &s : r.summary)
    groups.push_back(s.group);
  CHECK(groups == std::vector<std::string>{"regen", "reject", "rwm"});
  CHECK(j.at("diagnostics").at("true_value") == 1.0);
  CHECK(j.at("config") == to_json(small_fig2()));
  for (const auto &rec : r.records)
    CHECK(rec.inner_steps <= 200u);
  const auto csv = records_csv(r);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 14);
}

TEST_CASE("fig2: summaries are recomputable from the records") {
  const auto r = run_three_sampler_experiment(small_fig2());
  for (const auto &s : r.summary) {
    std::vector<double> est;
    for (const auto &rec : r.records)
      if (rec.group == s.group)
        est.push_back(rec.estimate);
    const auto ms = mean_and_se(est);
    CHECK(s.mean == doctest::Approx(ms.mean).epsilon(1e-14));
    CHECK(s.se == doctest::Approx(ms.se).epsilon(1e-12));
    std::sort(est.begin(), est.end());
    CHECK(s.q25 == doctest::Approx(quantile_sorted(est, 0.25)).epsilon(1e-14));
    CHECK(s.iqr == doctest::Approx(quantile_sorted(est, 0.75) - quantile_sorted(est, 0.25)));
  }
}

TEST_CASE("fig2: output is identical for any thread count") {
  thread_count_setting() = 1;
  const auto a = to_json(run_three_sampler_experiment(small_fig2())).dump();
  thread_count_setting() = 4;
  const auto b = to_json(run_three_sampler_experiment(small_fig2())).dump();
  thread_count_setting() = 0;
  CHECK(a == b);
  auto other = small_fig2();
  other.experiment.seed = 22;
  CHECK(to_json(run_three_sampler_experiment(other)).dump() != a);
}

TEST_CASE("constants table: sweeps, flags and optima") {
  ExperimentConfig c;
  c.experiment.kind = "constants-table";
  const auto t = constants_table(c);
  const auto first_toy = std::find_if(t.rows.begin(), t.rows.end(),
                                      [](const ConstantsRow &r) { return r.family == "toy"; });
  REQUIRE(first_toy != t.rows.end());
  CHECK(first_toy->param == 1.0);
  CHECK_FALSE(first_toy->valid);
  CHECK(first_toy->note.find("c=0") != std::string::npos);
  std::size_t toy = 0, regen = 0;
  for (const auto &r : t.rows) {
    toy += r.family == "toy";
    regen += r.family == "regen";
    if (!r.valid)
      CHECK_FALSE(r.note.empty());
  }
  CHECK(toy == 40);
  CHECK(regen == 41);
  CHECK(t.toy_optimum.valid);
  CHECK(t.regen_optimum_eq4.valid);
  CHECK(t.regen_optimum_eq4.K_eq4 <= t.regen_optimum_sec4.K_sec4);
  for (const auto &r : t.rows)
    if (r.family == "regen" && r.valid)
      CHECK(r.K_eq4 >= t.regen_optimum_eq4.K_eq4 * (1 - 1e-9));
  const auto j = to_json(t);
  CHECK(j.at("schema") == "mcert.constants-table/1");
  const auto csv = to_csv(t);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(t.rows.size() + 4));
}

TEST_CASE("certificate_for_chain") {
  ExperimentConfig c;
  const auto ar = certificate_for_chain(c, ChainKind::ar1);
  CHECK(ar.eq_v2 == 67.0 / 16.0);
  CHECK(ar.certificate.valid());
  const auto rg = certificate_for_chain(c, ChainKind::regenerative);
  CHECK(rg.certificate.valid());
  CHECK(rg.certificate.c_R >= 0.146);
  CHECK_THROWS_AS(certificate_for_chain(c, ChainKind::rwm), ConfigError);
}

TEST_CASE("replication study: replication counts and groups") {
  ExperimentConfig c;
  c.experiment.kind = "aggregation";
  c.experiment.chain = "ar1";
  c.experiment.reps = 50;
  c.experiment.n = 100;
  c.experiment.alpha = 0.01;
  c.experiment.a = 0.1;
  const auto r = replication_study(c);
  CHECK(r.diagnostics.at("m_mean") == 2);
  CHECK(r.diagnostics.at("m_median") == 10);
  REQUIRE(r.summary.size() == 4);
  CHECK(r.summary[0].group == "mean");
  CHECK(r.summary[3].group == "median_matched");
  for (const auto &s : r.summary)
    CHECK(s.count == 50);
  c.experiment.a = 0.4; // x_dev needs a < 1/e
  CHECK_THROWS_AS(replication_study(c), ConfigError);
}
