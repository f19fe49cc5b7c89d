// mcmc-certify: command-line front end to the mcert library.
#include "mcert/concentration.hpp"
#include "mcert/constants.hpp"
#include "mcert/coupling.hpp"
#include "mcert/error.hpp"
#include "mcert/experiment.hpp"
#include "mcert/numerics.hpp"
#include "mcert/parallel.hpp"
#include "mcert/samplers.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

using namespace mcert;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_config = 2;
constexpr int exit_numerical = 3;
constexpr int exit_property = 4;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format;
  bool paper_scale{false};
  std::size_t threads{0};
};

ExperimentConfig load(const Globals &g) {
  ExperimentConfig c = g.config.empty() ? ExperimentConfig{} : load_config(g.config);
  if (g.seed)
    c.experiment.seed = *g.seed;
  if (!g.format.empty())
    c.output.format = g.format;
  if (!g.out.empty())
    c.output.path = g.out;
  if (g.paper_scale) {
    c.experiment.reps = 10000;
    c.experiment.n = 10000;
    c.experiment.budget = 10000;
  }
  validate(c);
  return c;
}

void emit(const ExperimentConfig &c, const std::string &text) {
  if (c.output.path.empty() || c.output.path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(c.output.path);
  if (!f)
    throw ConfigError("cannot write output file '" + c.output.path + "'");
  f << text;
}

void emit_json(const ExperimentConfig &c, const json &j) { emit(c, j.dump(2) + "\n"); }

std::string trajectory_csv(const Trajectory &t) {
  std::ostringstream os;
  os << "# total_inner_steps=" << t.total_inner_steps
     << " regeneration_count=" << t.regeneration_count << "\n";
  os << "k,x,v,v_sq\n";
  for (std::size_t k = 0; k < t.size(); ++k)
    os << k + 1 << ',' << format_double(t.states[k]) << ',' << format_double(t.v_values[k])
       << ',' << format_double(t.v_sq_values[k]) << '\n';
  return os.str();
}

json trajectory_json(const Trajectory &t) {
  return {{"kind", to_string(t.kind)},
          {"total_inner_steps", t.total_inner_steps},
          {"regeneration_count", t.regeneration_count},
          {"states", t.states},
          {"v", t.v_values},
          {"v_sq", t.v_sq_values}};
}

Trajectory simulate(const ExperimentConfig &c, ChainKind kind, std::size_t n, RngStream &rng) {
  ChainSpec spec;
  spec.kind = kind;
  spec.n = n;
  spec.target = build_target(c.model);
  spec.proposal = build_proposal(c.model);
  spec.V = build_lyapunov(c.model);
  spec.initial = 0.0;
  return run_chain(spec, rng);
}

json confidence_json(const ConfidenceReport &r) {
  return {{"estimate", r.estimate},
          {"half_width", r.half_width},
          {"interval", {r.estimate - r.half_width, r.estimate + r.half_width}},
          {"x_dev", r.x_dev},
          {"y_tune", r.y_tune},
          {"nominal_coverage", r.nominal_coverage},
          {"g_vnorm", r.g_vnorm},
          {"n", r.n},
          {"sigma_hat_sq", r.variance.sigma_hat_sq},
          {"K_used", r.variance.K_used},
          {"eq_v2", r.variance.eq_v2_proposal},
          {"epsilon_n_policy", r.variance.epsilon_n_policy}};
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Drift/minorization certificates, regenerative Metropolis and "
               "concentration bounds for geometrically ergodic chains"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "JSON experiment configuration");
  app.add_option("--seed", g.seed, "Base seed (overrides the config)");
  app.add_option("--out", g.out, "Output path (default: stdout)");
  app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  app.add_flag("--paper-scale", g.paper_scale, "Use 10^4 replications x 10^4 steps");
  app.add_option("--threads", g.threads, "Worker threads (0 = hardware)");

  // sample
  auto *sample = app.add_subcommand("sample", "Simulate one chain");
  std::string kind = "regen";
  std::size_t n = 2000;
  sample->add_option("--kind", kind)->check(CLI::IsMember({"rwm", "regen", "reject", "ar1"}));
  sample->add_option("--n", n)->check(CLI::PositiveNumber);

  // constants
  auto *constants = app.add_subcommand("constants", "Regenerative drift certificate");
  std::string variant;
  std::optional<double> at_R;
  constants->add_option("--variant", variant)->check(CLI::IsMember({"eq4", "sec4"}));
  constants->add_option("--R", at_R, "Evaluate at this R instead of the optimum");

  // ci
  auto *ci = app.add_subcommand("ci", "Confidence interval for the mean of x");
  std::size_t ci_n = 2000;
  std::optional<double> ci_x, ci_y;
  std::string ci_kind;
  ci->add_option("--n", ci_n)->check(CLI::PositiveNumber);
  ci->add_option("--x", ci_x, "Deviation parameter x > sqrt(2)");
  ci->add_option("--y", ci_y, "Tuning parameter y > 0");
  ci->add_option("--kind", ci_kind)->check(CLI::IsMember({"regen", "ar1"}));

  // verify-inequality
  auto *vi = app.add_subcommand("verify-inequality", "Monte Carlo check of the exponential bound");
  std::string vi_case = "iid";
  double vi_lambda = 0.01;
  std::size_t vi_n = 50, vi_reps = 100000;
  vi->add_option("--case", vi_case)->check(CLI::IsMember({"iid", "ar1", "regen"}));
  vi->add_option("--lambda", vi_lambda)->check(CLI::NonNegativeNumber);
  vi->add_option("--n", vi_n)->check(CLI::PositiveNumber);
  vi->add_option("--reps", vi_reps)->check(CLI::Range(std::size_t{2}, std::size_t{1} << 40));

  // coupling-check
  auto *cc = app.add_subcommand("coupling-check", "Coupled AR(1) weak-dependence sum vs K d_V");
  double cx = 0.0, cxp = 1.0;
  std::optional<double> cd;
  std::size_t horizon = 200, creps = 10000;
  std::string moves;
  cc->add_option("--x", cx);
  cc->add_option("--xp", cxp);
  cc->add_option("--d", cd);
  cc->add_option("--horizon", horizon)->check(CLI::PositiveNumber);
  cc->add_option("--reps", creps)->check(CLI::Range(std::size_t{2}, std::size_t{1} << 40));
  cc->add_option("--moves", moves)->check(CLI::IsMember({"independent", "synchronous"}));

  // experiment
  auto *ex = app.add_subcommand("experiment", "Run a configured study");
  std::string which;
  std::optional<std::uint64_t> ex_reps, ex_n, ex_budget;
  ex->add_option("which", which)
      ->required()
      ->check(CLI::IsMember({"fig2", "constants-table", "aggregation"}));
  ex->add_option("--reps", ex_reps);
  ex->add_option("--n", ex_n);
  ex->add_option("--budget", ex_budget);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? exit_ok : exit_config;
  }

  try {
    thread_count_setting() = g.threads;
    auto c = load(g);
    const auto seed = c.experiment.seed;

    if (*sample) {
      RngStream rng(seed, 0);
      const auto t = simulate(c, chain_kind_from_string(kind), n, rng);
      if (c.output.format == "json")
        emit_json(c, trajectory_json(t));
      else
        emit(c, trajectory_csv(t));
      return exit_ok;
    }

    if (*constants) {
      if (!variant.empty())
        c.experiment.variant = variant;
      const auto V = build_lyapunov(c.model);
      if (V.family() != LyapunovFunction::Family::exp_abs)
        throw ConfigError("config field 'model.lyapunov.family': constants needs exp_abs");
      const auto target = build_target(c.model);
      const auto q = build_proposal(c.model);
      const auto k = regen_drift_constants(V.s(), q, c.model.tail_threshold);
      DriftCertificate cert;
      if (at_R) {
        cert = regen_certificate_family(target, q, V.s(), c.model.tail_threshold)(*at_R);
        cert.selected = k_variant_from_string(c.experiment.variant);
      } else {
        cert = certificate_for_chain(c, ChainKind::regenerative).certificate;
      }
      json j = to_json(cert);
      j["eq_v"] = k.eq_v;
      j["eq_v2"] = k.eq_v2;
      j["optimized_over_R"] = !at_R.has_value();
      emit_json(c, j);
      return cert.valid() ? exit_ok : exit_property;
    }

    if (*ci) {
      const auto ck = chain_kind_from_string(ci_kind.empty() ? c.experiment.chain : ci_kind);
      if (ci_x)
        c.experiment.x_dev = *ci_x;
      if (ci_y)
        c.experiment.y_tune = *ci_y;
      validate(c);
      const auto cert = certificate_for_chain(c, ck);
      RngStream rng(seed, 0);
      ExperimentConfig sim = c;
      if (ck == ChainKind::ar1)
        sim.model.lyapunov = {"one_plus_square", {}};
      const auto t = simulate(sim, ck, ci_n, rng);
      const auto V = build_lyapunov(sim.model);
      const double gnorm =
          v_norm([](double x) { return x; }, V, linspace(-60.0, 60.0, 24001)).value;
      const auto rep = confidence_report(t, [](double x) { return x; }, gnorm, cert.certificate,
                                         cert.eq_v2, c.experiment.x_dev, c.experiment.y_tune);
      auto j = confidence_json(rep);
      j["chain"] = to_string(ck);
      j["certificate"] = to_json(cert.certificate);
      emit_json(c, j);
      return exit_ok;
    }

    if (*vi) {
      MresCase mc;
      if (vi_case == "iid") {
        mc = iid_mres_case(vi_n, 1.0);
      } else if (vi_case == "ar1") {
        mc = ar1_mres_case(vi_n, certificate_for_chain(c, ChainKind::ar1).certificate.K_selected());
      } else {
        const auto V = build_lyapunov(c.model);
        const double K = certificate_for_chain(c, ChainKind::regenerative).certificate.K_selected();
        mc = regen_mres_case(vi_n, K, build_target(c.model), build_proposal(c.model), V.s());
      }
      const auto r = verify_mres_mc(mc, vi_lambda, vi_reps, seed);
      emit_json(c, {{"case", vi_case},
                    {"lambda", vi_lambda},
                    {"n", vi_n},
                    {"reps", r.reps},
                    {"K", mc.K},
                    {"estimate", r.estimate},
                    {"se", r.se},
                    {"log_estimate", r.log_estimate},
                    {"mean_f", r.mean_f},
                    {"mean_f_se", r.mean_f_se},
                    {"pass", r.pass}});
      return r.pass ? exit_ok : exit_property;
    }

    if (*cc) {
      const SmallSetSpec set(cd.value_or(c.experiment.d));
      const auto mv = (moves.empty() ? c.experiment.off_set_moves : moves) == "synchronous"
                          ? OffSetMoves::synchronous
                          : OffSetMoves::independent;
      const auto e = estimate_weak_dependence_sum(
          cx, cxp, horizon, creps, set, LyapunovFunction::one_plus_square(), seed, mv);
      emit_json(c, {{"x", cx},
                    {"xp", cxp},
                    {"d", set.d()},
                    {"c", set.c()},
                    {"sum_estimate", e.sum_estimate},
                    {"se", e.se},
                    {"K", e.K},
                    {"bound_rhs", e.bound_rhs},
                    {"pass", e.pass},
                    {"truncation_warning", e.truncation_warning},
                    {"fraction_uncoalesced", e.fraction_uncoalesced},
                    {"mean_first_entry_time", e.mean_first_entry_time},
                    {"mean_coalescence_time", e.mean_coalescence_time}});
      return e.pass ? exit_ok : exit_property;
    }

    if (*ex) {
      if (ex_reps)
        c.experiment.reps = *ex_reps;
      if (ex_n)
        c.experiment.n = *ex_n;
      if (ex_budget)
        c.experiment.budget = *ex_budget;
      c.experiment.kind = which;
      validate(c);
      if (which == "constants-table") {
        const auto t = constants_table(c);
        if (c.output.format == "csv")
          emit(c, to_csv(t));
        else
          emit_json(c, to_json(t));
        return exit_ok;
      }
      const auto r = which == "fig2" ? run_three_sampler_experiment(c) : replication_study(c);
      if (c.output.format == "csv")
        emit(c, records_csv(r));
      else
        emit_json(c, to_json(r));
      return exit_ok;
    }
  } catch (const ConfigError &e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return exit_config;
  } catch (const NumericalError &e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return exit_numerical;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_numerical;
  }
  return exit_ok;
}
