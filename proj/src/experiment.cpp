#include "mcert/experiment.hpp"

#include "mcert/error.hpp"
#include "mcert/numerics.hpp"
#include "mcert/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace mcert {

namespace {

[[noreturn]] void field_error(const std::string &field, const std::string &why) {
  throw ConfigError("config field '" + field + "': " + why);
}

void reject_unknown(const json &j, const std::string &where, const std::set<std::string> &known) {
  if (!j.is_object())
    field_error(where, "must be an object");
  for (const auto &[k, _] : j.items())
    if (!known.count(k))
      field_error(where.empty() ? k : where + "." + k, "unknown key");
}

double get_number(const json &j, const std::string &key, const std::string &field, double dflt) {
  if (!j.contains(key) || j.at(key).is_null())
    return dflt;
  if (!j.at(key).is_number())
    field_error(field, "must be a number");
  const double v = j.at(key).get<double>();
  if (!std::isfinite(v))
    field_error(field, "must be finite");
  return v;
}

std::uint64_t get_count(const json &j, const std::string &key, const std::string &field,
                        std::uint64_t dflt) {
  if (!j.contains(key) || j.at(key).is_null())
    return dflt;
  const auto &v = j.at(key);
  if (v.is_number_unsigned())
    return v.get<std::uint64_t>();
  if (v.is_number_integer())
    field_error(field, "must be non-negative");
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d >= 0 && d == std::floor(d) && d < 1.8e19)
      return static_cast<std::uint64_t>(d);
  }
  field_error(field, "must be a non-negative integer");
}

std::string get_string(const json &j, const std::string &key, const std::string &field,
                       const std::string &dflt) {
  if (!j.contains(key) || j.at(key).is_null())
    return dflt;
  if (!j.at(key).is_string())
    field_error(field, "must be a string");
  return j.at(key).get<std::string>();
}

FamilySpec get_family(const json &j, const std::string &key, const std::string &field,
                      const FamilySpec &dflt) {
  if (!j.contains(key))
    return dflt;
  const auto &f = j.at(key);
  reject_unknown(f, field, {"family", "params"});
  FamilySpec out;
  out.family = get_string(f, "family", field + ".family", dflt.family);
  if (f.contains("params")) {
    const auto &p = f.at("params");
    if (!p.is_object())
      field_error(field + ".params", "must be an object");
    for (const auto &[k, _] : p.items())
      out.params[k] = get_number(p, k, field + ".params." + k, 0.0);
  } else if (out.family == dflt.family) {
    out.params = dflt.params;
  }
  return out;
}

double param(const FamilySpec &f, const std::string &name, double dflt) {
  const auto it = f.params.find(name);
  return it == f.params.end() ? dflt : it->second;
}

void check_params(const FamilySpec &f, const std::string &field,
                  const std::set<std::string> &known) {
  for (const auto &[k, _] : f.params)
    if (!known.count(k))
      field_error(field + ".params." + k, "unknown parameter for family '" + f.family + "'");
}

void validate_model(const ModelConfig &m) {
  const auto &t = m.target;
  if (t.family == "gaussian") {
    check_params(t, "model.target", {"center", "variance", "log_scale"});
    if (!(param(t, "variance", 0.5) > 0))
      field_error("model.target.params.variance", "must be > 0");
  } else if (t.family == "laplace") {
    check_params(t, "model.target", {"scale"});
    if (!(param(t, "scale", 1.0) > 0))
      field_error("model.target.params.scale", "must be > 0");
  } else if (t.family == "cauchy") {
    check_params(t, "model.target", {});
  } else {
    field_error("model.target.family", "unknown family '" + t.family + "'");
  }
  const auto &q = m.proposal;
  if (q.family == "gaussian") {
    check_params(q, "model.proposal", {"scale", "decay_alpha"});
    if (!(param(q, "decay_alpha", 1.0) > 0))
      field_error("model.proposal.params.decay_alpha", "must be > 0");
  } else if (q.family == "laplace") {
    check_params(q, "model.proposal", {"scale"});
  } else {
    field_error("model.proposal.family", "unknown family '" + q.family + "'");
  }
  if (!(param(q, "scale", 1.0) > 0))
    field_error("model.proposal.params.scale", "must be > 0");
  const auto &v = m.lyapunov;
  if (v.family == "exp_abs") {
    check_params(v, "model.lyapunov", {"s"});
    if (!(param(v, "s", 0.4) > 0))
      field_error("model.lyapunov.params.s", "must be > 0");
  } else if (v.family == "one_plus_square") {
    check_params(v, "model.lyapunov", {});
  } else {
    field_error("model.lyapunov.family", "unknown family '" + v.family + "'");
  }
  if (!(m.tail_threshold >= 0))
    field_error("model.tail_threshold", "must be >= 0");
}

void validate_experiment(const ExperimentSettings &e) {
  static const std::set<std::string> kinds{"fig2",   "constants-table",   "aggregation", "sample",
                                           "ci",     "verify-inequality", "coupling-check"};
  if (!kinds.count(e.kind))
    field_error("experiment.kind", "unknown kind '" + e.kind + "'");
  try {
    (void)chain_kind_from_string(e.chain);
  } catch (const ConfigError &) {
    field_error("experiment.chain", "unknown chain '" + e.chain + "'");
  }
  if (e.n < 1)
    field_error("experiment.n", "must be >= 1");
  if (e.reps < 1)
    field_error("experiment.reps", "must be >= 1");
  if (e.budget && *e.budget < 1)
    field_error("experiment.budget", "must be >= 1");
  if (!(e.x_dev > std::numbers::sqrt2))
    field_error("experiment.x_dev", "must exceed sqrt(2)");
  if (e.y_tune && !(*e.y_tune > 0))
    field_error("experiment.y_tune", "must be > 0");
  if (!(e.lambda >= 0))
    field_error("experiment.lambda", "must be >= 0");
  if (!(e.d > 1))
    field_error("experiment.d", "must be > 1");
  if (e.horizon < 1)
    field_error("experiment.horizon", "must be >= 1");
  if (e.aggregation != "mean" && e.aggregation != "median")
    field_error("experiment.aggregation", "must be 'mean' or 'median'");
  if (!(e.a > 0 && e.a < 0.5))
    field_error("experiment.a", "must lie in (0, 1/2)");
  if (!(e.alpha > 0 && e.alpha < e.a))
    field_error("experiment.alpha", "must lie in (0, a)");
  if (e.variant != "eq4" && e.variant != "sec4")
    field_error("experiment.variant", "must be 'eq4' or 'sec4'");
  if (e.off_set_moves != "independent" && e.off_set_moves != "synchronous")
    field_error("experiment.off_set_moves", "must be 'independent' or 'synchronous'");
}

json family_json(const FamilySpec &f) {
  json p = json::object();
  for (const auto &[k, v] : f.params)
    p[k] = v;
  return {{"family", f.family}, {"params", p}};
}

double mean_of(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs)
    s += x;
  return s / static_cast<double>(xs.size());
}

double identity(double x) { return x; }

} // namespace

void validate(const ExperimentConfig &c) {
  if (c.schema_version != config_schema_version)
    field_error("schema_version", "unsupported version " + std::to_string(c.schema_version));
  validate_model(c.model);
  validate_experiment(c.experiment);
  if (c.output.format != "json" && c.output.format != "csv")
    field_error("output.format", "must be 'csv' or 'json'");
}

ExperimentConfig config_from_json(const json &j) {
  reject_unknown(j, "", {"schema_version", "model", "experiment", "output"});
  ExperimentConfig c;
  if (!j.contains("schema_version"))
    field_error("schema_version", "missing");
  if (!j.at("schema_version").is_number_integer())
    field_error("schema_version", "must be an integer");
  c.schema_version = j.at("schema_version").get<int>();

  if (j.contains("model")) {
    const auto &m = j.at("model");
    reject_unknown(m, "model", {"target", "proposal", "lyapunov", "tail_threshold"});
    c.model.target = get_family(m, "target", "model.target", c.model.target);
    c.model.proposal = get_family(m, "proposal", "model.proposal", c.model.proposal);
    c.model.lyapunov = get_family(m, "lyapunov", "model.lyapunov", c.model.lyapunov);
    c.model.tail_threshold =
        get_number(m, "tail_threshold", "model.tail_threshold", c.model.tail_threshold);
  }
  if (j.contains("experiment")) {
    const auto &e = j.at("experiment");
    reject_unknown(e, "experiment",
                   {"kind", "chain", "n", "reps", "seed", "budget", "x_dev", "y_tune", "lambda",
                    "d", "horizon", "aggregation", "alpha", "a", "variant", "off_set_moves"});
    auto &x = c.experiment;
    x.kind = get_string(e, "kind", "experiment.kind", x.kind);
    x.chain = get_string(e, "chain", "experiment.chain", x.chain);
    x.n = get_count(e, "n", "experiment.n", x.n);
    x.reps = get_count(e, "reps", "experiment.reps", x.reps);
    x.seed = get_count(e, "seed", "experiment.seed", x.seed);
    if (e.contains("budget") && !e.at("budget").is_null())
      x.budget = get_count(e, "budget", "experiment.budget", 0);
    x.x_dev = get_number(e, "x_dev", "experiment.x_dev", x.x_dev);
    if (e.contains("y_tune") && !e.at("y_tune").is_null())
      x.y_tune = get_number(e, "y_tune", "experiment.y_tune", 0.0);
    x.lambda = get_number(e, "lambda", "experiment.lambda", x.lambda);
    x.d = get_number(e, "d", "experiment.d", x.d);
    x.horizon = get_count(e, "horizon", "experiment.horizon", x.horizon);
    x.aggregation = get_string(e, "aggregation", "experiment.aggregation", x.aggregation);
    x.alpha = get_number(e, "alpha", "experiment.alpha", x.alpha);
    x.a = get_number(e, "a", "experiment.a", x.a);
    x.variant = get_string(e, "variant", "experiment.variant", x.variant);
    x.off_set_moves = get_string(e, "off_set_moves", "experiment.off_set_moves", x.off_set_moves);
  }
  if (j.contains("output")) {
    const auto &o = j.at("output");
    reject_unknown(o, "output", {"path", "format"});
    c.output.path = get_string(o, "path", "output.path", c.output.path);
    c.output.format = get_string(o, "format", "output.format", c.output.format);
  }
  validate(c);
  return c;
}

json to_json(const ExperimentConfig &c) {
  const auto &e = c.experiment;
  json ex = {{"kind", e.kind},
             {"chain", e.chain},
             {"n", e.n},
             {"reps", e.reps},
             {"seed", e.seed},
             {"budget", e.budget ? json(*e.budget) : json(nullptr)},
             {"x_dev", e.x_dev},
             {"y_tune", e.y_tune ? json(*e.y_tune) : json(nullptr)},
             {"lambda", e.lambda},
             {"d", e.d},
             {"horizon", e.horizon},
             {"aggregation", e.aggregation},
             {"alpha", e.alpha},
             {"a", e.a},
             {"variant", e.variant},
             {"off_set_moves", e.off_set_moves}};
  return {{"schema_version", c.schema_version},
          {"model",
           {{"target", family_json(c.model.target)},
            {"proposal", family_json(c.model.proposal)},
            {"lyapunov", family_json(c.model.lyapunov)},
            {"tail_threshold", c.model.tail_threshold}}},
          {"experiment", ex},
          {"output", {{"path", c.output.path}, {"format", c.output.format}}}};
}

ExperimentConfig load_config(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error &e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

UnnormalizedTarget build_target(const ModelConfig &m) {
  const auto &t = m.target;
  UnnormalizedTarget out;
  if (t.family == "gaussian")
    out = gaussian_target(param(t, "center", 1.0), param(t, "variance", 0.5),
                          param(t, "log_scale", 0.0));
  else if (t.family == "laplace")
    out = laplace_target(param(t, "scale", 1.0));
  else if (t.family == "cauchy")
    out = cauchy_target();
  else
    field_error("model.target.family", "unknown family '" + t.family + "'");
  if (!out.tail_threshold_x1)
    out.tail_threshold_x1 = m.tail_threshold;
  return out;
}

SymmetricProposal build_proposal(const ModelConfig &m) {
  const auto &q = m.proposal;
  if (q.family == "gaussian")
    return SymmetricProposal::gaussian(param(q, "scale", 1.0), param(q, "decay_alpha", 1.0));
  if (q.family == "laplace")
    return SymmetricProposal::laplace(param(q, "scale", 1.0));
  field_error("model.proposal.family", "unknown family '" + q.family + "'");
}

LyapunovFunction build_lyapunov(const ModelConfig &m) {
  const auto &v = m.lyapunov;
  if (v.family == "exp_abs")
    return LyapunovFunction::exp_abs(param(v, "s", 0.4));
  if (v.family == "one_plus_square")
    return LyapunovFunction::one_plus_square();
  field_error("model.lyapunov.family", "unknown family '" + v.family + "'");
}

json to_json(const DriftCertificate &c) {
  json prov = json::object();
  for (const auto &[k, p] : c.provenance)
    prov[k] = to_string(p);
  return {{"beta", c.beta},
          {"b", c.b},
          {"R", c.R},
          {"R0", c.R0},
          {"c_R", c.c_R},
          {"beta_bar", c.beta_bar},
          {"K_eq4", c.K},
          {"K_sec4", c.K_variant},
          {"selected", to_string(c.selected)},
          {"K_selected", c.K_selected()},
          {"valid", c.valid()},
          {"provenance", prov}};
}

ChainCertificate certificate_for_chain(const ExperimentConfig &c, ChainKind kind) {
  const auto variant = k_variant_from_string(c.experiment.variant);
  if (kind == ChainKind::regenerative) {
    const auto V = build_lyapunov(c.model);
    if (V.family() != LyapunovFunction::Family::exp_abs)
      field_error("model.lyapunov.family", "the regenerative certificate needs exp_abs");
    const auto target = build_target(c.model);
    const auto q = build_proposal(c.model);
    const double x1 = c.model.tail_threshold;
    const auto k = regen_drift_constants(V.s(), q, x1);
    const auto family = regen_certificate_family(target, q, V.s(), x1);
    const double R0 = std::exp(V.s() * x1);
    auto opt = optimize_K_over_R(family, R0, std::max(1e5, 10.0 * R0), variant,
                                 ScanSpacing::geometric);
    opt.certificate.selected = variant;
    return {opt.certificate, k.eq_v2};
  }
  if (kind == ChainKind::ar1) {
    double d = c.experiment.d;
    SmallSetSpec set(d); // validates d
    auto cert = toy_state_set_certificate(set.d());
    if (!cert.valid())
      field_error("experiment.d", "AR(1) small-set certificate invalid (beta_bar >= 1)");
    cert.selected = variant;
    return {cert, ar1_second_moment_factor};
  }
  field_error("experiment.chain", "no certificate is available for chain '" + to_string(kind) +
                                      "' (use regen or ar1)");
}

// ---------------------------------------------------------------------------

std::vector<GroupSummary> summarize(const std::vector<ReplicationRecord> &records) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const ReplicationRecord *>> by;
  for (const auto &r : records) {
    if (!by.count(r.group))
      order.push_back(r.group);
    by[r.group].push_back(&r);
  }
  std::vector<GroupSummary> out;
  for (const auto &g : order) {
    const auto &rs = by[g];
    std::vector<double> est;
    double acc = 0.0;
    for (const auto *r : rs) {
      est.push_back(r->estimate);
      acc += r->accepted_fraction;
    }
    GroupSummary s;
    s.group = g;
    s.count = est.size();
    if (est.size() >= 2) {
      const auto ms = mean_and_se(est);
      s.mean = ms.mean;
      s.se = ms.se;
    } else {
      s.mean = est.front();
    }
    std::sort(est.begin(), est.end());
    s.q05 = quantile_sorted(est, 0.05);
    s.q25 = quantile_sorted(est, 0.25);
    s.q50 = quantile_sorted(est, 0.50);
    s.q75 = quantile_sorted(est, 0.75);
    s.q95 = quantile_sorted(est, 0.95);
    s.median = s.q50;
    s.iqr = s.q75 - s.q25;
    s.mean_accepted_fraction = acc / static_cast<double>(rs.size());
    out.push_back(s);
  }
  return out;
}

json to_json(const ExperimentResult &r) {
  json recs = json::array();
  for (const auto &x : r.records)
    recs.push_back({{"group", x.group},
                    {"rep", x.rep},
                    {"estimate", x.estimate},
                    {"n", x.n},
                    {"inner_steps", x.inner_steps},
                    {"accepted_fraction", x.accepted_fraction}});
  json sum = json::array();
  for (const auto &s : r.summary)
    sum.push_back({{"group", s.group},
                   {"count", s.count},
                   {"mean", s.mean},
                   {"se", s.se},
                   {"median", s.median},
                   {"quantiles",
                    {{"q05", s.q05}, {"q25", s.q25}, {"q50", s.q50}, {"q75", s.q75}, {"q95", s.q95}}},
                   {"iqr", s.iqr},
                   {"mean_accepted_fraction", s.mean_accepted_fraction}});
  return {{"schema", r.schema},     {"experiment", r.experiment}, {"config", r.config_echo},
          {"records", recs},        {"summary", sum},             {"diagnostics", r.diagnostics}};
}

std::string records_csv(const ExperimentResult &r) {
  std::ostringstream os;
  os << "# schema=" << r.schema << " experiment=" << r.experiment << "\n";
  os << "group,rep,estimate,n,inner_steps,accepted_fraction\n";
  for (const auto &x : r.records)
    os << x.group << ',' << x.rep << ',' << format_double(x.estimate) << ',' << x.n << ','
       << x.inner_steps << ',' << format_double(x.accepted_fraction) << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------

ExperimentResult run_three_sampler_experiment(const ExperimentConfig &c) {
  const auto &e = c.experiment;
  if (e.reps < 2)
    field_error("experiment.reps", "the three-sampler comparison needs reps >= 2");
  const auto target = build_target(c.model);
  const auto q = build_proposal(c.model);
  const auto V = build_lyapunov(c.model);
  const std::uint64_t budget = e.budget.value_or(e.n);
  const double M = optimal_envelope(target, q);
  const std::size_t reps = e.reps;

  std::vector<ReplicationRecord> recs(3 * reps);
  parallel_for(reps, [&](std::size_t i) {
    const auto record = [&](const char *group, const Trajectory &t) {
      if (t.size() == 0)
        throw NumericalError(std::string(group) + ": replication produced no states", 0.0);
      return ReplicationRecord{group,  i, mean_of(t.states), t.size(), t.total_inner_steps,
                               t.accepted_fraction()};
    };
    {
      RngStream rng(e.seed, i);
      recs[i] = record("regen", regen_metropolis_budget(budget, target, q, rng, V));
    }
    {
      RngStream rng(e.seed, reps + i);
      recs[reps + i] = record("reject", rejection_budget(budget, target, q, M, rng, V));
    }
    {
      RngStream rng(e.seed, 2 * reps + i);
      ChainSpec spec;
      spec.kind = ChainKind::rwm;
      spec.n = budget;
      spec.target = target;
      spec.proposal = q;
      spec.V = V;
      spec.initial = 0.0;
      recs[2 * reps + i] = record("rwm", run_chain(spec, rng));
    }
  });

  ExperimentResult r;
  r.experiment = "fig2";
  r.config_echo = to_json(c);
  r.records = std::move(recs);
  r.summary = summarize(r.records);
  const double truth = target.true_mean ? *target.true_mean
                                        : stationary_expectation(target, identity);
  json centred = json::object();
  for (const auto &s : r.summary)
    centred[s.group] = {{"deviation", s.mean - truth},
                        {"within_3se", std::abs(s.mean - truth) <= 3.0 * s.se}};
  r.diagnostics = {{"true_value", truth},
                   {"budget", budget},
                   {"envelope_M", M},
                   {"centering", centred}};
  return r;
}

// ---------------------------------------------------------------------------

namespace {

ConstantsRow row_from(const std::string &family, double param, const DriftCertificate &c) {
  ConstantsRow r{family, param, c.R, c.beta_bar, c.c_R, c.K, c.K_variant, false, ""};
  if (!(c.c_R > 0))
    r.note = "c=0";
  else if (!(c.beta_bar < 1))
    r.note = "beta_bar>=1";
  else if (c.R < c.R0)
    r.note = "R<R0";
  else if (!std::isfinite(c.K))
    r.note = "K not finite";
  else
    r.valid = true;
  if (r.valid && !(c.K_variant > 0))
    r.note = "K_sec4<=0";
  return r;
}

std::vector<double> geometric_grid(double lo, double hi, std::size_t n) {
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i)
    g[i] = lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(n - 1));
  g.front() = lo;
  g.back() = hi;
  return g;
}

} // namespace

ConstantsTable constants_table(const ExperimentConfig &c) {
  ConstantsTable t;
  for (double d : geometric_grid(1.0, 40.0, 40))
    t.rows.push_back(row_from("toy", d, toy_certificate(d)));

  const auto target = build_target(c.model);
  const auto q = build_proposal(c.model);
  const auto V = build_lyapunov(c.model);
  if (V.family() != LyapunovFunction::Family::exp_abs)
    field_error("model.lyapunov.family", "the regenerative sweep needs exp_abs");
  const double x1 = c.model.tail_threshold;
  const auto family = regen_certificate_family(target, q, V.s(), x1);
  for (double R : geometric_grid(1.0, 1e5, 41))
    t.rows.push_back(row_from("regen", R, family(R)));

  const CertificateFamily toy = [](double d) { return toy_certificate(d); };
  const auto toy_opt = optimize_K_over_R(toy, 1.0, 40.0, KVariant::eq4, ScanSpacing::geometric);
  t.toy_optimum = row_from("toy_optimum", toy_opt.R_star, toy_opt.certificate);
  const double R0 = std::exp(V.s() * x1);
  const double R_hi = std::max(1e5, 10.0 * R0);
  const auto e4 = optimize_K_over_R(family, R0, R_hi, KVariant::eq4, ScanSpacing::geometric);
  const auto s4 = optimize_K_over_R(family, R0, R_hi, KVariant::sec4, ScanSpacing::geometric);
  t.regen_optimum_eq4 = row_from("regen_optimum_eq4", e4.R_star, e4.certificate);
  t.regen_optimum_sec4 = row_from("regen_optimum_sec4", s4.R_star, s4.certificate);
  return t;
}

namespace {
json row_json(const ConstantsRow &r) {
  return {{"family", r.family}, {"param", r.param}, {"R", r.R},
          {"beta_bar", r.beta_bar}, {"c", r.c},     {"K_eq4", r.K_eq4},
          {"K_sec4", r.K_sec4},   {"valid", r.valid}, {"note", r.note}};
}
} // namespace

json to_json(const ConstantsTable &t) {
  json rows = json::array();
  for (const auto &r : t.rows)
    rows.push_back(row_json(r));
  return {{"schema", "mcert.constants-table/1"},
          {"rows", rows},
          {"optimum",
           {{"toy", row_json(t.toy_optimum)},
            {"regen_eq4", row_json(t.regen_optimum_eq4)},
            {"regen_sec4", row_json(t.regen_optimum_sec4)}}}};
}

std::string to_csv(const ConstantsTable &t) {
  std::ostringstream os;
  os << "family,param,R,beta_bar,c,K_eq4,K_sec4,valid,note\n";
  const auto line = [&](const ConstantsRow &r) {
    os << r.family << ',' << format_double(r.param) << ',' << format_double(r.R) << ','
       << format_double(r.beta_bar) << ',' << format_double(r.c) << ','
       << format_double(r.K_eq4) << ',' << format_double(r.K_sec4) << ','
       << (r.valid ? "true" : "false") << ',' << r.note << '\n';
  };
  for (const auto &r : t.rows)
    line(r);
  line(t.toy_optimum);
  line(t.regen_optimum_eq4);
  line(t.regen_optimum_sec4);
  return os.str();
}

// ---------------------------------------------------------------------------

ExperimentResult replication_study(const ExperimentConfig &c) {
  const auto &e = c.experiment;
  if (e.reps < 2)
    field_error("experiment.reps", "the replication study needs at least two aggregates");
  if (!(e.a < std::exp(-1.0)))
    field_error("experiment.a", "per-replication level needs a < 1/e so that x_dev > sqrt(2)");
  const auto kind = chain_kind_from_string(e.chain);
  const auto cc = certificate_for_chain(c, kind);
  const std::size_t m_mean = replications_needed(AggregationMode::mean, e.alpha, e.a);
  const std::size_t m_med = replications_needed(AggregationMode::median, e.alpha, e.a);
  const std::size_t m_all = std::max(m_mean, m_med);
  const double x_rep = std::sqrt(2.0 * std::log(1.0 / e.a));

  const auto target = build_target(c.model);
  const auto q = build_proposal(c.model);
  const auto V = kind == ChainKind::ar1 ? LyapunovFunction::one_plus_square()
                                        : build_lyapunov(c.model);
  const auto grid = linspace(-60.0, 60.0, 24001);
  const double gnorm = v_norm(identity, V, grid).value;
  double truth = 0.0;
  if (kind == ChainKind::regenerative)
    truth = target.true_mean ? *target.true_mean : stationary_expectation(target, identity);

  const std::size_t aggs = e.reps;
  struct Agg {
    double mean_est, mean_hw, med_est, med_hw, mean_all, mean_acc;
  };
  std::vector<Agg> out(aggs);
  parallel_for(aggs, [&](std::size_t j) {
    std::vector<double> est(m_all), hw(m_all);
    double acc = 0.0;
    for (std::size_t i = 0; i < m_all; ++i) {
      RngStream rng(e.seed, j * m_all + i);
      Trajectory t;
      if (kind == ChainKind::regenerative) {
        t = regen_metropolis_run(e.n, target, q, rng, V);
      } else {
        ChainSpec spec;
        spec.kind = ChainKind::ar1;
        spec.n = e.n;
        spec.V = V;
        spec.initial = std::nullopt;
        t = run_chain(spec, rng);
      }
      const auto rep = confidence_report(t, identity, gnorm, cc.certificate, cc.eq_v2, x_rep,
                                         e.y_tune);
      est[i] = rep.estimate;
      hw[i] = rep.half_width;
      acc += t.accepted_fraction();
    }
    Agg a{};
    a.mean_est = aggregate(std::span(est).first(m_mean), AggregationMode::mean);
    a.mean_hw = aggregate(std::span(hw).first(m_mean), AggregationMode::mean);
    a.med_est = aggregate(std::span(est).first(m_med), AggregationMode::median);
    a.med_hw = aggregate(std::span(hw).first(m_med), AggregationMode::median);
    a.mean_all = aggregate(std::span(est).first(m_med), AggregationMode::mean);
    a.mean_acc = acc / static_cast<double>(m_all);
    out[j] = a;
  });

  ExperimentResult r;
  r.experiment = "aggregation";
  r.config_echo = to_json(c);
  std::size_t miss_mean = 0, miss_med = 0;
  const auto push = [&](const char *g, std::size_t j, double v, std::size_t m) {
    r.records.push_back({g, j, v, e.n * m, 0, out[j].mean_acc});
  };
  for (std::size_t j = 0; j < aggs; ++j) {
    push("mean", j, out[j].mean_est, m_mean);
    if (std::abs(out[j].mean_est - truth) > out[j].mean_hw)
      ++miss_mean;
    if (std::abs(out[j].med_est - truth) > out[j].med_hw)
      ++miss_med;
  }
  for (std::size_t j = 0; j < aggs; ++j)
    push("median", j, out[j].med_est, m_med);
  for (std::size_t j = 0; j < aggs; ++j)
    push("mean_matched", j, out[j].mean_all, m_med);
  for (std::size_t j = 0; j < aggs; ++j)
    push("median_matched", j, out[j].med_est, m_med);
  r.summary = summarize(r.records);

  const double n_agg = static_cast<double>(aggs);
  const double bin_se = std::sqrt(e.alpha * (1.0 - e.alpha) / n_agg);
  const double rate_mean = static_cast<double>(miss_mean) / n_agg;
  const double rate_med = static_cast<double>(miss_med) / n_agg;
  const double iqr_mean = r.summary[2].iqr, iqr_med = r.summary[3].iqr;
  r.diagnostics = {{"chain", to_string(kind)},
                   {"truth", truth},
                   {"m_mean", m_mean},
                   {"m_median", m_med},
                   {"x_dev_per_replication", x_rep},
                   {"K", cc.certificate.K_selected()},
                   {"miss_rate_mean", rate_mean},
                   {"miss_rate_median", rate_med},
                   {"binomial_se", bin_se},
                   {"mean_miss_ok", rate_mean <= e.alpha + 3.0 * bin_se},
                   {"median_miss_ok", rate_med <= e.alpha + 3.0 * bin_se},
                   {"iqr_mean_matched", iqr_mean},
                   {"iqr_median_matched", iqr_med},
                   {"mean_iqr_le_median_iqr", iqr_mean <= iqr_med},
                   {"selected_aggregation", e.aggregation}};
  return r;
}

} // namespace mcert
