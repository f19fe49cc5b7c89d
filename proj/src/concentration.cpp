#include "mcert/concentration.hpp"

#include "mcert/error.hpp"
#include "mcert/numerics.hpp"
#include "mcert/parallel.hpp"

#include <algorithm>
#include <limits>
#include <numbers>

namespace mcert {

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  if (n < 2)
    throw ConfigError("linspace: need at least two points");
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i)
    g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return g;
}

VNormResult v_norm(const std::function<double(double)> &g, const LyapunovFunction &V,
                   std::span<const double> grid) {
  if (grid.empty())
    throw ConfigError("v_norm: empty grid");
  const auto ratio = [&](double x) { return std::abs(g(x)) / V(x); };
  std::size_t best = 0;
  double best_v = -1.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double r = ratio(grid[i]);
    if (r > best_v) {
      best_v = r;
      best = i;
    }
  }
  VNormResult res{best_v, grid[best], best == 0 || best + 1 == grid.size()};
  if (grid.size() >= 3 && !res.boundary_warning) {
    double a = grid[best - 1], b = grid[best + 1];
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 200 && b - a > 1e-13 * std::max(1.0, std::abs(b)); ++it) {
      const double c = b - phi * (b - a);
      const double d = a + phi * (b - a);
      if (ratio(c) > ratio(d))
        b = d;
      else
        a = c;
    }
    const double m = 0.5 * (a + b);
    if (ratio(m) > res.value) {
      res.value = ratio(m);
      res.argmax = m;
    }
  }
  return res;
}

VarianceOverEstimate sigma_hat_sq(const Trajectory &traj, const DriftCertificate &cert,
                                  double eq_v2) {
  if (traj.v_sq_values.empty())
    throw ConfigError("sigma_hat_sq: empty trajectory");
  double sum = 0.0;
  for (double v2 : traj.v_sq_values)
    sum += v2;
  const double K = cert.K_selected();
  const double n = static_cast<double>(traj.v_sq_values.size());
  return {K * K * ((1.0 + eq_v2) / n * sum), K, eq_v2, traj.v_sq_values.size(), "zero"};
}

double confidence_halfwidth(std::size_t n, double g_vnorm, double s2, double x_dev,
                            double y_tune) {
  if (!(x_dev > std::numbers::sqrt2))
    throw ConfigError("confidence_halfwidth: x must exceed sqrt(2)");
  if (!(y_tune > 0.0))
    throw ConfigError("confidence_halfwidth: y must be positive");
  if (n == 0)
    throw ConfigError("confidence_halfwidth: n must be at least 1");
  if (!(s2 >= 0.0))
    throw ConfigError("confidence_halfwidth: variance estimate must be nonnegative");
  return x_dev * g_vnorm / std::sqrt(static_cast<double>(n)) *
         std::sqrt((s2 + y_tune) * (1.0 + 0.5 * std::log1p(s2 / y_tune)));
}

ConfidenceReport confidence_report(const Trajectory &traj,
                                   const std::function<double(double)> &g, double g_vnorm,
                                   const DriftCertificate &cert, double eq_v2, double x_dev,
                                   std::optional<double> y_tune) {
  const auto var = sigma_hat_sq(traj, cert, eq_v2);
  double sum = 0.0;
  for (double x : traj.states)
    sum += g(x);
  const auto n = traj.states.size();
  const double y = y_tune ? *y_tune : var.sigma_hat_sq / static_cast<double>(n);
  ConfidenceReport r{};
  r.estimate = sum / static_cast<double>(n);
  r.x_dev = x_dev;
  r.y_tune = y;
  r.half_width = confidence_halfwidth(n, g_vnorm, var.sigma_hat_sq, x_dev, y);
  r.nominal_coverage = nominal_coverage(x_dev);
  r.g_vnorm = g_vnorm;
  r.n = n;
  r.variance = var;
  return r;
}

// ---------------------------------------------------------------------------

namespace {

struct FTerms {
  double f;
  double penalty; ///< sum (PV_k^2 + V_k^2)
};

FTerms f_terms(const MresCase &c, const Trajectory &t) {
  FTerms r{0.0, 0.0};
  for (std::size_t k = 0; k < t.size(); ++k) {
    r.f += c.g(t.states[k]);
    const double pv2 = k == 0 ? c.pv_sq_first : c.pv_sq_next(t.states[k - 1]);
    r.penalty += pv2 + t.v_sq_values[k];
  }
  return r;
}

} // namespace

MresResult verify_mres_mc(const MresCase &c, double lambda, std::size_t reps,
                          std::uint64_t seed) {
  if (reps < 2)
    throw ConfigError("verify_mres_mc: need at least two replications");
  if (!c.simulate || !c.g || !c.pv_sq_next)
    throw ConfigError("verify_mres_mc: incomplete case " + c.name);

  const std::size_t centering_reps = 10 * reps;
  std::vector<double> f_center(centering_reps);
  parallel_for(centering_reps, [&](std::size_t i) {
    RngStream rng(seed, reps + i);
    const auto t = c.simulate(rng);
    double f = 0.0;
    for (double x : t.states)
      f += c.g(x);
    f_center[i] = f;
  });
  const auto ef = mean_and_se(f_center);

  std::vector<double> log_terms(reps);
  const double scale = c.K * c.L;
  parallel_for(reps, [&](std::size_t i) {
    RngStream rng(seed, i);
    const auto t = c.simulate(rng);
    const auto ft = f_terms(c, t);
    log_terms[i] = lambda * (ft.f - ef.mean) - 0.5 * lambda * lambda * scale * scale * ft.penalty;
  });

  if (lambda == 0.0)
    return {1.0, 0.0, 0.0, ef.mean, ef.se, true, reps};

  // Mean of exp(log_terms) through a common shift keeps large exponents finite.
  const double shift = *std::max_element(log_terms.begin(), log_terms.end());
  std::vector<double> scaled(reps);
  for (std::size_t i = 0; i < reps; ++i)
    scaled[i] = std::exp(log_terms[i] - shift);
  const auto ms = mean_and_se(scaled);
  const double factor = std::exp(shift);
  const double estimate = ms.mean * factor;
  const double se = ms.se * factor;
  if (!std::isfinite(estimate) || !std::isfinite(se))
    throw NumericalError("verify_mres_mc: estimate overflowed; reduce lambda", shift);
  // d estimate / d E f = -lambda * estimate
  const double se_total = std::hypot(se, lambda * estimate * ef.se);
  return {estimate,      se_total, std::log(ms.mean) + shift, ef.mean, ef.se,
          estimate <= 1.0 + 3.0 * se_total, reps};
}

double ar1_pv_sq(double x) {
  const double x2 = x * x;
  return x2 * x2 / 16.0 + 13.0 * x2 / 8.0 + 67.0 / 16.0;
}

MresCase iid_mres_case(std::size_t n, double K) {
  MresCase c;
  c.name = "iid";
  c.n = n;
  const auto V = LyapunovFunction::one_plus_square();
  c.simulate = [n, V](RngStream &rng) {
    Trajectory t;
    for (std::size_t k = 0; k < n; ++k)
      t.push(rng.normal(), V);
    t.total_inner_steps = n;
    return t;
  };
  c.g = [](double x) { return x; };
  c.L = 0.5;
  c.K = K;
  // E[(1 + X^2)^2] = 1 + 2 + 3 for X ~ N(0, 1)
  c.pv_sq_next = [](double) { return 6.0; };
  c.pv_sq_first = 6.0;
  return c;
}

MresCase ar1_mres_case(std::size_t n, double K, std::optional<double> x0) {
  MresCase c;
  c.name = "ar1";
  c.n = n;
  ChainSpec spec;
  spec.kind = ChainKind::ar1;
  spec.n = n;
  spec.initial = x0;
  c.simulate = [spec](RngStream &rng) { return run_chain(spec, rng); };
  c.g = [](double x) { return x; };
  c.L = 0.5;
  c.K = K;
  c.pv_sq_next = ar1_pv_sq;
  c.pv_sq_first = x0 ? ar1_pv_sq(*x0) : 6.0;
  return c;
}

double stationary_expectation(const UnnormalizedTarget &target,
                              const std::function<double(double)> &phi, double lo,
                              double hi) {
  const double mass = target_mass(target, lo, hi);
  std::vector<double> pts;
  constexpr int pieces = 24;
  for (int i = 0; i <= pieces; ++i)
    pts.push_back(lo + (hi - lo) * i / pieces);
  const double num =
      integrate_pieces([&](double x) { return phi(x) * std::exp(target.log_h(x)); }, pts, 1e-11)
          .value;
  return num / mass;
}

MresCase regen_mres_case(std::size_t n, double K, const UnnormalizedTarget &target,
                         const SymmetricProposal &q, double s) {
  MresCase c;
  c.name = "regen";
  c.n = n;
  const auto V = LyapunovFunction::exp_abs(s);
  c.simulate = [=](RngStream &rng) { return regen_metropolis_run(n, target, q, rng, V); };
  c.g = [](double x) { return x; };
  // sup |x| e^{-s|x|} = 1/(s e) at |x| = 1/s
  c.L = 1.0 / (s * std::numbers::e);
  c.K = K;
  const double eq_v2 =
      expectation_under_proposal(q, [&](double z) { return std::exp(2.0 * s * std::abs(z)); });
  c.pv_sq_next = [V, eq_v2](double x) { return V.eval_sq(x) * eq_v2; };
  c.pv_sq_first = stationary_expectation(target, [&](double x) { return V.eval_sq(x); });
  return c;
}

double self_normalized_stat(const Trajectory &traj, std::span<const double> pv_sq,
                            double ex_v_sq, double centering) {
  if (pv_sq.size() != traj.size())
    throw ConfigError("self_normalized_stat: pv_sq length must match the trajectory");
  double f = 0.0, denom = 0.0;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    f += traj.v_values[k];
    denom += pv_sq[k] + traj.v_sq_values[k] + 2.0 * ex_v_sq;
  }
  if (!(denom > 0.0))
    throw ConfigError("self_normalized_stat: non-positive normalizer");
  return (f - centering) / std::sqrt(denom);
}

// ---------------------------------------------------------------------------

std::string to_string(AggregationMode m) { return m == AggregationMode::mean ? "mean" : "median"; }

AggregationMode aggregation_mode_from_string(const std::string &s) {
  if (s == "mean")
    return AggregationMode::mean;
  if (s == "median")
    return AggregationMode::median;
  throw ConfigError("unknown aggregation mode '" + s + "'");
}

std::size_t replications_needed(AggregationMode mode, double alpha, double a) {
  if (!(a < 0.5))
    throw ConfigError("replications_needed: per-replication level a must be below 1/2");
  if (!(alpha > 0.0 && alpha < a))
    throw ConfigError("replications_needed: need 0 < alpha < a");
  const double bound = mode == AggregationMode::mean
                           ? std::log(alpha) / std::log(a)
                           : 2.0 * std::log(alpha) / std::log(4.0 * a * (1.0 - a));
  // Ratios that are integers in exact arithmetic land within rounding of one.
  const double m = std::ceil(bound * (1.0 - 1e-12));
  return static_cast<std::size_t>(std::max(1.0, m));
}

double aggregate(std::span<const double> estimates, AggregationMode mode) {
  if (estimates.empty())
    throw ConfigError("aggregate: no estimates");
  if (mode == AggregationMode::mean) {
    double s = 0.0;
    for (double e : estimates)
      s += e;
    return s / static_cast<double>(estimates.size());
  }
  std::vector<double> v(estimates.begin(), estimates.end());
  const std::size_t mid = (v.size() - 1) / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  return v[mid];
}

AggregationPlan make_aggregation_plan(AggregationMode mode, double alpha, double a) {
  return {mode, replications_needed(mode, alpha, a), a, alpha};
}

} // namespace mcert
