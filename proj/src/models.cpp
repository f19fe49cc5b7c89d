#include "mcert/models.hpp"

#include "mcert/error.hpp"
#include "mcert/numerics.hpp"

#include <algorithm>
#include <limits>
#include <numbers>

namespace mcert {

UnnormalizedTarget gaussian_target(double center, double variance, double log_scale) {
  if (!(variance > 0.0))
    throw ConfigError("gaussian_target: variance must be positive");
  UnnormalizedTarget t;
  t.log_h = [=](double x) {
    const double d = x - center;
    return log_scale - d * d / (2.0 * variance);
  };
  t.true_mean = center;
  t.family = "gaussian";
  t.params = {{"center", center}, {"variance", variance}, {"log_scale", log_scale}};
  return t;
}

UnnormalizedTarget laplace_target(double scale) {
  if (!(scale > 0.0))
    throw ConfigError("laplace_target: scale must be positive");
  UnnormalizedTarget t;
  t.log_h = [=](double x) { return -std::abs(x) / scale; };
  t.tail_decay_alpha = 1.0 / scale;
  t.tail_threshold_x1 = 0.0;
  t.true_mean = 0.0;
  t.family = "laplace";
  t.params = {{"scale", scale}};
  return t;
}

UnnormalizedTarget cauchy_target() {
  UnnormalizedTarget t;
  t.log_h = [](double x) { return -std::log1p(x * x); };
  t.family = "cauchy";
  return t;
}

SymmetricProposal SymmetricProposal::gaussian(double scale, double decay_alpha) {
  if (!(scale > 0.0) || !(decay_alpha > 0.0))
    throw ConfigError("gaussian proposal: scale and decay_alpha must be positive");
  // sup_z q(z) e^{alpha|z|} is attained at |z| = alpha scale^2.
  const double C = std::exp(0.5 * decay_alpha * decay_alpha * scale * scale) /
                   (scale * std::sqrt(2.0 * std::numbers::pi));
  return SymmetricProposal(ProposalFamily::gaussian, scale, decay_alpha, C);
}

SymmetricProposal SymmetricProposal::laplace(double scale) {
  if (!(scale > 0.0))
    throw ConfigError("laplace proposal: scale must be positive");
  return SymmetricProposal(ProposalFamily::laplace, scale, 1.0 / scale, 0.5 / scale);
}

double SymmetricProposal::log_q(double z) const {
  if (family_ == ProposalFamily::gaussian)
    return normal_log_pdf(z, 0.0, scale_);
  return -std::abs(z) / scale_ - std::log(2.0 * scale_);
}

std::string SymmetricProposal::family_name() const {
  return family_ == ProposalFamily::gaussian ? "gaussian" : "laplace";
}

LyapunovFunction LyapunovFunction::exp_abs(double s) {
  if (!(s > 0.0))
    throw ConfigError("exp_abs Lyapunov function: s must be positive");
  return LyapunovFunction(Family::exp_abs, s);
}

double LyapunovFunction::level_radius(double R) const {
  if (R < 1.0)
    return 0.0;
  return family_ == Family::exp_abs ? std::log(R) / s_ : std::sqrt(R - 1.0);
}

std::string LyapunovFunction::family_name() const {
  return family_ == Family::exp_abs ? "exp_abs" : "one_plus_square";
}

// ---------------------------------------------------------------------------

LogConcavityReport check_log_concavity(const UnnormalizedTarget &target,
                                       std::span<const double> grid,
                                       double tolerance) {
  if (grid.empty())
    throw ConfigError("check_log_concavity: empty grid");
  if (!target.tail_decay_alpha || !target.tail_threshold_x1)
    throw ConfigError("check_log_concavity: target declares no tail parameters");
  const double alpha = *target.tail_decay_alpha;
  const double x1 = *target.tail_threshold_x1;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (i > 0 && !(grid[i] > grid[i - 1]))
      throw ConfigError("check_log_concavity: grid must be strictly increasing");
    if (!(std::abs(grid[i]) > x1))
      throw ConfigError("check_log_concavity: grid point inside |x| <= x1");
  }
  std::vector<double> lh(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    lh[i] = target.log_h(grid[i]);
    if (!std::isfinite(lh[i]))
      throw NumericalError("check_log_concavity: non-finite log h at grid point", grid[i]);
  }

  LogConcavityReport r{true, grid[0], grid[0], -std::numeric_limits<double>::infinity(),
                       0.0, 0};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (std::size_t j = 0; j < grid.size(); ++j) {
      const double ax = std::abs(grid[i]);
      const double ay = std::abs(grid[j]);
      if (!(ay > ax))
        continue;
      ++r.pairs_checked;
      const double excess = lh[j] - lh[i] + alpha * (ay - ax);
      if (excess > r.max_log_excess) {
        r.max_log_excess = excess;
        r.worst_x = grid[i];
        r.worst_y = grid[j];
      }
    }
  }
  if (r.pairs_checked == 0)
    r.max_log_excess = 0.0;
  r.passes = r.max_log_excess <= tolerance;
  r.max_ratio_excess = std::expm1(r.max_log_excess);
  return r;
}

std::vector<double> tail_grid(double x1, double span, std::size_t n, bool negative) {
  if (n < 2 || !(span > 1e-3))
    throw ConfigError("tail_grid: need n >= 2 and span > 1e-3");
  std::vector<double> g(n);
  const double lo = std::log(1e-3);
  const double hi = std::log(span);
  for (std::size_t i = 0; i < n; ++i) {
    const double delta =
        std::exp(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1));
    g[i] = x1 + delta;
  }
  if (negative) {
    std::reverse(g.begin(), g.end());
    for (double &x : g)
      x = -x;
  }
  return g;
}

LogConcavityReport check_log_concavity_tails(const UnnormalizedTarget &target,
                                             double span, std::size_t n) {
  if (!target.tail_threshold_x1)
    throw ConfigError("check_log_concavity_tails: target declares no tail parameters");
  const double x1 = *target.tail_threshold_x1;
  const auto pos = tail_grid(x1, span, n, false);
  const auto neg = tail_grid(x1, span, n, true);
  auto a = check_log_concavity(target, pos);
  const auto b = check_log_concavity(target, neg);
  if (b.max_log_excess > a.max_log_excess) {
    a.max_log_excess = b.max_log_excess;
    a.max_ratio_excess = b.max_ratio_excess;
    a.worst_x = b.worst_x;
    a.worst_y = b.worst_y;
  }
  a.passes = a.passes && b.passes;
  a.pairs_checked += b.pairs_checked;
  return a;
}

ProposalCheck check_proposal(const SymmetricProposal &q, std::size_t n) {
  ProposalCheck c{0.0, 0.0, -std::numeric_limits<double>::infinity(), true};
  const auto grid = tail_grid(0.0, 30.0 * q.scale(), n, false);
  const double logC = std::log(q.envelope_C());
  for (double z : grid) {
    c.symmetry_max_abs = std::max(c.symmetry_max_abs, std::abs(q.log_q(z) - q.log_q(-z)));
    c.envelope_max_log_excess =
        std::max(c.envelope_max_log_excess, q.log_q(z) - logC + q.decay_alpha() * z);
  }
  const double mass = expectation_under_proposal(q, [](double) { return 1.0; });
  c.normalization_error = std::abs(mass - 1.0);
  c.passes = c.symmetry_max_abs <= 1e-12 && c.normalization_error <= 1e-8 &&
             c.envelope_max_log_excess <= 1e-12;
  return c;
}

double proposal_truncation(const SymmetricProposal &q) {
  const double alpha = q.decay_alpha();
  // 2 C e^{-alpha T} / alpha < 1e-12
  return std::max(1.0, std::log(2.0 * q.envelope_C() / (alpha * 1e-12)) / alpha);
}

double expectation_under_proposal(const SymmetricProposal &q,
                                  const std::function<double(double)> &f,
                                  double abs_tol, std::span<const double> breakpoints) {
  double T = proposal_truncation(q);
  const auto fq = [&](double z) {
    const double v = f(z);
    if (v == 0.0)
      return 0.0;
    return v * q.q(z);
  };

  auto core = [&](double t) {
    std::vector<double> pts{-t, 0.0, t};
    for (double b : breakpoints)
      if (b > -t && b < t)
        pts.push_back(b);
    // A few uniform cuts keep the adaptive rule from missing narrow features.
    constexpr int cuts = 8;
    for (int i = 1; i < cuts; ++i) {
      pts.push_back(-t * i / cuts);
      pts.push_back(t * i / cuts);
    }
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return integrate_pieces(fq, pts, abs_tol * 0.5).value;
  };

  double value = core(T);
  for (int attempt = 0; attempt < 6; ++attempt) {
    double tail;
    try {
      tail = integrate(fq, T, 2.0 * T, abs_tol).value + integrate(fq, -2.0 * T, -T, abs_tol).value;
    } catch (const NumericalError &e) {
      // Overflow of f against an underflowing q far out.
      throw DivergenceError(std::string("expectation_under_proposal: tail does not converge: ") +
                                e.what(),
                            T);
    }
    if (!std::isfinite(tail))
      throw DivergenceError("expectation_under_proposal: non-finite tail mass", tail);
    if (std::abs(tail) <= abs_tol)
      return value;
    T *= 2.0;
    value = core(T);
  }
  throw DivergenceError("expectation_under_proposal: integral does not converge "
                        "(tail mass keeps growing)",
                        T);
}

std::string to_string(DriftMethod m) {
  switch (m) {
  case DriftMethod::closed_form:
    return "closed_form";
  case DriftMethod::quadrature:
    return "quadrature";
  case DriftMethod::monte_carlo:
    return "monte_carlo";
  }
  return "unknown";
}

DriftCheckReport verify_drift(const StepKernel &kernel, const LyapunovFunction &V,
                              double beta, double b,
                              std::span<const double> check_points,
                              DriftMethod method, RngStream *rng,
                              std::size_t mc_draws) {
  if (!(beta > 0.0 && beta < 1.0) || !(b > 0.0))
    throw ConfigError("verify_drift: need 0 < beta < 1 and b > 0");
  if (check_points.empty())
    throw ConfigError("verify_drift: no check points");
  DriftCheckReport r{beta, b, -std::numeric_limits<double>::infinity(),
                     check_points[0], method, 1e-8, true, {}};
  double worst_margin = -std::numeric_limits<double>::infinity();
  for (double x : check_points) {
    double pv = 0.0;
    double se = 0.0;
    switch (method) {
    case DriftMethod::closed_form:
      if (!kernel.pv_closed_form)
        throw ConfigError("verify_drift: kernel " + kernel.name + " has no closed form");
      pv = kernel.pv_closed_form(x, V);
      break;
    case DriftMethod::quadrature:
      if (!kernel.pv_quadrature)
        throw ConfigError("verify_drift: kernel " + kernel.name + " has no quadrature route");
      pv = kernel.pv_quadrature(x, V);
      break;
    case DriftMethod::monte_carlo: {
      if (!rng || !kernel.sample_next)
        throw ConfigError("verify_drift: Monte Carlo needs a sampler and an RNG stream");
      std::vector<double> vals(mc_draws);
      for (auto &v : vals)
        v = V(kernel.sample_next(x, *rng));
      const auto ms = mean_and_se(vals);
      pv = ms.mean;
      se = ms.se;
      r.per_point_se.push_back(se);
      break;
    }
    }
    const double viol = pv - beta * V(x) - b;
    if (viol > r.max_violation) {
      r.max_violation = viol;
      r.worst_x = x;
    }
    // MC passes within three standard errors at every point.
    worst_margin = std::max(worst_margin, method == DriftMethod::monte_carlo
                                              ? viol - 3.0 * se
                                              : viol - r.tolerance);
  }
  r.passes = worst_margin <= 0.0;
  return r;
}

double gaussian_expectation_of_v(const LyapunovFunction &V, double mean, double sd) {
  if (V.family() == LyapunovFunction::Family::one_plus_square)
    return 1.0 + mean * mean + sd * sd;
  const double s = V.s();
  // E e^{s|Y|}, Y ~ N(m, sd^2): split on the sign of Y.
  const double a = std::exp(s * mean + 0.5 * s * s * sd * sd) * normal_cdf(mean / sd + s * sd);
  const double c = std::exp(-s * mean + 0.5 * s * s * sd * sd) * normal_cdf(-mean / sd + s * sd);
  return a + c;
}

double target_mass(const UnnormalizedTarget &target, double lo, double hi) {
  std::vector<double> pts;
  constexpr int pieces = 24;
  for (int i = 0; i <= pieces; ++i)
    pts.push_back(lo + (hi - lo) * i / pieces);
  return integrate_pieces([&](double x) { return std::exp(target.log_h(x)); }, pts, 1e-11)
      .value;
}

} // namespace mcert
