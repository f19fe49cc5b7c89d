#include "mcert/coupling.hpp"

#include "mcert/error.hpp"
#include "mcert/numerics.hpp"
#include "mcert/parallel.hpp"
#include "mcert/samplers.hpp"

#include <algorithm>
#include <numbers>

namespace mcert {

namespace {

constexpr double ar1_sd = 0.8660254037844386; // sqrt(3/4)

double ar1_log_density(double x, double y) { return normal_log_pdf(y, 0.5 * x, ar1_sd); }

// Residual kernel (P(x,.) - c nu)/(1 - c) by rejection from P(x,.).
double sample_residual(double x, const SmallSetSpec &set, RngStream &rng) {
  const double log_c = std::log(set.c());
  for (int attempt = 0; attempt < 1'000'000; ++attempt) {
    const double y = 0.5 * x + ar1_sd * rng.normal();
    const double ratio = std::exp(log_c + set.nu_log_density(y) - ar1_log_density(x, y));
    if (rng.uniform() <= 1.0 - ratio)
      return y;
  }
  throw NumericalError("coupled_step: residual kernel rejection exceeded 1e6 attempts", x);
}

} // namespace

SmallSetSpec::SmallSetSpec(double d) : d_(d) {
  if (!(d > 1.0))
    throw ConfigError("SmallSetSpec: need d > 1 (c(1) = 0)");
  c_ = minorization_constant_toy(d).c;
  overlap_ = ar1_overlap_mass(d);
  if (c_ > overlap_)
    throw ConfigError("SmallSetSpec: c(d) exceeds the AR(1) overlap mass on {|x| <= d}; "
                      "need d <= " +
                      std::to_string(max_valid_d()));
}

double SmallSetSpec::max_valid_d() {
  // c(d) increases and the overlap decreases in d; bisect the crossing.
  double lo = 1.0, hi = 3.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (minorization_constant_toy(mid).c <= ar1_overlap_mass(mid))
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

double SmallSetSpec::nu_log_density(double y) const {
  const double a = normal_log_pdf(y, 0.5 * d_, ar1_sd);
  const double b = normal_log_pdf(y, -0.5 * d_, ar1_sd);
  return std::min(a, b) - std::log(overlap_);
}

double SmallSetSpec::sample_nu(RngStream &rng) const {
  // Rejection from the equal mixture of the two endpoint Gaussians.
  for (;;) {
    const double centre = rng.uniform() < 0.5 ? 0.5 * d_ : -0.5 * d_;
    const double y = centre + ar1_sd * rng.normal();
    const double a = normal_log_pdf(y, 0.5 * d_, ar1_sd);
    const double b = normal_log_pdf(y, -0.5 * d_, ar1_sd);
    const double lmix = std::max(a, b) + std::log1p(std::exp(-std::abs(a - b))) - std::log(2.0);
    if (std::log(rng.uniform()) <= std::min(a, b) - lmix)
      return y;
  }
}

double d_v_metric(double x, double y, const LyapunovFunction &V) {
  return x == y ? 0.0 : V(x) + V(y);
}

BivariateState coupled_step(const BivariateState &s, const SmallSetSpec &set, RngStream &rng,
                            OffSetMoves moves) {
  if (s.coalesced) {
    const double y = ar1_step(s.x, rng);
    return {y, y, true};
  }
  if (set.contains(s.x) && set.contains(s.x_prime)) {
    if (rng.uniform() < set.c()) {
      const double y = set.sample_nu(rng);
      return {y, y, true};
    }
    return {sample_residual(s.x, set, rng), sample_residual(s.x_prime, set, rng), false};
  }
  if (moves == OffSetMoves::synchronous) {
    const double n = rng.normal();
    return {0.5 * s.x + ar1_sd * n, 0.5 * s.x_prime + ar1_sd * n, false};
  }
  const double a = ar1_step(s.x, rng);
  const double b = ar1_step(s.x_prime, rng);
  return {a, b, false};
}

WeakDependenceEstimate estimate_weak_dependence_sum(double x, double x_prime,
                                                    std::size_t horizon, std::size_t reps,
                                                    const SmallSetSpec &set,
                                                    const LyapunovFunction &V,
                                                    std::uint64_t seed, OffSetMoves moves) {
  if (reps < 2)
    throw ConfigError("estimate_weak_dependence_sum: need at least two replications");
  struct Rep {
    double sum{0.0};
    bool coalesced{false};
    double tau{-1.0};
    double tau_a{-1.0};
    std::vector<double> path;
  };
  std::vector<Rep> out(reps);
  parallel_for(reps, [&](std::size_t i) {
    RngStream rng(seed, i);
    Rep r;
    r.path.assign(horizon + 1, 0.0);
    BivariateState st{x, x_prime, x == x_prime};
    if (st.coalesced)
      r.tau_a = 0.0;
    for (std::size_t k = 0;; ++k) {
      const double dv = st.coalesced ? 0.0 : d_v_metric(st.x, st.x_prime, V);
      r.path[k] = dv;
      r.sum += dv;
      if (r.tau < 0 && set.contains(st.x) && set.contains(st.x_prime))
        r.tau = static_cast<double>(k);
      if (st.coalesced) {
        if (r.tau_a < 0)
          r.tau_a = static_cast<double>(k);
        break; // d_V stays 0
      }
      if (k == horizon)
        break;
      st = coupled_step(st, set, rng, moves);
    }
    r.coalesced = st.coalesced;
    out[i] = std::move(r);
  });

  WeakDependenceEstimate e{};
  std::vector<double> sums(reps);
  std::size_t uncoalesced = 0, n_tau = 0, n_tau_a = 0;
  double tau_sum = 0.0, tau_a_sum = 0.0;
  e.per_step_mean.assign(horizon + 1, 0.0);
  for (std::size_t i = 0; i < reps; ++i) {
    sums[i] = out[i].sum;
    if (!out[i].coalesced)
      ++uncoalesced;
    if (out[i].tau >= 0) {
      tau_sum += out[i].tau;
      ++n_tau;
    }
    if (out[i].tau_a >= 0) {
      tau_a_sum += out[i].tau_a;
      ++n_tau_a;
    }
    for (std::size_t k = 0; k <= horizon; ++k)
      e.per_step_mean[k] += out[i].path[k] / static_cast<double>(reps);
  }
  const auto ms = mean_and_se(sums);
  const auto cert = toy_state_set_certificate(set.d());
  e.sum_estimate = ms.mean;
  e.se = ms.se;
  e.K = cert.K;
  e.bound_rhs = cert.K * d_v_metric(x, x_prime, V);
  e.pass = cert.valid() && e.sum_estimate - 3.0 * e.se <= e.bound_rhs;
  e.fraction_uncoalesced = static_cast<double>(uncoalesced) / static_cast<double>(reps);
  e.truncation_warning = e.fraction_uncoalesced >= 1e-3;
  e.mean_first_entry_time = n_tau ? tau_sum / static_cast<double>(n_tau) : -1.0;
  e.mean_coalescence_time = n_tau_a ? tau_a_sum / static_cast<double>(n_tau_a) : -1.0;
  return e;
}

} // namespace mcert
