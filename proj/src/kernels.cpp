#include "mcert/models.hpp"
#include "mcert/numerics.hpp"
#include "mcert/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace mcert {

namespace {

// min(1, h(y)/h(x)) in log space.
double acceptance(const UnnormalizedTarget &t, double x, double y) {
  const double lr = t.log_h(y) - t.log_h(x);
  return lr >= 0.0 ? 1.0 : std::exp(lr);
}

// E[phi(Y)] for one RWM move Y from x; `extra` are further kink locations
// in state units.
double rwm_expectation(const UnnormalizedTarget &t, const SymmetricProposal &q, double x,
                       const std::function<double(double)> &phi,
                       const std::vector<double> &extra = {}) {
  const double px = phi(x);
  const double T = proposal_truncation(q);
  const double lx = t.log_h(x);
  auto cuts = sign_changes([&](double z) { return t.log_h(x + z) - lx; }, -T, T);
  cuts.push_back(-x); // V(|y|) has its kink at y = 0
  for (double y : extra)
    cuts.push_back(y - x);
  // phi(x + z) - phi(x) cancels at the scale of phi(x); so does the tolerance.
  const double tol = 1e-10 * std::max(1.0, std::abs(px));
  return px + expectation_under_proposal(
                  q, [&](double z) { return acceptance(t, x, x + z) * (phi(x + z) - px); },
                  tol, cuts);
}

} // namespace

StepKernel ar1_kernel() {
  StepKernel k;
  k.name = "ar1";
  const double sd = std::sqrt(0.75);
  k.pv_closed_form = [sd](double x, const LyapunovFunction &V) {
    return gaussian_expectation_of_v(V, 0.5 * x, sd);
  };
  k.pv_quadrature = [sd](double x, const LyapunovFunction &V) {
    const auto n01 = SymmetricProposal::gaussian(1.0, 4.0);
    return expectation_under_proposal(n01, [&](double z) { return V(0.5 * x + sd * z); });
  };
  k.sample_next = [](double x, RngStream &rng) { return ar1_step(x, rng); };
  return k;
}

StepKernel iid_kernel(const SymmetricProposal &dist) {
  StepKernel k;
  k.name = "iid";
  if (dist.family() == ProposalFamily::gaussian) {
    k.pv_closed_form = [dist](double, const LyapunovFunction &V) {
      return gaussian_expectation_of_v(V, 0.0, dist.scale());
    };
  }
  k.pv_quadrature = [dist](double, const LyapunovFunction &V) {
    return expectation_under_proposal(dist, [&](double z) { return V(z); });
  };
  k.sample_next = [dist](double, RngStream &rng) { return dist.sample(rng); };
  return k;
}

StepKernel rwm_kernel(const UnnormalizedTarget &target, const SymmetricProposal &q) {
  StepKernel k;
  k.name = "rwm";
  k.pv_quadrature = [target, q](double x, const LyapunovFunction &V) {
    return rwm_expectation(target, q, x, [&](double y) { return V(y); });
  };
  k.sample_next = [target, q](double x, RngStream &rng) {
    return rwm_step(x, target, q, rng);
  };
  return k;
}

StepKernel regen_kernel(const UnnormalizedTarget &target, const SymmetricProposal &q) {
  StepKernel k;
  k.name = "regen";
  k.pv_quadrature = [target, q](double x, const LyapunovFunction &V) {
    // nu is proportional to min(q, h): the law of the exit from the atom.
    const auto exit_prob = [&](double z) {
      return std::min(1.0, std::exp(target.log_h(z) - q.log_q(z)));
    };
    const double T = proposal_truncation(q);
    const auto cross =
        sign_changes([&](double z) { return target.log_h(z) - q.log_q(z); }, -T - 30, T + 30);
    const double mass = expectation_under_proposal(q, exit_prob, 1e-10, cross);
    const double nu_v =
        expectation_under_proposal(q, [&](double z) { return exit_prob(z) * V(z); }, 1e-10,
                                   cross) /
        mass;
    const auto entry = [&](double y) {
      return std::min(1.0, std::exp(q.log_q(y) - target.log_h(y)));
    };
    const double stay_v =
        rwm_expectation(target, q, x, [&](double y) { return (1.0 - entry(y)) * V(y); }, cross);
    const double enter = rwm_expectation(target, q, x, entry, cross);
    return stay_v + enter * nu_v;
  };
  k.sample_next = [target, q](double x, RngStream &rng) {
    RegenState st{false, x};
    RegenCounters cnt;
    for (;;)
      if (const auto y = regen_iteration(st, target, q, rng, cnt))
        return *y;
  };
  return k;
}

} // namespace mcert
