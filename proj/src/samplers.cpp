#include "mcert/samplers.hpp"

#include <algorithm>

namespace mcert {

std::string to_string(ChainKind k) {
  switch (k) {
  case ChainKind::rwm:
    return "rwm";
  case ChainKind::regenerative:
    return "regen";
  case ChainKind::rejection:
    return "reject";
  case ChainKind::ar1:
    return "ar1";
  }
  return "unknown";
}

ChainKind chain_kind_from_string(const std::string &s) {
  if (s == "rwm")
    return ChainKind::rwm;
  if (s == "regen" || s == "regenerative")
    return ChainKind::regenerative;
  if (s == "reject" || s == "rejection")
    return ChainKind::rejection;
  if (s == "ar1")
    return ChainKind::ar1;
  throw ConfigError("unknown chain kind '" + s + "'");
}

Trajectory regen_metropolis_run(std::size_t n, const UnnormalizedTarget &target,
                                const SymmetricProposal &proposal, RngStream &rng,
                                const LyapunovFunction &V) {
  Trajectory t;
  t.kind = ChainKind::regenerative;
  t.states.reserve(n);
  RegenState st;
  RegenCounters cnt;
  while (t.states.size() < n) {
    const bool from_atom = st.in_atom;
    if (const auto x = regen_iteration(st, target, proposal, rng, cnt)) {
      t.push(*x, V);
      t.regeneration_marks.push_back(from_atom ? 1 : 0);
    }
  }
  t.total_inner_steps = cnt.inner_steps;
  t.regeneration_count = cnt.regenerations;
  t.loop_iterations = cnt.loop_iterations;
  t.nonfinite_rejections = cnt.nonfinite;
  return t;
}

Trajectory regen_metropolis_budget(std::uint64_t inner_budget,
                                   const UnnormalizedTarget &target,
                                   const SymmetricProposal &proposal, RngStream &rng,
                                   const LyapunovFunction &V) {
  Trajectory t;
  t.kind = ChainKind::regenerative;
  RegenState st;
  RegenCounters cnt;
  while (cnt.inner_steps < inner_budget) {
    const bool from_atom = st.in_atom;
    if (const auto x = regen_iteration(st, target, proposal, rng, cnt)) {
      t.push(*x, V);
      t.regeneration_marks.push_back(from_atom ? 1 : 0);
    }
  }
  t.total_inner_steps = cnt.inner_steps;
  t.regeneration_count = cnt.regenerations;
  t.loop_iterations = cnt.loop_iterations;
  t.nonfinite_rejections = cnt.nonfinite;
  return t;
}

namespace {

void check_envelope_grid(const UnnormalizedTarget &target, const SymmetricProposal &q,
                         double M) {
  if (!(M > 0.0))
    throw ConfigError("rejection sampler: envelope M must be positive");
  const double logM = std::log(M);
  constexpr int points = 2001;
  for (int i = 0; i < points; ++i) {
    const double x = -50.0 + 100.0 * i / (points - 1);
    if (target.log_h(x) > logM + q.log_q(x) + 1e-12)
      throw EnvelopeError("rejection sampler: M q(x) < h(x) on the verification grid", x);
  }
}

// Returns true when accepted; throws EnvelopeError on a violation.
bool rejection_trial(const UnnormalizedTarget &target, const SymmetricProposal &q,
                     double logM, RngStream &rng, double &z) {
  z = q.sample(rng);
  const double u = rng.uniform();
  const double log_ratio = target.log_h(z) - logM - q.log_q(z);
  if (log_ratio > 1e-12)
    throw EnvelopeError("rejection sampler: M q(x) < h(x) at a proposal point", z);
  return std::log(u) <= log_ratio;
}

} // namespace

Trajectory rejection_sample(std::size_t n, const UnnormalizedTarget &target,
                            const SymmetricProposal &proposal, double envelope_M,
                            RngStream &rng, const LyapunovFunction &V) {
  check_envelope_grid(target, proposal, envelope_M);
  const double logM = std::log(envelope_M);
  Trajectory t;
  t.kind = ChainKind::rejection;
  t.states.reserve(n);
  double z = 0.0;
  while (t.states.size() < n) {
    ++t.total_inner_steps;
    if (rejection_trial(target, proposal, logM, rng, z))
      t.push(z, V);
  }
  return t;
}

Trajectory rejection_budget(std::uint64_t proposals, const UnnormalizedTarget &target,
                            const SymmetricProposal &proposal, double envelope_M,
                            RngStream &rng, const LyapunovFunction &V) {
  check_envelope_grid(target, proposal, envelope_M);
  const double logM = std::log(envelope_M);
  Trajectory t;
  t.kind = ChainKind::rejection;
  double z = 0.0;
  for (std::uint64_t i = 0; i < proposals; ++i) {
    ++t.total_inner_steps;
    if (rejection_trial(target, proposal, logM, rng, z))
      t.push(z, V);
  }
  return t;
}

double optimal_envelope(const UnnormalizedTarget &target, const SymmetricProposal &proposal,
                        double lo, double hi) {
  const auto f = [&](double x) { return target.log_h(x) - proposal.log_q(x); };
  constexpr int points = 20001;
  double best = -std::numeric_limits<double>::infinity();
  int best_i = 0;
  for (int i = 0; i < points; ++i) {
    const double x = lo + (hi - lo) * i / (points - 1);
    const double v = f(x);
    if (v > best) {
      best = v;
      best_i = i;
    }
  }
  const double step = (hi - lo) / (points - 1);
  double a = lo + (best_i - 1) * step;
  double b = lo + (best_i + 1) * step;
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - g * (b - a);
  double d = a + g * (b - a);
  for (int it = 0; it < 200 && b - a > 1e-14; ++it) {
    if (f(c) > f(d))
      b = d;
    else
      a = c;
    c = b - g * (b - a);
    d = a + g * (b - a);
  }
  best = std::max(best, f(0.5 * (a + b)));
  return std::exp(best) * (1.0 + 1e-9);
}

Trajectory run_chain(const ChainSpec &spec, RngStream &rng) {
  const auto need_proposal = [&]() -> const SymmetricProposal & {
    if (!spec.proposal)
      throw ConfigError("run_chain: kind " + to_string(spec.kind) + " needs a proposal");
    return *spec.proposal;
  };
  switch (spec.kind) {
  case ChainKind::regenerative:
    if (spec.n == 0) {
      Trajectory t;
      t.kind = spec.kind;
      return t;
    }
    return regen_metropolis_run(spec.n, spec.target, need_proposal(), rng, spec.V);
  case ChainKind::rejection: {
    const auto &q = need_proposal();
    const double M = spec.envelope_M ? *spec.envelope_M : optimal_envelope(spec.target, q);
    return rejection_sample(spec.n, spec.target, q, M, rng, spec.V);
  }
  case ChainKind::rwm: {
    const auto &q = need_proposal();
    double x;
    if (spec.initial) {
      x = *spec.initial;
    } else {
      const double M = spec.envelope_M ? *spec.envelope_M : optimal_envelope(spec.target, q);
      x = rejection_sample(1, spec.target, q, M, rng, spec.V).states.front();
    }
    Trajectory t;
    t.kind = spec.kind;
    for (std::size_t i = 0; i < spec.burn_in; ++i)
      x = rwm_step(x, spec.target, q, rng, &t.nonfinite_rejections);
    t.states.reserve(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
      x = rwm_step(x, spec.target, q, rng, &t.nonfinite_rejections);
      t.push(x, spec.V);
    }
    t.total_inner_steps = spec.n;
    return t;
  }
  case ChainKind::ar1: {
    double x = spec.initial ? *spec.initial : rng.normal();
    Trajectory t;
    t.kind = spec.kind;
    for (std::size_t i = 0; i < spec.burn_in; ++i)
      x = ar1_step(x, rng);
    t.states.reserve(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
      x = ar1_step(x, rng);
      t.push(x, spec.V);
    }
    t.total_inner_steps = spec.n;
    return t;
  }
  }
  throw ConfigError("run_chain: unknown kind");
}

} // namespace mcert
