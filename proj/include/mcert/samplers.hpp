#ifndef MCERT_SAMPLERS_HPP
#define MCERT_SAMPLERS_HPP

#include "mcert/error.hpp"
#include "mcert/models.hpp"
#include "mcert/rng.hpp"

#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace mcert {

enum class ChainKind { rwm, regenerative, rejection, ar1 };

std::string to_string(ChainKind k);
ChainKind chain_kind_from_string(const std::string &s);

/// A realized chain X_1..X_n with V and V^2 along it.
struct Trajectory {
  ChainKind kind{ChainKind::ar1};
  std::vector<double> states;
  std::vector<double> v_values;
  std::vector<double> v_sq_values;
  /// States emitted right after leaving the atom (regenerative kind only).
  std::vector<std::uint8_t> regeneration_marks;
  std::uint64_t total_inner_steps{0};
  std::uint64_t regeneration_count{0};
  /// Raw sampler loop iterations including atom entries (regenerative only).
  std::uint64_t loop_iterations{0};
  std::uint64_t nonfinite_rejections{0};

  std::size_t size() const noexcept { return states.size(); }
  double accepted_fraction() const {
    return total_inner_steps == 0 ? 0.0
                                  : static_cast<double>(states.size()) /
                                        static_cast<double>(total_inner_steps);
  }
  void push(double x, const LyapunovFunction &V) {
    states.push_back(x);
    const double v = V(x);
    v_values.push_back(v);
    v_sq_values.push_back(v * v);
  }
};

/// Replays fixed normal and uniform draws; throws when exhausted.
class ScriptedDraws {
public:
  ScriptedDraws(std::deque<double> normals, std::deque<double> uniforms)
      : normals_(std::move(normals)), uniforms_(std::move(uniforms)) {}

  double normal() { return pop(normals_, "normal"); }
  double uniform() { return pop(uniforms_, "uniform"); }

private:
  static double pop(std::deque<double> &d, const char *what) {
    if (d.empty())
      throw ConfigError(std::string("ScriptedDraws: out of ") + what + " draws");
    const double v = d.front();
    d.pop_front();
    return v;
  }
  std::deque<double> normals_;
  std::deque<double> uniforms_;
};

/// One Random Walk Metropolis move: Z first, then U; accepts x + Z if
/// U <= h(x+Z)/h(x). Non-finite proposal evaluations are rejected and
/// counted in *nonfinite when given.
template <class Source>
double rwm_step(double x, const UnnormalizedTarget &target,
                const SymmetricProposal &proposal, Source &src,
                std::uint64_t *nonfinite = nullptr) {
  const double z = proposal.sample(src);
  const double u = src.uniform();
  const double y = x + z;
  const double log_ratio = target.log_h(y) - target.log_h(x);
  if (std::isnan(log_ratio) || log_ratio == std::numeric_limits<double>::infinity()) {
    if (nonfinite)
      ++*nonfinite;
    return x;
  }
  return (log_ratio >= 0.0 || std::log(u) <= log_ratio) ? y : x;
}

/// X1 = 0.5 x + sqrt(3/4) N.
template <class Source> double ar1_step(double x, Source &src) {
  return 0.5 * x + std::sqrt(0.75) * src.normal();
}

struct RegenState {
  bool in_atom{true};
  double x{0.0};
};

struct RegenCounters {
  std::uint64_t loop_iterations{0};
  std::uint64_t inner_steps{0};
  std::uint64_t regenerations{0};
  std::uint64_t consecutive_atom_failures{0};
  std::uint64_t nonfinite{0};
};

inline constexpr std::uint64_t regen_stall_limit = 10'000'000;

/// One iteration of the regenerative RWM loop (threshold k = 1).
/// Atom (A=1): draw U', Z ~ q; leave with X = Z if U' < h(Z)/q(Z).
/// Outside (A=0): draw U, U', Z; Y = RWM move from x; keep X = Y if
/// U' > q(Y)/h(Y), otherwise enter the atom.
/// Returns the emitted state when the chain index advances.
/// Inner-step accounting: every iteration counts except an A=0 iteration
/// that ends in the atom; that entry is folded into the next atom trial.
template <class Source>
std::optional<double> regen_iteration(RegenState &st, const UnnormalizedTarget &target,
                                      const SymmetricProposal &proposal, Source &src,
                                      RegenCounters &cnt) {
  ++cnt.loop_iterations;
  if (st.in_atom) {
    const double u = src.uniform();
    const double z = proposal.sample(src);
    ++cnt.inner_steps;
    const double log_ratio = target.log_h(z) - proposal.log_q(z);
    if (std::log(u) < log_ratio) {
      st.x = z;
      st.in_atom = false;
      ++cnt.regenerations;
      cnt.consecutive_atom_failures = 0;
      return z;
    }
    if (++cnt.consecutive_atom_failures >= regen_stall_limit)
      throw StallError("regenerative sampler: no exit from the atom after 1e7 attempts; "
                       "check the scales of h and q");
    return std::nullopt;
  }
  const double y = rwm_step(st.x, target, proposal, src, &cnt.nonfinite);
  const double u2 = src.uniform();
  const double log_w = proposal.log_q(y) - target.log_h(y);
  if (std::log(u2) > log_w) {
    st.x = y;
    ++cnt.inner_steps;
    return y;
  }
  st.in_atom = true;
  return std::nullopt;
}

/// Exactly n emitted states of the regenerative sampler started in the atom.
Trajectory regen_metropolis_run(std::size_t n, const UnnormalizedTarget &target,
                                const SymmetricProposal &proposal, RngStream &rng,
                                const LyapunovFunction &V);

/// Regenerative sampler run until `inner_budget` inner steps are spent.
Trajectory regen_metropolis_budget(std::uint64_t inner_budget,
                                   const UnnormalizedTarget &target,
                                   const SymmetricProposal &proposal, RngStream &rng,
                                   const LyapunovFunction &V);

/// n iid draws by accept-reject with envelope M q >= h.
Trajectory rejection_sample(std::size_t n, const UnnormalizedTarget &target,
                            const SymmetricProposal &proposal, double envelope_M,
                            RngStream &rng, const LyapunovFunction &V);

/// Accept-reject with a fixed proposal budget; accepted count varies.
Trajectory rejection_budget(std::uint64_t proposals, const UnnormalizedTarget &target,
                            const SymmetricProposal &proposal, double envelope_M,
                            RngStream &rng, const LyapunovFunction &V);

/// sup_x h(x)/q(x) on [lo, hi] by a dense scan plus golden refinement,
/// inflated by a relative 1e-9.
double optimal_envelope(const UnnormalizedTarget &target, const SymmetricProposal &proposal,
                        double lo = -50.0, double hi = 50.0);

struct ChainSpec {
  ChainKind kind{ChainKind::ar1};
  std::size_t n{0};
  UnnormalizedTarget target;
  std::optional<SymmetricProposal> proposal;
  LyapunovFunction V{LyapunovFunction::one_plus_square()};
  /// Rejection envelope; computed with optimal_envelope when absent.
  std::optional<double> envelope_M;
  /// Fixed start; nullopt means draw the start from the stationary law.
  std::optional<double> initial{0.0};
  std::size_t burn_in{0};
};

Trajectory run_chain(const ChainSpec &spec, RngStream &rng);

} // namespace mcert

#endif
