#ifndef MCERT_COUPLING_HPP
#define MCERT_COUPLING_HPP

#include "mcert/constants.hpp"
#include "mcert/models.hpp"
#include "mcert/rng.hpp"

#include <cstdint>
#include <vector>

namespace mcert {

/// Pair of AR(1) copies; `coalesced` is absorbing and implies x == x_prime.
struct BivariateState {
  double x{0.0};
  double x_prime{0.0};
  bool coalesced{false};
};

/// Small set {|x| <= d} = {V <= 1 + d^2} for V = 1 + x^2, with the toy
/// coalescence probability c = minorization_constant_toy(d). Construction
/// fails when c exceeds the mass the AR(1) kernel can place on a common
/// measure, 2 Phi(-d / sqrt 3), since the residual kernel would be negative.
class SmallSetSpec {
public:
  explicit SmallSetSpec(double d);

  double d() const noexcept { return d_; }
  double c() const noexcept { return c_; }
  /// V-level of the set.
  double R() const noexcept { return 1.0 + d_ * d_; }
  bool contains(double x) const noexcept { return std::abs(x) <= d_; }

  /// Density of nu: min(N(d/2, 3/4), N(-d/2, 3/4)) normalized.
  double nu_log_density(double y) const;
  double sample_nu(RngStream &rng) const;

  /// Largest d accepted (where c(d) meets the overlap mass).
  static double max_valid_d();

private:
  double d_;
  double c_;
  double overlap_; ///< 2 Phi(-d/sqrt3)
};

enum class OffSetMoves { independent, synchronous };

/// d_V(x, y) = (V(x) + V(y)) 1{x != y}.
double d_v_metric(double x, double y, const LyapunovFunction &V);

/// One step of the split coupling. Both copies inside the set: coalesce on
/// a common nu draw with probability c, otherwise move each by the residual
/// kernel (P - c nu)/(1 - c). Otherwise each copy moves by P. Each
/// coordinate's marginal is exactly P in every branch.
BivariateState coupled_step(const BivariateState &s, const SmallSetSpec &set, RngStream &rng,
                            OffSetMoves moves = OffSetMoves::independent);

struct WeakDependenceEstimate {
  double sum_estimate;
  double se;
  double K;
  double bound_rhs; ///< K d_V(x, x')
  bool pass;
  bool truncation_warning;
  double fraction_uncoalesced;
  /// Mean d_V(X_k, X_k') for k = 0..horizon.
  std::vector<double> per_step_mean;
  double mean_first_entry_time; ///< tau: first time both copies are in the set
  double mean_coalescence_time; ///< tau_A over coalesced replicates
};

/// Monte Carlo estimate of sum_{k=0}^{horizon} E d_V(X_k, X_k') from (x, x')
/// (streams 0..reps-1) against K d_V(x, x') with K the certificate's eq4
/// value. Starts coalesced when x == x'.
WeakDependenceEstimate estimate_weak_dependence_sum(double x, double x_prime,
                                                    std::size_t horizon, std::size_t reps,
                                                    const SmallSetSpec &set,
                                                    const LyapunovFunction &V,
                                                    std::uint64_t seed,
                                                    OffSetMoves moves = OffSetMoves::independent);

} // namespace mcert

#endif
