#ifndef MCERT_MODELS_HPP
#define MCERT_MODELS_HPP

#include "mcert/rng.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mcert {

/// Unnormalized target density h on the real line, stored as log h.
struct UnnormalizedTarget {
  std::function<double(double)> log_h;
  /// alpha and x1 of the tail log-concavity condition, when declared.
  std::optional<double> tail_decay_alpha;
  std::optional<double> tail_threshold_x1;
  /// Known mean, test oracles only.
  std::optional<double> true_mean;
  std::string family;
  std::map<std::string, double> params;

  double operator()(double x) const { return log_h(x); }
};

/// h(x) = exp(log_scale - (x - center)^2 / (2 variance)); center 1, variance
/// 1/2 gives exp(-(x-1)^2).
UnnormalizedTarget gaussian_target(double center, double variance,
                                   double log_scale = 0.0);
/// h(x) = exp(-|x| / scale).
UnnormalizedTarget laplace_target(double scale = 1.0);
/// h(x) = 1 / (1 + x^2); polynomial tails.
UnnormalizedTarget cauchy_target();

enum class ProposalFamily { gaussian, laplace };

/// Symmetric increment density q with an exponential envelope
/// q(z) <= envelope_C * exp(-decay_alpha |z|).
class SymmetricProposal {
public:
  /// N(0, scale^2). Any decay_alpha works for a Gaussian; C follows from it.
  static SymmetricProposal gaussian(double scale = 1.0, double decay_alpha = 1.0);
  /// Laplace(0, scale); decay_alpha must not exceed 1/scale.
  static SymmetricProposal laplace(double scale = 1.0);

  ProposalFamily family() const noexcept { return family_; }
  double scale() const noexcept { return scale_; }
  double decay_alpha() const noexcept { return decay_alpha_; }
  double envelope_C() const noexcept { return envelope_C_; }

  double log_q(double z) const;
  double q(double z) const { return std::exp(log_q(z)); }

  template <class Source> double sample(Source &src) const {
    if (family_ == ProposalFamily::gaussian)
      return scale_ * src.normal();
    const double u = src.uniform() - 0.5;
    return (u < 0 ? scale_ : -scale_) * std::log1p(-2.0 * std::abs(u));
  }

  std::string family_name() const;

private:
  SymmetricProposal(ProposalFamily f, double scale, double alpha, double C)
      : family_(f), scale_(scale), decay_alpha_(alpha), envelope_C_(C) {}

  ProposalFamily family_;
  double scale_;
  double decay_alpha_;
  double envelope_C_;
};

/// V: R -> [1, inf).
class LyapunovFunction {
public:
  enum class Family { exp_abs, one_plus_square };

  static LyapunovFunction exp_abs(double s);
  static LyapunovFunction one_plus_square() { return LyapunovFunction(Family::one_plus_square, 0.0); }

  Family family() const noexcept { return family_; }
  double s() const noexcept { return s_; }

  double eval(double x) const {
    return family_ == Family::exp_abs ? std::exp(s_ * std::abs(x)) : 1.0 + x * x;
  }
  double operator()(double x) const { return eval(x); }
  double eval_sq(double x) const {
    const double v = eval(x);
    return v * v;
  }
  /// Largest r with {|x| <= r} = {V <= R}; zero when R < 1.
  double level_radius(double R) const;

  std::string family_name() const;

private:
  LyapunovFunction(Family f, double s) : family_(f), s_(s) {}
  Family family_;
  double s_;
};

// ---------------------------------------------------------------------------
// Hypothesis checks

struct LogConcavityReport {
  bool passes;
  double worst_x;
  double worst_y;
  /// max over pairs of log(h(y)/h(x)) + alpha (|y| - |x|); <= 0 on pass.
  double max_log_excess;
  /// exp(max_log_excess) - 1, the relative ratio excess.
  double max_ratio_excess;
  std::size_t pairs_checked;
};

/// Pairwise check of h(y)/h(x) <= exp(-alpha(|y|-|x|)) over all grid pairs
/// with |y| > |x| > x1. Grid must be strictly increasing with |x| > x1.
LogConcavityReport check_log_concavity(const UnnormalizedTarget &target,
                                       std::span<const double> grid,
                                       double tolerance = 1e-12);

/// n log-spaced points x1 + delta, delta in [1e-3, span], mirrored when
/// negative is set.
std::vector<double> tail_grid(double x1, double span, std::size_t n = 400,
                              bool negative = false);

/// Checks each tail separately on the default 400-point grids.
LogConcavityReport check_log_concavity_tails(const UnnormalizedTarget &target,
                                             double span = 50.0,
                                             std::size_t n = 400);

struct ProposalCheck {
  double symmetry_max_abs;   ///< max |log q(z) - log q(-z)|
  double normalization_error;
  double envelope_max_log_excess; ///< max log q - log(C e^{-alpha|z|})
  bool passes;
};

ProposalCheck check_proposal(const SymmetricProposal &q, std::size_t n = 400);

/// Half-width T with q-mass outside [-T, T] below 1e-12 by the envelope.
double proposal_truncation(const SymmetricProposal &q);

/// E_q[f(Z)] by adaptive quadrature on [-T, T]; T comes from the envelope so
/// the q tail mass is below 1e-12, then doubles while the tail contribution
/// of f q exceeds abs_tol. Throws DivergenceError if it keeps growing.
double expectation_under_proposal(const SymmetricProposal &q,
                                  const std::function<double(double)> &f,
                                  double abs_tol = 1e-10,
                                  std::span<const double> breakpoints = {});

// ---------------------------------------------------------------------------
// Drift verification

enum class DriftMethod { closed_form, quadrature, monte_carlo };

std::string to_string(DriftMethod m);

/// One-step conditional expectation oracles for a Markov kernel.
struct StepKernel {
  std::string name;
  std::function<double(double, const LyapunovFunction &)> pv_closed_form;
  std::function<double(double, const LyapunovFunction &)> pv_quadrature;
  std::function<double(double, RngStream &)> sample_next;
};

/// X1 = 0.5 x + sqrt(3/4) N.
StepKernel ar1_kernel();
/// X1 ~ q regardless of x.
StepKernel iid_kernel(const SymmetricProposal &dist);
/// Random walk Metropolis with increment q.
StepKernel rwm_kernel(const UnnormalizedTarget &target, const SymmetricProposal &q);
/// Regenerative RWM (threshold k = 1), indexed by emitted states.
StepKernel regen_kernel(const UnnormalizedTarget &target, const SymmetricProposal &q);

struct DriftCheckReport {
  double beta;
  double b;
  double max_violation;
  double worst_x;
  DriftMethod method;
  double tolerance;
  bool passes;
  std::vector<double> per_point_se; ///< MC only
};

DriftCheckReport verify_drift(const StepKernel &kernel, const LyapunovFunction &V,
                              double beta, double b,
                              std::span<const double> check_points,
                              DriftMethod method, RngStream *rng = nullptr,
                              std::size_t mc_draws = 100000);

/// E[V(Y)] for Y ~ N(mean, sd^2), closed form for both Lyapunov families.
double gaussian_expectation_of_v(const LyapunovFunction &V, double mean, double sd);

/// Integral of h over R by quadrature (normalizing constant).
double target_mass(const UnnormalizedTarget &target, double lo = -60.0, double hi = 60.0);

} // namespace mcert

#endif
