#ifndef MCERT_CONCENTRATION_HPP
#define MCERT_CONCENTRATION_HPP

#include "mcert/constants.hpp"
#include "mcert/models.hpp"
#include "mcert/samplers.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mcert {

struct VNormResult {
  double value;
  double argmax;
  /// Supremum found at the grid boundary; the ratio may be unbounded.
  bool boundary_warning;
};

/// sup |g|/V over the grid, refined once around the grid argmax.
VNormResult v_norm(const std::function<double(double)> &g, const LyapunovFunction &V,
                   std::span<const double> grid);

/// Uniform grid helper.
std::vector<double> linspace(double lo, double hi, std::size_t n);

struct VarianceOverEstimate {
  double sigma_hat_sq;
  double K_used;
  double eq_v2_proposal;
  std::size_t n;
  std::string epsilon_n_policy{"zero"};
};

/// K^2 ((1 + eq_v2)/n) sum V^2(X_k), with the negligible remainder set to 0.
VarianceOverEstimate sigma_hat_sq(const Trajectory &traj, const DriftCertificate &cert,
                                  double eq_v2);

/// x ||g||_V / sqrt(n) * sqrt((s2 + y)(1 + log(s2/y + 1)/2)); needs x > sqrt 2.
double confidence_halfwidth(std::size_t n, double g_vnorm, double sigma_hat_sq, double x_dev,
                            double y_tune);

struct ConfidenceReport {
  double estimate;
  double half_width;
  double x_dev;
  double y_tune;
  double nominal_coverage;
  double g_vnorm;
  std::size_t n;
  VarianceOverEstimate variance;
};

/// Mean of g over the trajectory with its half-width. y defaults to s2/n.
ConfidenceReport confidence_report(const Trajectory &traj,
                                   const std::function<double(double)> &g, double g_vnorm,
                                   const DriftCertificate &cert, double eq_v2, double x_dev,
                                   std::optional<double> y_tune = std::nullopt);

inline double nominal_coverage(double x_dev) { return 1.0 - std::exp(-x_dev * x_dev / 2.0); }

// ---------------------------------------------------------------------------
// Monte Carlo check of the exponential inequality for f = sum g(X_k)

struct MresCase {
  std::string name;
  std::size_t n{0};
  std::function<Trajectory(RngStream &)> simulate;
  std::function<double(double)> g;
  double L{1.0};
  double K{1.0};
  /// PV_k^2 as a function of X_{k-1}, k >= 2.
  std::function<double(double)> pv_sq_next;
  /// PV_1^2: E[V^2] in the stationary case, PV^2(x0) from a fixed start.
  double pv_sq_first{0.0};
};

struct MresResult {
  double estimate;
  double se;
  /// log of the estimate; finite when the estimate itself underflows to 0.
  double log_estimate;
  double mean_f;
  double mean_f_se;
  bool pass;
  std::size_t reps;
};

/// Estimates E[exp(lambda (f - E f) - lambda^2/2 sum (K L)^2 (PV_k^2 + V_k^2))]
/// over reps trajectories (streams 0..reps-1); E f comes from 10 reps further
/// trajectories. Passes when estimate <= 1 + 3 SE, SE including the error of
/// E f. lambda = 0 gives exactly 1.
MresResult verify_mres_mc(const MresCase &c, double lambda, std::size_t reps,
                          std::uint64_t seed);

/// iid N(0,1), g(x) = x, V = 1 + x^2; K = 1 reproduces the McDiarmid-type case.
MresCase iid_mres_case(std::size_t n, double K = 1.0);
/// AR(1) toy chain, g(x) = x, V = 1 + x^2; stationary start when x0 is empty.
MresCase ar1_mres_case(std::size_t n, double K, std::optional<double> x0 = std::nullopt);
/// Regenerative sampler (stationary by construction), g(x) = x, V = exp(s|x|).
MresCase regen_mres_case(std::size_t n, double K, const UnnormalizedTarget &target,
                         const SymmetricProposal &q, double s);

/// PV^2(x) for the AR(1) chain and V = 1 + x^2: x^4/16 + 13 x^2/8 + 67/16.
double ar1_pv_sq(double x);
/// sup_x PV^2(x) / V^2(x) for the AR(1) chain, attained at x = 0.
inline constexpr double ar1_second_moment_factor = 67.0 / 16.0;

/// E_pi[phi] for the normalized target, by quadrature.
double stationary_expectation(const UnnormalizedTarget &target,
                              const std::function<double(double)> &phi, double lo = -60.0,
                              double hi = 60.0);

/// (sum V_k - centering) / sqrt(sum (PV_k^2 + V_k^2 + 2 ex_v_sq)).
double self_normalized_stat(const Trajectory &traj, std::span<const double> pv_sq,
                            double ex_v_sq, double centering);

// ---------------------------------------------------------------------------
// Aggregation of independent replications

enum class AggregationMode { mean, median };
std::string to_string(AggregationMode m);
AggregationMode aggregation_mode_from_string(const std::string &s);

/// Smallest m with m >= 2 log(alpha)/log(4a(1-a)) (median) or
/// m >= log(alpha)/log(a) (mean). Needs 0 < alpha < a < 1/2.
std::size_t replications_needed(AggregationMode mode, double alpha, double a);

/// Mean, or median with the lower-middle element for even counts.
double aggregate(std::span<const double> estimates, AggregationMode mode);

struct AggregationPlan {
  AggregationMode mode;
  std::size_t m;
  double per_rep_level_a;
  double final_level_alpha;
};

AggregationPlan make_aggregation_plan(AggregationMode mode, double alpha, double a);

} // namespace mcert

#endif
