#ifndef MCERT_CONSTANTS_HPP
#define MCERT_CONSTANTS_HPP

#include "mcert/models.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace mcert {

enum class Provenance { closed_form, quadrature, monte_carlo, paper_value };
std::string to_string(Provenance p);

/// Which closed form of K is used downstream. eq4 is
/// (1 + bb((R-1)/c - R)) / (1 - bb); sec4 doubles the bb term.
enum class KVariant { eq4, sec4 };
std::string to_string(KVariant v);
KVariant k_variant_from_string(const std::string &s);

/// Drift and minorization constants with per-field provenance.
struct DriftCertificate {
  double beta{};
  double b{};
  double R{};
  double R0{1.0}; ///< smallest admissible R
  double c_R{};
  double beta_bar{};
  double K{};         ///< eq4 form
  double K_variant{}; ///< sec4 form; may be negative when bb > 1/2 and c is near 1
  KVariant selected{KVariant::eq4};
  std::map<std::string, Provenance> provenance;

  bool valid() const { return beta_bar < 1.0 && c_R > 0.0 && R >= R0; }
  double K_selected() const { return selected == KVariant::eq4 ? K : K_variant; }
};

/// beta + 2b/(1+R); throws CertificateInvalid (carrying the minimal R) if >= 1.
double beta_bar(double beta, double b, double R);

/// R at which beta + 2b/(1+R) = 1.
double minimal_R(double beta, double b);

double K_constant(double beta_bar, double R, double c, KVariant variant = KVariant::eq4);

/// Certificate from (beta, b, R, c) without validity checks.
DriftCertificate make_certificate_unchecked(double beta, double b, double R, double c,
                                            double R0 = 1.0);
/// Same, throwing CertificateInvalid when beta_bar >= 1 or c <= 0.
DriftCertificate make_certificate(double beta, double b, double R, double c,
                                  double R0 = 1.0);

// ---------------------------------------------------------------------------
// Regenerative Metropolis constants, V = exp(s|x|)

struct RegenDriftConstants {
  double beta;   ///< (E_q[e^{(s-alpha)|Z|}] + 1) / 2
  double b;      ///< V(x1) E_q[V(Z)]
  double eq_v;   ///< E_q[V(Z)]
  double eq_v2;  ///< E_q[V^2(Z)]
};

RegenDriftConstants regen_drift_constants(double s, const SymmetricProposal &q, double x1);

/// (E_q[e^{(s-alpha)|Z|}]+1)/2 + 2 V(x1) E_q[V(Z)]/(1+R). Needs alpha > 2s.
double regen_beta_bar(double s, const SymmetricProposal &q, double x1, double R,
                      const LyapunovFunction &V);

enum class AtomEntryForm {
  /// E_q[a] E_q[w(x+Z)] + (1 - E_q[a]) w(x), the factorized display.
  factorized,
  /// E_q[a(x,Z) w(x+Z)] + (1 - E_q[a]) w(x), the actual entry probability.
  exact
};

/// Probability of entering the atom in one step from x with A = 0, where
/// a = min(1, h(x+Z)/h(x)) and w(y) = min(1, q(y)/h(y)).
double atom_entry_probability(const UnnormalizedTarget &target, const SymmetricProposal &q,
                              double x, AtomEntryForm form = AtomEntryForm::factorized);

struct MinorizationResult {
  double c;
  double argmin_x;
  std::size_t resolution;
};

/// min of atom_entry_probability over {V <= R} on a uniform grid, doubled
/// from `resolution` points until two levels agree within 1e-4 relative.
MinorizationResult minorization_constant_regen(const UnnormalizedTarget &target,
                                               const SymmetricProposal &q,
                                               const LyapunovFunction &V, double R,
                                               std::size_t resolution = 64,
                                               AtomEntryForm form = AtomEntryForm::factorized);

/// inf_x min(1, q(x)/h(x)) over [lo, hi]; lower bound for the atom constant.
double entry_probability_floor(const UnnormalizedTarget &target, const SymmetricProposal &q,
                               double lo = -50.0, double hi = 50.0);

// ---------------------------------------------------------------------------
// AR(1) toy example

struct ToyMinorization {
  double c; ///< 2 (Phi(sqrt3 d) - Phi(sqrt3 / d))
  double R; ///< sqrt(2 + (d^2 - 1)/4)
};

ToyMinorization minorization_constant_toy(double d);

/// beta = 1/4, b = 3/2 for V = 1 + x^2 (PV = x^2/4 + 7/4 exactly).
inline constexpr double toy_beta = 0.25;
inline constexpr double toy_b = 1.5;

/// Toy certificate with R paired to d by the closed form above.
DriftCertificate toy_certificate(double d);

/// Toy certificate on the state set {|x| <= d}, i.e. R = 1 + d^2, with the
/// same c(d). Used by the coupling construction.
DriftCertificate toy_state_set_certificate(double d);

/// Largest c the AR(1) kernel admits on {|x| <= d}: 2 Phi(-d/sqrt3).
double ar1_overlap_mass(double d);

// ---------------------------------------------------------------------------
// Optimization

using CertificateFamily = std::function<DriftCertificate(double)>;

enum class ScanSpacing { linear, geometric };

struct OptimizeResult {
  double R_star;
  double K_star;
  DriftCertificate certificate;
  std::vector<double> scanned_R;
  std::vector<double> scanned_beta_bar;
};

/// Minimizes the selected K over the family parameter on [R_min, R_max]:
/// 64-point scan, then golden section on the bracket around the best point.
/// A flat stretch of tied minima returns the middle of the tied span.
OptimizeResult optimize_K_over_R(const CertificateFamily &family, double R_min, double R_max,
                                 KVariant variant = KVariant::eq4,
                                 ScanSpacing spacing = ScanSpacing::linear);

enum class MinorizationRoute {
  /// c = inf q/h, the floor of every atom-entry probability.
  floor,
  /// c = minorization_constant_regen on {V <= R}.
  grid
};

/// R -> certificate for the regenerative sampler with V = exp(s|x|).
CertificateFamily regen_certificate_family(const UnnormalizedTarget &target,
                                           const SymmetricProposal &q, double s, double x1,
                                           MinorizationRoute route = MinorizationRoute::floor);

/// 100 ln(10) K^2 ln(K) / 2.
double required_runs(double K);

} // namespace mcert

#endif
