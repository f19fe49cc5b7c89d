#include "mcert/constants.hpp"

#include "mcert/error.hpp"
#include "mcert/numerics.hpp"

#include <algorithm>
#include <limits>
#include <numbers>
#include <sstream>

namespace mcert {

std::string to_string(Provenance p) {
  switch (p) {
  case Provenance::closed_form:
    return "closed_form";
  case Provenance::quadrature:
    return "quadrature";
  case Provenance::monte_carlo:
    return "monte_carlo";
  case Provenance::paper_value:
    return "paper_value";
  }
  return "unknown";
}

std::string to_string(KVariant v) { return v == KVariant::eq4 ? "eq4" : "sec4"; }

KVariant k_variant_from_string(const std::string &s) {
  if (s == "eq4")
    return KVariant::eq4;
  if (s == "sec4")
    return KVariant::sec4;
  throw ConfigError("unknown K variant '" + s + "' (expected eq4 or sec4)");
}

double minimal_R(double beta, double b) { return 2.0 * b / (1.0 - beta) - 1.0; }

double beta_bar(double beta, double b, double R) {
  if (!(beta > 0.0 && beta < 1.0) || !(b > 0.0) || !(R >= 1.0))
    throw ConfigError("beta_bar: need 0 < beta < 1, b > 0, R >= 1");
  const double bb = beta + 2.0 * b / (1.0 + R);
  if (bb >= 1.0) {
    std::ostringstream os;
    os << "beta_bar = " << bb << " >= 1; R must exceed " << minimal_R(beta, b);
    throw CertificateInvalid(os.str(), minimal_R(beta, b));
  }
  return bb;
}

double K_constant(double bb, double R, double c, KVariant variant) {
  if (!(bb < 1.0))
    throw CertificateInvalid("K_constant: beta_bar must be below 1");
  if (!(bb > 0.0) || !(c > 0.0 && c <= 1.0) || !(R >= 1.0))
    throw ConfigError("K_constant: need 0 < beta_bar, 0 < c <= 1, R >= 1");
  const double inner = (R - 1.0) / c - R;
  const double factor = variant == KVariant::eq4 ? 1.0 : 2.0;
  return (1.0 + factor * bb * inner) / (1.0 - bb);
}

DriftCertificate make_certificate_unchecked(double beta, double b, double R, double c,
                                            double R0) {
  DriftCertificate cert;
  cert.beta = beta;
  cert.b = b;
  cert.R = R;
  cert.R0 = R0;
  cert.c_R = c;
  cert.beta_bar = beta + 2.0 * b / (1.0 + R);
  if (cert.beta_bar < 1.0 && c > 0.0 && c <= 1.0 && R >= 1.0) {
    cert.K = K_constant(cert.beta_bar, R, c, KVariant::eq4);
    cert.K_variant = K_constant(cert.beta_bar, R, c, KVariant::sec4);
  } else {
    cert.K = std::numeric_limits<double>::infinity();
    cert.K_variant = std::numeric_limits<double>::infinity();
  }
  for (const char *f : {"beta", "b", "R", "c_R"})
    cert.provenance[f] = Provenance::closed_form;
  cert.provenance["beta_bar"] = Provenance::closed_form;
  cert.provenance["K"] = Provenance::closed_form;
  cert.provenance["K_variant"] = Provenance::closed_form;
  return cert;
}

DriftCertificate make_certificate(double beta, double b, double R, double c, double R0) {
  auto cert = make_certificate_unchecked(beta, b, R, c, R0);
  if (!(cert.beta_bar < 1.0)) {
    std::ostringstream os;
    os << "certificate invalid: beta_bar = " << cert.beta_bar << " at R = " << R;
    throw CertificateInvalid(os.str(), minimal_R(beta, b));
  }
  if (!(c > 0.0))
    throw CertificateInvalid("certificate invalid: minorization constant is zero");
  if (R < R0)
    throw CertificateInvalid("certificate invalid: R below the admissible minimum", R0);
  return cert;
}

// ---------------------------------------------------------------------------

RegenDriftConstants regen_drift_constants(double s, const SymmetricProposal &q, double x1) {
  const double alpha = q.decay_alpha();
  if (!(s > 0.0))
    throw ConfigError("regen constants: s must be positive");
  if (!(alpha > 2.0 * s))
    throw ConfigError("regen constants: need proposal decay alpha > 2 s");
  RegenDriftConstants r{};
  const double e_contract =
      expectation_under_proposal(q, [&](double z) { return std::exp((s - alpha) * std::abs(z)); });
  r.beta = 0.5 * (e_contract + 1.0);
  r.eq_v = expectation_under_proposal(q, [&](double z) { return std::exp(s * std::abs(z)); });
  r.eq_v2 =
      expectation_under_proposal(q, [&](double z) { return std::exp(2.0 * s * std::abs(z)); });
  r.b = std::exp(s * std::abs(x1)) * r.eq_v;
  return r;
}

double regen_beta_bar(double s, const SymmetricProposal &q, double x1, double R,
                      const LyapunovFunction &V) {
  if (V.family() != LyapunovFunction::Family::exp_abs || V.s() != s)
    throw ConfigError("regen_beta_bar: V must be exp(s|x|) with the same s");
  const auto k = regen_drift_constants(s, q, x1);
  const double bb = k.beta + 2.0 * k.b / (1.0 + R);
  if (bb >= 1.0) {
    std::ostringstream os;
    os << "regen_beta_bar = " << bb << " >= 1; R must exceed " << minimal_R(k.beta, k.b);
    throw CertificateInvalid(os.str(), minimal_R(k.beta, k.b));
  }
  return bb;
}

double atom_entry_probability(const UnnormalizedTarget &target, const SymmetricProposal &q,
                              double x, AtomEntryForm form) {
  const double lhx = target.log_h(x);
  const auto accept = [&](double z) {
    const double lr = target.log_h(x + z) - lhx;
    return lr >= 0.0 ? 1.0 : std::exp(lr);
  };
  const auto entry = [&](double y) {
    const double lr = q.log_q(y) - target.log_h(y);
    return lr >= 0.0 ? 1.0 : std::exp(lr);
  };
  // Kinks: h(x + z) = h(x) for the acceptance, q = h at x + z for the entry.
  const double T = proposal_truncation(q);
  auto cuts = sign_changes([&](double z) { return target.log_h(x + z) - lhx; }, -T, T);
  for (double y : sign_changes([&](double y) { return q.log_q(y) - target.log_h(y); }, x - T,
                               x + T))
    cuts.push_back(y - x);
  const double ea = expectation_under_proposal(q, accept, 1e-10, cuts);
  const double wx = entry(x);
  double moved;
  if (form == AtomEntryForm::factorized)
    moved = ea * expectation_under_proposal(q, [&](double z) { return entry(x + z); }, 1e-10, cuts);
  else
    moved = expectation_under_proposal(
        q, [&](double z) { return accept(z) * entry(x + z); }, 1e-10, cuts);
  return moved + (1.0 - ea) * wx;
}

MinorizationResult minorization_constant_regen(const UnnormalizedTarget &target,
                                               const SymmetricProposal &q,
                                               const LyapunovFunction &V, double R,
                                               std::size_t resolution, AtomEntryForm form) {
  if (resolution < 64)
    throw ConfigError("minorization_constant_regen: resolution must be at least 64");
  if (!(R >= 1.0))
    throw ConfigError("minorization_constant_regen: R must be at least 1");
  const double r = V.level_radius(R);
  if (r == 0.0) {
    const double c = atom_entry_probability(target, q, 0.0, form);
    return {c, 0.0, 1};
  }
  // Values on the uniform grid of (resolution-1) 2^k + 1 points; each level
  // reuses the previous one.
  std::vector<double> values;
  std::size_t intervals = resolution - 1;
  auto point = [&](std::size_t i, std::size_t m) {
    return -r + 2.0 * r * static_cast<double>(i) / static_cast<double>(m);
  };
  values.resize(intervals + 1);
  for (std::size_t i = 0; i <= intervals; ++i)
    values[i] = atom_entry_probability(target, q, point(i, intervals), form);

  auto grid_min = [&](std::size_t m) {
    std::size_t best = 0;
    for (std::size_t i = 1; i <= m; ++i)
      if (values[i] < values[best])
        best = i;
    return std::pair{values[best], point(best, m)};
  };

  auto [prev, prev_x] = grid_min(intervals);
  for (int level = 0; level < 8; ++level) {
    const std::size_t m = intervals * 2;
    std::vector<double> next(m + 1);
    for (std::size_t i = 0; i <= m; ++i)
      next[i] = (i % 2 == 0) ? values[i / 2]
                             : atom_entry_probability(target, q, point(i, m), form);
    values = std::move(next);
    intervals = m;
    const auto [cur, cur_x] = grid_min(intervals);
    if (std::abs(cur - prev) <= 1e-4 * std::abs(cur))
      return {cur, cur_x, intervals + 1};
    prev = cur;
    prev_x = cur_x;
  }
  throw NumericalError("minorization_constant_regen: grid refinement did not converge",
                       prev);
}

double entry_probability_floor(const UnnormalizedTarget &target, const SymmetricProposal &q,
                               double lo, double hi) {
  const auto f = [&](double x) { return std::min(0.0, q.log_q(x) - target.log_h(x)); };
  constexpr int points = 20001;
  int best_i = 0;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < points; ++i) {
    const double v = f(lo + (hi - lo) * i / (points - 1));
    if (v < best) {
      best = v;
      best_i = i;
    }
  }
  const double step = (hi - lo) / (points - 1);
  double a = lo + (best_i - 1) * step;
  double b = lo + (best_i + 1) * step;
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 200 && b - a > 1e-14; ++it) {
    const double c = b - g * (b - a);
    const double d = a + g * (b - a);
    if (f(c) < f(d))
      b = d;
    else
      a = c;
  }
  return std::exp(std::min(best, f(0.5 * (a + b))));
}

// ---------------------------------------------------------------------------

ToyMinorization minorization_constant_toy(double d) {
  if (!(d >= 1.0))
    throw ConfigError("minorization_constant_toy: need d >= 1");
  const double r3 = std::numbers::sqrt3;
  // Phi(a) - Phi(b) through the upper tails keeps precision when both are near 1.
  const double c = std::isinf(d) ? 1.0
                                 : 2.0 * (0.5 * std::erfc(r3 / d / std::numbers::sqrt2) -
                                          0.5 * std::erfc(r3 * d / std::numbers::sqrt2));
  const double R = std::sqrt(2.0 + (d * d - 1.0) / 4.0);
  return {c, R};
}

DriftCertificate toy_certificate(double d) {
  const auto m = minorization_constant_toy(d);
  auto cert = make_certificate_unchecked(toy_beta, toy_b, m.R, m.c, 1.0);
  cert.provenance["c_R"] = Provenance::closed_form;
  return cert;
}

double ar1_overlap_mass(double d) { return 2.0 * normal_cdf(-d / std::numbers::sqrt3); }

DriftCertificate toy_state_set_certificate(double d) {
  const auto m = minorization_constant_toy(d);
  return make_certificate_unchecked(toy_beta, toy_b, 1.0 + d * d, m.c, 1.0);
}

// ---------------------------------------------------------------------------

OptimizeResult optimize_K_over_R(const CertificateFamily &family, double R_min, double R_max,
                                 KVariant variant, ScanSpacing spacing) {
  if (!(R_max > R_min))
    throw ConfigError("optimize_K_over_R: need R_max > R_min");
  if (spacing == ScanSpacing::geometric && !(R_min > 0.0))
    throw ConfigError("optimize_K_over_R: geometric scan needs R_min > 0");
  constexpr int scan = 64;
  OptimizeResult res{};
  const auto at = [&](int i) {
    const double t = static_cast<double>(i) / (scan - 1);
    return spacing == ScanSpacing::linear ? R_min + t * (R_max - R_min)
                                          : R_min * std::pow(R_max / R_min, t);
  };
  const auto objective = [&](const DriftCertificate &c) {
    if (!c.valid())
      return std::numeric_limits<double>::infinity();
    const double k = variant == KVariant::eq4 ? c.K : c.K_variant;
    return std::isfinite(k) ? k : std::numeric_limits<double>::infinity();
  };

  std::vector<double> Ks(scan);
  for (int i = 0; i < scan; ++i) {
    const double R = at(i);
    const auto c = family(R);
    res.scanned_R.push_back(R);
    res.scanned_beta_bar.push_back(c.beta_bar);
    Ks[i] = objective(c);
  }
  const auto best_it = std::min_element(Ks.begin(), Ks.end());
  if (!std::isfinite(*best_it)) {
    std::ostringstream os;
    os << "optimize_K_over_R: no valid R in [" << R_min << ", " << R_max
       << "]; scanned beta_bar:";
    for (double bb : res.scanned_beta_bar)
      os << ' ' << bb;
    throw CertificateInvalid(os.str());
  }
  const int best = static_cast<int>(best_it - Ks.begin());
  int first = best, last = best;
  while (last + 1 < scan && Ks[last + 1] == Ks[best])
    ++last;

  double R_star = at(best);
  double K_star = Ks[best];
  if (last > first) {
    // Flat stretch: take the middle of the tied span.
    const double mid = 0.5 * (at(first) + at(last));
    const double k_mid = objective(family(mid));
    if (k_mid <= K_star) {
      R_star = mid;
      K_star = k_mid;
    } else {
      R_star = at((first + last) / 2);
    }
  } else {
    // Golden section on the neighbouring bracket.
    double a = at(std::max(best - 1, 0));
    double b = at(std::min(best + 1, scan - 1));
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = objective(family(c)), fd = objective(family(d));
    for (int it = 0; it < 200 && (b - a) > 1e-12 * std::max(1.0, std::abs(b)); ++it) {
      if (fc < fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - g * (b - a);
        fc = objective(family(c));
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + g * (b - a);
        fd = objective(family(d));
      }
    }
    const double m = 0.5 * (a + b);
    const double fm = objective(family(m));
    if (fm < K_star) {
      R_star = m;
      K_star = fm;
    }
  }
  res.R_star = R_star;
  res.K_star = K_star;
  res.certificate = family(R_star);
  res.certificate.selected = variant;
  return res;
}

CertificateFamily regen_certificate_family(const UnnormalizedTarget &target,
                                           const SymmetricProposal &q, double s, double x1,
                                           MinorizationRoute route) {
  const auto k = regen_drift_constants(s, q, x1);
  const double R0 = std::exp(s * std::abs(x1));
  const double floor = entry_probability_floor(target, q);
  const auto V = LyapunovFunction::exp_abs(s);
  return [=](double R) {
    double c = floor;
    Provenance cp = Provenance::quadrature;
    if (route == MinorizationRoute::grid && R >= 1.0)
      c = minorization_constant_regen(target, q, V, R).c;
    auto cert = make_certificate_unchecked(k.beta, k.b, R, c, R0);
    cert.provenance["beta"] = Provenance::quadrature;
    cert.provenance["b"] = Provenance::quadrature;
    cert.provenance["beta_bar"] = Provenance::quadrature;
    cert.provenance["c_R"] = cp;
    return cert;
  };
}

double required_runs(double K) {
  if (!(K > 1.0))
    throw ConfigError("required_runs: need K > 1");
  return 100.0 * std::log(10.0) * K * K * std::log(K) / 2.0;
}

} // namespace mcert
