#include "mcert/numerics.hpp"

#include "mcert/error.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <charconv>
#include <string>

namespace mcert {

QuadratureResult integrate(const std::function<double(double)> &f, double a,
                           double b, double abs_tol, unsigned max_depth) {
  if (a == b)
    return {0.0, 0.0};
  using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
  double error = 0.0;
  double l1 = 0.0;
  // Boost stops on error <= tol * L1. Its error estimate has a round-off
  // floor near 2e-14 relative, and asking for less makes the recursion run to
  // max depth while the summed estimate grows. Derive tol from the absolute
  // target (with a margin, since its per-panel split is not exact) with a
  // 2e-13 floor, using a one-panel L1 estimate.
  (void)GK::integrate(f, a, b, 0, 0.0, &error, &l1);
  const double rel = l1 > 0.0 ? std::max(0.1 * abs_tol / l1, 2e-13) : 2e-13;
  const double value = GK::integrate(f, a, b, max_depth, rel, &error, &l1);
  if (!std::isfinite(value))
    throw NumericalError("quadrature produced a non-finite value", error);
  if (error > abs_tol && error > 1e-12 * l1)
    throw NumericalError("quadrature did not reach tolerance " + format_double(abs_tol) +
                             ", achieved " + format_double(error) + " on [" + format_double(a) +
                             ", " + format_double(b) + "]",
                         error);
  return {value, error};
}

QuadratureResult integrate_pieces(const std::function<double(double)> &f,
                                  std::span<const double> breakpoints,
                                  double abs_tol) {
  QuadratureResult total{0.0, 0.0};
  if (breakpoints.size() < 2)
    return total;
  const double piece_tol = abs_tol / static_cast<double>(breakpoints.size() - 1);
  for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
    const auto r = integrate(f, breakpoints[i], breakpoints[i + 1], piece_tol);
    total.value += r.value;
    total.error += r.error;
  }
  return total;
}

std::vector<double> sign_changes(const std::function<double(double)> &g, double lo, double hi,
                                 int n) {
  std::vector<double> roots;
  double a = lo, ga = g(lo);
  for (int i = 1; i <= n; ++i) {
    const double b = lo + (hi - lo) * i / n;
    const double gb = g(b);
    if (std::isfinite(ga) && std::isfinite(gb) && ((ga < 0) != (gb < 0))) {
      double l = a, r = b, gl = ga;
      for (int it = 0; it < 100 && r - l > 1e-15 * (1 + std::abs(l)); ++it) {
        const double m = 0.5 * (l + r);
        const double gm = g(m);
        if ((gm < 0) == (gl < 0)) {
          l = m;
          gl = gm;
        } else {
          r = m;
        }
      }
      roots.push_back(0.5 * (l + r));
    }
    a = b;
    ga = gb;
  }
  return roots;
}

double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0)
    return 1.0;
  if (lambda < 0.2)
    return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-16)
      break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty())
    throw ConfigError("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x)
      ++i;
    while (j < b.size() && b[j] <= x)
      ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  const double lambda = (ne + 0.12 + 0.11 / ne) * d;
  return {d, kolmogorov_survival(lambda)};
}

KsResult ks_one_sample(std::vector<double> a, const std::function<double(double)> &cdf) {
  if (a.empty())
    throw ConfigError("ks_one_sample: empty sample");
  std::sort(a.begin(), a.end());
  const double n = static_cast<double>(a.size());
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double F = cdf(a[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - F, F - static_cast<double>(i) / n});
  }
  const double ne = std::sqrt(n);
  return {d, kolmogorov_survival((ne + 0.12 + 0.11 / ne) * d)};
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty())
    throw ConfigError("quantile of empty data");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

MeanSe mean_and_se(std::span<const double> xs) {
  if (xs.empty())
    throw ConfigError("mean of empty data");
  double mean = 0.0;
  double m2 = 0.0;
  std::size_t n = 0;
  for (double x : xs) {
    ++n;
    const double delta = x - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (x - mean);
  }
  const double var = n > 1 ? m2 / static_cast<double>(n - 1) : 0.0;
  return {mean, std::sqrt(var / static_cast<double>(n))};
}

double batch_means_se(std::span<const double> xs, std::size_t batches) {
  const std::size_t len = xs.size() / batches;
  if (len == 0)
    throw ConfigError("batch_means_se: series shorter than batch count");
  std::vector<double> means(batches);
  for (std::size_t b = 0; b < batches; ++b)
    means[b] = mean_and_se(xs.subspan(b * len, len)).mean;
  return mean_and_se(means).se;
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

} // namespace mcert
