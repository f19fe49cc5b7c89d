#ifndef MCERT_NUMERICS_HPP
#define MCERT_NUMERICS_HPP

#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace mcert {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double normal_log_pdf(double x, double mean = 0.0, double sd = 1.0) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
}

struct QuadratureResult {
  double value;
  double error;
};

/// Adaptive Gauss-Kronrod (15 point) on [a, b]. Throws NumericalError if the
/// error estimate stays above abs_tol after max_depth bisections.
QuadratureResult integrate(const std::function<double(double)> &f, double a,
                           double b, double abs_tol = 1e-11,
                           unsigned max_depth = 18);

/// Integrates over consecutive breakpoints and sums the pieces.
QuadratureResult integrate_pieces(const std::function<double(double)> &f,
                                  std::span<const double> breakpoints,
                                  double abs_tol = 1e-11);

/// Sign changes of g on [lo, hi] from an n-interval scan, each refined by
/// bisection. Used to hand kinks of min(1, .) integrands to the quadrature.
std::vector<double> sign_changes(const std::function<double(double)> &g, double lo, double hi,
                                 int n = 2000);

struct KsResult {
  double statistic;
  double p_value;
};

/// Two-sample Kolmogorov-Smirnov test, asymptotic p-value.
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);
/// One-sample test against a continuous CDF.
KsResult ks_one_sample(std::vector<double> a, const std::function<double(double)> &cdf);

/// Kolmogorov survival function Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2).
double kolmogorov_survival(double lambda);

/// Linear-interpolation quantile (type 7) of already sorted data.
double quantile_sorted(std::span<const double> sorted, double p);

struct MeanSe {
  double mean;
  double se;
};

/// Mean and standard error, accumulated in index order.
MeanSe mean_and_se(std::span<const double> xs);

/// Batch-means standard error of the mean of a correlated series.
double batch_means_se(std::span<const double> xs, std::size_t batches = 50);

/// Shortest decimal string that reads back to the same double.
std::string format_double(double x);

} // namespace mcert

#endif
