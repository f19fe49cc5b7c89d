#include "mcert/concentration.hpp"
#include "mcert/constants.hpp"
#include "mcert/error.hpp"
#include "mcert/numerics.hpp"
#include "mcert/parallel.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

using namespace mcert;

namespace {

DriftCertificate cert_with_K(double K) {
  DriftCertificate c;
  c.beta = 0.5;
  c.b = 1.0;
  c.R = 10.0;
  c.c_R = 0.5;
  c.beta_bar = 0.6;
  c.K = K;
  c.K_variant = K;
  return c;
}

Trajectory trajectory_with_v(const std::vector<double> &v) {
  Trajectory t;
  for (double x : v) {
    t.states.push_back(0.0);
    t.v_values.push_back(x);
    t.v_sq_values.push_back(x * x);
    t.regeneration_marks.push_back(false);
  }
  return t;
}

Trajectory ar1_run(std::size_t n, RngStream &rng) {
  ChainSpec spec;
  spec.kind = ChainKind::ar1;
  spec.n = n;
  return run_chain(spec, rng);
}

} // namespace

TEST_CASE("v_norm: closed-form suprema") {
  const auto grid = linspace(-20, 20, 4001);
  const auto V2 = LyapunovFunction::one_plus_square();
  CHECK(v_norm([&](double x) { return V2(x); }, V2, grid).value == doctest::Approx(1.0).epsilon(1e-15));
  const auto r = v_norm([](double x) { return x; }, V2, grid);
  CHECK(r.value == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::abs(std::abs(r.argmax) - 1.0) < 1e-5);
  CHECK_FALSE(r.boundary_warning);
  const auto Ve = LyapunovFunction::exp_abs(0.4);
  const auto re = v_norm([](double x) { return x; }, Ve, grid);
  CHECK(re.value == doctest::Approx(2.5 / std::numbers::e).epsilon(1e-12));
  CHECK(std::abs(std::abs(re.argmax) - 2.5) < 1e-5);
}

TEST_CASE("v_norm: boundary supremum raises the warning") {
  const auto V2 = LyapunovFunction::one_plus_square();
  const auto grid = linspace(-5, 5, 101);
  CHECK(v_norm([](double x) { return x * x * x; }, V2, grid).boundary_warning);
  CHECK_THROWS_AS(v_norm([](double x) { return x; }, V2, std::vector<double>{}), ConfigError);
}

TEST_CASE("sigma_hat_sq: arithmetic examples") {
  const auto a = sigma_hat_sq(trajectory_with_v({1, 1, 1, 1, 1}), cert_with_K(1.0), 1.0);
  CHECK(a.sigma_hat_sq == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(a.epsilon_n_policy == "zero");
  CHECK(a.n == 5);
  const auto b = sigma_hat_sq(trajectory_with_v({1, 2, 2, 4}), cert_with_K(2.0), 3.0);
  CHECK(b.sigma_hat_sq == doctest::Approx(100.0).epsilon(1e-15));
  CHECK(b.K_used == 2.0);
  CHECK(b.eq_v2_proposal == 3.0);
  CHECK_THROWS_AS(sigma_hat_sq(Trajectory{}, cert_with_K(1.0), 1.0), ConfigError);
}

TEST_CASE("sigma_hat_sq: AR(1) stationary trajectory matches Gaussian moments") {
  RngStream rng(11, 0);
  const auto t = ar1_run(1000000, rng);
  const double K = 3.0, eq_v2 = 67.0 / 16.0;
  const auto s = sigma_hat_sq(t, cert_with_K(K), eq_v2);
  CHECK(s.sigma_hat_sq / (K * K * (1 + eq_v2) * 6.0) == doctest::Approx(1.0).epsilon(0.02));
  double sum = 0;
  for (double v : t.v_sq_values)
    sum += v;
  CHECK(s.sigma_hat_sq == doctest::Approx(K * K * (1 + eq_v2) / t.size() * sum).epsilon(1e-10));
}

TEST_CASE("confidence_halfwidth: examples and limits") {
  CHECK(confidence_halfwidth(100, 1, 1, 2, 1) ==
        doctest::Approx(0.2 * std::sqrt(2 * (1 + 0.5 * std::log(2.0)))).epsilon(1e-14));
  CHECK(confidence_halfwidth(100, 1, 1, 2, 1) == doctest::Approx(0.3282).epsilon(1e-4));
  CHECK(confidence_halfwidth(100, 1.5, 1e-15, 2, 0.3) ==
        doctest::Approx(2 * 1.5 * std::sqrt(0.3) / 10).epsilon(1e-12));
  const double w1 = confidence_halfwidth(400, 1.3, 2.0, 2.5, 0.1);
  const double w2 = confidence_halfwidth(800, 1.3, 2.0, 2.5, 0.1);
  CHECK(w1 / w2 == doctest::Approx(std::numbers::sqrt2).epsilon(1e-14));
  CHECK_THROWS_AS(confidence_halfwidth(100, 1, 1, std::numbers::sqrt2, 1), ConfigError);
  CHECK_THROWS_AS(confidence_halfwidth(100, 1, 1, 1.0, 1), ConfigError);
  CHECK_THROWS_AS(confidence_halfwidth(100, 1, 1, 2, 0), ConfigError);
  CHECK_THROWS_AS(confidence_halfwidth(0, 1, 1, 2, 1), ConfigError);
}

TEST_CASE("confidence_halfwidth: monotone in variance and x, interior minimum in y") {
  double prev = 0;
  for (double s2 = 0.01; s2 < 100; s2 *= 1.5) {
    const double w = confidence_halfwidth(1000, 1, s2, 2, 0.5);
    CHECK(w > prev);
    prev = w;
  }
  prev = 0;
  for (double x = 1.5; x < 6; x += 0.25) {
    const double w = confidence_halfwidth(1000, 1, 3, x, 0.5);
    CHECK(w > prev);
    prev = w;
  }
  std::vector<double> ws;
  std::vector<double> ys;
  for (double y = 1e-6; y < 1e4; y *= 1.2) {
    ys.push_back(y);
    ws.push_back(confidence_halfwidth(1000, 1, 5, 2, y));
  }
  const auto it = std::min_element(ws.begin(), ws.end());
  CHECK(it != ws.begin());
  CHECK(it + 1 != ws.end());
}

TEST_CASE("confidence_report: default y and nominal coverage") {
  RngStream rng(3, 0);
  const auto t = ar1_run(1000, rng);
  const auto cert = toy_state_set_certificate(1.7);
  const auto r = confidence_report(t, [](double x) { return x; }, 0.5, cert, 67.0 / 16.0, 2.0);
  CHECK(r.y_tune == doctest::Approx(r.variance.sigma_hat_sq / 1000).epsilon(1e-15));
  CHECK(r.nominal_coverage == doctest::Approx(1 - std::exp(-2.0)).epsilon(1e-15));
  CHECK(r.half_width > 0);
  CHECK(r.n == 1000);
  double m = 0;
  for (double x : t.states)
    m += x;
  CHECK(r.estimate == doctest::Approx(m / 1000).epsilon(1e-14));
}

TEST_CASE("confidence interval: AR(1) coverage is at least nominal") {
  const auto cert = toy_state_set_certificate(1.7);
  const std::size_t reps = 2000;
  std::size_t covered = 0;
  for (std::size_t i = 0; i < reps; ++i) {
    RngStream rng(17, i);
    const auto t = ar1_run(1000, rng);
    const auto r = confidence_report(t, [](double x) { return x; }, 0.5, cert, 67.0 / 16.0, 2.0);
    covered += std::abs(r.estimate) <= r.half_width;
  }
  const double p = nominal_coverage(2.0);
  const double se = std::sqrt(p * (1 - p) / reps);
  CHECK(double(covered) / reps >= p - 3 * se);
}

TEST_CASE("over-estimator SLLN for the AR(1) chain") {
  RngStream rng(23, 0);
  const std::size_t n = 1000000;
  const auto t = ar1_run(n, rng);
  double s = 6.0 + t.v_sq_values[0];
  for (std::size_t k = 1; k < n; ++k)
    s += ar1_pv_sq(t.states[k - 1]) + t.v_sq_values[k];
  CHECK(std::abs(s / (2.0 * n) / 6.0 - 1.0) < 0.01);
}

TEST_CASE("ar1_pv_sq: closed form against Gaussian quadrature") {
  for (double x : {0.0, 0.7, -2.0, 5.0}) {
    const double q = integrate(
                         [&](double z) {
                           const double y = 0.5 * x + std::sqrt(0.75) * z;
                           return (1 + y * y) * (1 + y * y) * std::exp(-0.5 * z * z);
                         },
                         -40, 40, 1e-10)
                         .value /
                     std::sqrt(2 * std::numbers::pi);
    CHECK(ar1_pv_sq(x) == doctest::Approx(q).epsilon(1e-10));
  }
  CHECK(ar1_pv_sq(0.0) == ar1_second_moment_factor);
}

TEST_CASE("verify_mres_mc: lambda = 0 is exactly one") {
  const auto r = verify_mres_mc(ar1_mres_case(20, 1.0), 0.0, 100, 1);
  CHECK(r.estimate == 1.0);
  CHECK(r.se == 0.0);
  CHECK(r.pass);
}

TEST_CASE("verify_mres_mc: iid, AR(1) and regenerative cases pass") {
  for (double lambda : {0.005, 0.01, 0.1}) {
    const auto a = verify_mres_mc(iid_mres_case(20), lambda, 20000, 2);
    CHECK(a.pass);
    CHECK(std::abs(a.mean_f) < 5 * a.mean_f_se + 1e-12);
    CHECK(verify_mres_mc(ar1_mres_case(50, toy_state_set_certificate(1.7).K), lambda, 20000, 3).pass);
  }
  const auto h = gaussian_target(1.0, 0.5);
  const auto q = SymmetricProposal::gaussian(1.0);
  const auto reg = verify_mres_mc(regen_mres_case(20, 1.0, h, q, 0.4), 0.01, 20000, 4);
  CHECK(reg.pass);
  CHECK(reg.log_estimate == doctest::Approx(std::log(reg.estimate)).epsilon(1e-9));
  // With the certified K the exponent underflows; the log stays finite.
  const auto big = verify_mres_mc(regen_mres_case(20, 4432.0, h, q, 0.4), 0.01, 2000, 5);
  CHECK(big.pass);
  CHECK(std::isfinite(big.log_estimate));
  CHECK(big.log_estimate < -700);
  CHECK(reg.mean_f / 20 == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("verify_mres_mc: result is independent of thread count") {
  const auto c = ar1_mres_case(30, 1.0);
  thread_count_setting() = 1;
  const auto one = verify_mres_mc(c, 0.05, 3000, 9);
  thread_count_setting() = 4;
  const auto four = verify_mres_mc(c, 0.05, 3000, 9);
  thread_count_setting() = 0;
  CHECK(one.estimate == four.estimate);
  CHECK(one.se == four.se);
}

TEST_CASE("self_normalized_stat: structure and tails") {
  const auto t = trajectory_with_v({2, 2, 2, 2});
  const std::vector<double> pv(4, 4.0);
  // denominator sqrt(4 (4 + 4 + 8)) = 8
  CHECK(self_normalized_stat(t, pv, 4.0, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
  const auto one = trajectory_with_v({3});
  CHECK(std::isfinite(self_normalized_stat(one, std::vector<double>{9.0}, 9.0, 2.0)));
  CHECK_THROWS_AS(self_normalized_stat(one, pv, 1.0, 0.0), ConfigError);

  const std::size_t reps = 10000, n = 100;
  std::vector<double> ys(reps);
  for (std::size_t i = 0; i < reps; ++i) {
    RngStream rng(41, i);
    const auto tr = ar1_run(n, rng);
    std::vector<double> pvs(n);
    pvs[0] = 6.0;
    for (std::size_t k = 1; k < n; ++k)
      pvs[k] = ar1_pv_sq(tr.states[k - 1]);
    ys[i] = std::abs(self_normalized_stat(tr, pvs, 6.0, 2.0 * n)); // E[1 + X^2] = 2
  }
  std::sort(ys.begin(), ys.end());
  CHECK(quantile_sorted(ys, 0.99) <= 4.0);
}

TEST_CASE("replications_needed and aggregate") {
  CHECK(replications_needed(AggregationMode::mean, 0.01, 0.1) == 2);
  CHECK(replications_needed(AggregationMode::median, 0.01, 0.1) == 10);
  // log(0.0999)/log(0.1) = 1.0004, so the smallest integer is 2
  CHECK(replications_needed(AggregationMode::mean, 0.0999, 0.1) == 2);
  CHECK(replications_needed(AggregationMode::mean, 0.001, 0.1) == 3);
  CHECK_THROWS_AS(replications_needed(AggregationMode::median, 0.01, 0.5), ConfigError);
  CHECK_THROWS_AS(replications_needed(AggregationMode::mean, 0.2, 0.1), ConfigError);
  CHECK(aggregation_mode_from_string("median") == AggregationMode::median);
  CHECK_THROWS_AS(aggregation_mode_from_string("mode"), ConfigError);

  const std::vector<double> single{3.0}, three{1, 2, 10}, four{4, 1, 3, 2};
  CHECK(aggregate(single, AggregationMode::mean) == 3.0);
  CHECK(aggregate(single, AggregationMode::median) == 3.0);
  CHECK(aggregate(three, AggregationMode::median) == 2.0);
  CHECK(aggregate(three, AggregationMode::mean) == doctest::Approx(13.0 / 3.0).epsilon(1e-15));
  CHECK(aggregate(four, AggregationMode::median) == 2.0); // lower middle
  CHECK_THROWS_AS(aggregate(std::vector<double>{}, AggregationMode::mean), ConfigError);
  const auto plan = make_aggregation_plan(AggregationMode::median, 0.01, 0.1);
  CHECK(plan.m == 10);
}

TEST_CASE("stationary_expectation: Gaussian example target moments") {
  const auto h = gaussian_target(1.0, 0.5);
  CHECK(stationary_expectation(h, [](double x) { return x; }) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(stationary_expectation(h, [](double x) { return x * x; }) == doctest::Approx(1.5).epsilon(1e-10));
}
