#include "mcert/error.hpp"
#include "mcert/models.hpp"
#include "mcert/numerics.hpp"
#include "mcert/samplers.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

using namespace mcert;

namespace {

const auto fig2_h = gaussian_target(1.0, 0.5);
const auto std_q = SymmetricProposal::gaussian(1.0);
const auto V04 = LyapunovFunction::exp_abs(0.4);

double log_sqrt_2pi() { return 0.5 * std::log(2 * std::numbers::pi); }

double mean(const std::vector<double> &v) {
  double s = 0;
  for (double x : v)
    s += x;
  return s / v.size();
}

} // namespace

TEST_CASE("rwm_step: scripted accept and reject") {
  const auto h = gaussian_target(0.0, 1.0); // e^{-x^2/2}
  {
    ScriptedDraws d({1.0}, {0.5});
    CHECK(rwm_step(0.0, h, std_q, d) == 1.0);
  }
  {
    ScriptedDraws d({1.0}, {0.7});
    CHECK(rwm_step(0.0, h, std_q, d) == 0.0);
  }
  {
    // uphill move: accepted whatever U is
    ScriptedDraws d({-1.0}, {0.999999});
    CHECK(rwm_step(2.0, h, std_q, d) == 1.0);
  }
  ScriptedDraws empty({}, {});
  CHECK_THROWS_AS(rwm_step(0.0, h, std_q, empty), ConfigError);
}

TEST_CASE("rwm_step: non-finite proposal evaluations are rejected and counted") {
  UnnormalizedTarget h;
  h.log_h = [](double x) { return x > 0.5 ? std::nan("") : -x * x; };
  std::uint64_t bad = 0;
  ScriptedDraws d({1.0}, {0.1});
  CHECK(rwm_step(0.0, h, std_q, d, &bad) == 0.0);
  CHECK(bad == 1);
}

TEST_CASE("regen_iteration: hand trace of both branches") {
  // h = q / 2, so h(Z)/q(Z) = 0.5 for every Z and q/h = 2 caps at 1.
  const auto h = gaussian_target(0.0, 1.0, std::log(0.5) - log_sqrt_2pi());
  RegenState st;
  RegenCounters cnt;
  {
    ScriptedDraws d({0.3}, {0.1}); // U' = 0.1 < 0.5: leave the atom at Z
    const auto x = regen_iteration(st, h, std_q, d, cnt);
    REQUIRE(x.has_value());
    CHECK(*x == 0.3);
    CHECK_FALSE(st.in_atom);
    CHECK(cnt.regenerations == 1);
    CHECK(cnt.inner_steps == 1);
  }
  {
    // A = 0: Z, U for the RWM move, then U'; q/h = 1 so the chain enters the atom.
    ScriptedDraws d({0.2}, {0.5, 0.99});
    const auto x = regen_iteration(st, h, std_q, d, cnt);
    CHECK_FALSE(x.has_value());
    CHECK(st.in_atom);
    CHECK(cnt.inner_steps == 1); // the entry is folded into the next atom trial
    CHECK(cnt.loop_iterations == 2);
  }
  {
    ScriptedDraws d({1.0}, {0.6}); // U' = 0.6 > 0.5: stay in the atom
    CHECK_FALSE(regen_iteration(st, h, std_q, d, cnt).has_value());
    CHECK(st.in_atom);
    CHECK(cnt.inner_steps == 2);
  }
}

TEST_CASE("regen_iteration: A = 0 branch keeps Y when U' exceeds q/h") {
  // Gaussian example at Y near the mode: q(1)/h(1) = phi(1) ~ 0.242.
  RegenState st{false, 1.0};
  RegenCounters cnt;
  ScriptedDraws d({0.0}, {0.5, 0.9});
  const auto x = regen_iteration(st, fig2_h, std_q, d, cnt);
  REQUIRE(x.has_value());
  CHECK(*x == 1.0);
  CHECK_FALSE(st.in_atom);
}

TEST_CASE("regen: stall error when h/q is numerically zero") {
  const auto tiny = gaussian_target(1.0, 0.5, -800.0);
  RngStream r(1, 0);
  CHECK_THROWS_AS(regen_metropolis_run(1, tiny, std_q, r, V04), StallError);
}

TEST_CASE("regen: Gaussian example accepted fraction and stationary mean") {
  RngStream r(2024, 0);
  const auto t = regen_metropolis_run(200000, fig2_h, std_q, r, V04);
  CHECK(t.size() == 200000);
  CHECK(t.v_values.size() == t.size());
  CHECK(t.v_sq_values.size() == t.size());
  CHECK(t.total_inner_steps >= t.size());
  CHECK(t.accepted_fraction() == doctest::Approx(0.8305).epsilon(0.01));
  // Raw loop iterations give sqrt(pi)/(1+sqrt(pi)).
  const double z = std::sqrt(std::numbers::pi);
  CHECK(double(t.size()) / t.loop_iterations == doctest::Approx(z / (1 + z)).epsilon(0.01));
  CHECK(t.regeneration_count >= 1);
  const double se = batch_means_se(t.states);
  CHECK(std::abs(mean(t.states) - 1.0) < 3.5 * se);
}

TEST_CASE("regen: tours between regenerations are exchangeable") {
  RngStream r(77, 0);
  const auto t = regen_metropolis_run(400000, fig2_h, std_q, r, V04);
  // Split into tours at the regeneration marks; sum x and size per tour.
  std::vector<double> sums, lens;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (t.regeneration_marks[k] || sums.empty()) {
      sums.push_back(0);
      lens.push_back(0);
    }
    sums.back() += t.states[k];
    lens.back() += 1;
  }
  REQUIRE(sums.size() > 1000);
  const auto ratio = [&](int parity, double &se2) {
    double s = 0, l = 0, cnt = 0;
    for (std::size_t i = parity; i < sums.size(); i += 2) {
      s += sums[i];
      l += lens[i];
      ++cnt;
    }
    const double mu = s / l;
    double v = 0;
    for (std::size_t i = parity; i < sums.size(); i += 2)
      v += std::pow(sums[i] - mu * lens[i], 2);
    v /= (cnt - 1);
    se2 = v / (cnt * std::pow(l / cnt, 2));
    return mu;
  };
  double se_odd = 0, se_even = 0;
  const double odd = ratio(1, se_odd), even = ratio(0, se_even);
  CHECK(std::abs(odd - even) < 4 * std::sqrt(se_odd + se_even));
}

TEST_CASE("regen vs rejection: two-sample KS does not reject") {
  RngStream r1(5, 0), r2(5, 1);
  const auto a = regen_metropolis_run(100000, fig2_h, std_q, r1, V04);
  const double M = optimal_envelope(fig2_h, std_q);
  const auto b = rejection_sample(100000, fig2_h, std_q, M, r2, V04);
  // Thin the regenerative chain by 10 to reduce autocorrelation in the test.
  std::vector<double> thin;
  for (std::size_t k = 0; k < a.size(); k += 10)
    thin.push_back(a.states[k]);
  CHECK(ks_two_sample(thin, b.states).p_value > 0.001);
  CHECK(ks_two_sample(a.states, b.states).p_value > 0.001);
}

TEST_CASE("rejection: envelope, acceptance rate and mean") {
  const double M = optimal_envelope(fig2_h, std_q);
  CHECK(M == doctest::Approx(std::numbers::e * std::sqrt(2 * std::numbers::pi)).epsilon(1e-8));
  RngStream r(3, 0);
  const auto t = rejection_sample(1000000, fig2_h, std_q, M, r, V04);
  const double rate = double(t.size()) / t.total_inner_steps;
  CHECK(rate == doctest::Approx(1.0 / (std::numbers::e * std::numbers::sqrt2)).epsilon(0.01));
  const auto ms = mean_and_se(t.states);
  CHECK(std::abs(ms.mean - 1.0) < 3.5 * ms.se);
}

TEST_CASE("rejection: h = q with M = 1 accepts everything") {
  const auto h = gaussian_target(0.0, 1.0, -log_sqrt_2pi());
  RngStream r(4, 0);
  const auto t = rejection_sample(5000, h, std_q, 1.0 + 1e-12, r, V04);
  CHECK(t.size() == 5000);
  CHECK(t.total_inner_steps == 5000);
}

TEST_CASE("rejection: envelope violations report the offending x") {
  RngStream r(4, 0);
  try {
    (void)rejection_sample(10, fig2_h, std_q, 1.0, r, V04);
    FAIL("expected EnvelopeError");
  } catch (const EnvelopeError &e) {
    CHECK(std::isfinite(e.violating_x()));
  }
  // A violation outside the verification grid is caught at proposal time.
  UnnormalizedTarget wide;
  wide.log_h = [](double x) { return std::abs(x) > 2.5 ? 50.0 : 0.0; };
  wide.family = "test";
  const auto q_wide = SymmetricProposal::gaussian(1.0);
  try {
    UnnormalizedTarget only_far;
    only_far.log_h = [](double x) { return std::abs(x) > 60.0 ? 50.0 : -0.5 * x * x; };
    const auto big_q = SymmetricProposal::gaussian(200.0);
    (void)rejection_sample(100000, only_far, big_q, 1e3, r, V04);
    FAIL("expected EnvelopeError");
  } catch (const EnvelopeError &e) {
    CHECK(std::abs(e.violating_x()) > 60.0);
  }
  CHECK_THROWS_AS(rejection_sample(1, wide, q_wide, -1.0, r, V04), ConfigError);
}

TEST_CASE("ar1_step: scripted values and stationary variance") {
  ScriptedDraws d0({0.0}, {});
  CHECK(ar1_step(0.0, d0) == 0.0);
  ScriptedDraws d1({1.0}, {});
  CHECK(ar1_step(2.0, d1) == doctest::Approx(1.0 + std::sqrt(0.75)).epsilon(1e-15));
  CHECK(1.0 + std::sqrt(0.75) == doctest::Approx(1.8660).epsilon(1e-4));
  ChainSpec spec;
  spec.kind = ChainKind::ar1;
  spec.n = 1000000;
  spec.initial = std::nullopt;
  RngStream r(8, 0);
  const auto t = run_chain(spec, r);
  double s2 = 0;
  for (double x : t.states)
    s2 += x * x;
  CHECK(std::abs(s2 / t.size() - 1.0) < 0.01);
}

TEST_CASE("run_chain: structure for every kind") {
  for (auto kind : {ChainKind::rwm, ChainKind::regenerative, ChainKind::rejection, ChainKind::ar1}) {
    ChainSpec spec;
    spec.kind = kind;
    spec.target = fig2_h;
    spec.proposal = std_q;
    spec.V = V04;
    spec.n = 0;
    RngStream r(1, 0);
    const auto empty = run_chain(spec, r);
    CHECK(empty.size() == 0);
    CHECK(empty.total_inner_steps == 0);
    spec.n = 10000;
    const auto t = run_chain(spec, r);
    CHECK(t.size() == 10000);
    CHECK(t.v_values.size() == 10000);
    CHECK(t.v_sq_values.size() == 10000);
    CHECK(t.kind == kind);
    for (std::size_t k = 0; k < t.size(); k += 97) {
      CHECK(t.v_values[k] == V04(t.states[k]));
      CHECK(t.v_sq_values[k] == t.v_values[k] * t.v_values[k]);
    }
    if (kind == ChainKind::rwm || kind == ChainKind::ar1)
      CHECK(t.total_inner_steps == t.size());
    else
      CHECK(t.total_inner_steps >= t.size());
    if (kind == ChainKind::regenerative)
      CHECK(t.regeneration_count >= 1);
  }
  ChainSpec missing;
  missing.kind = ChainKind::rwm;
  missing.n = 3;
  RngStream r(1, 0);
  CHECK_THROWS_AS(run_chain(missing, r), ConfigError);
}

TEST_CASE("run_chain: identical seeds give bit-identical trajectories") {
  for (auto kind : {ChainKind::rwm, ChainKind::regenerative, ChainKind::rejection, ChainKind::ar1}) {
    ChainSpec spec;
    spec.kind = kind;
    spec.target = fig2_h;
    spec.proposal = std_q;
    spec.V = V04;
    spec.n = 5000;
    RngStream a(99, 3), b(99, 3), c(99, 4);
    const auto ta = run_chain(spec, a), tb = run_chain(spec, b), tc = run_chain(spec, c);
    CHECK(ta.states == tb.states);
    CHECK(ta.total_inner_steps == tb.total_inner_steps);
    CHECK(ta.states != tc.states);
  }
}

TEST_CASE("rwm: equilibrium mean and variance of the Gaussian example chain") {
  ChainSpec spec;
  spec.kind = ChainKind::rwm;
  spec.target = fig2_h;
  spec.proposal = std_q;
  spec.V = V04;
  spec.n = 1000000;
  spec.burn_in = 100000;
  RngStream r(31, 0);
  const auto t = run_chain(spec, r);
  const double m = mean(t.states);
  CHECK(std::abs(m - 1.0) < 3.5 * batch_means_se(t.states));
  std::vector<double> sq(t.size());
  for (std::size_t k = 0; k < t.size(); ++k)
    sq[k] = (t.states[k] - 1.0) * (t.states[k] - 1.0);
  CHECK(std::abs(mean(sq) - 0.5) < 3.5 * batch_means_se(sq));
}

TEST_CASE("chain kind names") {
  for (auto k : {ChainKind::rwm, ChainKind::regenerative, ChainKind::rejection, ChainKind::ar1})
    CHECK(chain_kind_from_string(to_string(k)) == k);
  CHECK(to_string(ChainKind::regenerative) == "regen");
  CHECK(to_string(ChainKind::rejection) == "reject");
  CHECK_THROWS_AS(chain_kind_from_string("gibbs"), ConfigError);
}
