#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "dm/errors.hpp"
#include "dm/model.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace dm;

namespace {

ModelParams benchmark() {
  ModelParams p;
  p.r = 0.05;
  p.lambda = 0.2;
  p.mu = 0.02;
  p.sigma = 0.0;
  p.B = 10.0;
  p.x_star = 20.0;
  p.cost = {CostKind::LogBarrier, 1.0, 1.0};
  p.recovery = {RecoveryKind::PowerCap, 5.0, 1.0, 0.0};
  return p;
}

}  // namespace

TEST_CASE("cost evaluation, log barrier") {
  CostFunction L{CostKind::LogBarrier, 1.0, 1.0};
  CHECK(cost_eval(L, 0.0).value == 0.0);
  CHECK(cost_eval(L, 0.0).slope == doctest::Approx(1.0));
  CHECK(cost_eval(L, 0.5).value == doctest::Approx(0.693147).epsilon(1e-5));
  CHECK(cost_eval(L, 0.5).slope == doctest::Approx(2.0));
  CHECK(cost_eval(L, 0.99).slope == doctest::Approx(100.0));
  CHECK_THROWS_AS(cost_eval(L, -0.1), std::domain_error);
  CHECK_THROWS_AS(cost_eval(L, 1.0), std::domain_error);
}

TEST_CASE("cost evaluation, power barrier") {
  CostFunction L{CostKind::PowerBarrier, 2.0, 2.0};
  CHECK(cost_eval(L, 0.0).value == 0.0);
  CHECK(cost_eval(L, 0.0).slope == doctest::Approx(2.0));
  // L = c u (1-u)^-alpha, L' = c (1+(alpha-1)u)(1-u)^-(alpha+1)
  CHECK(cost_eval(L, 0.5).value == doctest::Approx(2.0 * 0.5 / 0.25));
  CHECK(cost_eval(L, 0.5).slope == doctest::Approx(2.0 * 1.5 / 0.125));
}

TEST_CASE("marginal-cost inversion") {
  CostFunction L{CostKind::LogBarrier, 1.0, 1.0};
  CHECK(cost_slope_inverse(L, 1.0) == 0.0);
  CHECK(cost_slope_inverse(L, 0.5) == 0.0);
  CHECK(cost_slope_inverse(L, 2.0) == doctest::Approx(0.5));
  CHECK(cost_slope_inverse(L, 6.0) == doctest::Approx(0.833333).epsilon(1e-5));
  CHECK_THROWS_AS(cost_slope_inverse(L, 0.0), std::domain_error);

  // Round trip across both families, including the bisection fallback.
  for (CostFunction f : {CostFunction{CostKind::LogBarrier, 2.0, 1.0},
                         CostFunction{CostKind::PowerBarrier, 1.0, 1.0},
                         CostFunction{CostKind::PowerBarrier, 0.5, 2.5}}) {
    for (double u = 0.0; u < 0.999; u += 0.0831) {
      double y = cost_eval(f, u).slope;
      CHECK(cost_slope_inverse(f, y) == doctest::Approx(u).epsilon(1e-9));
    }
  }
}

TEST_CASE("recovery families") {
  RecoveryFunction cap{RecoveryKind::PowerCap, 5.0, 1.0, 0.0};
  CHECK(recovery_eval(cap, 4.0).theta == 1.0);
  CHECK(recovery_eval(cap, 20.0).theta == doctest::Approx(0.25));
  CHECK(recovery_eval(cap, 20.0).theta_prime == doctest::Approx(-0.0125));
  CHECK_THROWS_AS(recovery_eval(cap, 0.0), std::domain_error);

  RecoveryFunction sup{RecoveryKind::LinearSupport, 0.0, 1.0, 40.0};
  CHECK(recovery_eval(sup, 50.0).theta == 0.0);
  CHECK(recovery_eval(sup, 20.0).theta == doctest::Approx(0.5));
  CHECK(recovery_eval(sup, 20.0).theta_prime == doctest::Approx(-0.025));

  CHECK(cap.capital_limit() == Extended::of(5.0));
  RecoveryFunction weak{RecoveryKind::PowerCap, 5.0, 0.5, 0.0};
  CHECK_FALSE(weak.capital_limit().finite);
  RecoveryFunction strong{RecoveryKind::PowerCap, 5.0, 2.0, 0.0};
  CHECK(strong.capital_limit() == Extended::of(0.0));
  CHECK(sup.capital_limit() == Extended::of(0.0));
}

TEST_CASE("feedback control from costate and price") {
  CostFunction L{CostKind::LogBarrier, 1.0, 1.0};
  CHECK(optimal_control(L, 0.5, 1.0) == 0.0);
  CHECK(optimal_control(L, 2.0, 1.0) == doctest::Approx(0.5));
  CHECK(optimal_control(L, 3.0, 0.5) == doctest::Approx(0.833333).epsilon(1e-5));

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> Uxi(0.0, 50.0), Up(0.25, 1.0);
  for (int i = 0; i < 200; ++i) {
    double xi = Uxi(rng), p = Up(rng);
    double u = optimal_control(L, xi, p);
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(optimal_control(L, xi * 1.1, p) >= u);        // monotone in xi
    CHECK(optimal_control(L, xi, std::min(1.0, p * 1.1)) <= u + 1e-12);
  }
}

TEST_CASE("Hamiltonian point values") {
  ModelParams P = benchmark();
  CHECK(hamiltonian(P, 3.0, 0.0, 0.7, SigmaMode::Deterministic).H == 0.0);
  auto lin = hamiltonian(P, 1.0, 0.5, 1.0, SigmaMode::Deterministic);
  CHECK(lin.H == doctest::Approx(0.015).epsilon(1e-9));
  auto h2 = hamiltonian(P, 1.0, 2.0, 1.0, SigmaMode::Deterministic);
  CHECK(h2.H == doctest::Approx(-0.246853).epsilon(1e-5));
  CHECK(h2.H_xi == doctest::Approx(-0.47).epsilon(1e-9));
  CHECK_THROWS_AS(hamiltonian(P, 1.0, -0.5, 1.0, SigmaMode::Deterministic),
                  std::domain_error);
  CHECK_THROWS_AS(hamiltonian(P, 1.0, 0.5, 0.0, SigmaMode::Deterministic),
                  std::domain_error);
}

TEST_CASE("Hamiltonian agrees with grid-minimization oracle") {
  ModelParams P = benchmark();
  P.sigma = 0.1;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> Ux(0.0, P.x_star), Uxi(0.0, 50.0),
      Up(P.theta_star(), 1.0);
  for (int i = 0; i < 200; ++i) {
    double x = Ux(rng), xi = Uxi(rng), p = Up(rng);
    for (SigmaMode m : {SigmaMode::Deterministic, SigmaMode::Stochastic}) {
      double Hg = oracle::grid_hamiltonian(P, x, xi, p, m);
      double Hr = oracle::grid_hamiltonian(P, x, xi, p, m, 10001, true);
      double H = hamiltonian(P, x, xi, p, m).H;
      CHECK(std::fabs(H - Hg) <= 1e-3);
      CHECK(std::fabs(H - Hr) <= 1e-8);
    }
  }
}

TEST_CASE("Hamiltonian shape: concavity, bounds, linear regime") {
  ModelParams P = benchmark();
  P.sigma = 0.1;
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> Ux(0.0, P.x_star), Uxi(0.0, 50.0),
      Up(P.theta_star(), 1.0);
  for (int i = 0; i < 300; ++i) {
    double x = Ux(rng), xi = Uxi(rng), p = Up(rng);
    for (SigmaMode m : {SigmaMode::Deterministic, SigmaMode::Stochastic}) {
      double s2 = m == SigmaMode::Stochastic ? P.sigma * P.sigma : 0.0;
      double a = (P.lambda + P.r) / p - P.lambda + s2 - P.mu;
      double H = hamiltonian(P, x, xi, p, m).H;
      double Hx = hamiltonian(P, x, xi, p, m).H_xi;
      // Concavity via the second difference.
      double d = 0.5;
      double Hm = hamiltonian(P, x, xi + d, p, m).H;
      double Hp2 = hamiltonian(P, x, xi + 2 * d, p, m).H;
      CHECK(Hp2 - 2 * Hm + H <= 1e-8);
      // Two-sided slope bounds.
      double lo = (((P.lambda + P.r) * x - 1.0) / p + (s2 - P.lambda - P.mu) * x);
      CHECK(H >= lo * xi - 1e-10);
      CHECK(H <= a * x * xi + 1e-10);
      CHECK(Hx >= lo - 1e-10);
      CHECK(Hx <= ((P.lambda + P.r) * x) / p + (s2 - P.lambda - P.mu) * x + 1e-10);
      // Exact linear branch below the control threshold.
      if (xi <= p * P.cost.slope_at_zero())
        CHECK(H == doctest::Approx(a * x * xi).epsilon(1e-12));
    }
  }
}

TEST_CASE("debt-holding stationary point") {
  ModelParams P = benchmark();
  StationaryPoint sp = stationary_point(P, 1.0, 1.0);
  CHECK(sp.u_sharp == doctest::Approx(0.03));
  CHECK(sp.xi_sharp.finite);
  CHECK(sp.xi_sharp.value == doctest::Approx(1.030928).epsilon(1e-5));
  CHECK(sp.H_max.finite);
  CHECK(sp.H_max.value == doctest::Approx(0.030459).epsilon(1e-4));

  StationaryPoint inf_sp = stationary_point(P, 5.0, 0.1);
  CHECK(inf_sp.u_sharp == doctest::Approx(1.14));
  CHECK_FALSE(inf_sp.H_max.finite);
  CHECK_FALSE(inf_sp.xi_sharp.finite);

  StationaryPoint zero = stationary_point(P, 0.0, 0.6);
  CHECK(zero.u_sharp == 0.0);
  CHECK(zero.H_max == Extended::of(0.0));
}

TEST_CASE("costate branches of the implicit value equation") {
  ModelParams P = benchmark();
  CHECK(branch_F(P, 1.0, 0.0, 1.0).F_minus == doctest::Approx(0.0));

  StationaryPoint sp = stationary_point(P, 1.0, 1.0);
  double Vmax = sp.H_max.value / P.r;
  BranchPair at_top = branch_F(P, 1.0, Vmax, 1.0);
  CHECK(at_top.F_minus == doctest::Approx(sp.xi_sharp.value).epsilon(1e-6));
  REQUIRE(at_top.F_plus.has_value());
  CHECK(*at_top.F_plus == doctest::Approx(sp.xi_sharp.value).epsilon(1e-6));

  BranchPair mid = branch_F(P, 1.0, 0.3, 1.0);
  CHECK(mid.F_minus == doctest::Approx(0.5).epsilon(1e-9));

  CHECK_THROWS_AS(branch_F(P, 1.0, Vmax * 1.01, 1.0), InfeasibleError);

  // Round trip and monotonicity along a V-chain.
  double prev_minus = -1.0, prev_plus = 1e300;
  for (double V = 0.05; V < Vmax; V += Vmax / 12.0) {
    BranchPair b = branch_F(P, 1.0, V, 1.0);
    double H = hamiltonian(P, 1.0, b.F_minus, 1.0, SigmaMode::Deterministic).H;
    CHECK(std::fabs(H - P.r * V) <= 1e-9);
    CHECK(b.F_minus >= prev_minus);
    prev_minus = b.F_minus;
    if (b.F_plus) {
      CHECK(*b.F_plus <= prev_plus);
      prev_plus = *b.F_plus;
      double Hp = hamiltonian(P, 1.0, *b.F_plus, 1.0,
                              SigmaMode::Deterministic).H;
      CHECK(std::fabs(Hp - P.r * V) <= 1e-8);
    }
  }

  // Bisection oracle agreement off the linear branch.
  double xi_oracle = oracle::bisect(
      [&](double xi) {
        return hamiltonian(P, 2.0, xi, 0.9, SigmaMode::Deterministic).H -
               P.r * 1.5;
      },
      0.0, stationary_point(P, 2.0, 0.9).xi_sharp.value);
  CHECK(branch_F(P, 2.0, 1.5, 0.9).F_minus ==
        doctest::Approx(xi_oracle).epsilon(1e-8));
}

TEST_CASE("price slope along the lower branch") {
  ModelParams P = benchmark();
  CHECK(slope_G_minus(P, 1.0, 0.2, 1.0) == doctest::Approx(0.0));
  CHECK(slope_G_minus(P, 1.0, 0.3, 0.8) ==
        doctest::Approx(-0.540541).epsilon(1e-5));
}

TEST_CASE("steady holding cost") {
  ModelParams P = benchmark();
  CHECK(steady_cost_W(P, 0.0) == Extended::of(0.0));
  Extended w = steady_cost_W(P, 10.0);
  REQUIRE(w.finite);
  CHECK(w.value == doctest::Approx(7.133498).epsilon(1e-5));
  CHECK_FALSE(steady_cost_W(P, 33.34).finite);
}

TEST_CASE("parameter validation") {
  ModelParams P = benchmark();
  CHECK_NOTHROW(P.validate());
  ModelParams bad = P;
  bad.mu = bad.r;
  CHECK_THROWS_AS(bad.validate(), std::domain_error);
  bad = P;
  bad.x_star = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::domain_error);
}
