#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <vector>

#include "dm/analysis.hpp"
#include "dm/errors.hpp"
#include "dm/model.hpp"
#include "dm/stoch_solver.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace dm;

namespace {

ModelParams benchmark(double x_star, double sigma) {
  ModelParams p;
  p.r = 0.05;
  p.lambda = 0.2;
  p.mu = 0.02;
  p.sigma = sigma;
  p.B = 10.0;
  p.x_star = x_star;
  p.cost = {CostKind::LogBarrier, 1.0, 1.0};
  p.recovery = {RecoveryKind::PowerCap, 5.0, 1.0, 0.0};
  return p;
}

// Small domain with fast reaction rates; relaxation reaches steadiness in a
// few thousand steps, which keeps the refinement studies affordable.
ModelParams fast_config() {
  ModelParams p;
  p.r = 0.3;
  p.lambda = 0.2;
  p.mu = 0.02;
  p.sigma = 0.3;
  p.B = 5.0;
  p.x_star = 10.0;
  p.cost = {CostKind::LogBarrier, 1.0, 1.0};
  p.recovery = {RecoveryKind::PowerCap, 5.0, 1.0, 0.0};
  return p;
}

}  // namespace

TEST_CASE("config validation rejects malformed inputs") {
  StochSolverConfig cfg;
  cfg.n_grid = 32;
  CHECK_THROWS_AS(cfg.validate(), std::domain_error);
  cfg.n_grid = 128;
  cfg.eps_schedule = {1e-3, 1e-3};  // not strictly decreasing
  CHECK_THROWS_AS(cfg.validate(), std::domain_error);
  cfg.eps_schedule = {1e-2, 1e-3};
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("parabolic step: boundaries pinned, box preserved from linear data") {
  ModelParams P = benchmark(20.0, 0.1);
  StochSolverConfig cfg;
  cfg.n_grid = 64;
  double eps = 1e-2 * 0.5 * P.sigma * P.sigma * P.x_star * P.x_star;
  ParabolicState st = initial_state(P, cfg, eps);

  CHECK(st.V.front() == 0.0);
  CHECK(st.V.back() == doctest::Approx(P.B));
  CHECK(st.p.front() == 1.0);
  CHECK(st.p.back() == doctest::Approx(P.theta_star()));
  CHECK(invariance_check(st, P).all_ok());

  const double dt = 2e-3;
  for (int k = 0; k < 400; ++k) {
    st = parabolic_step(st, P, cfg, dt);
    CHECK(st.V.front() == 0.0);
    CHECK(st.V.back() == doctest::Approx(P.B));
    CHECK(st.p.front() == 1.0);
    CHECK(st.p.back() == doctest::Approx(P.theta_star()));
    InvarianceReport rep = invariance_check(st, P);
    CHECK(rep.box_ok);
  }
  CHECK(st.t == doctest::Approx(400 * dt));
}

TEST_CASE("parabolic step: oversized step is rejected with a usable hint") {
  ModelParams P = benchmark(20.0, 0.1);
  StochSolverConfig cfg;
  cfg.n_grid = 64;
  ParabolicState st = initial_state(P, cfg, 0.02);
  try {
    parabolic_step(st, P, cfg, 10.0);
    FAIL("expected StepSizeError");
  } catch (const StepSizeError& e) {
    CHECK(e.suggested_dt > 0.0);
    CHECK(e.suggested_dt < 10.0);
    // The hint itself must be acceptable.
    CHECK_NOTHROW(parabolic_step(st, P, cfg, e.suggested_dt));
  }
}

TEST_CASE("zero-drift hook: relaxation reaches the linear two-point solutions") {
  // With the nonlinear terms forced off and sigma = 0 the fixed point of the
  // iteration is the centered-difference solution of
  //   eps V'' - r V = 0,            V(0) = 0, V(x*) = B,
  //   eps p'' + (r+la)(1 - p) = 0,  p(0) = 1, p(x*) = theta(x*),
  // which a dense direct solve reproduces independently.
  ModelParams P = benchmark(20.0, 0.0);
  StochSolverConfig cfg;
  cfg.n_grid = 64;
  cfg.force_zero_hamiltonian = true;
  const double eps = 0.5;
  const int n = cfg.n_grid;            // node count; h spans n-1 cells
  const int m = n - 2;                 // interior unknowns
  const double h = P.x_star / (n - 1);

  ParabolicState st = initial_state(P, cfg, eps);
  const double dt = 0.5;
  for (int k = 0; k < 20000; ++k) {
    st = parabolic_step(st, P, cfg, dt);
    if (st.last_update < 1e-14) break;
  }
  REQUIRE(st.last_update < 1e-13);

  const double w = eps / (h * h);
  const double rl = P.r + P.lambda;
  std::vector<std::vector<double>> Ap(m, std::vector<double>(m, 0.0));
  std::vector<std::vector<double>> Av(m, std::vector<double>(m, 0.0));
  std::vector<double> bp(m, -rl), bv(m, 0.0);
  for (int i = 0; i < m; ++i) {
    Ap[i][i] = -(2.0 * w + rl);
    Av[i][i] = -(2.0 * w + P.r);
    if (i > 0) Ap[i][i - 1] = Av[i][i - 1] = w;
    if (i < m - 1) Ap[i][i + 1] = Av[i][i + 1] = w;
  }
  bp[0] -= w * 1.0;                // p(0) = 1
  bp[m - 1] -= w * P.theta_star(); // p(x*) = theta(x*)
  bv[m - 1] -= w * P.B;            // V(x*) = B
  std::vector<double> p_ref = oracle::dense_solve(Ap, bp);
  std::vector<double> v_ref = oracle::dense_solve(Av, bv);
  for (int i = 1; i + 1 < n; ++i) {
    CHECK(std::fabs(st.p[i] - p_ref[i - 1]) < 1e-8);
    CHECK(std::fabs(st.V[i] - v_ref[i - 1]) < 1e-8);
  }
}

TEST_CASE("solver hypotheses: positive volatility and recovery required") {
  StochSolverConfig cfg;
  cfg.n_grid = 64;
  ModelParams P = benchmark(20.0, 0.0);
  CHECK_THROWS_AS(solve_stochastic(P, cfg), HypothesisError);

  ModelParams Q = benchmark(60.0, 0.1);
  Q.recovery = {RecoveryKind::LinearSupport, 0.0, 1.0, 40.0};  // theta(x*) = 0
  CHECK_THROWS_AS(solve_stochastic(Q, cfg), HypothesisError);
}

TEST_CASE("converged solve: exact boundary data and invariant domain") {
  ModelParams P = benchmark(20.0, 0.1);
  StochSolverConfig cfg;
  cfg.n_grid = 128;
  EquilibriumSolution sol = solve_stochastic(P, cfg);

  CHECK(sol.mode == SolveMode::Stochastic);
  CHECK(sol.V.front() == 0.0);
  CHECK(sol.V.back() == P.B);
  CHECK(sol.p.front() == 1.0);
  CHECK(sol.p.back() == doctest::Approx(P.theta_star()));

  InvarianceReport rep = invariance_check(sol, P);
  CHECK(rep.all_ok());
  CHECK(rep.box_violation <= 1e-12);
  CHECK(rep.V_monotone_violation <= 1e-12);
  CHECK(rep.p_monotone_violation <= 1e-12);

  for (std::size_t i = 0; i < sol.size(); ++i) {
    CHECK(sol.u[i] >= 0.0);
    CHECK(sol.u[i] < 1.0);
  }
  CHECK(sol.diagnostics.count("eps_final") == 1);
  CHECK(sol.diagnostics.count("total_steps") == 1);
  CHECK(sol.diagnostics.at("projected_nodes_final") == 0.0);
}

TEST_CASE("wide benchmark lies inside the analytic envelope pair") {
  ModelParams P = benchmark(100.0, 0.1);
  StochSolverConfig cfg;
  cfg.n_grid = 128;
  EquilibriumSolution sol = solve_stochastic(P, cfg);
  EnvelopeSet env = stochastic_envelope(P, sol.xs);
  for (std::size_t i = 0; i < sol.size(); ++i) {
    CHECK(env.V2[i] <= sol.V[i] + 1e-6 * P.B);
    CHECK(sol.V[i] <= env.V1[i] + 1e-6 * P.B);
    CHECK(env.p1[i] <= sol.p[i] + 1e-6);
    CHECK(sol.p[i] <= env.p2[i] + 1e-6);
  }
}

TEST_CASE("regularization continuation: near-equal tail levels agree") {
  ModelParams P = fast_config();
  double base = 0.5 * P.sigma * P.sigma * P.x_star * P.x_star;
  StochSolverConfig cfg;
  cfg.n_grid = 128;
  cfg.steady_tol = 1e-10;
  cfg.dt = 0.04 * (P.x_star / cfg.n_grid);
  cfg.eps_schedule = {1e-3 * base, 1.05e-10 * base, 1e-10 * base};
  EquilibriumSolution sol = solve_stochastic(P, cfg);
  CHECK(sol.diagnostics.at("richardson_delta_V") <= 10.0 * cfg.steady_tol);
  CHECK(sol.diagnostics.at("richardson_delta_p") <= 10.0 * cfg.steady_tol);
}

TEST_CASE("residual: constant data gives zero, refinement tightens it") {
  ModelParams P = fast_config();

  EquilibriumSolution flat;
  flat.mode = SolveMode::Stochastic;
  for (int i = 0; i <= 64; ++i) {
    flat.xs.push_back(P.x_star * i / 64.0);
    flat.V.push_back(0.0);
    flat.p.push_back(1.0);
    flat.u.push_back(0.0);
  }
  CHECK(stoch_residual(flat, P) == doctest::Approx(0.0));

  double res[2];
  int idx = 0;
  for (int n : {512, 1024}) {
    StochSolverConfig cfg;
    cfg.n_grid = n;
    cfg.steady_tol = 1e-7;
    cfg.dt = 0.04 * (P.x_star / n);
    res[idx++] = solve_stochastic(P, cfg).residual;
  }
  CHECK(res[1] <= 0.5 * res[0]);
}

TEST_CASE("steady state solves the regularized discrete system") {
  ModelParams P = fast_config();
  StochSolverConfig cfg;
  cfg.n_grid = 64;
  const double eps = 0.3;
  const double dt = 5e-3;
  const double tol = 1e-9;
  ParabolicState st = initial_state(P, cfg, eps);
  long k = 0;
  for (; k < 2000000; ++k) {
    st = parabolic_step(st, P, cfg, dt);
    if (st.last_update < tol * dt) break;
  }
  REQUIRE(k < 2000000);
  // The fixed point is independent of the step size, so re-stepping with a
  // different dt measures the discrete residual of the regularized system.
  ParabolicState probe = parabolic_step(st, P, cfg, dt / 3.0);
  CHECK(probe.last_update / (dt / 3.0) <= 5.0 * tol);
}

TEST_CASE("envelope functions carry the expected one-sided residuals") {
  ModelParams P = benchmark(100.0, 0.1);
  const int n = 400;
  const double h = P.x_star / n;
  std::vector<double> xs(n + 1);
  for (int i = 0; i <= n; ++i) xs[i] = h * i;
  EnvelopeSet env = stochastic_envelope(P, xs);

  CHECK(std::fabs(env.x2 - 71.666666666666667) < 1e-9);
  CHECK(std::fabs(env.p1[200] - 0.095070699017425906) < 1e-9);
  CHECK(std::fabs(env.V1[200] - 9.9032606362620208) < 1e-8);

  const double x_flat = 1.0 / (P.r + P.lambda);
  const double s2 = 0.5 * P.sigma * P.sigma;
  const double slack = 1e-10;
  for (int i = 1; i < n; ++i) {
    double x = xs[i];
    auto D = [&](const std::vector<double>& f) {
      return (f[i + 1] - f[i - 1]) / (2 * h);
    };
    auto D2 = [&](const std::vector<double>& f) {
      return (f[i + 1] - 2 * f[i] + f[i - 1]) / (h * h);
    };
    if (std::fabs(x - x_flat) > 3 * h) {
      // (V1, p1): V1 a supersolution of the value equation, p1 a subsolution
      // of the price equation.
      double xi = std::max(0.0, D(env.V1));
      HamiltonianEval He = hamiltonian(P, x, xi, env.p1[i], SigmaMode::Stochastic);
      CHECK(P.r * env.V1[i] - He.H - s2 * x * x * D2(env.V1) >= -slack);
      CHECK((P.r + P.lambda) * (env.p1[i] - 1.0) - He.H_xi * D(env.p1) -
                s2 * x * x * D2(env.p1) <=
            slack);
    }
    if (std::fabs(x - env.x2) > 3 * h) {
      // (V2, p2): V2 a subsolution, p2 a supersolution (equality below x2).
      double xi = std::max(0.0, D(env.V2));
      HamiltonianEval He = hamiltonian(P, x, xi, env.p2[i], SigmaMode::Stochastic);
      CHECK(P.r * env.V2[i] - He.H - s2 * x * x * D2(env.V2) <= slack);
      double rp = (P.r + P.lambda) * (env.p2[i] - 1.0) - He.H_xi * D(env.p2) -
                  s2 * x * x * D2(env.p2);
      if (x < env.x2)
        CHECK(std::fabs(rp) <= slack);
      else
        CHECK(rp >= -slack);
    }
  }
}

TEST_CASE("invariance report: clean data passes, planted defects are flagged") {
  ModelParams P = benchmark(20.0, 0.1);
  StochSolverConfig cfg;
  cfg.n_grid = 64;
  ParabolicState st = initial_state(P, cfg, 0.02);
  CHECK(invariance_check(st, P).all_ok());

  std::vector<double> V = st.V, p = st.p;
  V[20] = P.B + 1.0;
  InvarianceReport rep = invariance_check(V, p, P);
  CHECK_FALSE(rep.box_ok);
  CHECK(rep.box_violation == doctest::Approx(1.0));

  V = st.V;
  V[20] = V[21] + 0.5;  // break monotonicity without leaving the box
  rep = invariance_check(V, p, P);
  CHECK_FALSE(rep.V_monotone);
  CHECK(rep.V_monotone_violation >= 0.5 - 1e-12);

  p = st.p;
  p[10] = p[9] + 0.25;
  rep = invariance_check(st.V, p, P);
  CHECK_FALSE(rep.p_monotone);
}
