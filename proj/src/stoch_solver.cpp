#include "dm/stoch_solver.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dm/errors.hpp"

namespace dm {

namespace {

// Solve (diag, sub = lower, sup = upper) * x = rhs in place; rhs becomes x.
void thomas_solve(std::vector<double>& sub, std::vector<double>& diag,
                  std::vector<double>& sup, std::vector<double>& rhs) {
  const std::size_t n = diag.size();
  for (std::size_t i = 1; i < n; ++i) {
    double m = sub[i] / diag[i - 1];
    diag[i] -= m * sup[i - 1];
    rhs[i] -= m * rhs[i - 1];
  }
  rhs[n - 1] /= diag[n - 1];
  for (std::size_t i = n - 1; i-- > 0;)
    rhs[i] = (rhs[i] - sup[i] * rhs[i + 1]) / diag[i];
}

HamiltonianEval eval_H(const ModelParams& params, double x, double xi,
                       double p, bool zero_hook) {
  if (zero_hook) return {0.0, 0.0};
  return hamiltonian(params, x, xi, p, SigmaMode::Stochastic);
}

double auto_dt(const ParabolicState& state, const ModelParams& params,
               const StochSolverConfig& cfg) {
  const std::size_t n = state.xs.size();
  const double h = state.xs[1] - state.xs[0];
  double smax = 0.0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    double xi = std::max(0.0, (state.V[i + 1] - state.V[i - 1]) / (2.0 * h));
    HamiltonianEval he = eval_H(params, state.xs[i], xi, state.p[i],
                                cfg.force_zero_hamiltonian);
    smax = std::max(smax, std::fabs(he.H_xi));
  }
  double sx = params.sigma * params.x_star;
  double dt_diff = 0.25 * h * h / (state.eps + 0.5 * sx * sx);
  if (smax <= 0.0) return dt_diff;
  return std::min(dt_diff, 0.45 * h / smax);
}

}  // namespace

ParabolicState initial_state(const ModelParams& params,
                             const StochSolverConfig& cfg, double eps) {
  ParabolicState st;
  st.eps = eps;
  const int n = cfg.n_grid;
  const double theta = params.theta_star();
  st.xs.resize(n);
  st.V.resize(n);
  st.p.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = params.x_star * static_cast<double>(i) / (n - 1);
    st.xs[i] = x;
    st.V[i] = params.B * x / params.x_star;
    st.p[i] = 1.0 - (1.0 - theta) * x / params.x_star;
  }
  st.xs.back() = params.x_star;
  return st;
}

ParabolicState parabolic_step(const ParabolicState& state,
                              const ModelParams& params,
                              const StochSolverConfig& cfg, double dt) {
  const std::size_t n = state.xs.size();
  const double h = state.xs[1] - state.xs[0];
  const double theta = params.theta_star();
  const double r = params.r, lam = params.lambda;

  std::vector<double> rhsV(n), rhsp(n);
  double smax = 0.0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double x = state.xs[i];
    const double p = state.p[i];
    // Probe the characteristic speed with a centered slope, then commit to
    // the upwind-sided slope that matches its sign.
    double xi_c = std::max(0.0, (state.V[i + 1] - state.V[i - 1]) / (2.0 * h));
    double speed =
        eval_H(params, x, xi_c, p, cfg.force_zero_hamiltonian).H_xi;
    double xi_up, dp_up;
    if (speed >= 0.0) {
      xi_up = (state.V[i + 1] - state.V[i]) / h;
      dp_up = (state.p[i + 1] - state.p[i]) / h;
    } else {
      xi_up = (state.V[i] - state.V[i - 1]) / h;
      dp_up = (state.p[i] - state.p[i - 1]) / h;
    }
    xi_up = std::max(0.0, xi_up);
    HamiltonianEval he = eval_H(params, x, xi_up, p,
                                cfg.force_zero_hamiltonian);
    smax = std::max(smax, std::fabs(he.H_xi));
    rhsV[i] = state.V[i] + dt * (-r * state.V[i] + he.H);
    rhsp[i] = state.p[i] + dt * ((r + lam) * (1.0 - p) + he.H_xi * dp_up);
  }
  if (dt * smax > h)
    throw StepSizeError("parabolic_step: advection stability bound violated",
                        0.45 * h / smax);

  rhsV.front() = 0.0;
  rhsV.back() = params.B;
  rhsp.front() = 1.0;
  rhsp.back() = theta;

  // Implicit diffusion (eps + (sigma x)^2 / 2) with Dirichlet rows pinned.
  std::vector<double> sub(n, 0.0), diag(n, 1.0), sup(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    double D = state.eps + 0.5 * params.sigma * params.sigma * state.xs[i] *
                               state.xs[i];
    double w = dt * D / (h * h);
    sub[i] = -w;
    sup[i] = -w;
    diag[i] = 1.0 + 2.0 * w;
  }
  std::vector<double> sub2 = sub, diag2 = diag, sup2 = sup;
  thomas_solve(sub, diag, sup, rhsV);
  thomas_solve(sub2, diag2, sup2, rhsp);

  ParabolicState next = state;
  next.t = state.t + dt;
  next.last_update = 0.0;
  next.projected_nodes = 0;
  next.monotone_events = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double Vn = rhsV[i], pn = rhsp[i];
    double Vc = std::clamp(Vn, 0.0, params.B);
    double pc = std::clamp(pn, theta, 1.0);
    if (Vc != Vn || pc != pn) ++next.projected_nodes;
    next.last_update = std::max(next.last_update,
                                std::fabs(Vc - state.V[i]));
    next.last_update = std::max(next.last_update,
                                std::fabs(pc - state.p[i]));
    next.V[i] = Vc;
    next.p[i] = pc;
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (next.V[i + 1] < next.V[i] - 1e-12) ++next.monotone_events;
    if (next.p[i + 1] > next.p[i] + 1e-12) ++next.monotone_events;
  }
  return next;
}

EquilibriumSolution solve_stochastic(const ModelParams& params,
                                     const StochSolverConfig& cfg) {
  params.validate();
  cfg.validate();
  if (params.sigma <= 0.0)
    throw HypothesisError("solve_stochastic: requires sigma > 0");
  const double theta = params.theta_star();
  if (theta <= 0.0)
    throw HypothesisError("solve_stochastic: requires theta(x_star) > 0");

  std::vector<double> schedule = cfg.eps_schedule;
  if (schedule.empty()) {
    double base = 0.5 * params.sigma * params.sigma * params.x_star *
                  params.x_star;
    schedule = {1e-2 * base, 1e-3 * base, 1e-4 * base};
  }
  const double steady_tol =
      cfg.steady_tol > 0.0 ? cfg.steady_tol : 1e-9 * std::max(params.B, 1.0);

  ParabolicState state = initial_state(params, cfg, schedule.front());
  std::vector<double> V_prev, p_prev;
  long total_steps = 0;
  double dt = 0.0;
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    state.eps = schedule[k];
    if (k + 1 == schedule.size() && schedule.size() > 1) {
      V_prev = state.V;
      p_prev = state.p;
    }
    dt = cfg.dt > 0.0 ? cfg.dt : auto_dt(state, params, cfg);
    long steps = 0;
    bool steady = false;
    while (steps < cfg.max_steps) {
      try {
        state = parabolic_step(state, params, cfg, dt);
      } catch (const StepSizeError& e) {
        dt = e.suggested_dt;
        continue;
      }
      ++steps;
      if (state.last_update < steady_tol * dt) {
        steady = true;
        break;
      }
    }
    total_steps += steps;
    if (!steady)
      throw ConvergenceError(
          "solve_stochastic: max_steps reached at eps = " +
          std::to_string(schedule[k]) +
          ", residual = " + std::to_string(state.last_update / dt));
  }

  EquilibriumSolution sol;
  sol.mode = SolveMode::Stochastic;
  sol.xs = state.xs;
  sol.V = state.V;
  sol.p = state.p;

  double delta_V = 0.0, delta_p = 0.0;
  if (!V_prev.empty()) {
    // Richardson step toward eps = 0 from the last two schedule levels.
    double e1 = schedule[schedule.size() - 2];
    double e2 = schedule.back();
    double f = e2 / (e1 - e2);
    for (std::size_t i = 0; i < sol.xs.size(); ++i) {
      delta_V = std::max(delta_V, std::fabs(state.V[i] - V_prev[i]));
      delta_p = std::max(delta_p, std::fabs(state.p[i] - p_prev[i]));
      sol.V[i] = std::clamp(state.V[i] + f * (state.V[i] - V_prev[i]), 0.0,
                            params.B);
      sol.p[i] = std::clamp(state.p[i] + f * (state.p[i] - p_prev[i]), theta,
                            1.0);
    }
    sol.V.front() = 0.0;
    sol.V.back() = params.B;
    sol.p.front() = 1.0;
    sol.p.back() = theta;
  }

  const std::size_t n = sol.xs.size();
  const double h = sol.xs[1] - sol.xs[0];
  sol.u.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double dV;
    if (i == 0)
      dV = (sol.V[1] - sol.V[0]) / h;
    else if (i + 1 == n)
      dV = (sol.V[n - 1] - sol.V[n - 2]) / h;
    else
      dV = (sol.V[i + 1] - sol.V[i - 1]) / (2.0 * h);
    sol.u[i] = optimal_control(params.cost, std::max(0.0, dV), sol.p[i]);
  }

  sol.residual = stoch_residual(sol, params);
  sol.diagnostics["eps_final"] = schedule.back();
  sol.diagnostics["dt_final"] = dt;
  sol.diagnostics["total_steps"] = static_cast<double>(total_steps);
  sol.diagnostics["richardson_delta_V"] = delta_V;
  sol.diagnostics["richardson_delta_p"] = delta_p;
  sol.diagnostics["projected_nodes_final"] =
      static_cast<double>(state.projected_nodes);
  sol.diagnostics["monotone_events_final"] =
      static_cast<double>(state.monotone_events);
  return sol;
}

double stoch_residual(const EquilibriumSolution& sol,
                      const ModelParams& params) {
  const std::size_t n = sol.xs.size();
  double worst = 0.0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    double hl = sol.xs[i] - sol.xs[i - 1];
    double hr = sol.xs[i + 1] - sol.xs[i];
    double x = sol.xs[i];
    double dV = (sol.V[i + 1] - sol.V[i - 1]) / (hl + hr);
    double dp = (sol.p[i + 1] - sol.p[i - 1]) / (hl + hr);
    double d2V = 2.0 * (hl * sol.V[i + 1] - (hl + hr) * sol.V[i] +
                        hr * sol.V[i - 1]) /
                 (hl * hr * (hl + hr));
    double d2p = 2.0 * (hl * sol.p[i + 1] - (hl + hr) * sol.p[i] +
                        hr * sol.p[i - 1]) /
                 (hl * hr * (hl + hr));
    double diff = 0.5 * params.sigma * params.sigma * x * x;
    HamiltonianEval he = hamiltonian(params, x, std::max(0.0, dV), sol.p[i],
                                     SigmaMode::Stochastic);
    double resV = params.r * sol.V[i] - he.H - diff * d2V;
    double resp = (params.r + params.lambda) * (sol.p[i] - 1.0) -
                  he.H_xi * dp - diff * d2p;
    worst = std::max({worst, std::fabs(resV), std::fabs(resp)});
  }
  return worst;
}

InvarianceReport invariance_check(const std::vector<double>& V,
                                  const std::vector<double>& p,
                                  const ModelParams& params) {
  InvarianceReport rep;
  const double theta = params.theta_star();
  for (std::size_t i = 0; i < V.size(); ++i) {
    double b = std::max({0.0, -V[i], V[i] - params.B, theta - p[i],
                         p[i] - 1.0});
    rep.box_violation = std::max(rep.box_violation, b);
    if (i + 1 < V.size()) {
      rep.V_monotone_violation =
          std::max(rep.V_monotone_violation, V[i] - V[i + 1]);
      rep.p_monotone_violation =
          std::max(rep.p_monotone_violation, p[i + 1] - p[i]);
    }
  }
  rep.box_ok = rep.box_violation <= 0.0;
  rep.V_monotone = rep.V_monotone_violation <= 0.0;
  rep.p_monotone = rep.p_monotone_violation <= 0.0;
  return rep;
}

InvarianceReport invariance_check(const ParabolicState& state,
                                  const ModelParams& params) {
  return invariance_check(state.V, state.p, params);
}

InvarianceReport invariance_check(const EquilibriumSolution& sol,
                                  const ModelParams& params) {
  return invariance_check(sol.V, sol.p, params);
}

}  // namespace dm
