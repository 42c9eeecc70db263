#include "dm/det_solver.hpp"

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <stdexcept>

#include "dm/errors.hpp"

namespace dm {

namespace {

// Embedded Cash-Karp RK4(5) step for a 2-component state. Returns the
// 5th-order solution and a per-component error estimate.
template <typename F>
bool rk45_step(F&& f, double x, const std::array<double, 2>& y, double h,
               std::array<double, 2>& y_out, std::array<double, 2>& err) {
  static constexpr double a2 = 0.2, a3 = 0.3, a4 = 0.6, a5 = 1.0, a6 = 0.875;
  static constexpr double b21 = 0.2;
  static constexpr double b31 = 3.0 / 40.0, b32 = 9.0 / 40.0;
  static constexpr double b41 = 0.3, b42 = -0.9, b43 = 1.2;
  static constexpr double b51 = -11.0 / 54.0, b52 = 2.5, b53 = -70.0 / 27.0,
                          b54 = 35.0 / 27.0;
  static constexpr double b61 = 1631.0 / 55296.0, b62 = 175.0 / 512.0,
                          b63 = 575.0 / 13824.0, b64 = 44275.0 / 110592.0,
                          b65 = 253.0 / 4096.0;
  static constexpr double c1 = 37.0 / 378.0, c3 = 250.0 / 621.0,
                          c4 = 125.0 / 594.0, c6 = 512.0 / 1771.0;
  static constexpr double d1 = c1 - 2825.0 / 27648.0, d3 = c3 - 18575.0 / 48384.0,
                          d4 = c4 - 13525.0 / 55296.0, d5 = -277.0 / 14336.0,
                          d6 = c6 - 0.25;

  std::array<double, 2> k1, k2, k3, k4, k5, k6, t;
  try {
    if (!f(x, y, k1)) return false;
    for (int i = 0; i < 2; ++i) t[i] = y[i] + h * b21 * k1[i];
    if (!f(x + a2 * h, t, k2)) return false;
    for (int i = 0; i < 2; ++i) t[i] = y[i] + h * (b31 * k1[i] + b32 * k2[i]);
    if (!f(x + a3 * h, t, k3)) return false;
    for (int i = 0; i < 2; ++i)
      t[i] = y[i] + h * (b41 * k1[i] + b42 * k2[i] + b43 * k3[i]);
    if (!f(x + a4 * h, t, k4)) return false;
    for (int i = 0; i < 2; ++i)
      t[i] = y[i] + h * (b51 * k1[i] + b52 * k2[i] + b53 * k3[i] + b54 * k4[i]);
    if (!f(x + a5 * h, t, k5)) return false;
    for (int i = 0; i < 2; ++i)
      t[i] = y[i] + h * (b61 * k1[i] + b62 * k2[i] + b63 * k3[i] + b64 * k4[i] +
                         b65 * k5[i]);
    if (!f(x + a6 * h, t, k6)) return false;
  } catch (const InfeasibleError&) {
    return false;
  } catch (const SingularityError&) {
    return false;
  } catch (const std::domain_error&) {
    return false;
  }
  for (int i = 0; i < 2; ++i) {
    y_out[i] = y[i] + h * (c1 * k1[i] + c3 * k3[i] + c4 * k4[i] + c6 * k6[i]);
    err[i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i]);
  }
  return std::isfinite(y_out[0]) && std::isfinite(y_out[1]);
}

// Adaptive backward integration from x_hi down to x_lo. on_step is called
// with (x, y, dy) after each accepted step (and once for the initial point
// when report_initial); returning false stops the integration.
template <typename F, typename OnStep>
void integrate_down(F&& f, double x_hi, std::array<double, 2> y, double x_lo,
                    double rel_tol, OnStep&& on_step, bool report_initial) {
  const double h_min = 1e-13 * std::max(1.0, std::abs(x_hi));
  double x = x_hi;
  std::array<double, 2> dy;
  if (!f(x, y, dy))
    throw InfeasibleError("integrator: right-hand side undefined at start");
  if (report_initial && !on_step(x, y, dy)) return;

  double h = -(x_hi - x_lo) / 256.0;
  while (x > x_lo + h_min) {
    if (x + h < x_lo) h = x_lo - x;
    std::array<double, 2> y_new, err;
    bool ok = rk45_step(f, x, y, h, y_new, err);
    if (ok) {
      double ratio = 0.0;
      for (int i = 0; i < 2; ++i) {
        double scale = rel_tol * (std::abs(y[i]) + std::abs(h * dy[i]) + 1e-12);
        ratio = std::max(ratio, std::abs(err[i]) / scale);
      }
      if (ratio <= 1.0) {
        x += h;
        y = y_new;
        try {
          f(x, y, dy);  // refresh the nodal derivative for reporting
        } catch (const std::exception&) {
          // Landed on a marginally infeasible point; keep the last slope.
        }
        if (!on_step(x, y, dy)) return;
        double grow = (ratio > 0.0) ? 0.9 * std::pow(ratio, -0.2) : 5.0;
        h *= std::clamp(grow, 0.2, 5.0);
        continue;
      }
      h *= std::clamp(0.9 * std::pow(ratio, -0.25), 0.1, 0.9);
    } else {
      h *= 0.5;  // infeasible or singular inside the step
    }
    if (std::abs(h) < h_min)
      throw ConvergenceError("integrator: step size underflow at x=" +
                             std::to_string(x));
  }
}

double hermite(double x, double x0, double y0, double d0, double x1, double y1,
               double d1) {
  double h = x1 - x0;
  double s = (x - x0) / h;
  double s2 = s * s, s3 = s2 * s;
  return (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * h * d0 +
         (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * h * d1;
}

double hermite_on(const std::vector<double>& xs, const std::vector<double>& ys,
                  const std::vector<double>& ds, double x) {
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  auto it = std::upper_bound(xs.begin(), xs.end(), x);
  std::size_t i = static_cast<std::size_t>(it - xs.begin()) - 1;
  return hermite(x, xs[i], ys[i], ds[i], xs[i + 1], ys[i + 1], ds[i + 1]);
}

// Terminal bond price; floored away from zero so the backward ODE stays
// defined when theta(x_star) = 0 (the compact-support regime of the
// recovery function, where the exact solution has p identically 0).
constexpr double kPriceFloor = 1e-9;

double terminal_price(const ModelParams& params) {
  return std::max(params.theta_star(), kPriceFloor);
}

void check_hypothesis(const ModelParams& params) {
  Extended W_star = steady_cost_W(params, params.x_star);
  if (W_star.finite && W_star.value <= params.B)
    throw HypothesisError(
        "deterministic solve requires L((r-mu)x*) > rB (hold cost at x* must "
        "exceed the bankruptcy cost)");
}

}  // namespace

double DetPartialSolution::value_at(double x) const {
  return hermite_on(xs, V, dV, x);
}

double DetPartialSolution::price_at(double x) const {
  return hermite_on(xs, p, dp, x);
}

DetPartialSolution solve_VB_pB(const ModelParams& params,
                               const DetSolverConfig& cfg) {
  params.validate();
  cfg.validate();
  if (params.sigma != 0.0)
    throw HypothesisError("deterministic solve requires sigma = 0");
  check_hypothesis(params);

  auto f = [&](double x, const std::array<double, 2>& y,
               std::array<double, 2>& dy) {
    dy[0] = branch_F(params, x, y[0], y[1]).F_minus;
    dy[1] = slope_G_minus(params, x, y[0], y[1]);
    return true;
  };

  DetPartialSolution out;
  out.x_stop = cfg.x_min_frac * params.x_star;
  double x_prev = params.x_star;
  auto on_step = [&](double x, const std::array<double, 2>& y,
                     const std::array<double, 2>& dy) {
    out.xs.push_back(x);
    out.V.push_back(y[0]);
    out.p.push_back(y[1]);
    out.dV.push_back(dy[0]);
    out.dp.push_back(dy[1]);
    Extended W = steady_cost_W(params, x);
    if (W.finite && W.value - y[0] <= 0.0) {
      out.crossed = true;
      out.cross_lo = x;
      out.cross_hi = x_prev;
      return false;
    }
    x_prev = x;
    return true;
  };

  integrate_down(f, params.x_star, {params.B, terminal_price(params)},
                 out.x_stop, cfg.rk_tol, on_step, /*report_initial=*/true);

  std::reverse(out.xs.begin(), out.xs.end());
  std::reverse(out.V.begin(), out.V.end());
  std::reverse(out.p.begin(), out.p.end());
  std::reverse(out.dV.begin(), out.dV.end());
  std::reverse(out.dp.begin(), out.dp.end());
  out.x_stop = out.xs.front();
  return out;
}

double find_x1(const DetPartialSolution& partial, const ModelParams& params,
               const DetSolverConfig& cfg) {
  if (!partial.crossed) return 0.0;
  auto E = [&](double x) {
    Extended W = steady_cost_W(params, x);
    if (!W.finite) return 1.0;
    return W.value - partial.value_at(x);
  };
  double lo = partial.cross_lo, hi = partial.cross_hi;
  // E(hi) > 0 >= E(lo); keep the sign change while shrinking to tolerance.
  while (hi - lo > cfg.crossing_tol) {
    double mid = 0.5 * (lo + hi);
    if (E(mid) <= 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<double> solve_V1(double x1, const std::vector<double>& xs,
                             const ModelParams& params,
                             const DetSolverConfig& cfg) {
  if (x1 <= 0.0) throw std::domain_error("solve_V1: hold point must be positive");
  Extended W1 = steady_cost_W(params, x1);
  if (!W1.finite)
    throw InfeasibleError("solve_V1: hold cost infinite at x1");

  double x_stop = std::min(cfg.x_min_frac * params.x_star, x1);
  std::vector<double> targets;  // descending, integrable range only
  for (auto it = xs.rbegin(); it != xs.rend(); ++it)
    if (*it <= x1 && *it >= x_stop) targets.push_back(*it);

  auto f = [&](double x, const std::array<double, 2>& y,
               std::array<double, 2>& dy) {
    dy[0] = branch_F(params, x, y[0], 1.0).F_minus;
    dy[1] = 0.0;
    return true;
  };

  std::vector<double> got(targets.size());
  std::array<double, 2> y = {W1.value, 1.0};
  double x_cur = x1;
  for (std::size_t k = 0; k < targets.size(); ++k) {
    if (targets[k] < x_cur) {
      std::array<double, 2> y_end = y;
      integrate_down(
          f, x_cur, y, targets[k], cfg.rk_tol,
          [&](double, const std::array<double, 2>& yy,
              const std::array<double, 2>&) {
            y_end = yy;
            return true;
          },
          false);
      y = y_end;
      x_cur = targets[k];
    }
    got[k] = y[0];
  }

  // Below the stopping point the boundary value V(0)=0 is attached by
  // monotone (linear) interpolation.
  double V_stop = got.empty() ? W1.value : got.back();
  double x_low = got.empty() ? x1 : targets.back();
  std::vector<double> out(xs.size());
  std::size_t k = 0;
  for (std::size_t i = xs.size(); i-- > 0;) {
    double x = xs[i];
    if (x > x1) throw std::domain_error("solve_V1: grid point above x1");
    if (x >= x_stop) {
      out[i] = got[k++];
    } else {
      out[i] = V_stop * (x / x_low);
    }
  }
  return out;
}

EquilibriumSolution assemble_equilibrium(const ModelParams& params,
                                         const DetSolverConfig& cfg) {
  DetPartialSolution partial = solve_VB_pB(params, cfg);
  double x1 = find_x1(partial, params, cfg);

  // Uniform output grid with x1 inserted as a node.
  std::vector<double> xs(static_cast<std::size_t>(cfg.n_grid) + 1);
  double h = params.x_star / cfg.n_grid;
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = i * h;
  xs.back() = params.x_star;
  std::size_t x1_index = 0;
  if (x1 > 0.0) {
    auto it = std::lower_bound(xs.begin(), xs.end(), x1);
    if (it != xs.end() && std::abs(*it - x1) < 1e-12 * params.x_star) {
      *it = x1;
    } else {
      it = xs.insert(it, x1);
    }
    x1_index = static_cast<std::size_t>(it - xs.begin());
  }

  EquilibriumSolution sol;
  sol.mode = SolveMode::Deterministic;
  sol.xs = xs;
  sol.x1 = x1;
  sol.V.assign(xs.size(), 0.0);
  sol.p.assign(xs.size(), 1.0);
  sol.u.assign(xs.size(), 0.0);

  // Bankruptcy branch: re-integrate hitting the nodes above x1 exactly.
  auto f = [&](double x, const std::array<double, 2>& y,
               std::array<double, 2>& dy) {
    dy[0] = branch_F(params, x, y[0], y[1]).F_minus;
    dy[1] = slope_G_minus(params, x, y[0], y[1]);
    return true;
  };
  double x_stop = cfg.x_min_frac * params.x_star;
  double lowest_B = std::max(x1, x_stop);
  std::array<double, 2> y = {params.B, terminal_price(params)};
  double x_cur = params.x_star;
  double p_right = 1.0, V_at_x1 = 0.0;
  for (std::size_t i = xs.size(); i-- > 0;) {
    if (xs[i] < lowest_B) break;
    if (xs[i] < x_cur) {
      std::array<double, 2> y_end = y;
      integrate_down(
          f, x_cur, y, xs[i], cfg.rk_tol,
          [&](double, const std::array<double, 2>& yy,
              const std::array<double, 2>&) {
            y_end = yy;
            return true;
          },
          false);
      y = y_end;
      x_cur = xs[i];
    }
    if (x1 > 0.0 && i == x1_index) {
      p_right = y[1];
      V_at_x1 = y[0];
      break;
    }
    sol.V[i] = y[0];
    sol.p[i] = y[1];
  }

  if (x1 > 0.0) {
    // Hold branch: p = 1, V = V1 down to 0.
    std::vector<double> low_xs(xs.begin(), xs.begin() + x1_index + 1);
    low_xs.back() = x1;
    std::vector<double> V1 = solve_V1(x1, low_xs, params, cfg);
    for (std::size_t i = 0; i <= x1_index; ++i) {
      sol.V[i] = V1[i];
      sol.p[i] = 1.0;
    }
    sol.diagnostics["p_right_at_x1"] = p_right;
    sol.diagnostics["V_B_at_x1"] = V_at_x1;
  } else {
    // No crossing: V_B, p_B extend over the whole interval; attach the
    // boundary values below the stopping point by monotone interpolation.
    std::size_t first = 0;
    while (first < xs.size() && xs[first] < lowest_B) ++first;
    double Vs = sol.V[first], ps = sol.p[first], xl = xs[first];
    for (std::size_t i = 0; i < first; ++i) {
      double w = xs[i] / xl;
      sol.V[i] = Vs * w;
      sol.p[i] = 1.0 + (ps - 1.0) * w;
    }
    sol.V[0] = 0.0;
    sol.p[0] = 1.0;
  }

  // Feedback control from the costate branch; exact hold control at x1.
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double x = xs[i];
    if (x == 0.0) {
      sol.u[i] = 0.0;
    } else if (x1 > 0.0 && i == x1_index) {
      sol.u[i] = (params.r - params.mu) * x1;
    } else {
      double xi = branch_F(params, x, sol.V[i], sol.p[i]).F_minus;
      sol.u[i] = optimal_control(params.cost, xi, sol.p[i]);
    }
  }
  if (x1 > 0.0) {
    double xi_r = branch_F(params, x1, V_at_x1, p_right).F_minus;
    sol.diagnostics["u_right_at_x1"] = optimal_control(params.cost, xi_r, p_right);
  }
  sol.diagnostics["x1_index"] = static_cast<double>(x1_index);
  sol.diagnostics["x_stop"] = x_stop;
  sol.residual = det_residual(sol, params);
  return sol;
}

double det_residual(const EquilibriumSolution& sol, const ModelParams& params) {
  const auto& xs = sol.xs;
  std::size_t n = xs.size();
  if (n < 3) return 0.0;
  std::size_t i1 = n;  // x1 node index, if any
  if (sol.x1 > 0.0) {
    auto it = sol.diagnostics.find("x1_index");
    if (it != sol.diagnostics.end())
      i1 = static_cast<std::size_t>(it->second);
    else
      i1 = static_cast<std::size_t>(
          std::lower_bound(xs.begin(), xs.end(), sol.x1) - xs.begin());
  }

  // Near the hold point the value branch sits on the rV = H_max degeneracy
  // boundary, where V'' blows up like an inverse square root and centered
  // differences lose their second-order accuracy; that zone is part of the
  // x1 collar.
  const double degenerate_slack = 0.05 * params.r * params.B;

  double worst = 0.0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (i1 < n && i + 2 >= i1 && i <= i1 + 2) continue;  // collar around x1
    if (sol.p[i] < 1e-6) continue;  // compact-support regime: p = 0 exactly
    if (i1 < n && i < i1) {
      Extended H_max = stationary_point(params, xs[i], sol.p[i]).H_max;
      if (H_max.finite &&
          H_max.value - params.r * sol.V[i] <= degenerate_slack)
        continue;
    }
    double hl = xs[i] - xs[i - 1], hr = xs[i + 1] - xs[i];
    // Nonuniform centered first derivative.
    auto d1 = [&](const std::vector<double>& v) {
      return (hl * hl * v[i + 1] - hr * hr * v[i - 1] +
              (hr * hr - hl * hl) * v[i]) /
             (hl * hr * (hl + hr));
    };
    double DV = std::max(0.0, d1(sol.V));
    double Dp = d1(sol.p);
    HamiltonianEval he =
        hamiltonian(params, xs[i], DV, sol.p[i], SigmaMode::Deterministic);
    double res1 = params.r * sol.V[i] - he.H;
    double res2 =
        (params.r + params.lambda) * (sol.p[i] - 1.0) - he.H_xi * Dp;
    worst = std::max({worst, std::abs(res1), std::abs(res2)});
  }
  return worst;
}

}  // namespace dm
