#include "dm/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dm/det_solver.hpp"
#include "dm/errors.hpp"
#include "dm/stoch_solver.hpp"

namespace dm {

namespace {

constexpr double kBisectTol = 1e-12;

double interp(const std::vector<double>& xs, const std::vector<double>& ys,
              double x) {
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  auto it = std::upper_bound(xs.begin(), xs.end(), x);
  std::size_t i = static_cast<std::size_t>(it - xs.begin()) - 1;
  double w = (x - xs[i]) / (xs[i + 1] - xs[i]);
  return ys[i] + w * (ys[i + 1] - ys[i]);
}

}  // namespace

double threshold_M1(const ModelParams& params) {
  return 2.0 * params.r * params.B /
         ((params.r - params.mu) * params.cost.slope_at_zero());
}

double implicit_price_root(double z, double exponent, double theta_terminal) {
  if (z <= 0.0) return 0.0;
  if (theta_terminal >= 1.0)
    throw std::domain_error("implicit_price_root: terminal salvage must be < 1");
  // g(p) = p - z ((1-p)/(1-theta))^k is strictly increasing on (0,1):
  // bisection brackets exactly one root.
  auto g = [&](double p) {
    return p - z * std::pow((1.0 - p) / (1.0 - theta_terminal), exponent);
  };
  double lo = 1e-14, hi = 1.0 - 1e-14;
  if (g(lo) >= 0.0) return lo;
  if (g(hi) <= 0.0) return hi;
  while (hi - lo > kBisectTol) {
    double mid = 0.5 * (lo + hi);
    if (g(mid) < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

ClosedFormPoint closed_form_region(double x, const ModelParams& params) {
  if (params.sigma != 0.0)
    throw std::domain_error("closed_form_region: deterministic mode only");
  double M1 = threshold_M1(params);
  if (x < M1 || x > params.x_star)
    throw std::domain_error("closed_form_region: x must lie in [M1, x_star]");
  double theta = params.theta_star();
  if (theta <= 0.0)
    throw std::domain_error(
        "closed_form_region: theta(x_star) = 0; use the compact-support lemma");

  double r = params.r, lam = params.lambda, mu = params.mu, B = params.B;
  double z = theta * params.x_star / x;
  ClosedFormPoint out;
  out.p_B = implicit_price_root(z, (r - mu) / (r + lam), theta);
  out.V_B = B * std::pow(out.p_B * x / (theta * params.x_star), r / (r - mu));
  double zk = std::pow(z, (r + lam) / (r - mu));
  out.lower_p = zk / (1.0 + zk);
  out.lower_V = B * std::pow(1.0 + zk, -r / (r + lam));
  out.upper_V = std::min(B, B * std::pow(1.0 / z, r / (r - mu)));
  return out;
}

CompactSupportVerdict lemma_compact_support(const ModelParams& params) {
  if (params.recovery.kind != RecoveryKind::LinearSupport)
    throw HypothesisError(
        "lemma_compact_support: recovery must vanish beyond a finite support");
  double M2 = params.recovery.M2_support;
  double M1 = threshold_M1(params);
  if (M2 < M1)
    throw HypothesisError("lemma_compact_support: requires M2_support >= M1");
  if (params.x_star < M2)
    throw HypothesisError("lemma_compact_support: requires x_star >= M2_support");
  return {M2, M2, params.x_star, true};
}

EnvelopeSet stochastic_envelope(const ModelParams& params,
                                std::span<const double> grid) {
  if (params.sigma <= 0.0)
    throw HypothesisError("stochastic_envelope: requires sigma > 0");
  double theta = params.theta_star();
  if (theta <= 0.0)
    throw HypothesisError("stochastic_envelope: requires theta(x_star) > 0");
  if (theta >= 1.0)
    throw HypothesisError("stochastic_envelope: requires theta(x_star) < 1");

  double r = params.r, lam = params.lambda, mu = params.mu, B = params.B;
  double s2 = params.sigma * params.sigma;
  double zx = theta * params.x_star;
  double k1 = (s2 + lam + r) / (lam + r);

  auto p1_at = [&](double x) {
    if (x <= 0.0) return 1.0;
    return implicit_price_root(zx / x, k1, theta);
  };
  auto Vt1_at = [&](double p1) {
    return B * std::pow((1.0 - p1) / (1.0 - theta), r / (r + lam));
  };

  EnvelopeSet out;
  out.xs.assign(grid.begin(), grid.end());
  out.M1 = threshold_M1(params);
  out.x2 = zx + 2.0 / (r - mu);
  out.C1 = params.recovery.capital_limit();
  if (out.C1.finite) {
    out.C2 = out.C1.value + 2.0 / (r - mu);
    out.M2_lb = (lam + mu - r) / lam * out.C1.value +
                (2.0 * lam + mu - r) / (lam * (r - mu)) + 1.0;
  }

  double x_flat = 1.0 / (r + lam);
  double V1_flat = Vt1_at(p1_at(x_flat));
  for (double x : out.xs) {
    double p1 = p1_at(x);
    out.p1.push_back(p1);
    out.V1.push_back(x <= x_flat ? V1_flat : Vt1_at(p1));
    double p2 = (x <= out.x2) ? 1.0 : out.x2 / x;
    out.p2.push_back(p2);
    out.V2.push_back((1.0 - p2) * B);
  }
  return out;
}

RegimeTag classify_regime(const ModelParams& params) {
  const RecoveryFunction& f = params.recovery;
  Extended C1 = f.capital_limit();
  if (!C1.finite)
    return {Regime::CostVanishes, C1, "theta(s)*s -> infinity"};
  switch (f.kind) {
    case RecoveryKind::PowerCap:
      if (f.alpha <= 1.0)
        return {Regime::MonotonePositive, C1,
                "theta(s)*s bounded; theta'/theta + 1/s = (1-alpha)/s >= 0"};
      return {Regime::InteriorOptimum, C1,
              "theta(s)*s -> 0; delta*theta'/theta + 1/s < 0 for delta in "
              "(1/alpha, 1)"};
    case RecoveryKind::LinearSupport:
      return {Regime::InteriorOptimum, C1,
              "compact support: theta'/theta -> -infinity at the support edge"};
    case RecoveryKind::Constant:
      break;
  }
  throw std::domain_error("classify_regime: unclassifiable recovery family");
}

SweepResult sweep_xstar(double x0, std::span<const double> xstar_grid,
                        const ModelParams& params, SweepMode mode,
                        const DetSolverConfig* det_cfg,
                        const StochSolverConfig* stoch_cfg) {
  if (x0 <= 0.0) throw std::domain_error("sweep_xstar: x0 must be positive");
  if (xstar_grid.empty() || xstar_grid.front() <= x0 ||
      !std::is_sorted(xstar_grid.begin(), xstar_grid.end()))
    throw std::domain_error("sweep_xstar: grid must ascend and start above x0");

  double M1 = threshold_M1(params);
  if (mode == SweepMode::Auto) {
    if (params.sigma == 0.0)
      mode = (x0 >= M1) ? SweepMode::ClosedForm : SweepMode::Deterministic;
    else
      mode = SweepMode::Stochastic;
  }

  DetSolverConfig det_default;
  StochSolverConfig stoch_default;
  if (!det_cfg) det_cfg = &det_default;
  if (!stoch_cfg) stoch_cfg = &stoch_default;

  SweepResult out;
  out.x0 = x0;
  out.xstars.assign(xstar_grid.begin(), xstar_grid.end());
  out.regime = classify_regime(params);

  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (double xstar : out.xstars) {
    ModelParams local = params;
    local.x_star = xstar;
    try {
      switch (mode) {
        case SweepMode::ClosedForm: {
          if (local.theta_star() == 0.0) {
            // Compact-support regime: bankruptcy is immediate at the support
            // edge, so the value is B and bonds are worthless.
            out.values.push_back(local.B);
            out.p_at_x0.push_back(0.0);
          } else {
            ClosedFormPoint cf = closed_form_region(x0, local);
            out.values.push_back(cf.V_B);
            out.p_at_x0.push_back(cf.p_B);
          }
          break;
        }
        case SweepMode::Deterministic: {
          EquilibriumSolution sol = assemble_equilibrium(local, *det_cfg);
          out.values.push_back(interp(sol.xs, sol.V, x0));
          out.p_at_x0.push_back(interp(sol.xs, sol.p, x0));
          break;
        }
        case SweepMode::Stochastic: {
          EquilibriumSolution sol = solve_stochastic(local, *stoch_cfg);
          out.values.push_back(interp(sol.xs, sol.V, x0));
          out.p_at_x0.push_back(interp(sol.xs, sol.p, x0));
          break;
        }
        case SweepMode::Auto:
          break;
      }
      out.status.push_back("ok");
    } catch (const std::exception& e) {
      out.values.push_back(nan);
      out.p_at_x0.push_back(nan);
      out.status.push_back(e.what());
    }
  }

  // Record the minimizer when it is an interior grid point.
  std::size_t best = out.values.size();
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    if (std::isnan(out.values[i])) continue;
    if (best == out.values.size() || out.values[i] < out.values[best]) best = i;
  }
  if (best != out.values.size() && best > 0 && best + 1 < out.values.size())
    out.minimizer = best;
  return out;
}

TimeConsistencyGap time_consistency_gap(const ModelParams& params) {
  if (params.sigma != 0.0)
    throw std::domain_error("time_consistency_gap: deterministic mode only");
  if (params.x_star < threshold_M1(params))
    throw std::domain_error("time_consistency_gap: requires x_star >= M1");
  if (params.recovery.kind != RecoveryKind::PowerCap ||
      params.recovery.alpha < 1.0)
    throw std::domain_error(
        "time_consistency_gap: requires a power-cap recovery with alpha >= 1");

  double theta2 = params.recovery.theta(2.0 * params.x_star);
  double z = 2.0 * theta2;  // theta(2x*) * 2x* / x*
  double p = implicit_price_root(
      z, (params.r - params.mu) / (params.r + params.lambda), theta2);
  double theta1 = params.theta_star();
  return {p, theta1, theta1 - p};
}

}  // namespace dm
