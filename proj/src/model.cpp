#include "dm/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "dm/errors.hpp"

namespace dm {

namespace {

constexpr double kRootTol = 1e-12;  // absolute tolerance on u or xi
constexpr int kRootIters = 200;

// Bracketing bisection for a function known to change sign on [lo,hi].
template <typename F>
double bisect(F&& f, double lo, double hi) {
  double flo = f(lo);
  if (flo == 0.0) return lo;
  bool rising = flo < 0.0;
  for (int i = 0; i < kRootIters && hi - lo > kRootTol; ++i) {
    double mid = 0.5 * (lo + hi);
    double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == rising)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double CostFunction::eval(double u) const {
  switch (kind) {
    case CostKind::LogBarrier:
      return -c * std::log1p(-u);
    case CostKind::PowerBarrier:
      return c * u * std::pow(1.0 - u, -alpha);
  }
  return 0.0;
}

double CostFunction::slope(double u) const {
  switch (kind) {
    case CostKind::LogBarrier:
      return c / (1.0 - u);
    case CostKind::PowerBarrier:
      return c * (1.0 + (alpha - 1.0) * u) * std::pow(1.0 - u, -alpha - 1.0);
  }
  return 0.0;
}

void CostFunction::validate() const {
  if (c <= 0.0) throw std::domain_error("cost scale c must be positive");
  if (kind == CostKind::PowerBarrier && alpha <= 0.0)
    throw std::domain_error("cost exponent alpha must be positive");
}

double RecoveryFunction::theta(double s) const {
  switch (kind) {
    case RecoveryKind::PowerCap:
      return std::min(1.0, R0 / std::pow(s, alpha));
    case RecoveryKind::LinearSupport:
      return std::max(0.0, 1.0 - s / M2_support);
    case RecoveryKind::Constant:
      return R0;
  }
  return 0.0;
}

Extended RecoveryFunction::capital_limit() const {
  switch (kind) {
    case RecoveryKind::PowerCap:
      if (alpha < 1.0) return Extended::infinity();
      if (alpha == 1.0) return Extended::of(R0);
      return Extended::of(0.0);
    case RecoveryKind::LinearSupport:
      return Extended::of(0.0);
    case RecoveryKind::Constant:
      return R0 > 0.0 ? Extended::infinity() : Extended::of(0.0);
  }
  return Extended::of(0.0);
}

void RecoveryFunction::validate() const {
  switch (kind) {
    case RecoveryKind::PowerCap:
      if (R0 <= 0.0) throw std::domain_error("recovery scale R0 must be positive");
      if (alpha <= 0.0) throw std::domain_error("recovery exponent alpha must be positive");
      break;
    case RecoveryKind::LinearSupport:
      if (M2_support <= 0.0)
        throw std::domain_error("recovery support endpoint must be positive");
      break;
    case RecoveryKind::Constant:
      if (R0 < 0.0 || R0 > 1.0)
        throw std::domain_error("constant recovery must lie in [0,1]");
      break;
  }
}

double ModelParams::drift_coef(double p, bool with_sigma) const {
  return (lambda + r) / p - lambda + (with_sigma ? sigma * sigma : 0.0) - mu;
}

void ModelParams::validate() const {
  if (!(r > mu)) throw std::domain_error("model requires r > mu");
  if (mu < 0.0) throw std::domain_error("mu must be nonnegative");
  if (lambda <= 0.0) throw std::domain_error("lambda must be positive");
  if (sigma < 0.0) throw std::domain_error("sigma must be nonnegative");
  if (B <= 0.0) throw std::domain_error("bankruptcy cost B must be positive");
  if (x_star <= 0.0) throw std::domain_error("threshold x_star must be positive");
  cost.validate();
  recovery.validate();
  double th = theta_star();
  if (th < 0.0 || th > 1.0)
    throw std::domain_error("recovery at x_star must lie in [0,1]");
}

CostEval cost_eval(const CostFunction& L, double u) {
  if (u < 0.0 || u >= 1.0)
    throw std::domain_error("cost_eval: control must lie in [0,1)");
  return {L.eval(u), L.slope(u)};
}

double cost_slope_inverse(const CostFunction& L, double y) {
  if (y <= 0.0) throw std::domain_error("cost_slope_inverse: marginal cost must be positive");
  if (y <= L.slope_at_zero()) return 0.0;
  if (L.kind == CostKind::LogBarrier) return 1.0 - L.c / y;
  if (L.kind == CostKind::PowerBarrier && L.alpha == 1.0)
    return 1.0 - std::sqrt(L.c / y);
  // No closed form; L' is increasing, bracket against 1 and bisect.
  double hi = 0.5;
  while (L.slope(hi) < y) hi = 0.5 * (1.0 + hi);
  return bisect([&](double u) { return L.slope(u) - y; }, 0.0, hi);
}

RecoveryEval recovery_eval(const RecoveryFunction& f, double s) {
  if (s <= 0.0) throw std::domain_error("recovery_eval: ratio level must be positive");
  switch (f.kind) {
    case RecoveryKind::PowerCap: {
      double unc = f.R0 / std::pow(s, f.alpha);
      // At the cap kink the derivative comes from the unconstrained side.
      double dp = (unc <= 1.0) ? -f.alpha * unc / s : 0.0;
      return {std::min(1.0, unc), dp};
    }
    case RecoveryKind::LinearSupport: {
      double th = 1.0 - s / f.M2_support;
      double dp = (th >= 0.0) ? -1.0 / f.M2_support : 0.0;
      return {std::max(0.0, th), dp};
    }
    case RecoveryKind::Constant:
      return {f.R0, 0.0};
  }
  return {0.0, 0.0};
}

double optimal_control(const CostFunction& L, double xi, double p) {
  if (p <= 0.0) throw std::domain_error("optimal_control: price must be positive");
  if (xi < 0.0) throw std::domain_error("optimal_control: costate must be nonnegative");
  double ratio = xi / p;
  if (ratio <= L.slope_at_zero()) return 0.0;
  return cost_slope_inverse(L, ratio);
}

HamiltonianEval hamiltonian(const ModelParams& params, double x, double xi,
                            double p, SigmaMode mode) {
  if (p <= 0.0) throw std::domain_error("hamiltonian: price must be positive");
  if (xi < 0.0) throw std::domain_error("hamiltonian: costate must be nonnegative");
  bool with_sigma = (mode == SigmaMode::Stochastic);
  double w = optimal_control(params.cost, xi, p);
  double a = params.drift_coef(p, with_sigma);
  double H = params.cost.eval(w) - xi / p * w + a * x * xi;
  double H_xi = ((params.lambda + params.r) * x - w) / p +
                ((with_sigma ? params.sigma * params.sigma : 0.0) -
                 params.lambda - params.mu) * x;
  return {H, H_xi};
}

StationaryPoint stationary_point(const ModelParams& params, double x, double p) {
  if (p <= 0.0) throw std::domain_error("stationary_point: price must be positive");
  double u_sharp =
      (params.lambda + params.r) * x - (params.lambda + params.mu) * p * x;
  if (u_sharp >= 1.0)
    return {u_sharp, Extended::infinity(), Extended::infinity()};
  return {u_sharp, Extended::of(p * params.cost.slope(u_sharp)),
          Extended::of(params.cost.eval(u_sharp))};
}

BranchPair branch_F(const ModelParams& params, double x, double V, double p) {
  if (p <= 0.0) throw std::domain_error("branch_F: price must be positive");
  if (V < 0.0) throw std::domain_error("branch_F: value must be nonnegative");
  double target = params.r * V;
  StationaryPoint sp = stationary_point(params, x, p);
  if (exceeds(target, sp.H_max)) {
    // A rounding-level excess happens legitimately when the caller sits on
    // the rV = H_max boundary (e.g. V = W with p = 1); collapse to xi_sharp.
    if (target - sp.H_max.value <= 1e-9 * std::max(1.0, target))
      return {sp.xi_sharp.value, sp.xi_sharp.value};
    throw InfeasibleError("branch_F: rV exceeds H_max at x=" + std::to_string(x));
  }
  if (x == 0.0 && V > 0.0)
    throw std::domain_error("branch_F: no costate at x=0 with V>0");

  double xi0 = p * params.cost.slope_at_zero();  // linear-regime boundary
  auto H = [&](double xi) {
    return hamiltonian(params, x, xi, p, SigmaMode::Deterministic).H;
  };

  if (sp.H_max.finite && target == sp.H_max.value)
    return {sp.xi_sharp.value, sp.xi_sharp.value};

  double ax = params.drift_coef(p, false) * x;  // = H_xi on the linear regime
  double F_minus;
  if (target == 0.0) {
    F_minus = 0.0;
  } else if (ax > 0.0 && target / ax <= xi0) {
    F_minus = target / ax;
  } else {
    double hi;
    if (sp.xi_sharp.finite) {
      hi = sp.xi_sharp.value;
    } else {
      hi = std::max(2.0 * xi0, 1.0);
      while (H(hi) < target) hi *= 2.0;
    }
    F_minus = bisect([&](double xi) { return H(xi) - target; }, xi0, hi);
  }

  if (!sp.xi_sharp.finite) return {F_minus, std::nullopt};

  // H decreases to -inf beyond xi_sharp; expand a bracket and bisect.
  double lo = sp.xi_sharp.value;
  double hi = lo + std::max(1.0, lo);
  while (H(hi) > target) hi = lo + 2.0 * (hi - lo);
  double F_plus = bisect([&](double xi) { return H(xi) - target; }, lo, hi);
  return {F_minus, F_plus};
}

double slope_G_minus(const ModelParams& params, double x, double V, double p) {
  double F_minus = branch_F(params, x, V, p).F_minus;
  double H_xi =
      hamiltonian(params, x, F_minus, p, SigmaMode::Deterministic).H_xi;
  double G = (params.r + params.lambda) * (p - 1.0) / H_xi;
  if (H_xi == 0.0 || !std::isfinite(G))
    throw SingularityError("slope_G_minus: H_xi vanished at x=" + std::to_string(x), x);
  return G;
}

Extended steady_cost_W(const ModelParams& params, double x) {
  double u = (params.r - params.mu) * x;
  if (u >= 1.0) return Extended::infinity();
  return Extended::of(params.cost.eval(u) / params.r);
}

}  // namespace dm
