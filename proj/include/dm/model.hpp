#ifndef DM_MODEL_HPP
#define DM_MODEL_HPP

#include <optional>

namespace dm {

// Value on [0,+inf]; the infinite branch is an explicit tag, never a
// sentinel float, so branch logic stays testable.
struct Extended {
  double value = 0.0;
  bool finite = true;

  static Extended of(double v) { return {v, true}; }
  static Extended infinity() { return {0.0, false}; }

  bool operator==(const Extended&) const = default;
};

// true iff the finite value a exceeds b (an infinite b dominates).
inline bool exceeds(double a, const Extended& b) {
  return b.finite && a > b.value;
}

enum class CostKind { LogBarrier, PowerBarrier };

// Repayment-effort cost family L on [0,1): L(0)=0, L'>0, L''>0, L(u)->inf
// as u->1-.
struct CostFunction {
  CostKind kind = CostKind::LogBarrier;
  double c = 1.0;       // positive scale
  double alpha = 1.0;   // exponent, power_barrier only

  double eval(double u) const;         // L(u)
  double slope(double u) const;        // L'(u)
  double slope_at_zero() const { return c; }  // L'(0) = c for both families
  void validate() const;
};

enum class RecoveryKind { PowerCap, LinearSupport, Constant };

// Salvage fraction theta(s) returned to lenders at bankruptcy.
struct RecoveryFunction {
  RecoveryKind kind = RecoveryKind::PowerCap;
  double R0 = 1.0;          // scale (power_cap, constant)
  double alpha = 1.0;       // exponent (power_cap)
  double M2_support = 0.0;  // support endpoint (linear_support)

  double theta(double s) const;
  // limsup of theta(s)*s as s -> inf, exact per family.
  Extended capital_limit() const;
  void validate() const;
};

struct ModelParams {
  double r = 0.05;      // discount / interest rate
  double lambda = 0.2;  // principal repayment rate
  double mu = 0.02;     // income growth rate
  double sigma = 0.0;   // income volatility, >= 0
  double B = 10.0;      // bankruptcy cost
  double x_star = 20.0; // bankruptcy threshold (debt-to-income ratio)
  CostFunction cost;
  RecoveryFunction recovery;

  double theta_star() const { return recovery.theta(x_star); }
  // Drift coefficient a(p) = (lambda+r)/p - lambda [+ sigma^2] - mu.
  double drift_coef(double p, bool with_sigma) const;
  void validate() const;  // throws std::domain_error on a violated invariant
};

// Whether the sigma^2 drift term enters the Hamiltonian. The deterministic
// construction drops it structurally, independently of the numeric sigma.
enum class SigmaMode { Stochastic, Deterministic };

struct CostEval {
  double value;  // L(u)
  double slope;  // L'(u)
};

struct RecoveryEval {
  double theta;
  double theta_prime;  // one-sided derivative from the unconstrained side
};

struct HamiltonianEval {
  double H;
  double H_xi;
};

struct StationaryPoint {
  double u_sharp;      // control holding the debt constant
  Extended xi_sharp;   // argmax of xi -> H
  Extended H_max;      // sup over xi of H
};

struct BranchPair {
  double F_minus;                 // smallest xi >= 0 with H(x,xi,p) = rV
  std::optional<double> F_plus;   // root beyond xi_sharp, when it exists
};

CostEval cost_eval(const CostFunction& L, double u);
// Inverse of L': 0 when y <= L'(0), else the unique u in (0,1) with L'(u)=y.
double cost_slope_inverse(const CostFunction& L, double y);

RecoveryEval recovery_eval(const RecoveryFunction& theta, double s);

double optimal_control(const CostFunction& L, double xi, double p);

HamiltonianEval hamiltonian(const ModelParams& params, double x, double xi,
                            double p, SigmaMode mode);

// Deterministic-mode stationary quantities u#, xi#, H^max at (x,p).
StationaryPoint stationary_point(const ModelParams& params, double x, double p);

// Deterministic-mode costate branches of the implicit ODE rV = H(x,V',p).
BranchPair branch_F(const ModelParams& params, double x, double V, double p);

// Slope G^-(x,V,p) = (r+lambda)(p-1)/H_xi(x,F^-,p) of the bond price.
double slope_G_minus(const ModelParams& params, double x, double V, double p);

// Cost W(x) of holding the debt at x forever; infinite when (r-mu)x >= 1.
Extended steady_cost_W(const ModelParams& params, double x);

}  // namespace dm

#endif
