#ifndef DM_DET_SOLVER_HPP
#define DM_DET_SOLVER_HPP

#include <stdexcept>
#include <vector>

#include "dm/model.hpp"
#include "dm/solution.hpp"

namespace dm {

struct DetSolverConfig {
  int n_grid = 1024;          // output intervals on [0, x_star]
  double rk_tol = 1e-8;       // adaptive integrator relative tolerance
  double x_min_frac = 1e-3;   // stop integration at x_min_frac * x_star
  double crossing_tol = 1e-10;  // bisection tolerance for x1

  void validate() const {
    if (n_grid < 16) throw std::domain_error("det: n_grid must be >= 16");
    if (!(rk_tol > 0.0 && rk_tol <= 1e-4))
      throw std::domain_error("det: rk_tol must lie in (0, 1e-4]");
    if (!(x_min_frac > 0.0 && x_min_frac < 0.01))
      throw std::domain_error("det: x_min_frac must lie in (0, 0.01)");
    if (crossing_tol <= 0.0)
      throw std::domain_error("det: crossing_tol must be positive");
  }
};

// Backward solution of (V_B, p_B) recorded at accepted integrator steps,
// ascending in x, with nodal derivatives for Hermite evaluation.
struct DetPartialSolution {
  std::vector<double> xs, V, p, dV, dp;
  double x_stop = 0.0;    // lowest x reached
  bool crossed = false;   // W - V_B changed sign within the last step
  double cross_lo = 0.0, cross_hi = 0.0;  // bracket of the sign change

  double value_at(double x) const;  // Hermite interpolation of V_B
  double price_at(double x) const;
};

// Backward integration of V' = F^-, p' = G^- from (B, theta(x_star)),
// stopping at the W - V_B sign change or at x_min_frac * x_star.
DetPartialSolution solve_VB_pB(const ModelParams& params,
                               const DetSolverConfig& cfg);

// Hold point x1 = inf{x : V_B(x) < W(x)}, refined by bisection; 0 when the
// crossing does not occur above the stopping point.
double find_x1(const DetPartialSolution& partial, const ModelParams& params,
               const DetSolverConfig& cfg);

// Auxiliary value branch on [0, x1]: V' = F^-(x,V,1), V(x1) = W(x1).
// Returns nodal values at the requested ascending grid points (<= x1).
std::vector<double> solve_V1(double x1, const std::vector<double>& xs,
                             const ModelParams& params,
                             const DetSolverConfig& cfg);

EquilibriumSolution assemble_equilibrium(const ModelParams& params,
                                         const DetSolverConfig& cfg);

// Max absolute residual of both coupled ODEs with centered differences at
// interior nodes, excluding a 2-node collar around x1.
double det_residual(const EquilibriumSolution& sol, const ModelParams& params);

}  // namespace dm

#endif
