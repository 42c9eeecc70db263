#ifndef DM_STOCH_SOLVER_HPP
#define DM_STOCH_SOLVER_HPP

#include <stdexcept>
#include <vector>

#include "dm/model.hpp"
#include "dm/solution.hpp"

namespace dm {

struct StochSolverConfig {
  int n_grid = 512;        // spatial nodes on [0, x_star]
  double dt = 0.0;         // pseudo-time step; 0 selects it automatically
  std::vector<double> eps_schedule;  // empty selects the default schedule
  double steady_tol = 0.0;           // 0 selects 1e-9 * max(B, 1)
  long max_steps = 5000000;          // iteration cap per regularization value
  bool force_zero_hamiltonian = false;  // test hook: drop the nonlinear terms

  void validate() const {
    if (n_grid < 64) throw std::domain_error("stoch: n_grid must be >= 64");
    if (dt < 0.0) throw std::domain_error("stoch: dt must be nonnegative");
    if (steady_tol < 0.0)
      throw std::domain_error("stoch: steady_tol must be nonnegative");
    if (max_steps < 1) throw std::domain_error("stoch: max_steps must be >= 1");
    for (std::size_t i = 0; i < eps_schedule.size(); ++i) {
      if (eps_schedule[i] <= 0.0)
        throw std::domain_error("stoch: eps values must be positive");
      if (i > 0 && eps_schedule[i] >= eps_schedule[i - 1])
        throw std::domain_error("stoch: eps_schedule must decrease strictly");
    }
  }
};

// Relaxation iterate on the uniform grid. Updates happen in pseudo-time t;
// eps is the current elliptic regularization added to the diffusion.
struct ParabolicState {
  double t = 0.0;
  std::vector<double> xs;
  std::vector<double> V;
  std::vector<double> p;
  double eps = 0.0;
  // Per-step bookkeeping.
  double last_update = 0.0;   // max nodal |change| of the latest step
  int projected_nodes = 0;    // nodes clamped back into the box
  int monotone_events = 0;    // monotonicity violations observed (not fixed)
};

// Linear initial data (V, p) = (B x/x*, 1 - (1 - theta(x*)) x/x*).
ParabolicState initial_state(const ModelParams& params,
                             const StochSolverConfig& cfg, double eps);

// One IMEX step: reaction and upwinded advection explicit, diffusion
// (eps + (sigma x)^2/2) implicit via a tridiagonal solve, then a hard clamp
// onto 0 <= V <= B, theta(x*) <= p <= 1 with the boundary data pinned.
ParabolicState parabolic_step(const ParabolicState& state,
                              const ModelParams& params,
                              const StochSolverConfig& cfg, double dt);

// Relaxes to steadiness for each eps in the schedule, warm-starting, then
// Richardson-extrapolates the last two eps levels toward eps = 0.
EquilibriumSolution solve_stochastic(const ModelParams& params,
                                     const StochSolverConfig& cfg);

// Max absolute centered-difference residual of the unregularized system at
// interior nodes.
double stoch_residual(const EquilibriumSolution& sol,
                      const ModelParams& params);

struct InvarianceReport {
  bool box_ok = true;
  bool V_monotone = true;   // nondecreasing
  bool p_monotone = true;   // nonincreasing
  double box_violation = 0.0;
  double V_monotone_violation = 0.0;
  double p_monotone_violation = 0.0;

  bool all_ok() const { return box_ok && V_monotone && p_monotone; }
};

InvarianceReport invariance_check(const std::vector<double>& V,
                                  const std::vector<double>& p,
                                  const ModelParams& params);
InvarianceReport invariance_check(const ParabolicState& state,
                                  const ModelParams& params);
InvarianceReport invariance_check(const EquilibriumSolution& sol,
                                  const ModelParams& params);

}  // namespace dm

#endif
