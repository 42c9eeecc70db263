#ifndef DM_SOLUTION_HPP
#define DM_SOLUTION_HPP

#include <map>
#include <string>
#include <vector>

namespace dm {

enum class SolveMode { Deterministic, Stochastic };

// Equilibrium on an ascending grid over [0, x_star]. At the deterministic
// hold point x1 the stored price is the left value 1; the right limit and
// right-limit control live in diagnostics ("p_right_at_x1", "u_right_at_x1").
struct EquilibriumSolution {
  std::vector<double> xs;
  std::vector<double> V;
  std::vector<double> p;
  std::vector<double> u;
  double x1 = 0.0;               // hold point (deterministic only)
  SolveMode mode = SolveMode::Deterministic;
  double residual = 0.0;         // max ODE/PDE residual at interior nodes
  std::map<std::string, double> diagnostics;

  std::size_t size() const { return xs.size(); }
};

}  // namespace dm

#endif
