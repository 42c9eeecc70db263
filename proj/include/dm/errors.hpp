#ifndef DM_ERRORS_HPP
#define DM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace dm {

// Hypothesis of a theorem/lemma fails for the given parameters.
struct HypothesisError : std::runtime_error {
  explicit HypothesisError(const std::string& what) : std::runtime_error(what) {}
};

// rV exceeds the attainable Hamiltonian maximum; no costate branch exists.
struct InfeasibleError : std::runtime_error {
  explicit InfeasibleError(const std::string& what) : std::runtime_error(what) {}
};

// H_xi vanished where an ODE right-hand side divides by it.
struct SingularityError : std::runtime_error {
  SingularityError(const std::string& what, double where)
      : std::runtime_error(what), location(where) {}
  double location;
};

// Iteration cap reached before the steadiness criterion.
struct ConvergenceError : std::runtime_error {
  explicit ConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

// Explicit stability bound violated for the requested pseudo-time step.
struct StepSizeError : std::runtime_error {
  StepSizeError(const std::string& what, double suggested)
      : std::runtime_error(what), suggested_dt(suggested) {}
  double suggested_dt;
};

}  // namespace dm

#endif
