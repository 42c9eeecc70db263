#ifndef DM_SIMULATION_HPP
#define DM_SIMULATION_HPP

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "dm/model.hpp"
#include "dm/solution.hpp"

namespace dm {

struct SimConfig {
  double dt = 1e-3;        // Euler-Maruyama time step
  double t_max = 200.0;    // censoring horizon
  long n_paths = 100000;
  std::uint64_t seed = 12345;
  long batch = 1000;       // paths per independent random substream
  int threads = 1;

  void validate() const {
    if (dt <= 0.0) throw std::domain_error("sim: dt must be positive");
    if (t_max <= 0.0) throw std::domain_error("sim: t_max must be positive");
    if (n_paths < 1) throw std::domain_error("sim: n_paths must be >= 1");
    if (batch < 1) throw std::domain_error("sim: batch must be >= 1");
    if (threads < 1) throw std::domain_error("sim: threads must be >= 1");
  }
};

struct PathResult {
  bool bankrupt = false;
  double T_b = 0.0;       // bankruptcy time; t_max when censored
  double disc_cost = 0.0; // realized discounted cost including the B charge
  double disc_factor = 0.0; // e^{-(r+lambda) T_b}; 0 when censored
};

struct MCEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  long n = 0;
  double censored_fraction = 0.0;
  double bias_bound = 0.0;  // censoring-tail bound on the mean
};

// Deterministic counter-free generator: a splitmix64 sequence per
// (seed, substream) pair, with Box-Muller normals (spare cached).
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t substream);
  std::uint64_t next_u64();
  double uniform();  // open interval (0,1)
  double normal();

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Piecewise-linear feedback (u, p) read off a solution grid; uses the
// right-limit branch just above the deterministic hold point x1.
class FeedbackPolicy {
 public:
  FeedbackPolicy(const EquilibriumSolution& sol, const ModelParams& params);
  double u_at(double x) const;
  double p_at(double x) const;

 private:
  std::vector<double> xs_, u_, p_;
  double x1_ = 0.0;
  std::size_t i1_ = 0;       // node index of x1, when present
  bool has_jump_ = false;
  double u_right_ = 0.0, p_right_ = 0.0;
};

PathResult simulate_path(double x0, const EquilibriumSolution& sol,
                         const ModelParams& params, const SimConfig& cfg,
                         RandomStream& stream);

MCEstimate mc_cost(double x0, const EquilibriumSolution& sol,
                   const ModelParams& params, const SimConfig& cfg);

MCEstimate mc_bond_price(double x0, const EquilibriumSolution& sol,
                         const ModelParams& params, const SimConfig& cfg);

struct ProbeReport {
  double x0 = 0.0;
  double cost_mean = 0.0, cost_se = 0.0, cost_ref = 0.0, cost_tol = 0.0;
  double price_mean = 0.0, price_se = 0.0, price_ref = 0.0, price_tol = 0.0;
  double cost_down = 0.0, cost_up = 0.0;  // means under u scaled 0.9 / 1.1
  bool cost_pass = false;
  bool price_pass = false;
  bool perturb_pass = false;
};

struct VerifyReport {
  std::vector<ProbeReport> probes;
  bool pass = false;
};

// Monte Carlo cross-check of a solution: price and cost gaps at each probe
// against 3*SE plus a discretization allowance, and a necessary-condition
// optimality check against +-10% control perturbations.
VerifyReport verify_equilibrium(const EquilibriumSolution& sol,
                                const ModelParams& params, const SimConfig& cfg,
                                const std::vector<double>& probes);

}  // namespace dm

#endif
