#ifndef DM_ANALYSIS_HPP
#define DM_ANALYSIS_HPP

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dm/model.hpp"

namespace dm {

struct DetSolverConfig;
struct StochSolverConfig;

// Zero-control threshold M1 = 2rB / ((r-mu) L'(0)).
double threshold_M1(const ModelParams& params);

struct ClosedFormPoint {
  double p_B;      // root of the implicit large-debt price relation
  double V_B;      // matching value
  double lower_p;  // algebraic lower bound on p_B
  double lower_V;  // printed lower bound on V_B (diagnostic only)
  double upper_V;  // algebraic upper bound on V_B, capped at B
};

// Closed-form deterministic solution on the zero-control region x >= M1.
ClosedFormPoint closed_form_region(double x, const ModelParams& params);

struct CompactSupportVerdict {
  double M2_support;
  double x_lo, x_hi;  // interval [M2_support, x_star]
  bool holds;         // p_B = 0 and V_B = B there
};

CompactSupportVerdict lemma_compact_support(const ModelParams& params);

struct EnvelopeSet {
  std::vector<double> xs;
  std::vector<double> p1, V1;  // sub/supersolution pair from the implicit ODE
  std::vector<double> p2, V2;  // piecewise pair built around the kink x2
  double x2 = 0.0;             // kink of p2
  double M1 = 0.0;             // zero-control threshold
  Extended C1;                 // limsup theta(s) s
  double C2 = 0.0;             // C1 + 2/(r-mu), when C1 finite
  double M2_lb = 0.0;          // large-debt lower-bound constant, when C1 finite
};

// Stochastic sandwich envelopes V2 <= V <= V1, p1 <= p <= p2 on the grid.
EnvelopeSet stochastic_envelope(const ModelParams& params,
                                std::span<const double> grid);

enum class Regime { CostVanishes, MonotonePositive, InteriorOptimum };

struct RegimeTag {
  Regime tag;
  Extended capital_limit;  // recorded limit of theta(s) * s
  std::string basis;       // evaluated condition checks
};

RegimeTag classify_regime(const ModelParams& params);

enum class SweepMode { Auto, ClosedForm, Deterministic, Stochastic };

struct SweepResult {
  double x0 = 0.0;
  std::vector<double> xstars;
  std::vector<double> values;   // V(x0, x_star); NaN where a point failed
  std::vector<double> p_at_x0;
  std::vector<std::string> status;  // "ok" or the recorded error
  std::optional<std::size_t> minimizer;  // interior grid minimizer, if any
  RegimeTag regime;
};

// Value of the game at x0 across a grid of bankruptcy thresholds.
SweepResult sweep_xstar(double x0, std::span<const double> xstar_grid,
                        const ModelParams& params, SweepMode mode,
                        const DetSolverConfig* det_cfg = nullptr,
                        const StochSolverConfig* stoch_cfg = nullptr);

struct TimeConsistencyGap {
  double p_at_double;    // bond price at x_star under the postponed threshold
  double theta_at_xstar;
  double gap;            // theta(x_star) - p_at_double, expected > 0
};

TimeConsistencyGap time_consistency_gap(const ModelParams& params);

// Root in (0,1) of p = z * ((1-p)/(1-theta_terminal))^exponent.
double implicit_price_root(double z, double exponent, double theta_terminal);

}  // namespace dm

#endif
