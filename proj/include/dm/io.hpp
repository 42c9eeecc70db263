#ifndef DM_IO_HPP
#define DM_IO_HPP

#include <ostream>
#include <stdexcept>
#include <string>

#include "dm/analysis.hpp"
#include "dm/det_solver.hpp"
#include "dm/model.hpp"
#include "dm/simulation.hpp"
#include "dm/solution.hpp"
#include "dm/stoch_solver.hpp"

namespace dm {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OutputOptions {
  std::string dir;              // empty: $DM_OUTPUT_DIR, else "."
  bool full_precision = false;  // 17 significant digits instead of 6 decimals
};

struct RunConfig {
  ModelParams params;
  DetSolverConfig det;
  StochSolverConfig stoch;
  SimConfig sim;
  OutputOptions output;

  void validate() const;
};

// Flat dotted-key `key = value` text, one pair per line, `#` comments.
RunConfig parse_config(const std::string& text);

// Inverse of parse_config at full precision: parse_config(render(c)) == c.
std::string render(const RunConfig& cfg);

// Directory used for output files: explicit option, then $DM_OUTPUT_DIR,
// then the working directory.
std::string resolve_output_dir(const OutputOptions& output);

// All CSV emitters prefix a `#` header block carrying the resolved config
// and the artifact version, so files are self-describing and reproducible.
void write_solution_csv(std::ostream& os, const EquilibriumSolution& sol,
                        const RunConfig& cfg);
void write_sweep_csv(std::ostream& os, const SweepResult& sweep,
                     const RunConfig& cfg);
void write_envelope_csv(std::ostream& os, const EnvelopeSet& env,
                        const RunConfig& cfg);
void write_estimate_csv(std::ostream& os, const std::string& label, double x0,
                        const MCEstimate& est, const RunConfig& cfg);
void write_verify_csv(std::ostream& os, const VerifyReport& rep,
                      const RunConfig& cfg);

}  // namespace dm

#endif
