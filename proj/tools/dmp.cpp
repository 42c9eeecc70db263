// Command-line driver: solve the debt-management equilibrium, simulate it,
// sweep the bankruptcy threshold, tabulate envelope bounds, verify by Monte
// Carlo, or classify the recovery regime.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dm/errors.hpp"
#include "dm/io.hpp"

namespace {

dm::RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw dm::ParseError("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return dm::parse_config(text);
}

std::ofstream open_output(const dm::RunConfig& cfg, const std::string& name) {
  std::string path = dm::resolve_output_dir(cfg.output) + "/" + name;
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open output file: " + path);
  std::cerr << "writing " << path << "\n";
  return os;
}

dm::EquilibriumSolution solve_any(const dm::RunConfig& cfg,
                                  const std::string& mode) {
  if (mode == "det") return dm::assemble_equilibrium(cfg.params, cfg.det);
  if (mode == "stoch") return dm::solve_stochastic(cfg.params, cfg.stoch);
  throw dm::ParseError("mode must be 'det' or 'stoch'");
}

const char* regime_name(dm::Regime r) {
  switch (r) {
    case dm::Regime::CostVanishes: return "cost_vanishes";
    case dm::Regime::MonotonePositive: return "monotone_positive";
    case dm::Regime::InteriorOptimum: return "interior_optimum";
  }
  return "?";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"debt-management equilibrium toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_name;
  std::string precision;
  int threads = 0;
  app.add_option("-c,--config", config_path, "configuration file")->required();
  app.add_option("-o,--output", out_name, "output file name");
  app.add_option("--precision", precision, "display|full");
  app.add_option("--threads", threads, "worker threads for simulation");

  auto* solve = app.add_subcommand("solve", "solve the coupled system");
  std::string mode = "det";
  solve->add_option("--mode", mode, "det|stoch");

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo estimates");
  double x0 = -1.0;
  simulate->add_option("--x0", x0, "initial debt-to-income ratio");
  simulate->add_option("--mode", mode, "det|stoch");

  auto* sweep = app.add_subcommand("sweep", "value vs bankruptcy threshold");
  double sweep_min = 0.0, sweep_max = 0.0;
  int sweep_n = 25;
  std::string sweep_mode = "auto";
  sweep->add_option("--x0", x0, "probe ratio");
  sweep->add_option("--min", sweep_min, "lowest threshold")->required();
  sweep->add_option("--max", sweep_max, "highest threshold")->required();
  sweep->add_option("--n", sweep_n, "grid points");
  sweep->add_option("--mode", sweep_mode, "auto|closed|det|stoch");

  auto* envelope = app.add_subcommand("envelope", "stochastic bounds table");
  int env_n = 201;
  envelope->add_option("--n", env_n, "grid points");

  auto* verify = app.add_subcommand("verify", "solver vs Monte Carlo");
  verify->add_option("--mode", mode, "det|stoch");

  app.add_subcommand("classify", "recovery-regime tag");

  CLI11_PARSE(app, argc, argv);

  try {
    dm::RunConfig cfg = load_config(config_path);
    if (!precision.empty()) {
      if (precision == "full") cfg.output.full_precision = true;
      else if (precision == "display") cfg.output.full_precision = false;
      else throw dm::ParseError("precision must be 'display' or 'full'");
    }
    if (threads > 0) cfg.sim.threads = threads;
    const dm::ModelParams& P = cfg.params;
    if (x0 < 0.0) x0 = P.x_star / 2.0;

    try {
      if (solve->parsed()) {
        dm::EquilibriumSolution sol = solve_any(cfg, mode);
        auto os = open_output(cfg, out_name.empty() ? "solution.csv" : out_name);
        dm::write_solution_csv(os, sol, cfg);
        std::cerr << "residual = " << sol.residual << "\n";
      } else if (simulate->parsed()) {
        dm::EquilibriumSolution sol = solve_any(cfg, mode);
        dm::MCEstimate cost = dm::mc_cost(x0, sol, P, cfg.sim);
        dm::MCEstimate price = dm::mc_bond_price(x0, sol, P, cfg.sim);
        auto os = open_output(cfg, out_name.empty() ? "simulate.csv" : out_name);
        dm::write_estimate_csv(os, "cost", x0, cost, cfg);
        dm::write_estimate_csv(os, "price", x0, price, cfg);
        std::cout << "cost  mean=" << cost.mean << " se=" << cost.std_error
                  << "\nprice mean=" << price.mean << " se=" << price.std_error
                  << "\n";
      } else if (sweep->parsed()) {
        std::vector<double> grid;
        for (int i = 0; i < sweep_n; ++i)
          grid.push_back(sweep_min + (sweep_max - sweep_min) * i /
                                         std::max(1, sweep_n - 1));
        dm::SweepMode sm = dm::SweepMode::Auto;
        if (sweep_mode == "closed") sm = dm::SweepMode::ClosedForm;
        else if (sweep_mode == "det") sm = dm::SweepMode::Deterministic;
        else if (sweep_mode == "stoch") sm = dm::SweepMode::Stochastic;
        else if (sweep_mode != "auto")
          throw dm::ParseError("sweep mode must be auto|closed|det|stoch");
        dm::SweepResult res =
            dm::sweep_xstar(x0, grid, P, sm, &cfg.det, &cfg.stoch);
        auto os = open_output(cfg, out_name.empty() ? "sweep.csv" : out_name);
        dm::write_sweep_csv(os, res, cfg);
        if (res.minimizer)
          std::cout << "minimizer x_star = " << res.xstars[*res.minimizer]
                    << "\n";
      } else if (envelope->parsed()) {
        std::vector<double> grid;
        for (int i = 0; i < env_n; ++i)
          grid.push_back(P.x_star * i / std::max(1, env_n - 1));
        dm::EnvelopeSet env = dm::stochastic_envelope(P, grid);
        auto os = open_output(cfg, out_name.empty() ? "envelope.csv" : out_name);
        dm::write_envelope_csv(os, env, cfg);
      } else if (verify->parsed()) {
        dm::EquilibriumSolution sol = solve_any(cfg, mode);
        std::vector<double> probes = {P.x_star / 4.0, P.x_star / 2.0,
                                      3.0 * P.x_star / 4.0};
        dm::VerifyReport rep = dm::verify_equilibrium(sol, P, cfg.sim, probes);
        auto os = open_output(cfg, out_name.empty() ? "verify.csv" : out_name);
        dm::write_verify_csv(os, rep, cfg);
        std::cout << (rep.pass ? "PASS" : "FAIL") << "\n";
        if (!rep.pass) return 1;
      } else {  // classify
        dm::RegimeTag tag = dm::classify_regime(P);
        std::cout << regime_name(tag.tag) << "\n" << tag.basis << "\n";
      }
    } catch (const dm::ConvergenceError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 3;
    }
  } catch (const dm::ConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
