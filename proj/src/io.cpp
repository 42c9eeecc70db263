#include "dm/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <map>
#include <sstream>
#include <vector>

namespace dm {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& v, int line) {
  std::size_t pos = 0;
  double d;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line) + ": expected a number, got '" +
                     v + "'");
  }
  if (pos != v.size())
    throw ParseError("line " + std::to_string(line) +
                     ": trailing characters after number '" + v + "'");
  return d;
}

long to_long(const std::string& v, int line) {
  double d = to_double(v, line);
  long n = static_cast<long>(d);
  if (static_cast<double>(n) != d)
    throw ParseError("line " + std::to_string(line) + ": expected an integer, got '" +
                     v + "'");
  return n;
}

std::string full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fixed6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string cost_kind_name(CostKind k) {
  return k == CostKind::LogBarrier ? "log_barrier" : "power_barrier";
}

std::string recovery_kind_name(RecoveryKind k) {
  switch (k) {
    case RecoveryKind::PowerCap: return "power_cap";
    case RecoveryKind::LinearSupport: return "linear_support";
    case RecoveryKind::Constant: return "constant";
  }
  return "?";
}

void header_block(std::ostream& os, const RunConfig& cfg) {
  os << "# debt-equilibrium artifact v1\n";
  std::istringstream lines(render(cfg));
  std::string line;
  while (std::getline(lines, line)) os << "# " << line << "\n";
}

std::string num(double v, const RunConfig& cfg) {
  return cfg.output.full_precision ? full(v) : fixed6(v);
}

}  // namespace

void RunConfig::validate() const {
  params.validate();
  det.validate();
  stoch.validate();
  sim.validate();
}

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = raw;
    std::size_t hash = s.find('#');
    if (hash != std::string::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    std::size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw ParseError("line " + std::to_string(line) +
                       ": expected 'key = value'");
    std::string key = trim(s.substr(0, eq));
    std::string val = trim(s.substr(eq + 1));
    if (key.empty() || val.empty())
      throw ParseError("line " + std::to_string(line) +
                       ": empty key or value");

    ModelParams& p = cfg.params;
    if (key == "r") p.r = to_double(val, line);
    else if (key == "lambda") p.lambda = to_double(val, line);
    else if (key == "mu") p.mu = to_double(val, line);
    else if (key == "sigma") p.sigma = to_double(val, line);
    else if (key == "B") p.B = to_double(val, line);
    else if (key == "x_star") p.x_star = to_double(val, line);
    else if (key == "cost.kind") {
      if (val == "log_barrier") p.cost.kind = CostKind::LogBarrier;
      else if (val == "power_barrier") p.cost.kind = CostKind::PowerBarrier;
      else throw ParseError("line " + std::to_string(line) +
                            ": unknown cost kind '" + val + "'");
    } else if (key == "cost.c") p.cost.c = to_double(val, line);
    else if (key == "cost.alpha") p.cost.alpha = to_double(val, line);
    else if (key == "recovery.kind") {
      if (val == "power_cap") p.recovery.kind = RecoveryKind::PowerCap;
      else if (val == "linear_support")
        p.recovery.kind = RecoveryKind::LinearSupport;
      else if (val == "constant") p.recovery.kind = RecoveryKind::Constant;
      else throw ParseError("line " + std::to_string(line) +
                            ": unknown recovery kind '" + val + "'");
    } else if (key == "recovery.R0") p.recovery.R0 = to_double(val, line);
    else if (key == "recovery.alpha") p.recovery.alpha = to_double(val, line);
    else if (key == "recovery.M2") p.recovery.M2_support = to_double(val, line);
    else if (key == "det.n_grid") cfg.det.n_grid = static_cast<int>(to_long(val, line));
    else if (key == "det.rk_tol") cfg.det.rk_tol = to_double(val, line);
    else if (key == "det.x_min_frac") cfg.det.x_min_frac = to_double(val, line);
    else if (key == "det.crossing_tol") cfg.det.crossing_tol = to_double(val, line);
    else if (key == "stoch.n_grid") cfg.stoch.n_grid = static_cast<int>(to_long(val, line));
    else if (key == "stoch.dt") cfg.stoch.dt = to_double(val, line);
    else if (key == "stoch.steady_tol") cfg.stoch.steady_tol = to_double(val, line);
    else if (key == "stoch.max_steps") cfg.stoch.max_steps = to_long(val, line);
    else if (key == "stoch.eps_schedule") {
      cfg.stoch.eps_schedule.clear();
      std::istringstream parts(val);
      std::string item;
      while (std::getline(parts, item, ','))
        cfg.stoch.eps_schedule.push_back(to_double(trim(item), line));
    } else if (key == "sim.dt") cfg.sim.dt = to_double(val, line);
    else if (key == "sim.t_max") cfg.sim.t_max = to_double(val, line);
    else if (key == "sim.n_paths") cfg.sim.n_paths = to_long(val, line);
    else if (key == "sim.seed")
      cfg.sim.seed = static_cast<std::uint64_t>(to_long(val, line));
    else if (key == "sim.batch") cfg.sim.batch = to_long(val, line);
    else if (key == "sim.threads") cfg.sim.threads = static_cast<int>(to_long(val, line));
    else if (key == "output.dir") cfg.output.dir = val;
    else if (key == "output.precision") {
      if (val == "full") cfg.output.full_precision = true;
      else if (val == "display") cfg.output.full_precision = false;
      else throw ParseError("line " + std::to_string(line) +
                            ": precision must be 'display' or 'full'");
    } else {
      throw ParseError("line " + std::to_string(line) + ": unknown key '" +
                       key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

std::string render(const RunConfig& cfg) {
  std::ostringstream os;
  const ModelParams& p = cfg.params;
  os << "r = " << full(p.r) << "\n"
     << "lambda = " << full(p.lambda) << "\n"
     << "mu = " << full(p.mu) << "\n"
     << "sigma = " << full(p.sigma) << "\n"
     << "B = " << full(p.B) << "\n"
     << "x_star = " << full(p.x_star) << "\n"
     << "cost.kind = " << cost_kind_name(p.cost.kind) << "\n"
     << "cost.c = " << full(p.cost.c) << "\n"
     << "cost.alpha = " << full(p.cost.alpha) << "\n"
     << "recovery.kind = " << recovery_kind_name(p.recovery.kind) << "\n"
     << "recovery.R0 = " << full(p.recovery.R0) << "\n"
     << "recovery.alpha = " << full(p.recovery.alpha) << "\n"
     << "recovery.M2 = " << full(p.recovery.M2_support) << "\n"
     << "det.n_grid = " << cfg.det.n_grid << "\n"
     << "det.rk_tol = " << full(cfg.det.rk_tol) << "\n"
     << "det.x_min_frac = " << full(cfg.det.x_min_frac) << "\n"
     << "det.crossing_tol = " << full(cfg.det.crossing_tol) << "\n"
     << "stoch.n_grid = " << cfg.stoch.n_grid << "\n"
     << "stoch.dt = " << full(cfg.stoch.dt) << "\n"
     << "stoch.steady_tol = " << full(cfg.stoch.steady_tol) << "\n"
     << "stoch.max_steps = " << cfg.stoch.max_steps << "\n";
  if (!cfg.stoch.eps_schedule.empty()) {
    os << "stoch.eps_schedule = ";
    for (std::size_t i = 0; i < cfg.stoch.eps_schedule.size(); ++i)
      os << (i ? "," : "") << full(cfg.stoch.eps_schedule[i]);
    os << "\n";
  }
  os << "sim.dt = " << full(cfg.sim.dt) << "\n"
     << "sim.t_max = " << full(cfg.sim.t_max) << "\n"
     << "sim.n_paths = " << cfg.sim.n_paths << "\n"
     << "sim.seed = " << cfg.sim.seed << "\n"
     << "sim.batch = " << cfg.sim.batch << "\n"
     << "sim.threads = " << cfg.sim.threads << "\n";
  if (!cfg.output.dir.empty()) os << "output.dir = " << cfg.output.dir << "\n";
  os << "output.precision = "
     << (cfg.output.full_precision ? "full" : "display") << "\n";
  return os.str();
}

std::string resolve_output_dir(const OutputOptions& output) {
  if (!output.dir.empty()) return output.dir;
  const char* env = std::getenv("DM_OUTPUT_DIR");
  if (env && *env) return env;
  return ".";
}

void write_solution_csv(std::ostream& os, const EquilibriumSolution& sol,
                        const RunConfig& cfg) {
  header_block(os, cfg);
  os << "x,V,p,u\n";
  for (std::size_t i = 0; i < sol.xs.size(); ++i)
    os << num(sol.xs[i], cfg) << ',' << num(sol.V[i], cfg) << ','
       << num(sol.p[i], cfg) << ',' << num(sol.u[i], cfg) << "\n";
}

void write_sweep_csv(std::ostream& os, const SweepResult& sweep,
                     const RunConfig& cfg) {
  header_block(os, cfg);
  os << "# x0 = " << num(sweep.x0, cfg) << "\n";
  os << "x_star,V,p_at_x0,status\n";
  for (std::size_t i = 0; i < sweep.xstars.size(); ++i)
    os << num(sweep.xstars[i], cfg) << ',' << num(sweep.values[i], cfg) << ','
       << num(sweep.p_at_x0[i], cfg) << ',' << sweep.status[i] << "\n";
}

void write_envelope_csv(std::ostream& os, const EnvelopeSet& env,
                        const RunConfig& cfg) {
  header_block(os, cfg);
  os << "x,p1,V1,p2,V2\n";
  for (std::size_t i = 0; i < env.xs.size(); ++i)
    os << num(env.xs[i], cfg) << ',' << num(env.p1[i], cfg) << ','
       << num(env.V1[i], cfg) << ',' << num(env.p2[i], cfg) << ','
       << num(env.V2[i], cfg) << "\n";
}

void write_estimate_csv(std::ostream& os, const std::string& label, double x0,
                        const MCEstimate& est, const RunConfig& cfg) {
  header_block(os, cfg);
  os << "quantity,x0,mean,std_error,n,censored_fraction,bias_bound\n";
  os << label << ',' << num(x0, cfg) << ',' << num(est.mean, cfg) << ','
     << num(est.std_error, cfg) << ',' << est.n << ','
     << num(est.censored_fraction, cfg) << ',' << num(est.bias_bound, cfg)
     << "\n";
}

void write_verify_csv(std::ostream& os, const VerifyReport& rep,
                      const RunConfig& cfg) {
  header_block(os, cfg);
  os << "x0,cost_mean,cost_se,cost_ref,cost_tol,price_mean,price_se,"
        "price_ref,price_tol,cost_down,cost_up,cost_pass,price_pass,"
        "perturb_pass\n";
  for (const ProbeReport& p : rep.probes)
    os << num(p.x0, cfg) << ',' << num(p.cost_mean, cfg) << ','
       << num(p.cost_se, cfg) << ',' << num(p.cost_ref, cfg) << ','
       << num(p.cost_tol, cfg) << ',' << num(p.price_mean, cfg) << ','
       << num(p.price_se, cfg) << ',' << num(p.price_ref, cfg) << ','
       << num(p.price_tol, cfg) << ',' << num(p.cost_down, cfg) << ','
       << num(p.cost_up, cfg) << ',' << (p.cost_pass ? 1 : 0) << ','
       << (p.price_pass ? 1 : 0) << ',' << (p.perturb_pass ? 1 : 0) << "\n";
  os << "# overall = " << (rep.pass ? "pass" : "fail") << "\n";
}

}  // namespace dm
