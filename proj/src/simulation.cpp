#include "dm/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace dm {

namespace {

constexpr double kPriceFloor = 1e-9;  // guards u/p where p has collapsed
constexpr double kControlCap = 1.0 - 1e-12;

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t substream)
    : state_(mix64(mix64(seed) + substream)) {}

std::uint64_t RandomStream::next_u64() {
  state_ += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double RandomStream::uniform() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RandomStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform(), u2 = uniform();
  double rad = std::sqrt(-2.0 * std::log(u1));
  double ang = 2.0 * 3.14159265358979323846 * u2;
  spare_ = rad * std::sin(ang);
  has_spare_ = true;
  return rad * std::cos(ang);
}

FeedbackPolicy::FeedbackPolicy(const EquilibriumSolution& sol,
                               const ModelParams&)
    : xs_(sol.xs), u_(sol.u), p_(sol.p), x1_(sol.x1) {
  auto it = sol.diagnostics.find("x1_index");
  if (sol.mode == SolveMode::Deterministic && x1_ > 0.0 &&
      it != sol.diagnostics.end()) {
    i1_ = static_cast<std::size_t>(it->second + 0.5);
    auto pr = sol.diagnostics.find("p_right_at_x1");
    auto ur = sol.diagnostics.find("u_right_at_x1");
    if (pr != sol.diagnostics.end() && ur != sol.diagnostics.end()) {
      has_jump_ = true;
      p_right_ = pr->second;
      u_right_ = ur->second;
    }
  }
}

double FeedbackPolicy::u_at(double x) const {
  if (x <= xs_.front()) return u_.front();
  if (x >= xs_.back()) return u_.back();
  auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
  std::size_t i = static_cast<std::size_t>(it - xs_.begin()) - 1;
  double lo = u_[i], hi = u_[i + 1];
  if (has_jump_ && i == i1_ && x > xs_[i]) lo = u_right_;
  double w = (x - xs_[i]) / (xs_[i + 1] - xs_[i]);
  return lo + w * (hi - lo);
}

double FeedbackPolicy::p_at(double x) const {
  if (x <= xs_.front()) return p_.front();
  if (x >= xs_.back()) return p_.back();
  auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
  std::size_t i = static_cast<std::size_t>(it - xs_.begin()) - 1;
  double lo = p_[i], hi = p_[i + 1];
  if (has_jump_ && i == i1_ && x > xs_[i]) lo = p_right_;
  double w = (x - xs_[i]) / (xs_[i + 1] - xs_[i]);
  return lo + w * (hi - lo);
}

namespace {

PathResult run_path(double x0, const FeedbackPolicy& policy,
                    const ModelParams& params, const SimConfig& cfg,
                    RandomStream& stream, double u_scale) {
  if (x0 < 0.0 || x0 > params.x_star)
    throw std::domain_error("simulate_path: x0 outside [0, x_star]");
  PathResult pr;
  if (x0 >= params.x_star) {
    pr.bankrupt = true;
    pr.T_b = 0.0;
    pr.disc_cost = params.B;
    pr.disc_factor = 1.0;
    return pr;
  }
  const double dt = cfg.dt;
  const double sq_dt = std::sqrt(dt);
  const double decay = std::exp(-params.r * dt);
  const long n_steps = static_cast<long>(std::ceil(cfg.t_max / dt));
  const bool noisy = params.sigma > 0.0;
  double x = x0, t = 0.0, disc = 1.0;
  for (long s = 0; s < n_steps; ++s) {
    double u = std::clamp(u_scale * policy.u_at(x), 0.0, kControlCap);
    double p = std::max(policy.p_at(x), kPriceFloor);
    double L = cost_eval(params.cost, u).value;
    double drift = params.drift_coef(p, true) * x - u / p;
    if (!noisy && std::fabs(drift) * cfg.t_max < 1e-14 * params.x_star) {
      // Frozen deterministic path: the remaining cost integral is exact.
      pr.disc_cost += L * (disc - std::exp(-params.r * cfg.t_max)) / params.r;
      pr.T_b = cfg.t_max;
      return pr;
    }
    pr.disc_cost += disc * L * dt;
    double dx = drift * dt;
    if (noisy) dx -= params.sigma * x * sq_dt * stream.normal();
    x = std::max(0.0, x + dx);
    t += dt;
    disc *= decay;
    if (x >= params.x_star) {
      pr.bankrupt = true;
      pr.T_b = t;
      pr.disc_cost += disc * params.B;
      pr.disc_factor = std::exp(-(params.r + params.lambda) * t);
      return pr;
    }
  }
  pr.T_b = cfg.t_max;
  return pr;
}

struct BatchSums {
  double cost = 0.0, cost_sq = 0.0;
  double price = 0.0, price_sq = 0.0;
  long censored = 0;
  long n = 0;
};

struct RunSums {
  MCEstimate cost, price;
};

RunSums mc_run(double x0, const EquilibriumSolution& sol,
               const ModelParams& params, const SimConfig& cfg,
               double u_scale) {
  cfg.validate();
  FeedbackPolicy policy(sol, params);
  const double theta = params.theta_star();
  // A noiseless run produces identical paths; one path is the exact mean.
  const long n_paths = params.sigma > 0.0 ? cfg.n_paths : 1;
  const long n_batches = (n_paths + cfg.batch - 1) / cfg.batch;
  std::vector<BatchSums> sums(static_cast<std::size_t>(n_batches));

  auto run_batches = [&](long b_lo, long b_hi) {
    for (long b = b_lo; b < b_hi; ++b) {
      RandomStream stream(cfg.seed, static_cast<std::uint64_t>(b));
      long lo = b * cfg.batch;
      long hi = std::min(n_paths, lo + cfg.batch);
      BatchSums& acc = sums[static_cast<std::size_t>(b)];
      for (long k = lo; k < hi; ++k) {
        PathResult pr = run_path(x0, policy, params, cfg, stream, u_scale);
        double price = 1.0 - (1.0 - theta) * pr.disc_factor;
        acc.cost += pr.disc_cost;
        acc.cost_sq += pr.disc_cost * pr.disc_cost;
        acc.price += price;
        acc.price_sq += price * price;
        if (!pr.bankrupt) ++acc.censored;
        ++acc.n;
      }
    }
  };

  int n_threads = std::min<long>(cfg.threads, n_batches);
  if (n_threads <= 1) {
    run_batches(0, n_batches);
  } else {
    std::vector<std::thread> pool;
    long per = (n_batches + n_threads - 1) / n_threads;
    for (int t = 0; t < n_threads; ++t) {
      long lo = t * per, hi = std::min<long>(n_batches, lo + per);
      if (lo < hi) pool.emplace_back(run_batches, lo, hi);
    }
    for (auto& th : pool) th.join();
  }

  // Ordered reduction: totals are independent of the thread partition.
  BatchSums tot;
  for (const BatchSums& b : sums) {
    tot.cost += b.cost;
    tot.cost_sq += b.cost_sq;
    tot.price += b.price;
    tot.price_sq += b.price_sq;
    tot.censored += b.censored;
    tot.n += b.n;
  }

  auto finish = [&](double sum, double sum_sq) {
    MCEstimate est;
    est.n = tot.n;
    est.mean = sum / tot.n;
    if (tot.n > 1) {
      double var = (sum_sq - sum * sum / tot.n) / (tot.n - 1);
      est.std_error = std::sqrt(std::max(0.0, var) / tot.n);
    }
    est.censored_fraction = static_cast<double>(tot.censored) / tot.n;
    return est;
  };
  RunSums out{finish(tot.cost, tot.cost_sq), finish(tot.price, tot.price_sq)};

  double u_max = 0.0;
  for (double u : sol.u) u_max = std::max(u_max, u);
  u_max = std::clamp(u_scale * u_max, 0.0, kControlCap);
  out.cost.bias_bound =
      std::exp(-params.r * cfg.t_max) *
      (params.B + cost_eval(params.cost, u_max).value / params.r);
  out.price.bias_bound =
      std::exp(-(params.r + params.lambda) * cfg.t_max);
  return out;
}

}  // namespace

PathResult simulate_path(double x0, const EquilibriumSolution& sol,
                         const ModelParams& params, const SimConfig& cfg,
                         RandomStream& stream) {
  cfg.validate();
  FeedbackPolicy policy(sol, params);
  return run_path(x0, policy, params, cfg, stream, 1.0);
}

MCEstimate mc_cost(double x0, const EquilibriumSolution& sol,
                   const ModelParams& params, const SimConfig& cfg) {
  return mc_run(x0, sol, params, cfg, 1.0).cost;
}

MCEstimate mc_bond_price(double x0, const EquilibriumSolution& sol,
                         const ModelParams& params, const SimConfig& cfg) {
  return mc_run(x0, sol, params, cfg, 1.0).price;
}

VerifyReport verify_equilibrium(const EquilibriumSolution& sol,
                                const ModelParams& params, const SimConfig& cfg,
                                const std::vector<double>& probes) {
  VerifyReport rep;
  rep.pass = true;
  FeedbackPolicy policy(sol, params);
  for (double x0 : probes) {
    ProbeReport pb;
    pb.x0 = x0;
    RunSums base = mc_run(x0, sol, params, cfg, 1.0);
    RunSums down = mc_run(x0, sol, params, cfg, 0.9);
    RunSums up = mc_run(x0, sol, params, cfg, 1.1);

    // Reference values off the solution grid.
    {
      auto& xs = sol.xs;
      auto it = std::upper_bound(xs.begin(), xs.end(), x0);
      std::size_t i =
          it == xs.begin() ? 0 : static_cast<std::size_t>(it - xs.begin()) - 1;
      if (i + 1 >= xs.size()) i = xs.size() - 2;
      double w = (x0 - xs[i]) / (xs[i + 1] - xs[i]);
      w = std::clamp(w, 0.0, 1.0);
      pb.cost_ref = sol.V[i] + w * (sol.V[i + 1] - sol.V[i]);
    }
    pb.price_ref = policy.p_at(x0);

    pb.cost_mean = base.cost.mean;
    pb.cost_se = base.cost.std_error;
    pb.cost_tol = 3.0 * base.cost.std_error + 0.02 * params.B;
    pb.cost_pass = std::fabs(pb.cost_mean - pb.cost_ref) <= pb.cost_tol;

    pb.price_mean = base.price.mean;
    pb.price_se = base.price.std_error;
    pb.price_tol = 3.0 * base.price.std_error + 0.01;
    pb.price_pass = std::fabs(pb.price_mean - pb.price_ref) <= pb.price_tol;

    pb.cost_down = down.cost.mean;
    pb.cost_up = up.cost.mean;
    double floor_down =
        base.cost.mean - 2.0 * (base.cost.std_error + down.cost.std_error);
    double floor_up =
        base.cost.mean - 2.0 * (base.cost.std_error + up.cost.std_error);
    pb.perturb_pass = down.cost.mean >= floor_down && up.cost.mean >= floor_up;

    rep.pass = rep.pass && pb.cost_pass && pb.price_pass && pb.perturb_pass;
    rep.probes.push_back(pb);
  }
  return rep;
}

}  // namespace dm
