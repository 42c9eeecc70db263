// Independent reference implementations used only by the tests: brute-force
// grid minimization, generic bisection, and a dense linear solve. These
// deliberately avoid the library's closed forms so agreement is meaningful.
#ifndef DM_TESTS_ORACLES_HPP
#define DM_TESTS_ORACLES_HPP

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "dm/model.hpp"

namespace oracle {

// min over omega in [0, 1-1e-4] of L(omega) - (xi/p) omega on an n-point
// grid; optionally refined by golden-section search around the grid argmin.
inline double grid_hamiltonian(const dm::ModelParams& params, double x,
                               double xi, double p, dm::SigmaMode mode,
                               int n = 10001, bool refine = false) {
  auto inner = [&](double w) {
    return dm::cost_eval(params.cost, w).value - (xi / p) * w;
  };
  const double w_hi = 1.0 - 1e-4;
  double best = inner(0.0);
  int best_i = 0;
  for (int i = 1; i < n; ++i) {
    double w = w_hi * i / (n - 1);
    double v = inner(w);
    if (v < best) {
      best = v;
      best_i = i;
    }
  }
  if (refine) {
    double lo = w_hi * std::max(0, best_i - 1) / (n - 1);
    double hi = w_hi * std::min(n - 1, best_i + 1) / (n - 1);
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo, b = hi;
    double c = b - gr * (b - a), d = a + gr * (b - a);
    for (int it = 0; it < 200 && b - a > 1e-14; ++it) {
      if (inner(c) < inner(d)) {
        b = d;
        d = c;
        c = b - gr * (b - a);
      } else {
        a = c;
        c = d;
        d = a + gr * (b - a);
      }
    }
    best = std::min(best, inner(0.5 * (a + b)));
  }
  double sig2 = mode == dm::SigmaMode::Stochastic
                    ? params.sigma * params.sigma
                    : 0.0;
  double a_p = (params.lambda + params.r) / p - params.lambda + sig2 -
               params.mu;
  return best + a_p * x * xi;
}

inline double bisect(const std::function<double(double)>& f, double lo,
                     double hi, double tol = 1e-12, int iters = 200) {
  double flo = f(lo), fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if (flo * fhi > 0.0) throw std::runtime_error("oracle::bisect: no bracket");
  for (int i = 0; i < iters && hi - lo > tol; ++i) {
    double mid = 0.5 * (lo + hi);
    double fm = f(mid);
    if (fm == 0.0) return mid;
    if (flo * fm < 0.0) {
      hi = mid;
      fhi = fm;
    } else {
      lo = mid;
      flo = fm;
    }
  }
  return 0.5 * (lo + hi);
}

// Dense Gaussian elimination with partial pivoting; reference solver for
// small linear systems (e.g. the affine relaxation steady state).
inline std::vector<double> dense_solve(std::vector<std::vector<double>> A,
                                       std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::fabs(A[i][k]) > std::fabs(A[piv][k])) piv = i;
    std::swap(A[k], A[piv]);
    std::swap(b[k], b[piv]);
    if (A[k][k] == 0.0) throw std::runtime_error("oracle::dense_solve: singular");
    for (std::size_t i = k + 1; i < n; ++i) {
      double m = A[i][k] / A[k][k];
      if (m == 0.0) continue;
      for (std::size_t j = k; j < n; ++j) A[i][j] -= m * A[k][j];
      b[i] -= m * b[k];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= A[i][j] * x[j];
    x[i] = s / A[i][i];
  }
  return x;
}

}  // namespace oracle

#endif
