#pragma once

#include <complex>
#include <functional>

namespace evenres {

struct QuadResult {
  std::complex<double> value{0.0, 0.0};
  double abs_error = 0.0;
  long evaluations = 0;
  bool converged = false;
};

// Globally adaptive Gauss-Kronrod (G7/K15) on [a, b].  Intervals with the
// largest error estimate are bisected first, until
//   total_error <= max(abs_tol, rel_tol * |integral|)
// or max_intervals is exhausted (converged = false in that case; callers
// decide whether that is a BudgetError).
QuadResult integrate_gk(const std::function<std::complex<double>(double)>& f,
                        double a, double b, double abs_tol, double rel_tol,
                        int max_intervals = 4000);

// Single non-adaptive K15 application with embedded G7 error estimate.
QuadResult gk15(const std::function<std::complex<double>(double)>& f, double a,
                double b);

}  // namespace evenres
