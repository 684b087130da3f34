#pragma once

#include <complex>
#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "evenres/jsonio.hpp"
#include "evenres/logcover.hpp"
#include "evenres/models.hpp"
#include "evenres/zerofinder.hpp"

namespace evenres {

// Smooth test function phi, compactly supported in (0, infinity), paired
// against the wave-trace distribution after the dilation
// phi_gamma(t) = phi(t/gamma)/gamma.
struct TestFunction {
  double t0 = 0.0;  // support is [t0, t1], 0 < t0 < t1
  double t1 = 0.0;
  std::function<double(double)> value;  // evaluator; 0 outside [t0, t1]
  bool nonneg = true;        // phi >= 0 (required by the scaling sweep)
  bool unit_nonzero = true;  // phi(1) != 0 (ditto)
  double fourier_rel_tol = 1e-12;
};

// The default bump: phi(t) = exp(-1/(1 - (2(t-1))^2)) on (0.5, 1.5), else 0.
// Smooth, nonnegative, phi(1) = 1/e.
TestFunction default_bump();

// phi_hat(z) = integral e^{-izt} phi(t) dt, entire in z.  Throws
// EnvelopeError once e^{|Im z| t1} overflows and BudgetError when the
// oscillatory quadrature cannot reach the requested tolerance.
Complex fourier_hat(const TestFunction& phi, Complex z);

// Budgets and knobs shared by the pairing computations.
struct PoissonBudgets {
  // Truncation point of the spectral integrals; 0 selects the decay rule
  // |phi_hat(gamma*lambda)|*(1+lambda)^d < 1e-12*scale, clamped to the
  // log-derivative envelope (the clamp plus the fitted tail completion is
  // recorded in the report).
  double lambda_max = 0.0;
  // Resonance coverage radius; 0 selects the largest radius the order
  // envelope admits (capped by lambda_max when that is explicit).
  double rmax = 0.0;
  double quad_tol = 1e-9;  // relative tolerance per quadrature panel group
  // Gate on the reported (cancellation-free) resonance tail bound.
  double coverage_tol = std::numeric_limits<double>::infinity();
  // Complete the truncated spectral integrals with the fitted mean-density
  // model integrated against phi_hat beyond lambda_max.
  bool tail_correction = true;
  int threads = 1;
  const ResonanceSet* set = nullptr;        // reuse a prebuilt sector -1 set
  std::filesystem::path cache_dir;          // resonance cache (optional)
};

// One side-by-side evaluation of the Poisson trace identity.
struct PoissonReport {
  Complex lhs{0.0, 0.0};            // Birman-Krein pairing (arg-0 data only)
  Complex resonance_sum{0.0, 0.0};  // sector -1 zeros only
  Complex remainder{0.0, 0.0};      // arg +-pi integrals only
  Complex eigen_terms{0.0, 0.0};
  double m0_term = 0.0;
  Complex rhs{0.0, 0.0};  // resonance_sum + eigen_terms + m0_term + remainder
  double abs_err = 0.0;
  double rel_err = 0.0;

  // truncation diagnostics
  double gamma = 0.0;
  int mode_cutoff = 0;          // modes entering the resonance set
  double rmax = 0.0;            // resonance coverage radius
  double lambda_max_rule = 0.0; // what the decay rule asked for
  double lambda_max = 0.0;      // what was used
  bool lambda_max_clamped = false;
  double bk_tail_correction = 0.0;   // fitted completion added to lhs
  double bk_tail_residual = 0.0;     // bound on the completion's own error
  double resonance_tail_bound = 0.0; // cancellation-free envelope bound
  double remainder_tail_bound = 0.0;
  std::size_t resonance_count = 0;   // entries below rmax

  Json to_json() const;
};

// (1/2 pi i) * integral_0^infinity (phi_hat(gamma l) + phi_hat(-gamma l)) *
// logderiv_s(l) dl + eigenvalue terms + m(0) * integral(phi), truncated at
// lambda_max; with tail_correction the truncation is completed by the fitted
// mean-density model.  Uses arg-0 data only.
Complex bk_pairing(const ScatteringModel& model, const TestFunction& phi,
                   double gamma, double lambda_max, double quad_tol,
                   PoissonReport* diag = nullptr, bool tail_correction = true,
                   int threads = 1);

// Restriction of a resonance set to entries with |lambda| < rmax (coverage
// metadata follows suit).
ResonanceSet filter_below(const ResonanceSet& set, double rmax);

// Sum over the set of mult_j * (phi_hat(gamma lambda_j) +
// phi_hat(-gamma conj(lambda_j))), which is mult_j * 2 Re phi_hat for real
// phi.  The reported tail bound combines the set's own counting growth with
// the fitted phi_hat decay envelope; exceeding coverage_tol raises
// CoverageError.
Complex resonance_sum(const ResonanceSet& set, const TestFunction& phi,
                      double gamma, double* tail_bound = nullptr,
                      double coverage_tol =
                          std::numeric_limits<double>::infinity(),
                      int threads = 1);

// -(1/2 pi i) * integral_0^lambda_max [phi_hat(gamma l) * logderiv_s at
// rotate(l,+1) + phi_hat(-gamma l) * logderiv_s at rotate(l,-1)] dl.
// Uses arg +-pi data only.
Complex remainder_integral(const ScatteringModel& model,
                           const TestFunction& phi, double gamma,
                           double lambda_max, double quad_tol,
                           double* tail_bound = nullptr, int threads = 1);

// Both sides of the trace identity with the residual and all truncation
// diagnostics.  The report satisfies
// rhs == resonance_sum + eigen_terms + m0_term + remainder exactly.
PoissonReport poisson_residual(const ScatteringModel& model,
                               const TestFunction& phi, double gamma,
                               const PoissonBudgets& budgets = {});

struct ScalingRow {
  double gamma = 0.0;
  double lambda_max = 0.0;
  double rmax = 0.0;
  Complex bk{0.0, 0.0};
  Complex resonance_remainder{0.0, 0.0};  // res + eigen + m0 + remainder
  Complex remainder{0.0, 0.0};
};

struct ScalingReport {
  std::vector<ScalingRow> rows;
  double slope_bk = 0.0;       // d log|bk| / d log(1/gamma)
  double slope_bk_stderr = 0.0;
  double slope_rhs = 0.0;      // same for the resonance+remainder side
  double slope_remainder = 0.0;
  double cut = 0.0;            // shared truncation point x* = gamma*lambda_max

  Json to_json() const;
  std::string csv() const;
};

// gamma sweep of the pairing magnitude.  All truncations are matched across
// the sweep (lambda_max = rmax = cut/gamma) so every row sees the same
// rescaled window; the expected slope of log|bk| against log(1/gamma) is the
// dimension d.
ScalingReport singularity_scaling(const ScatteringModel& model,
                                  const TestFunction& phi,
                                  const std::vector<double>& gammas,
                                  const PoissonBudgets& budgets = {});

}  // namespace evenres
