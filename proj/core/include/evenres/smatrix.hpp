#pragma once

#include <string>
#include <vector>

#include "evenres/jsonio.hpp"
#include "evenres/logcover.hpp"
#include "evenres/models.hpp"

namespace evenres {

// Diagnostics attached to a truncated mode sum over the scattering
// eigenvalues: how many modes entered the sum and a conservative estimate of
// the dropped remainder (geometric extrapolation from the verified
// decreasing tail).
struct ModeSumTail {
  int modes_used = 0;
  double tail_bound = 0.0;
};

// log det S(lambda) = sum_n m_n log s_n(lambda).  The real part (log of the
// determinant modulus) is exact even when det S itself leaves double range;
// the imaginary part is reported modulo 2*pi (modes with |s_n - 1| < 1/2
// contribute principal logs directly, the rest are accumulated as a scaled
// product whose argument is wrapped).  The sum is truncated once three
// consecutive modes satisfy |s_n - 1| < tail_tol with decreasing magnitudes.
// min_modes forces at least that many modes into the sum (used by
// truncation-stability checks).
Complex logdet_s(const ScatteringModel& model, const LogPoint& p,
                 double tail_tol = 1e-14, ModeSumTail* tail = nullptr,
                 int min_modes = 0);

// det S(lambda) = exp(logdet_s).  Throws EnvelopeError when the modulus is
// not representable in double precision.
Complex det_s(const ScatteringModel& model, const LogPoint& p,
              double tail_tol = 1e-14, ModeSumTail* tail = nullptr);

// (d/dlambda) log det S = sum_n m_n (d/dlambda) log s_n via the Wronskian
// closed form, truncated with the same verified-tail rule as det_s.
Complex logderiv_s(const ScatteringModel& model, const LogPoint& p,
                   double tail_tol = 1e-14, ModeSumTail* tail = nullptr);

// f(lambda) = det S(lambda) / det S(lambda e^{i pi}).  Underflows to 0 when
// the denominator dominates beyond double range; throws EnvelopeError on
// overflow.
Complex f_ratio(const ScatteringModel& model, const LogPoint& p,
                double tail_tol = 1e-14);

// ||I - S(tau)||_tr = sum_n m_n |s_n(tau) - 1| on the physical half-line
// (S is normal and diagonal in the harmonic basis, so this is exact up to
// the verified tail).
double trace_norm_deficit(const ScatteringModel& model, double tau,
                          double tail_tol = 1e-14);

// Continuous branch of arg det S(tau e^{+-i pi}) sampled on a strictly
// increasing positive grid, anchored at tau = 1 (the value there is the
// wrapped argument of det S at the anchor).  Steps are bisected in log tau
// until every phase increment is below pi/2; throws BudgetError when the
// bisection depth is exhausted.
std::vector<double> tracked_arg(const ScatteringModel& model,
                                const std::vector<double>& tau_grid,
                                int halfturns, double tail_tol = 1e-14);

// One row per grid point: tau, Re det S(tau e^{i pi halfturns}),
// Im det S(...), ||I - S(tau)||_tr, tracked arg.  Re/Im columns are written
// as "inf" when the determinant modulus leaves double range.  17 significant
// digits throughout.
std::string smatrix_csv(const ScatteringModel& model,
                        const std::vector<double>& tau_grid, int halfturns,
                        double tail_tol = 1e-14, int threads = 1);

// Least-squares power-law fit of |values| against grid (log-log): JSON
// object {exponent, ci_low, ci_high, grid, values} with a ~95% confidence
// band (two standard errors).  Entries with |value| below floor are skipped.
Json exponent_report(const std::vector<double>& grid,
                     const std::vector<double>& values, double floor = 0.0);

}  // namespace evenres
