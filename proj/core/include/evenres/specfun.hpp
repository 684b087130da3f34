#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "evenres/logcover.hpp"
#include "evenres/scaled.hpp"

namespace evenres {
namespace specfun {

// Supported envelope.  Orders are nonnegative integers or half-integers
// (integer for even ambient dimension, the only case the models exercise).
inline constexpr double kZMax = 2000.0;
inline constexpr double kNuMax = 830.0;
inline constexpr double kZMin = 1e-280;

// Per-evaluation diagnostics.  cancellation_digits estimates decimal digits
// lost when sheet-connection terms nearly cancel; callers treat values above
// warn_threshold as degraded accuracy, not hard errors.
struct SpecfunDiag {
  double cancellation_digits = 0.0;
  int regime = 0;  // 1 = series seeds, 2 = asymptotic seeds, 3 = half-integer closed form
  bool warn = false;
  static constexpr double warn_threshold = 3.0;
};

// All orders nu0 + k for k = 0..kmax evaluated at one cover point.
// Values are scaled (mantissa * 2^e): magnitudes along order sweeps leave
// double range long before the order envelope does.
struct SweepResult {
  double nu0 = 0.0;  // 0.0 or 0.5
  int kmax = 0;
  std::int64_t halfturns = 0;      // sheet reduction: p = z0 * e^{i*m*pi}
  Complex z0{1.0, 0.0};            // principal-strip point, |arg z0| <= pi/2
  std::vector<ScaledC> h1, h2, j;  // H^{(1)}, H^{(2)}, J at the cover point
  std::vector<ScaledC> h1p, h2p;   // d/dz of H^{(1)}, H^{(2)} at the cover point
  double max_cancellation_digits = 0.0;
  int regime = 0;

  ScaledC y(int k) const;   // Y = (H1 - H2) / (2i)
  ScaledC jp(int k) const;  // J' = (H1' + H2') / 2
};

// Workhorse: evaluates the whole order sweep at p.  nu0 must be 0 or 0.5,
// kmax >= 0, nu0 + kmax <= kNuMax, kZMin <= p.modulus <= kZMax.
SweepResult hankel_sweep(double nu0, int kmax, const LogPoint& p);

// Scalar entry points.  nu must be a nonnegative integer or half-integer.
// Throw EnvelopeError outside the envelope or when the value does not fit
// in double range (the envelope admits |H| ~ e^{|Im z|} up to e^{2000}).
Complex bessel_j(double nu, const LogPoint& p, SpecfunDiag* diag = nullptr);
Complex bessel_y(double nu, const LogPoint& p, SpecfunDiag* diag = nullptr);
Complex hankel(int kind, double nu, const LogPoint& p, SpecfunDiag* diag = nullptr);
Complex hankel_deriv(int kind, double nu, const LogPoint& p,
                     SpecfunDiag* diag = nullptr);

// Validation helper shared by the entry points; throws EnvelopeError /
// UsageError on bad (nu, p).
void check_envelope(double nu, const LogPoint& p);

}  // namespace specfun
}  // namespace evenres
