#pragma once

#include <complex>
#include <cstdint>

#include "evenres/errors.hpp"

namespace evenres {

using Complex = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846264338327950288;

// Point on the logarithmic cover of C\{0}: a positive modulus together with
// an unwrapped argument.  Arguments are NOT reduced mod 2*pi; two points with
// arguments differing by 2*pi project to the same complex number but are
// distinct points of the cover.
struct LogPoint {
  double modulus = 1.0;
  double argument = 0.0;

  friend bool operator==(const LogPoint&, const LogPoint&) = default;
};

// Validating constructor: modulus must be positive and finite, argument finite.
LogPoint make_logpoint(double modulus, double argument);

// Projection to C.
Complex to_complex(const LogPoint& p);

// Lift of a nonzero complex number with principal argument in (-pi, pi].
LogPoint from_complex(Complex z);

// Rotation by e^{i*k*pi}: adds k*pi to the argument (k integer half-turns).
LogPoint rotate(const LogPoint& p, std::int64_t k);

// lambda |-> conj(lambda) on the cover: same modulus, negated argument.
LogPoint conjugate(const LogPoint& p);

// Distance from the argument to the nearest multiple of pi.
double boundary_distance(const LogPoint& p);

// Sector index k with k*pi < argument < (k+1)*pi.  Throws BoundaryError when
// the argument lies within 1e-12 of a multiple of pi.
std::int64_t sector(const LogPoint& p);

// Log-chart coordinate log(lambda) = log(modulus) + i*argument; injective on
// the cover, analytic in lambda with derivative 1/lambda.
Complex log_coord(const LogPoint& p);
LogPoint from_log_coord(Complex w);

}  // namespace evenres
