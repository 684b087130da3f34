#pragma once

// Extended-precision reference values for the cylinder functions on the
// logarithmic cover, computed from the defining power series with MPFR.
// Independent of the production evaluation paths: no recurrences, no
// asymptotic expansions, no sheet connection formulas beyond the series'
// own (z/2)^nu and log(z) factors, which continue canonically in the
// unwrapped argument.

#include <cstdint>

#include "evenres/logcover.hpp"
#include "evenres/scaled.hpp"

namespace evenres::oracle {

// value = m * 2^e, the same convention as ScaledC but with a guaranteed
// normalized mantissa
struct OracleValue {
  Complex m{0.0, 0.0};
  std::int64_t e = 0;
};

// nu must be a nonnegative integer or half-integer; p.modulus > 0.
// prec_bits = 0 picks a precision from |z| (series cancellation grows like
// e^{2|z|}).  kind is 1 or 2.
OracleValue bessel_j(double nu, const LogPoint& p, long prec_bits = 0);
OracleValue bessel_y(double nu, const LogPoint& p, long prec_bits = 0);
OracleValue hankel(int kind, double nu, const LogPoint& p, long prec_bits = 0);
OracleValue hankel_deriv(int kind, double nu, const LogPoint& p,
                         long prec_bits = 0);

// |s - o| / |o| after exponent alignment; infinity when one side is zero
// and the other is not, 0 when both are zero.
double rel_diff(const OracleValue& o, const ScaledC& s);

}  // namespace evenres::oracle
