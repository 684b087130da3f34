#include "evenres/logcover.hpp"

#include <cmath>
#include <string>

namespace evenres {

namespace {
constexpr double kBoundaryTol = 1e-12;
}

LogPoint make_logpoint(double modulus, double argument) {
  if (!(modulus > 0.0) || !std::isfinite(modulus)) {
    throw UsageError("LogPoint modulus must be positive and finite, got " +
                     std::to_string(modulus));
  }
  if (!std::isfinite(argument)) {
    throw UsageError("LogPoint argument must be finite");
  }
  return LogPoint{modulus, argument};
}

Complex to_complex(const LogPoint& p) {
  return std::polar(p.modulus, p.argument);
}

LogPoint from_complex(Complex z) {
  const double r = std::abs(z);
  if (!(r > 0.0) || !std::isfinite(r)) {
    throw UsageError("cannot lift 0 or a non-finite value to the cover");
  }
  return LogPoint{r, std::arg(z)};
}

LogPoint rotate(const LogPoint& p, std::int64_t k) {
  return LogPoint{p.modulus, p.argument + static_cast<double>(k) * kPi};
}

LogPoint conjugate(const LogPoint& p) {
  return LogPoint{p.modulus, -p.argument};
}

double boundary_distance(const LogPoint& p) {
  // remainder(theta, pi) = theta - pi*round(theta/pi), in [-pi/2, pi/2].
  return std::abs(std::remainder(p.argument, kPi));
}

std::int64_t sector(const LogPoint& p) {
  if (boundary_distance(p) < kBoundaryTol) {
    throw BoundaryError("argument " + std::to_string(p.argument) +
                        " is within 1e-12 of a sector boundary");
  }
  const double q = p.argument / kPi;
  auto k = static_cast<std::int64_t>(std::floor(q));
  // Guard against floor landing on the wrong side after rounding of q.
  if (p.argument < static_cast<double>(k) * kPi) --k;
  if (p.argument >= static_cast<double>(k + 1) * kPi) ++k;
  return k;
}

Complex log_coord(const LogPoint& p) {
  return Complex{std::log(p.modulus), p.argument};
}

LogPoint from_log_coord(Complex w) {
  return LogPoint{std::exp(w.real()), w.imag()};
}

}  // namespace evenres
