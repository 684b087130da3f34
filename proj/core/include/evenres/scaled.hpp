#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>

#include "evenres/errors.hpp"

namespace evenres {

// Complex number m * 2^e with |m| kept inside a wide window by renormalize().
// Bessel/Hankel recurrences sweep through magnitudes far outside double range
// (Y_n ~ (n-1)! (2/z)^n overflows near n ~ 150 already for moderate z);
// every internal kernel works on ScaledC and only the public entry points
// collapse to double, reporting EnvelopeError when that is not representable.
struct ScaledC {
  std::complex<double> m{0.0, 0.0};
  std::int64_t e = 0;

  static ScaledC zero() { return ScaledC{{0.0, 0.0}, 0}; }

  bool is_zero() const { return m.real() == 0.0 && m.imag() == 0.0; }

  void renormalize() {
    const double a = std::abs(m.real()) + std::abs(m.imag());
    if (a == 0.0) {
      e = 0;
      return;
    }
    if (a > 0x1p400 || a < 0x1p-400) {
      int k = 0;
      std::frexp(a, &k);
      m = {std::ldexp(m.real(), -k), std::ldexp(m.imag(), -k)};
      e += k;
    }
  }

  // log2 of magnitude; -inf for zero.
  double mag2() const {
    const double a = std::abs(m);
    if (a == 0.0) return -std::numeric_limits<double>::infinity();
    return std::log2(a) + static_cast<double>(e);
  }
};

inline ScaledC scaled_from(std::complex<double> z) {
  ScaledC s{z, 0};
  s.renormalize();
  return s;
}

inline ScaledC operator*(const ScaledC& a, const ScaledC& b) {
  ScaledC r{a.m * b.m, a.e + b.e};
  r.renormalize();
  return r;
}

inline ScaledC operator*(const ScaledC& a, std::complex<double> c) {
  ScaledC r{a.m * c, a.e};
  r.renormalize();
  return r;
}

inline ScaledC operator*(const ScaledC& a, double c) {
  ScaledC r{a.m * c, a.e};
  r.renormalize();
  return r;
}

inline ScaledC operator+(const ScaledC& a, const ScaledC& b) {
  if (a.is_zero()) return b;
  if (b.is_zero()) return a;
  const std::int64_t d = a.e - b.e;
  if (d > 1100) return a;
  if (d < -1100) return b;
  ScaledC r;
  if (d >= 0) {
    r.m = a.m + std::complex<double>{std::ldexp(b.m.real(), static_cast<int>(-d)),
                                     std::ldexp(b.m.imag(), static_cast<int>(-d))};
    r.e = a.e;
  } else {
    r.m = b.m + std::complex<double>{std::ldexp(a.m.real(), static_cast<int>(d)),
                                     std::ldexp(a.m.imag(), static_cast<int>(d))};
    r.e = b.e;
  }
  r.renormalize();
  return r;
}

inline ScaledC operator-(const ScaledC& a) { return ScaledC{-a.m, a.e}; }
inline ScaledC operator-(const ScaledC& a, const ScaledC& b) { return a + (-b); }

inline ScaledC scaled_div(const ScaledC& a, const ScaledC& b) {
  if (b.is_zero()) throw PoleProximityError("division by zero scaled value");
  ScaledC r{a.m / b.m, a.e - b.e};
  r.renormalize();
  return r;
}

inline ScaledC conj(const ScaledC& a) { return ScaledC{std::conj(a.m), a.e}; }

// a / b as a plain complex; underflows flush to 0, overflow throws.
inline std::complex<double> scaled_ratio(const ScaledC& a, const ScaledC& b) {
  if (b.is_zero()) throw PoleProximityError("division by zero scaled value");
  if (a.is_zero()) return {0.0, 0.0};
  const std::complex<double> q = a.m / b.m;
  const std::int64_t d = a.e - b.e;
  if (d > 1020) throw EnvelopeError("scaled ratio overflows double range");
  if (d < -1060) return {0.0, 0.0};
  return {std::ldexp(q.real(), static_cast<int>(d)),
          std::ldexp(q.imag(), static_cast<int>(d))};
}

inline std::complex<double> scaled_to_complex(const ScaledC& a) {
  if (a.is_zero()) return {0.0, 0.0};
  const double mag = a.mag2();
  if (mag > 1020.0) throw EnvelopeError("scaled value overflows double range");
  if (mag < -1060.0) return {0.0, 0.0};
  return {std::ldexp(a.m.real(), static_cast<int>(a.e)),
          std::ldexp(a.m.imag(), static_cast<int>(a.e))};
}

// e^{i z} as a scaled value; |e^{iz}| = e^{-Im z} can leave double range.
inline ScaledC scaled_cis(std::complex<double> z) {
  const double t = -z.imag() * 1.4426950408889634074;  // log2(e)
  const double ei = std::floor(t);
  ScaledC r{std::polar(std::exp2(t - ei), z.real()),
            static_cast<std::int64_t>(ei)};
  r.renormalize();
  return r;
}

}  // namespace evenres
