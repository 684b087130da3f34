#pragma once

#include <cmath>
#include <complex>

namespace evenres {

// Double-double arithmetic (~31 significant digits), used inside the
// small-argument Bessel series where plain double loses up to exp(|z|)
// of headroom to cancellation.  Only the operations those series need.
struct DD {
  double hi = 0.0;
  double lo = 0.0;

  constexpr DD() = default;
  constexpr DD(double h) : hi(h), lo(0.0) {}
  constexpr DD(double h, double l) : hi(h), lo(l) {}

  double to_double() const { return hi + lo; }
};

namespace dd_detail {
inline DD two_sum(double a, double b) {
  const double s = a + b;
  const double bb = s - a;
  const double err = (a - (s - bb)) + (b - bb);
  return DD{s, err};
}
inline DD quick_two_sum(double a, double b) {
  const double s = a + b;
  return DD{s, b - (s - a)};
}
inline DD two_prod(double a, double b) {
  const double p = a * b;
  return DD{p, std::fma(a, b, -p)};
}
}  // namespace dd_detail

inline DD operator+(DD a, DD b) {
  using namespace dd_detail;
  DD s = two_sum(a.hi, b.hi);
  const double lo = s.lo + a.lo + b.lo;
  return quick_two_sum(s.hi, lo);
}

inline DD operator-(DD a) { return DD{-a.hi, -a.lo}; }
inline DD operator-(DD a, DD b) { return a + (-b); }

inline DD operator*(DD a, DD b) {
  using namespace dd_detail;
  DD p = two_prod(a.hi, b.hi);
  const double lo = p.lo + a.hi * b.lo + a.lo * b.hi;
  return quick_two_sum(p.hi, lo);
}

inline DD operator*(DD a, double b) { return a * DD{b}; }

inline DD operator/(DD a, DD b) {
  const double q1 = a.hi / b.hi;
  DD r = a - b * q1;
  const double q2 = r.hi / b.hi;
  r = r - b * q2;
  const double q3 = r.hi / b.hi;
  return dd_detail::quick_two_sum(q1, q2) + DD{q3};
}

inline DD operator/(DD a, double b) { return a / DD{b}; }

// Complex double-double: enough for power-series accumulation.
struct CDD {
  DD re, im;

  CDD() = default;
  CDD(DD r, DD i) : re(r), im(i) {}
  explicit CDD(std::complex<double> z) : re(z.real()), im(z.imag()) {}

  std::complex<double> to_complex() const {
    return {re.to_double(), im.to_double()};
  }
};

inline CDD operator+(const CDD& a, const CDD& b) {
  return CDD{a.re + b.re, a.im + b.im};
}
inline CDD operator-(const CDD& a, const CDD& b) {
  return CDD{a.re - b.re, a.im - b.im};
}
inline CDD operator*(const CDD& a, const CDD& b) {
  return CDD{a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
}
inline CDD operator*(const CDD& a, DD s) { return CDD{a.re * s, a.im * s}; }
inline CDD operator*(const CDD& a, double s) { return CDD{a.re * s, a.im * s}; }
inline CDD operator/(const CDD& a, double s) { return CDD{a.re / s, a.im / s}; }

inline CDD conj(const CDD& a) { return CDD{a.re, -a.im}; }

inline CDD operator/(const CDD& a, const CDD& b) {
  const DD den = b.re * b.re + b.im * b.im;
  const CDD num = a * conj(b);
  return CDD{num.re / den, num.im / den};
}

inline double abs_upper(const CDD& a) {
  return std::abs(a.re.hi) + std::abs(a.im.hi);
}

}  // namespace evenres
