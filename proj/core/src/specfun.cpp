#include "evenres/specfun.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "evenres/dd.hpp"
#include "evenres/errors.hpp"

namespace evenres {
namespace specfun {
namespace {

// Below this |z| the integer-order seeds come from the defining power series
// (in double-double: the alternating terms reach exp(|z|) above the sum);
// above it the Hankel asymptotic series is already accurate to ~exp(-2|z|),
// i.e. a few ulps at 18.
constexpr double kSeriesSwitch = 18.0;

// pi split for exact argument reduction theta - m*pi with m up to ~3e7.
constexpr double kPiHi = 3.14159265358979311600;
constexpr double kPiLo = 1.22464679914735317722e-16;

// Double-double constants.  Near the imaginary axis H1 = J + iY cancels by
// e^{2 Im z}, so every scalar entering the Y seeds must carry ~1e-32 error;
// a plain-double Euler gamma alone would cost ~1e-3 of H1 at Im z = 16.
constexpr DD kGammaDD{5.77215664901532866e-01, -4.94291515243064487e-18};
constexpr DD kLn2DD{6.93147180559945286e-01, 2.31904681384629956e-17};
constexpr DD kTwoOverPiDD{6.36619772367581382e-01, -3.93573533503649718e-17};
constexpr DD kInvTwoPiDD{1.59154943091895346e-01, -9.83933833759124294e-18};

CDD mul_i(const CDD& a) { return CDD{-a.im, a.re}; }

// exp, log, sin/cos, and the complex log in double-double, for the seed
// scalars above.  Domains are what the seeds use: dd_exp argument stays
// within [-0.7, 0.7] after its power-of-two split, dd_sincos needs
// |th| <= pi/2 + ulp, cdd_log sees first-quadrant z in the envelope.
DD dd_exp(DD x) {
  const double n = std::round(x.hi * 1.4426950408889634);
  const DD r = x - kLn2DD * n;
  DD term{1.0};
  DD sum{1.0};
  for (int k = 1; k <= 26; ++k) {
    term = term * r / static_cast<double>(k);
    sum = sum + term;
    if (std::abs(term.hi) < 1e-35) break;
  }
  const int ni = static_cast<int>(n);
  return DD{std::ldexp(sum.hi, ni), std::ldexp(sum.lo, ni)};
}

DD dd_log(DD a) {
  const int m2 = std::ilogb(a.hi);
  const DD b{std::ldexp(a.hi, -m2), std::ldexp(a.lo, -m2)};  // in [1, 2)
  const double w0 = std::log(b.hi);
  const DD r = b * dd_exp(DD{-w0}) - DD{1.0};
  const double md = static_cast<double>(m2);
  return ((DD{w0} + r - r * r * 0.5) + kLn2DD * md);
}

void dd_sincos(double th, DD* c, DD* s) {
  double sign_s = 1.0;
  if (th < 0.0) {
    th = -th;
    sign_s = -1.0;
  }
  DD r{th};
  const bool folded = th > 0.25 * kPi;
  if (folded) r = (DD{0.5 * kPiHi} - DD{th}) + DD{0.5 * kPiLo};
  const DD r2 = r * r;
  DD st = r, ss = r;  // sin Taylor
  DD ct{1.0}, cs{1.0};  // cos Taylor
  for (int k = 1; k <= 16; ++k) {
    const double two_k = 2.0 * static_cast<double>(k);
    st = st * r2 / (-two_k * (two_k + 1.0));
    ss = ss + st;
    ct = ct * r2 / (-two_k * (two_k - 1.0));
    cs = cs + ct;
  }
  if (folded) {  // sin(th) = cos(r), cos(th) = sin(r)
    *c = ss;
    *s = cs;
  } else {
    *c = cs;
    *s = ss;
  }
  if (sign_s < 0.0) *s = -*s;
}

// log z to double-double: rotate z by the double-precision angle in
// double-double arithmetic, leaving a residual rotation small enough that
// atan(t) = t holds to ~1e-48.
CDD cdd_log(Complex z) {
  const double th = std::atan2(z.imag(), z.real());
  DD c, s;
  dd_sincos(th, &c, &s);
  const DD x{z.real()}, y{z.imag()};
  const DD re = x * c + y * s;
  const DD im = y * c - x * s;
  const DD delta = im / re;
  return CDD{dd_log(re), DD{th} + delta};
}

// Seed values at orders (nu0, nu0 + 1) for H1, H2 and J.
struct SeedPair {
  ScaledC h1[2], h2[2], j[2];
  int regime = 0;
};

// Integer orders 0 and 1 by power series, |z| < kSeriesSwitch, Im z >= 0.
// Everything that cancels runs in double-double, including the harmonic
// numbers: their rounding enters scaled by the largest term of the series,
// not by the (exponentially smaller) sum.
SeedPair series_seeds_int(Complex z) {
  const CDD zdd(z);
  const CDD u = zdd * zdd * 0.25;  // (z/2)^2

  CDD t{DD{1.0}, DD{0.0}};  // (-u)^k / (k!)^2
  CDD s = t;                // (-u)^k / (k! (k+1)!)
  CDD sum0 = t;
  CDD sum1 = s;
  CDD comp0{};     // sum_k t_k H_k
  CDD comp1 = s;   // sum_k s_k (H_k + H_{k+1}); k = 0 term is 1
  DD hk{0.0};      // H_k
  DD hk1{1.0};     // H_{k+1}
  double peak = 1.0;

  for (int k = 1; k < 400; ++k) {
    const double kd = static_cast<double>(k);
    t = t * u / (-kd * kd);
    s = s * u / (-kd * (kd + 1.0));
    hk = hk + DD{1.0} / kd;
    hk1 = hk1 + DD{1.0} / (kd + 1.0);
    sum0 = sum0 + t;
    comp0 = comp0 + t * hk;
    sum1 = sum1 + s;
    comp1 = comp1 + s * (hk + hk1);
    const double at = abs_upper(t);
    peak = std::max(peak, at);
    if (k > 4 && at < 1e-36 * peak) break;
  }

  const CDD lg = cdd_log(0.5 * z) + CDD{kGammaDD, DD{0.0}};
  const CDD j0 = sum0;
  const CDD j1 = zdd * 0.5 * sum1;
  const CDD y0 = (lg * j0 - comp0) * kTwoOverPiDD;
  // 2/(pi z): the double-double quotient needs |z|^2 representable; below
  // that Im z is microscopic, nothing cancels, and plain double suffices.
  const CDD inv_term =
      (std::abs(z) >= 1e-100)
          ? CDD{kTwoOverPiDD, DD{0.0}} / zdd
          : CDD((2.0 / kPi) / z);
  const CDD y1 = (lg * j1) * kTwoOverPiDD - inv_term - zdd * comp1 * kInvTwoPiDD;

  const CDD iy0 = mul_i(y0);
  const CDD iy1 = mul_i(y1);
  SeedPair out;
  out.regime = 1;
  out.j[0] = scaled_from(j0.to_complex());
  out.j[1] = scaled_from(j1.to_complex());
  out.h1[0] = scaled_from((j0 + iy0).to_complex());
  out.h1[1] = scaled_from((j1 + iy1).to_complex());
  out.h2[0] = scaled_from((j0 - iy0).to_complex());
  out.h2[1] = scaled_from((j1 - iy1).to_complex());
  return out;
}

// Truncated Hankel asymptotic sum  sum_k (sgn*i)^k a_k(nu) / z^k  with
// a_k = a_{k-1} (4 nu^2 - (2k-1)^2) / (8k), cut at the smallest term.
Complex asym_sum(double nu, Complex z, int sgn) {
  const double fournu2 = 4.0 * nu * nu;
  Complex term{1.0, 0.0};
  Complex sum = term;
  const Complex step = Complex{0.0, static_cast<double>(sgn)} / z;
  double prev = 1.0;
  for (int k = 1; k <= 80; ++k) {
    const double odd = 2.0 * static_cast<double>(k) - 1.0;
    term *= step * ((fournu2 - odd * odd) / (8.0 * static_cast<double>(k)));
    const double at = std::abs(term);
    if (at > prev) break;  // past the optimal truncation point
    sum += term;
    prev = at;
    if (at < 1e-18) break;
  }
  return sum;
}

// H^{(kind)}_nu(z) ~ sqrt(2/(pi z)) e^{+-i(z - nu pi/2 - pi/4)} * asym_sum,
// valid for |z| >= kSeriesSwitch; the e^{+-iz} factor is kept scaled since
// |e^{iz}| = e^{-Im z} spans far beyond double range over the envelope.
ScaledC asym_H(int kind, double nu, Complex z) {
  const int sgn = (kind == 1) ? +1 : -1;
  const Complex pref = std::sqrt(2.0 / (kPi * z));
  const Complex rot = std::polar(1.0, -sgn * (0.5 * nu + 0.25) * kPi);
  const ScaledC osc = scaled_cis(static_cast<double>(sgn) * z);
  return osc * (pref * rot * asym_sum(nu, z, sgn));
}

SeedPair asym_seeds_int(Complex z) {
  SeedPair out;
  out.regime = 2;
  out.h1[0] = asym_H(1, 0.0, z);
  out.h1[1] = asym_H(1, 1.0, z);
  out.h2[0] = asym_H(2, 0.0, z);
  out.h2[1] = asym_H(2, 1.0, z);
  out.j[0] = (out.h1[0] + out.h2[0]) * 0.5;
  out.j[1] = (out.h1[1] + out.h2[1]) * 0.5;
  return out;
}

// Orders 1/2 and 3/2 in closed form, any |z| in the envelope.  Factors are
// promoted to scaled values separately: their product (~ z^{-3/2}) leaves
// double range near the lower modulus bound.
SeedPair half_seeds(Complex z) {
  const ScaledC pref = scaled_from(std::sqrt(2.0 / (kPi * z)));
  const ScaledC ep = scaled_cis(z);
  const ScaledC em = scaled_cis(-z);
  const Complex ioz = Complex{0.0, 1.0} / z;
  SeedPair out;
  out.regime = 3;
  out.h1[0] = pref * ep * Complex{0.0, -1.0};
  out.h2[0] = pref * em * Complex{0.0, 1.0};
  out.h1[1] = -(pref * ep * scaled_from(Complex{1.0, 0.0} + ioz));
  out.h2[1] = -(pref * em * scaled_from(Complex{1.0, 0.0} - ioz));
  out.j[0] = (out.h1[0] + out.h2[0]) * 0.5;
  out.j[1] = (out.h1[1] + out.h2[1]) * 0.5;
  return out;
}

// Forward order recurrence F_{k} = (2 nu_{k-1} / z) F_{k-1} - F_{k-2}.
// With Im z >= 0 this is stable for H1 only: |H1_nu| grows along the order
// sweep both below the turning point (like e^{-Im phi_nu}) and above it
// (like Y_nu), so injected rounding stays relatively bounded.  H2 decays
// toward the turning point there and must NOT be forward-swept; it is
// reassembled as 2J - H1 from the backward-stable J instead.
void forward_sweep(double nu0, Complex z, std::vector<ScaledC>& h) {
  const Complex two_over_z = 2.0 / z;
  for (std::size_t k = 2; k < h.size(); ++k) {
    h[k] = h[k - 1] * ((nu0 + static_cast<double>(k - 1)) * two_over_z) -
           h[k - 2];
  }
}

// J is order-recessive, so it comes from Miller's backward recurrence:
// start with an arbitrary tiny trial far enough above kmax, recur down,
// then normalize against the seed order that carries the larger magnitude.
// The starting offset covers the slow (Airy-regime) convergence near
// order ~ |z|, where the dominant/recessive ratio grows like
// exp(c (nu - |z|)^{3/2} / |z|^{1/2}) instead of geometrically.
std::vector<ScaledC> miller_j(double nu0, int kmax, Complex z,
                              const ScaledC seed[2]) {
  const double az = std::abs(z);
  const int start = std::max(kmax, static_cast<int>(std::ceil(az)));
  const int m = start + 20 + static_cast<int>(std::ceil(13.0 * std::cbrt(az + 1.0)));
  std::vector<ScaledC> out(static_cast<std::size_t>(kmax) + 1);
  ScaledC above = ScaledC::zero();    // trial at order m+1
  ScaledC cur{{1.0, 0.0}, -1000};     // trial at order m
  const Complex two_over_z = 2.0 / z;
  for (int k = m; k >= 1; --k) {
    ScaledC below = cur * ((nu0 + static_cast<double>(k)) * two_over_z) - above;
    above = cur;
    cur = below;
    if (k - 1 <= kmax) out[static_cast<std::size_t>(k - 1)] = below;
  }
  const int idx = (out[0].mag2() >= out[1].mag2()) ? 0 : 1;
  if (out[static_cast<std::size_t>(idx)].is_zero()) {
    throw InternalError("backward recurrence produced a zero trial value");
  }
  const ScaledC alpha =
      scaled_div(seed[idx], out[static_cast<std::size_t>(idx)]);
  for (auto& v : out) v = v * alpha;
  return out;
}

// d/dz from neighbours: F'_{nu} = F_{nu-1} - (nu/z) F_{nu}, and at the
// bottom order F'_{nu0} = (nu0/z) F_{nu0} - F_{nu0+1}.
std::vector<ScaledC> derivative_sweep(double nu0, Complex z,
                                      const std::vector<ScaledC>& h) {
  std::vector<ScaledC> d(h.size());
  const Complex inv_z = 1.0 / z;
  d[0] = h[0] * (nu0 * inv_z) - h[1];
  for (std::size_t k = 1; k < h.size(); ++k) {
    d[k] = h[k - 1] - h[k] * ((nu0 + static_cast<double>(k)) * inv_z);
  }
  return d;
}

// Sheet connection, m half-turns: values at z0 e^{i m pi} are integer
// combinations (integer order) or {0, +-1, +-i} combinations (half-integer
// order) of the principal-strip values.  Coefficients are exact.
struct ConnCoef {
  Complex a, b;  // H1(p) = a H1(z0) + b H2(z0)
  Complex c, d;  // H2(p) = c H1(z0) + d H2(z0)
  Complex jph;   // J(p)  = jph J(z0)
};

ConnCoef connection_int(std::int64_t m, int n) {
  const double md = static_cast<double>(m);
  const double s = ((m % 2 != 0) && (n % 2 != 0)) ? -1.0 : 1.0;  // (-1)^{mn}
  return ConnCoef{Complex{-s * (md - 1.0), 0.0}, Complex{-s * md, 0.0},
                  Complex{s * md, 0.0}, Complex{s * (md + 1.0), 0.0},
                  Complex{s, 0.0}};
}

ConnCoef connection_half(std::int64_t m, int n) {
  // sin(j nu pi) for nu = n + 1/2 cycles with period 4 in j(2n+1).
  const auto q = [n](std::int64_t j) -> double {
    static constexpr double tbl[4] = {0.0, 1.0, 0.0, -1.0};
    const std::int64_t r =
        ((j * static_cast<std::int64_t>(2 * n + 1)) % 4 + 4) % 4;
    return tbl[static_cast<std::size_t>(r)];
  };
  const double s = (n % 2 != 0) ? -1.0 : 1.0;  // sin(nu pi) = (-1)^n
  const Complex cross{0.0, q(m)};              // -e^{-i nu pi} q(m)/s and
                                               // +e^{+i nu pi} q(m)/s agree
  static constexpr Complex ipow[4] = {{1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}, {0.0, -1.0}};
  Complex jph = ipow[static_cast<std::size_t>((m % 4 + 4) % 4)];
  if ((n % 2 != 0) && (m % 2 != 0)) jph = -jph;  // (i (-1)^n)^m
  return ConnCoef{Complex{-q(m - 1) / s, 0.0}, cross, cross,
                  Complex{q(m + 1) / s, 0.0}, jph};
}

// Decimal digits lost to cancellation in r = t1 + t2.
double combo_cancel(const ScaledC& t1, const ScaledC& t2, const ScaledC& r) {
  if (t1.is_zero() || t2.is_zero()) return 0.0;
  if (r.is_zero()) return 100.0;
  const double top = std::max(t1.mag2(), t2.mag2());
  return std::max(0.0, (top - r.mag2()) * 0.30102999566398119521);
}

}  // namespace

ScaledC SweepResult::y(int k) const {
  return (h1[static_cast<std::size_t>(k)] - h2[static_cast<std::size_t>(k)]) *
         Complex{0.0, -0.5};
}

ScaledC SweepResult::jp(int k) const {
  return (h1p[static_cast<std::size_t>(k)] + h2p[static_cast<std::size_t>(k)]) *
         0.5;
}

void check_envelope(double nu, const LogPoint& p) {
  if (!(nu >= 0.0) || nu > kNuMax) {
    throw EnvelopeError("order " + std::to_string(nu) + " outside [0, " +
                        std::to_string(kNuMax) + "]");
  }
  if (std::abs(2.0 * nu - std::round(2.0 * nu)) != 0.0) {
    throw UsageError("order must be an integer or half-integer, got " +
                     std::to_string(nu));
  }
  if (!(p.modulus >= kZMin) || !(p.modulus <= kZMax)) {
    throw EnvelopeError("modulus " + std::to_string(p.modulus) +
                        " outside [" + std::to_string(kZMin) + ", " +
                        std::to_string(kZMax) + "]");
  }
  if (!std::isfinite(p.argument) || std::abs(p.argument) > 1e8) {
    throw EnvelopeError("argument " + std::to_string(p.argument) +
                        " outside supported winding range");
  }
}

SweepResult hankel_sweep(double nu0, int kmax, const LogPoint& p) {
  if (!(nu0 == 0.0 || nu0 == 0.5)) {
    throw UsageError("sweep base order must be 0 or 1/2");
  }
  if (kmax < 0) throw UsageError("sweep top order below base order");
  check_envelope(nu0 + static_cast<double>(kmax), p);

  const int ki = std::max(kmax, 1);
  const std::int64_t m = std::llround(p.argument / kPi);
  const double md = static_cast<double>(m);
  // theta - m*pi in double-double so huge-argument cover points keep full
  // precision in the reduced angle.
  const double th0 =
      ((DD{p.argument} - dd_detail::two_prod(md, kPiHi)) - DD{md * kPiLo})
          .to_double();
  const bool reflect = th0 < 0.0;
  const Complex z0 = std::polar(p.modulus, th0);
  const Complex ze = reflect ? std::conj(z0) : z0;  // Im ze >= 0

  SeedPair seed;
  if (nu0 == 0.5) {
    seed = half_seeds(ze);
  } else if (p.modulus < kSeriesSwitch) {
    seed = series_seeds_int(ze);
  } else {
    seed = asym_seeds_int(ze);
  }

  const std::size_t n = static_cast<std::size_t>(ki) + 1;
  std::vector<ScaledC> h1(n), h2(n);
  h1[0] = seed.h1[0];
  h1[1] = seed.h1[1];
  forward_sweep(nu0, ze, h1);
  std::vector<ScaledC> j = miller_j(nu0, ki, ze, seed.j);
  h2[0] = seed.h2[0];
  h2[1] = seed.h2[1];
  for (std::size_t k = 2; k < n; ++k) h2[k] = j[k] * 2.0 - h1[k];
  std::vector<ScaledC> h1p = derivative_sweep(nu0, ze, h1);
  std::vector<ScaledC> h2p = derivative_sweep(nu0, ze, h2);

  if (reflect) {
    // H1(z) = conj(H2(conj z)) and vice versa; J(z) = conj(J(conj z)).
    for (std::size_t k = 0; k < n; ++k) {
      const ScaledC v1 = h1[k], v2 = h2[k], d1 = h1p[k], d2 = h2p[k];
      h1[k] = conj(v2);
      h2[k] = conj(v1);
      h1p[k] = conj(d2);
      h2p[k] = conj(d1);
      j[k] = conj(j[k]);
    }
  }

  double worst = 0.0;
  if (m != 0) {
    const double chain = (m % 2 == 0) ? 1.0 : -1.0;  // d/dz picks up e^{-im pi}
    for (int k = 0; k <= ki; ++k) {
      const std::size_t ks = static_cast<std::size_t>(k);
      const ConnCoef cc =
          (nu0 == 0.0) ? connection_int(m, k) : connection_half(m, k);
      const ScaledC t1 = h1[ks] * cc.a;
      const ScaledC t2 = h2[ks] * cc.b;
      const ScaledC u1 = h1[ks] * cc.c;
      const ScaledC u2 = h2[ks] * cc.d;
      const ScaledC n1 = t1 + t2;
      const ScaledC n2 = u1 + u2;
      worst = std::max({worst, combo_cancel(t1, t2, n1),
                        combo_cancel(u1, u2, n2)});
      const ScaledC d1 = (h1p[ks] * cc.a + h2p[ks] * cc.b) * chain;
      const ScaledC d2 = (h1p[ks] * cc.c + h2p[ks] * cc.d) * chain;
      j[ks] = j[ks] * cc.jph;
      h1[ks] = n1;
      h2[ks] = n2;
      h1p[ks] = d1;
      h2p[ks] = d2;
    }
  }

  SweepResult out;
  out.nu0 = nu0;
  out.kmax = kmax;
  out.halfturns = m;
  out.z0 = z0;
  out.h1 = std::move(h1);
  out.h2 = std::move(h2);
  out.j = std::move(j);
  out.h1p = std::move(h1p);
  out.h2p = std::move(h2p);
  out.max_cancellation_digits = worst;
  out.regime = seed.regime;
  return out;
}

namespace {

SweepResult scalar_sweep(double nu, const LogPoint& p) {
  check_envelope(nu, p);
  const double nu0 = (nu == std::floor(nu)) ? 0.0 : 0.5;
  const int kmax = static_cast<int>(std::llround(nu - nu0));
  return hankel_sweep(nu0, kmax, p);
}

void fill_diag(const SweepResult& sw, SpecfunDiag* diag) {
  if (diag == nullptr) return;
  diag->cancellation_digits = sw.max_cancellation_digits;
  diag->regime = sw.regime;
  diag->warn = sw.max_cancellation_digits > SpecfunDiag::warn_threshold;
}

}  // namespace

Complex bessel_j(double nu, const LogPoint& p, SpecfunDiag* diag) {
  const SweepResult sw = scalar_sweep(nu, p);
  fill_diag(sw, diag);
  return scaled_to_complex(sw.j[static_cast<std::size_t>(sw.kmax)]);
}

Complex bessel_y(double nu, const LogPoint& p, SpecfunDiag* diag) {
  const SweepResult sw = scalar_sweep(nu, p);
  fill_diag(sw, diag);
  return scaled_to_complex(sw.y(sw.kmax));
}

Complex hankel(int kind, double nu, const LogPoint& p, SpecfunDiag* diag) {
  if (kind != 1 && kind != 2) throw UsageError("Hankel kind must be 1 or 2");
  const SweepResult sw = scalar_sweep(nu, p);
  fill_diag(sw, diag);
  const ScaledC& v = (kind == 1) ? sw.h1[static_cast<std::size_t>(sw.kmax)]
                                 : sw.h2[static_cast<std::size_t>(sw.kmax)];
  return scaled_to_complex(v);
}

Complex hankel_deriv(int kind, double nu, const LogPoint& p,
                     SpecfunDiag* diag) {
  if (kind != 1 && kind != 2) throw UsageError("Hankel kind must be 1 or 2");
  const SweepResult sw = scalar_sweep(nu, p);
  fill_diag(sw, diag);
  const ScaledC& v = (kind == 1) ? sw.h1p[static_cast<std::size_t>(sw.kmax)]
                                 : sw.h2p[static_cast<std::size_t>(sw.kmax)];
  return scaled_to_complex(v);
}

}  // namespace specfun
}  // namespace evenres
