#include "mpfr_oracle.hpp"

#include <mpfr.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace evenres::oracle {

namespace {

// Minimal complex arithmetic over mpfr_t pairs; everything lives at one
// precision chosen per call.
struct MC {
  mpfr_t re, im;
  explicit MC(mpfr_prec_t prec) {
    mpfr_init2(re, prec);
    mpfr_init2(im, prec);
    mpfr_set_zero(re, 1);
    mpfr_set_zero(im, 1);
  }
  MC(const MC&) = delete;
  MC& operator=(const MC&) = delete;
  ~MC() {
    mpfr_clear(re);
    mpfr_clear(im);
  }
};

void mc_set(MC& a, const MC& b) {
  mpfr_set(a.re, b.re, MPFR_RNDN);
  mpfr_set(a.im, b.im, MPFR_RNDN);
}

void mc_add(MC& a, const MC& b) {
  mpfr_add(a.re, a.re, b.re, MPFR_RNDN);
  mpfr_add(a.im, a.im, b.im, MPFR_RNDN);
}

// a *= b, with scratch registers t/u
void mc_mul(MC& a, const MC& b, mpfr_t t, mpfr_t u) {
  mpfr_mul(t, a.re, b.re, MPFR_RNDN);
  mpfr_mul(u, a.im, b.im, MPFR_RNDN);
  mpfr_sub(t, t, u, MPFR_RNDN);
  mpfr_mul(u, a.re, b.im, MPFR_RNDN);
  mpfr_set(a.re, t, MPFR_RNDN);
  mpfr_mul(t, a.im, b.re, MPFR_RNDN);
  mpfr_add(a.im, t, u, MPFR_RNDN);
}

void mc_mul_fr(MC& a, const mpfr_t x) {
  mpfr_mul(a.re, a.re, x, MPFR_RNDN);
  mpfr_mul(a.im, a.im, x, MPFR_RNDN);
}

void mc_div_fr(MC& a, const mpfr_t x) {
  mpfr_div(a.re, a.re, x, MPFR_RNDN);
  mpfr_div(a.im, a.im, x, MPFR_RNDN);
}

void mc_neg(MC& a) {
  mpfr_neg(a.re, a.re, MPFR_RNDN);
  mpfr_neg(a.im, a.im, MPFR_RNDN);
}

// max(|re|, |im|) as a rough magnitude exponent; MPFR exponents are huge so
// this never overflows
long mc_mag_exp(const MC& a) {
  long e = -9000000000000000000L / 2;
  if (!mpfr_zero_p(a.re)) e = std::max(e, static_cast<long>(mpfr_get_exp(a.re)));
  if (!mpfr_zero_p(a.im)) e = std::max(e, static_cast<long>(mpfr_get_exp(a.im)));
  return e;
}

bool mc_zero(const MC& a) { return mpfr_zero_p(a.re) && mpfr_zero_p(a.im); }

mpfr_prec_t pick_prec(const LogPoint& p, long prec_bits) {
  if (prec_bits > 0) return static_cast<mpfr_prec_t>(prec_bits);
  const double z = p.modulus;
  return static_cast<mpfr_prec_t>(512 + static_cast<long>(3.0 * z));
}

OracleValue collapse(const MC& a) {
  OracleValue v;
  if (mc_zero(a)) return v;
  long er = 0, ei = 0;
  const double dr = mpfr_zero_p(a.re) ? 0.0 : mpfr_get_d_2exp(&er, a.re, MPFR_RNDN);
  const double di = mpfr_zero_p(a.im) ? 0.0 : mpfr_get_d_2exp(&ei, a.im, MPFR_RNDN);
  long e;
  if (dr == 0.0) {
    e = ei;
  } else if (di == 0.0) {
    e = er;
  } else {
    e = std::max(er, ei);
  }
  auto part = [e](double d, long ed) {
    if (d == 0.0) return 0.0;
    const long sh = ed - e;
    if (sh < -1100) return 0.0;
    return std::ldexp(d, static_cast<int>(sh));
  };
  v.m = Complex{part(dr, er), part(di, ei)};
  v.e = e;
  return v;
}

// w = (z/2)^2 and the cover factors; arg is the unwrapped argument so the
// series continues across sheets exactly as the functions do.
struct SeriesCtx {
  mpfr_prec_t prec;
  mpfr_t t, u;        // scratch
  mpfr_t half_ln, arg;  // ln|z/2|, unwrapped arg z
  MC w;               // (z/2)^2
  SeriesCtx(const LogPoint& p, mpfr_prec_t pr) : prec(pr), w(pr) {
    mpfr_inits2(prec, t, u, half_ln, arg, (mpfr_ptr) nullptr);
    mpfr_set_d(half_ln, p.modulus, MPFR_RNDN);
    mpfr_div_ui(half_ln, half_ln, 2, MPFR_RNDN);
    mpfr_log(half_ln, half_ln, MPFR_RNDN);
    mpfr_set_d(arg, p.argument, MPFR_RNDN);
    // w = (z/2)^2 = (m/2)^2 e^{2 i arg}
    mpfr_set_d(t, p.modulus, MPFR_RNDN);
    mpfr_div_ui(t, t, 2, MPFR_RNDN);
    mpfr_sqr(t, t, MPFR_RNDN);
    mpfr_mul_ui(u, arg, 2, MPFR_RNDN);
    mpfr_sin_cos(w.im, w.re, u, MPFR_RNDN);
    mc_mul_fr(w, t);
  }
  ~SeriesCtx() { mpfr_clears(t, u, half_ln, arg, (mpfr_ptr) nullptr); }

  // out = (z/2)^x = e^{x ln|z/2|} (cos(x arg) + i sin(x arg))
  void half_pow(MC& out, double x) {
    mpfr_mul_d(t, half_ln, x, MPFR_RNDN);
    mpfr_exp(t, t, MPFR_RNDN);
    mpfr_mul_d(u, arg, x, MPFR_RNDN);
    mpfr_sin_cos(out.im, out.re, u, MPFR_RNDN);
    mc_mul_fr(out, t);
  }
};

// crude turnover index of the series, |z/2| in k units
double p_est(SeriesCtx& c) {
  // |w|^(1/2) = |z|/2
  long we = mc_mag_exp(c.w);
  return std::max(8.0, std::ldexp(1.0, static_cast<int>(std::min(we / 2 + 1, 40L))));
}

// out = sum_k (-w)^k / (k! Gamma(nu+k+1)) * (z/2)^nu  == J_nu(z)
// nu >= -kNuMax-1 real, never a negative integer (callers pass integers >= 0
// or half-integers of either sign).
void j_series(SeriesCtx& c, double nu, MC& out) {
  MC term(c.prec), acc(c.prec);
  // term_0 = 1/Gamma(nu+1)
  mpfr_set_d(c.t, nu + 1.0, MPFR_RNDN);
  mpfr_gamma(c.t, c.t, MPFR_RNDN);
  mpfr_ui_div(c.t, 1, c.t, MPFR_RNDN);
  mpfr_set(term.re, c.t, MPFR_RNDN);
  mpfr_set_zero(term.im, 1);
  mc_set(acc, term);
  long max_e = mc_mag_exp(term);
  const long cutoff = static_cast<long>(c.prec) + 48;
  for (unsigned long k = 1; k < 1000000; ++k) {
    // term *= -w / (k (nu+k))
    mc_mul(term, c.w, c.t, c.u);
    mc_neg(term);
    mpfr_set_ui(c.t, k, MPFR_RNDN);
    mpfr_mul_d(c.t, c.t, nu + static_cast<double>(k), MPFR_RNDN);
    mc_div_fr(term, c.t);
    mc_add(acc, term);
    if (mc_zero(term)) break;
    const long te = mc_mag_exp(term);
    max_e = std::max(max_e, te);
    if (te < max_e - cutoff && static_cast<double>(k) > p_est(c)) break;
  }
  MC pref(c.prec);
  c.half_pow(pref, nu);
  mc_mul(pref, acc, c.t, c.u);
  mc_set(out, pref);
}

// Y_n for integer n >= 0 via the logarithmic limit formula.
void y_series_int(SeriesCtx& c, long n, MC& out) {
  // (2/pi) ln(z/2) J_n(z)
  MC jn(c.prec);
  j_series(c, static_cast<double>(n), jn);
  MC lnz(c.prec);
  mpfr_set(lnz.re, c.half_ln, MPFR_RNDN);
  mpfr_set(lnz.im, c.arg, MPFR_RNDN);
  MC part1(c.prec);
  mc_set(part1, jn);
  mc_mul(part1, lnz, c.t, c.u);
  mpfr_const_pi(c.t, MPFR_RNDN);
  mpfr_ui_div(c.t, 2, c.t, MPFR_RNDN);
  mc_mul_fr(part1, c.t);

  // -(1/pi) sum_{k=0}^{n-1} (n-k-1)!/k! (z/2)^{2k-n}
  MC part2(c.prec);
  if (n > 0) {
    MC pw(c.prec), term(c.prec);
    c.half_pow(pw, static_cast<double>(-n));  // (z/2)^{-n}
    for (long k = 0; k < n; ++k) {
      mc_set(term, pw);
      mpfr_fac_ui(c.t, static_cast<unsigned long>(n - k - 1), MPFR_RNDN);
      mpfr_fac_ui(c.u, static_cast<unsigned long>(k), MPFR_RNDN);
      mpfr_div(c.t, c.t, c.u, MPFR_RNDN);
      mc_mul_fr(term, c.t);
      mc_add(part2, term);
      if (k + 1 < n) mc_mul(pw, c.w, c.t, c.u);
    }
    mpfr_const_pi(c.t, MPFR_RNDN);
    mc_div_fr(part2, c.t);
    mc_neg(part2);
  }

  // -(1/pi) (z/2)^n sum_k (-w)^k [psi(k+1)+psi(n+k+1)] / (k! (n+k)!)
  MC acc(c.prec), term(c.prec), psi(c.prec);
  // term_k holds (-w)^k / (k! (n+k)!)
  mpfr_fac_ui(c.t, static_cast<unsigned long>(n), MPFR_RNDN);
  mpfr_ui_div(c.t, 1, c.t, MPFR_RNDN);
  mpfr_set(term.re, c.t, MPFR_RNDN);
  mpfr_set_zero(term.im, 1);
  long max_e = mc_mag_exp(term);
  const long cutoff = static_cast<long>(c.prec) + 48;
  // psi values advance by the recurrence psi(m+1) = psi(m) + 1/m; digamma
  // of an integer is -euler + harmonic number
  mpfr_t psi1, psi2, psisum;
  mpfr_inits2(c.prec, psi1, psi2, psisum, (mpfr_ptr) nullptr);
  mpfr_const_euler(psi1, MPFR_RNDN);
  mpfr_neg(psi1, psi1, MPFR_RNDN);  // psi(1)
  mpfr_set(psi2, psi1, MPFR_RNDN);
  for (long j = 1; j <= n; ++j) {
    mpfr_set_ui(c.t, static_cast<unsigned long>(j), MPFR_RNDN);
    mpfr_ui_div(c.t, 1, c.t, MPFR_RNDN);
    mpfr_add(psi2, psi2, c.t, MPFR_RNDN);  // psi(n+1)
  }
  for (unsigned long k = 0; k < 1000000; ++k) {
    mpfr_add(psisum, psi1, psi2, MPFR_RNDN);
    mc_set(psi, term);
    mc_mul_fr(psi, psisum);
    mc_add(acc, psi);
    const long te = mc_mag_exp(psi);
    max_e = std::max(max_e, te);
    if (!mc_zero(psi) && te < max_e - cutoff &&
        static_cast<double>(k) > p_est(c)) {
      break;
    }
    // advance term
    mc_mul(term, c.w, c.t, c.u);
    mc_neg(term);
    mpfr_set_ui(c.t, k + 1, MPFR_RNDN);
    mpfr_mul_ui(c.t, c.t, static_cast<unsigned long>(n) + k + 1, MPFR_RNDN);
    mc_div_fr(term, c.t);
    if (mc_zero(term)) break;
    // psi(k+2), psi(n+k+2)
    mpfr_set_ui(c.t, k + 1, MPFR_RNDN);
    mpfr_ui_div(c.t, 1, c.t, MPFR_RNDN);
    mpfr_add(psi1, psi1, c.t, MPFR_RNDN);
    mpfr_set_ui(c.t, static_cast<unsigned long>(n) + k + 1, MPFR_RNDN);
    mpfr_ui_div(c.t, 1, c.t, MPFR_RNDN);
    mpfr_add(psi2, psi2, c.t, MPFR_RNDN);
  }
  mpfr_clears(psi1, psi2, psisum, (mpfr_ptr) nullptr);
  MC pref(c.prec);
  c.half_pow(pref, static_cast<double>(n));
  mc_mul(acc, pref, c.t, c.u);
  mpfr_const_pi(c.t, MPFR_RNDN);
  mc_div_fr(acc, c.t);
  mc_neg(acc);

  mc_set(out, part1);
  mc_add(out, part2);
  mc_add(out, acc);
}

bool is_int(double x) { return x == std::floor(x); }

// Y_{n+1/2} = (-1)^{n+1} J_{-(n+1/2)}
void y_series(SeriesCtx& c, double nu, MC& out) {
  if (is_int(nu)) {
    y_series_int(c, static_cast<long>(nu), out);
    return;
  }
  j_series(c, -nu, out);
  const long n = static_cast<long>(std::floor(nu));  // nu = n + 1/2
  if (n % 2 == 0) mc_neg(out);
}

void check_args(double nu, const LogPoint& p) {
  const double twice = 2.0 * nu;
  if (nu < 0.0 || twice != std::floor(twice)) {
    throw std::invalid_argument(
        "oracle: order must be a nonnegative integer or half-integer");
  }
  if (!(p.modulus > 0.0)) {
    throw std::invalid_argument("oracle: modulus must be positive");
  }
}

}  // namespace

OracleValue bessel_j(double nu, const LogPoint& p, long prec_bits) {
  check_args(nu, p);
  SeriesCtx c(p, pick_prec(p, prec_bits));
  MC out(c.prec);
  j_series(c, nu, out);
  return collapse(out);
}

OracleValue bessel_y(double nu, const LogPoint& p, long prec_bits) {
  check_args(nu, p);
  SeriesCtx c(p, pick_prec(p, prec_bits));
  MC out(c.prec);
  y_series(c, nu, out);
  return collapse(out);
}

OracleValue hankel(int kind, double nu, const LogPoint& p, long prec_bits) {
  check_args(nu, p);
  if (kind != 1 && kind != 2) {
    throw std::invalid_argument("oracle: kind must be 1 or 2");
  }
  SeriesCtx c(p, pick_prec(p, prec_bits));
  MC j(c.prec), y(c.prec);
  j_series(c, nu, j);
  y_series(c, nu, y);
  // H1 = J + iY, H2 = J - iY
  if (kind == 2) mc_neg(y);
  mpfr_sub(c.t, j.re, y.im, MPFR_RNDN);
  mpfr_add(j.im, j.im, y.re, MPFR_RNDN);
  mpfr_set(j.re, c.t, MPFR_RNDN);
  return collapse(j);
}

OracleValue hankel_deriv(int kind, double nu, const LogPoint& p,
                         long prec_bits) {
  check_args(nu, p);
  if (kind != 1 && kind != 2) {
    throw std::invalid_argument("oracle: kind must be 1 or 2");
  }
  SeriesCtx c(p, pick_prec(p, prec_bits));
  // H'_nu = (nu/z) H_nu - H_{nu+1}
  MC j0(c.prec), y0(c.prec), j1(c.prec), y1(c.prec);
  j_series(c, nu, j0);
  y_series(c, nu, y0);
  j_series(c, nu + 1.0, j1);
  y_series(c, nu + 1.0, y1);
  if (kind == 2) {
    mc_neg(y0);
    mc_neg(y1);
  }
  MC h0(c.prec), h1(c.prec);
  mpfr_sub(h0.re, j0.re, y0.im, MPFR_RNDN);
  mpfr_add(h0.im, j0.im, y0.re, MPFR_RNDN);
  mpfr_sub(h1.re, j1.re, y1.im, MPFR_RNDN);
  mpfr_add(h1.im, j1.im, y1.re, MPFR_RNDN);
  // (nu/z) = (nu/|z|) e^{-i arg}
  MC inv(c.prec);
  mpfr_neg(c.u, c.arg, MPFR_RNDN);
  mpfr_sin_cos(inv.im, inv.re, c.u, MPFR_RNDN);
  mpfr_set_d(c.t, nu, MPFR_RNDN);
  mpfr_div_d(c.t, c.t, p.modulus, MPFR_RNDN);
  mc_mul_fr(inv, c.t);
  mc_mul(h0, inv, c.t, c.u);
  mc_neg(h1);
  mc_add(h0, h1);
  return collapse(h0);
}

double rel_diff(const OracleValue& o, const ScaledC& s) {
  const bool oz = o.m == Complex{0.0, 0.0};
  if (oz && s.is_zero()) return 0.0;
  if (oz || s.is_zero()) return std::numeric_limits<double>::infinity();
  const std::int64_t sh = s.e - o.e;
  if (sh > 1100 || sh < -1100) return std::numeric_limits<double>::infinity();
  const Complex sm{std::ldexp(s.m.real(), static_cast<int>(sh)),
                   std::ldexp(s.m.imag(), static_cast<int>(sh))};
  return std::abs(sm - o.m) / std::abs(o.m);
}

}  // namespace evenres::oracle
