#include "evenres/zerofinder.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "evenres/errors.hpp"
#include "evenres/parallel.hpp"
#include "evenres/quadrature.hpp"

namespace evenres {
namespace {

constexpr double kTwoPi = 2.0 * kPi;
// A zero closer to the contour than this distance (relative to the cell
// diameter, floored absolutely) trips the boundary guard.  Kept tight:
// adaptive quadrature resolves poles near the contour at logarithmic cost,
// so only near-exact hits need the jitter machinery.
constexpr double kBoundaryGuardFrac = 1e-6;
constexpr double kBoundaryGuardFloor = 1e-12;
// Sector rectangles are inset this far from the open sector's boundary rays.
constexpr double kSectorInset = 1e-9;
// Irrational split fractions tried in order when a subdivision line lands on
// a zero; spacing ~0.03 comfortably clears the guard distance.
constexpr double kSplitFracs[5] = {0.5, 0.53819660112501051,
                                   0.45857864376269049, 0.56417424305044159,
                                   0.42679491924311228};

struct Box {  // rectangle in w = (log modulus, argument) coordinates
  double x0, x1, y0, y1;
  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double diam() const { return std::hypot(width(), height()); }
  bool contains(Complex w) const {
    return w.real() >= x0 && w.real() <= x1 && w.imag() >= y0 &&
           w.imag() <= y1;
  }
};

Box to_box(const LogRect& r) {
  return Box{std::log(r.rmin), std::log(r.rmax), r.argmin, r.argmax};
}

LogPoint point_at(Complex w) {
  return LogPoint{std::exp(w.real()), w.imag()};
}

// d/dw log f at w, where w = log lambda.  Throws BoundaryError when the
// estimated distance to the nearest zero (~1/|value|) is below guard_dist.
Complex log_deriv_w(const AnalyticFn& f, Complex w, double guard_dist) {
  const LogPoint p = point_at(w);
  const auto [fv, dfv] = f(p);
  Complex q;
  try {
    q = scaled_ratio(dfv, fv);
  } catch (const PoleProximityError&) {
    throw BoundaryError("zero of f on the integration contour");
  } catch (const EnvelopeError&) {
    throw BoundaryError("zero of f within guard distance of the contour");
  }
  const Complex qw = q * to_complex(p);
  if (std::abs(qw) * guard_dist > 1.0) {
    throw BoundaryError("zero of f within guard distance of the contour");
  }
  return qw;
}

struct WindingRaw {
  Complex integral{0.0, 0.0};  // closed-contour integral of dlog f
  double abs_error = 0.0;
};

WindingRaw contour_integral(const AnalyticFn& f, const Box& b,
                            double abs_tol_each) {
  const double guard =
      std::max(kBoundaryGuardFrac * b.diam(), kBoundaryGuardFloor);
  const Complex c00{b.x0, b.y0}, c10{b.x1, b.y0}, c11{b.x1, b.y1},
      c01{b.x0, b.y1};
  const Complex corners[5] = {c00, c10, c11, c01, c00};
  WindingRaw out;
  for (int e = 0; e < 4; ++e) {
    const Complex w0 = corners[e];
    const Complex dw = corners[e + 1] - corners[e];
    const auto integrand = [&](double t) {
      return log_deriv_w(f, w0 + t * dw, guard) * dw;
    };
    const QuadResult r = integrate_gk(integrand, 0.0, 1.0, abs_tol_each,
                                      0.0, 8000);
    if (!r.converged) {
      throw BudgetError("winding quadrature did not converge on an edge");
    }
    out.integral += r.value;
    out.abs_error += r.abs_error;
  }
  return out;
}

int winding_of_box(const AnalyticFn& f, const Box& b, double quad_tol) {
  if (!(quad_tol > 0.0) || quad_tol >= 0.25) {
    throw UsageError("winding quad_tol must lie in (0, 0.25)");
  }
  const WindingRaw raw =
      contour_integral(f, b, quad_tol * kTwoPi / 8.0);
  // integral = 2*pi*i*W for analytic f; the real part must cancel.
  const double wre = raw.integral.imag() / kTwoPi;
  const double spur = std::abs(raw.integral.real()) / kTwoPi;
  const long w = std::lround(wre);
  const double miss = std::abs(wre - static_cast<double>(w)) + spur +
                      raw.abs_error / kTwoPi;
  if (miss > 0.4) {
    throw InternalError("winding estimate did not resolve to an integer");
  }
  if (w < 0) {
    throw InternalError("negative winding: function is not analytic here");
  }
  return static_cast<int>(w);
}

struct NewtonResult {
  Complex w{0.0, 0.0};
  double residual = 0.0;
  bool ok = false;
};

// Damped Newton in the w chart with multiplicity-m acceleration, constrained
// to `fence` (a modest enlargement of the winding cell).  A step that makes
// |f| grow is halved from the previous iterate, up to five times.
NewtonResult newton_refine(const AnalyticFn& f, Complex w0, int m,
                           const Box& fence, double refine_tol) {
  NewtonResult out;
  Complex w = w0;
  Complex w_prev = w0;
  double mag_prev = std::numeric_limits<double>::infinity();
  int halvings = 0;
  for (int it = 0; it < 80; ++it) {
    const LogPoint p = point_at(w);
    const auto [fv, dfv] = f(p);
    if (fv.is_zero()) {
      out = NewtonResult{w, 0.0, true};
      return out;
    }
    const double mag = fv.mag2();
    if (mag > mag_prev + 1.0) {
      if (++halvings > 5) return out;
      w = w_prev + 0.5 * (w - w_prev);
      continue;
    }
    halvings = 0;
    Complex ratio;
    try {
      ratio = scaled_ratio(fv, dfv);
    } catch (const Error&) {
      return out;  // derivative vanished or ratio not representable
    }
    Complex step = -static_cast<double>(m) * ratio / to_complex(p);
    double sl = std::abs(step);
    if (!std::isfinite(sl)) return out;
    const double max_step = 0.6 * fence.diam();
    if (sl > max_step) {
      step *= max_step / sl;
      sl = max_step;
    }
    const Complex w_next = w + step;
    if (!fence.contains(w_next)) return out;
    w_prev = w;
    mag_prev = mag;
    w = w_next;
    if (sl < refine_tol) {
      out = NewtonResult{w, sl, true};
      return out;
    }
  }
  return out;
}

struct Finder {
  const AnalyticFn& f;
  double refine_tol;
  ZeroFindOptions opt;
  std::vector<FoundZero> out;

  int winding(const Box& b) const { return winding_of_box(f, b, opt.quad_tol); }

  void emit(Complex w, int order, double residual) {
    out.push_back(FoundZero{point_at(w), order, residual});
  }

  void refine_or_split(const Box& b, int w_count, int depth) {
    if (w_count == 0) return;
    const double diam = b.diam();
    const Complex center{0.5 * (b.x0 + b.x1), 0.5 * (b.y0 + b.y1)};
    const bool cluster = diam < opt.cluster_rel;
    if (w_count == 1 || cluster) {
      Box fence{b.x0 - 0.15 * b.width(), b.x1 + 0.15 * b.width(),
                b.y0 - 0.15 * b.height(), b.y1 + 0.15 * b.height()};
      const NewtonResult nr =
          newton_refine(f, center, w_count, fence, refine_tol);
      if (nr.ok && b.contains(nr.w)) {
        emit(nr.w, w_count, nr.residual);
        return;
      }
      if (cluster) {
        // unresolved cluster: collapse to the cell center with total order
        emit(center, w_count, diam);
        return;
      }
    }
    split(b, w_count, depth);
  }

  void split(const Box& b, int w_count, int depth) {
    if (depth >= opt.max_depth) {
      throw InternalError("zero search exceeded maximum subdivision depth");
    }
    const int tries = std::max(1, opt.max_jitter);
    for (int a = 0; a < tries; ++a) {
      const double fx = kSplitFracs[a % 5];
      const double fy = kSplitFracs[(a + 1) % 5];
      const double xm = b.x0 + fx * b.width();
      const double ym = b.y0 + fy * b.height();
      const Box kids[4] = {Box{b.x0, xm, b.y0, ym}, Box{xm, b.x1, b.y0, ym},
                           Box{b.x0, xm, ym, b.y1}, Box{xm, b.x1, ym, b.y1}};
      int counts[4];
      try {
        int total = 0;
        for (int i = 0; i < 4; ++i) {
          counts[i] = winding(kids[i]);
          total += counts[i];
        }
        if (total != w_count) {
          throw InternalError(
              "child winding counts do not add up to the parent count");
        }
      } catch (const BoundaryError&) {
        continue;  // a zero sits on a subdivision line; jitter and retry
      } catch (const BudgetError&) {
        continue;  // quadrature stalled, almost surely a near-line zero
      }
      for (int i = 0; i < 4; ++i) {
        refine_or_split(kids[i], counts[i], depth + 1);
      }
      return;
    }
    throw BoundaryError(
        "a zero stayed on the subdivision lines through all jitter retries");
  }
};

void validate_rect(const LogRect& r) {
  if (!(r.rmin > 0.0) || !(r.rmin < r.rmax) || !std::isfinite(r.rmax)) {
    throw UsageError("LogRect requires 0 < rmin < rmax");
  }
  if (!(r.argmin < r.argmax) || !std::isfinite(r.argmin) ||
      !std::isfinite(r.argmax)) {
    throw UsageError("LogRect requires argmin < argmax");
  }
}

// ---------------------------------------------------------------------------
// Phase-tracked winding.  Marches the contour with steps kept short enough
// that the phase of f provably stays within a half turn per step (bounded by
// sampled |d log f / dw|), so each increment unwraps unambiguously.  Robust
// where adaptive quadrature of f'/f can silently miss a near-contour spike.

struct PhaseSample {
  double phase = 0.0;  // arg f
  double q = 0.0;      // |d log f / dw|
};

PhaseSample phase_sample(const AnalyticFn& f, Complex w) {
  const LogPoint p = point_at(w);
  const auto [fv, dfv] = f(p);
  if (fv.is_zero()) {
    throw BoundaryError("zero of f on the tracking contour");
  }
  Complex qc;
  try {
    qc = scaled_ratio(dfv, fv);
  } catch (const PoleProximityError&) {
    throw BoundaryError("zero of f on the tracking contour");
  } catch (const EnvelopeError&) {
    throw BoundaryError("zero of f within guard distance of the contour");
  }
  qc *= to_complex(p);
  const double q = std::abs(qc);
  if (!std::isfinite(q)) {
    throw BoundaryError("zero of f within guard distance of the contour");
  }
  return PhaseSample{std::arg(fv.m), q};
}

double wrap_pi(double x) { return std::remainder(x, kTwoPi); }

double walk_edge(const AnalyticFn& f, Complex w0, Complex w1,
                 const PhaseSample& s0, const PhaseSample& s1, int depth) {
  const double len = std::abs(w1 - w0);
  const Complex wm = 0.5 * (w0 + w1);
  if (len < 1e-13 * (1.0 + std::abs(w0))) {
    throw BoundaryError("zero of f pinned on the tracking contour");
  }
  const PhaseSample sm = phase_sample(f, wm);
  const double qmax = std::max({s0.q, sm.q, s1.q});
  if (len * qmax < 0.45 * kPi) {
    return wrap_pi(sm.phase - s0.phase) + wrap_pi(s1.phase - sm.phase);
  }
  if (depth >= 60) {
    throw BoundaryError("phase tracking refinement exhausted near the contour");
  }
  return walk_edge(f, w0, wm, s0, sm, depth + 1) +
         walk_edge(f, wm, w1, sm, s1, depth + 1);
}

int tracked_winding(const AnalyticFn& f, const Box& b) {
  const Complex corners[5] = {Complex{b.x0, b.y0}, Complex{b.x1, b.y0},
                              Complex{b.x1, b.y1}, Complex{b.x0, b.y1},
                              Complex{b.x0, b.y0}};
  PhaseSample s[5];
  for (int i = 0; i < 4; ++i) s[i] = phase_sample(f, corners[i]);
  s[4] = s[0];
  double total = 0.0;
  for (int e = 0; e < 4; ++e) {
    total += walk_edge(f, corners[e], corners[e + 1], s[e], s[e + 1], 0);
  }
  const double wre = total / kTwoPi;
  const long w = std::lround(wre);
  if (std::abs(wre - static_cast<double>(w)) > 0.05) {
    throw InternalError("tracked winding did not resolve to an integer");
  }
  if (w < 0) {
    throw InternalError("negative winding: function is not analytic here");
  }
  return static_cast<int>(w);
}

// ---------------------------------------------------------------------------
// Chain marching for the sector -1 resonance families.  The zeros of each
// boundary function form a single arc: its lowest-modulus point sits near
// z = -0.6627i*nu (the classical zero-free bound |z| >= 0.6627*nu), and the
// arc climbs toward the two sector rays with spacing growing from ~1.74 to
// pi in z = a*lambda units.  We locate one zero near the bottom, march both
// ways by extrapolated Newton, and certify the mode afterwards with a
// phase-tracked winding count over the full sector rectangle.

constexpr double kChainSpacingZ = 1.74;  // bottom-of-arc spacing in z units

struct ChainPoint {
  Complex lam;      // complex lambda, sector -1 chart (Im < 0)
  double residual = 0.0;
};

// Damped Newton on f from a complex-lambda seed, fenced to a z-plane disk of
// radius fence_z/a around the seed intersected with the open sector strip.
bool newton_chain(const AnalyticFn& f, Complex lam_seed, double fence_lam,
                  double refine_tol, ChainPoint* out) {
  const double m0 = std::abs(lam_seed);
  if (!(m0 > 0.0)) return false;
  const double rel = fence_lam / m0;
  const Complex w0{std::log(m0), std::arg(lam_seed)};
  const Box fence{w0.real() - 1.6 * rel, w0.real() + 1.6 * rel,
                  std::max(w0.imag() - 1.6 * rel, -kPi + kSectorInset),
                  std::min(w0.imag() + 1.6 * rel, -kSectorInset)};
  if (!(fence.x0 < fence.x1) || !(fence.y0 < fence.y1) ||
      !fence.contains(w0)) {
    return false;
  }
  const NewtonResult nr = newton_refine(f, w0, 1, fence, refine_tol);
  if (!nr.ok) return false;
  const LogPoint p = point_at(nr.w);
  out->lam = to_complex(p);
  out->residual = nr.residual;
  return true;
}

FoundZero chain_to_found(const ChainPoint& cp) {
  return FoundZero{
      make_logpoint(std::abs(cp.lam), std::atan2(cp.lam.imag(), cp.lam.real())),
      1, cp.residual};
}

// A long probe jump can converge past an intervening zero.  Newton from the
// midpoint of the jump, fenced away from both endpoints, recovers anything
// in between; recurse on the sub-gaps until they are clean.
void fill_gap(const AnalyticFn& f, Complex z0, Complex z1, double refine_tol,
              int depth, std::vector<ChainPoint>& fills) {
  if (depth > 5) return;  // a residual miss is caught by the certificate
  const Complex mid = 0.5 * (z0 + z1);
  const double gap = std::abs(z1 - z0);
  ChainPoint cp;
  if (!newton_chain(f, mid, 0.38 * gap, refine_tol, &cp)) return;
  if (std::abs(cp.lam - z0) < 0.25 * gap ||
      std::abs(cp.lam - z1) < 0.25 * gap) {
    return;  // converged back onto an endpoint: the gap is clean
  }
  fill_gap(f, z0, cp.lam, refine_tol, depth + 1, fills);
  fills.push_back(cp);
  fill_gap(f, cp.lam, z1, refine_tol, depth + 1, fills);
}

// March one direction along the arc.  `za` and `zb` are the last two accepted
// zeros (zb the outermost); with only one known zero, pass za == zb and an
// explicit first step.
void march_direction(const AnalyticFn& f, Complex za, Complex zb,
                     Complex first_step, double rmax_pad, double refine_tol,
                     std::vector<FoundZero>& out) {
  Complex prev = za, cur = zb;
  Complex step = (za == zb) ? first_step : cur - prev;
  for (int k = 0; k < 4096; ++k) {
    const Complex seed = cur + step;
    if (std::abs(seed) > rmax_pad * 1.25 + 2.0 * std::abs(step)) return;
    ChainPoint cp;
    bool ok = false;
    auto fresh = [&](const ChainPoint& c) {
      return std::abs(c.lam - cur) > 0.3 * std::abs(step) &&
             std::abs(c.lam - prev) > 0.3 * std::abs(step);
    };
    for (double scale : {1.0, 0.65, 1.45}) {
      if (newton_chain(f, cur + scale * step, 0.7 * std::abs(step),
                       refine_tol, &cp) &&
          fresh(cp)) {
        ok = true;
        break;
      }
    }
    bool jumped = false;
    if (!ok) {
      // The chain turns sharply where the arc of zeros meets the tail that
      // runs along a sector ray (the spacing jumps there as well).  Probe
      // rotated and stretched steps before declaring the end of the chain;
      // accept only outward progress so the probe cannot re-enter the arc.
      for (double mag : {1.0, 1.7, 2.6, 3.8}) {
        for (double rot : {0.55, -0.55, 1.05, -1.05, 1.5, -1.5}) {
          const Complex st = step * std::polar(mag, rot);
          if (std::abs(cur + st) > rmax_pad * 1.25 + 2.0 * std::abs(st)) {
            continue;
          }
          if (newton_chain(f, cur + st, 0.55 * std::abs(st), refine_tol,
                           &cp) &&
              fresh(cp) && std::abs(cp.lam) > std::abs(cur)) {
            ok = jumped = true;
            break;
          }
        }
        if (ok) break;
      }
    }
    if (!ok) return;
    if (jumped || std::abs(cp.lam - cur) > 1.8 * std::abs(step)) {
      std::vector<ChainPoint> fills;
      fill_gap(f, cur, cp.lam, refine_tol, 0, fills);
      for (const auto& g : fills) {
        if (std::abs(g.lam) <= rmax_pad) out.push_back(chain_to_found(g));
        prev = cur;
        cur = g.lam;
      }
    }
    prev = cur;
    cur = cp.lam;
    step = cur - prev;
    if (std::abs(cp.lam) <= rmax_pad) out.push_back(chain_to_found(cp));
  }
  throw InternalError("resonance chain march did not terminate");
}

// All sector -1 zeros of one mode family with |lambda| <= rmax_pad, by
// bottom-seeded marching.  Returns false when no bottom zero could be
// located (the caller then certifies the mode by generic subdivision).
bool chain_zeros(const AnalyticFn& f, double nu, double a, double rmin,
                 double rmax_pad, double arg_lo, double arg_hi,
                 double refine_tol, std::vector<FoundZero>& out) {
  out.clear();
  const double bottom_lam = kZeroCurveBottom * nu / a;
  std::vector<Complex> boot;
  if (nu >= 3.0 && bottom_lam > 6.0 / a) {
    if (bottom_lam > rmax_pad * 1.02) return true;  // arc entirely outside
    ChainPoint cp;
    bool got = false;
    for (double s : {1.0, 1.04, 0.965, 1.09, 0.93}) {
      const Complex seed{0.0, -bottom_lam * s};
      if (newton_chain(f, seed, 0.045 * nu / a + kChainSpacingZ / a,
                       refine_tol, &cp)) {
        got = true;
        break;
      }
    }
    if (!got) return false;
    if (std::abs(cp.lam) <= rmax_pad) out.push_back(chain_to_found(cp));
    boot.push_back(cp.lam);
  } else {
    // low modes: generic subdivision over the small bottom band
    const double hi = std::min(rmax_pad, (kZeroCurveBottom * nu + 8.5) / a);
    if (hi <= rmin * 1.0001) return true;
    const LogRect band = make_logrect(rmin, hi, arg_lo, arg_hi);
    ZeroFindOptions bopt;
    const std::vector<FoundZero> fz = find_zeros(f, band, refine_tol, bopt);
    for (const auto& z : fz) {
      out.push_back(z);
      boot.push_back(to_complex(z.location));
    }
    if (boot.empty()) return true;  // nothing below the band top: whole mode
                                    // is empty iff the winding agrees
  }
  // order the known zeros along the arc by Re z and march out of both ends;
  // collapse cluster members so extrapolation steps stay nonzero
  std::sort(boot.begin(), boot.end(), [](Complex l, Complex r) {
    return l.real() != r.real() ? l.real() < r.real() : l.imag() < r.imag();
  });
  boot.erase(std::unique(boot.begin(), boot.end(),
                         [](Complex l, Complex r) {
                           return std::abs(l - r) <
                                  1e-6 * (std::abs(l) + std::abs(r));
                         }),
             boot.end());
  const Complex zright = boot.back();
  const Complex zleft = boot.front();
  const double step0 = kChainSpacingZ / a;
  const Complex second_right =
      boot.size() > 1 ? boot[boot.size() - 2] : zright;
  const Complex second_left = boot.size() > 1 ? boot[1] : zleft;
  march_direction(f, second_right, zright,
                  boot.size() > 1 ? Complex{} : Complex{step0, 0.0}, rmax_pad,
                  refine_tol, out);
  march_direction(f, second_left, zleft,
                  boot.size() > 1 ? Complex{} : Complex{-step0, 0.0}, rmax_pad,
                  refine_tol, out);
  return true;
}

int order_sum(const std::vector<FoundZero>& v) {
  int s = 0;
  for (const auto& z : v) s += z.order;
  return s;
}

// Generic subdivision over modulus bands narrow enough to keep each
// find_zeros call on a tractable rectangle.
std::vector<FoundZero> banded_find_zeros(const AnalyticFn& fn, double lo,
                                         double hi, double arg_lo,
                                         double arg_hi, double band_z,
                                         double refine_tol,
                                         const ZeroFindOptions& opt) {
  std::vector<FoundZero> out;
  const int bands =
      std::max(1, static_cast<int>(std::ceil((hi - lo) / band_z)));
  for (int b = 0; b < bands; ++b) {
    const double b0 = lo + (hi - lo) * b / bands;
    const double b1 = lo + (hi - lo) * (b + 1) / bands;
    const int tries = std::max(1, opt.max_jitter);
    for (int t = 0; t < tries; ++t) {
      // interior band edges may sit on a zero; slide them outward a little
      // (same factor on both sides of a shared edge keeps the bands a
      // partition at matching retry depth)
      const double wob = 1e-7 * (1.0 + 3.0 * t);
      const double e0 = b == 0 ? b0 : b0 * (1.0 + wob);
      const double e1 = b + 1 == bands ? b1 : b1 * (1.0 + wob);
      try {
        const auto part = find_zeros(fn, make_logrect(e0, e1, arg_lo, arg_hi),
                                     refine_tol, opt);
        for (const auto& z : part) {
          const bool dup =
              !out.empty() &&
              std::abs(to_complex(z.location) - to_complex(out.back().location)) <
                  1e-6 * z.location.modulus;
          if (!dup) out.push_back(z);
        }
        break;
      } catch (const BoundaryError&) {
        if (t + 1 == tries) throw;
      } catch (const InternalError&) {
        // a zero hiding next to an edge can also surface as an unresolved
        // winding estimate; a different jitter moves the contour off it
        if (t + 1 == tries) throw;
      }
    }
  }
  return out;
}

}  // namespace

LogRect make_logrect(double rmin, double rmax, double argmin, double argmax) {
  const LogRect r{rmin, rmax, argmin, argmax};
  validate_rect(r);
  return r;
}

int winding_count(const AnalyticFn& f, const LogRect& rect, double quad_tol) {
  validate_rect(rect);
  return winding_of_box(f, to_box(rect), quad_tol);
}

std::vector<FoundZero> find_zeros(const AnalyticFn& f, const LogRect& rect,
                                  double refine_tol,
                                  const ZeroFindOptions& opt) {
  validate_rect(rect);
  if (!(refine_tol > 0.0) || refine_tol > 1e-3) {
    throw UsageError("refine_tol must lie in (0, 1e-3]");
  }
  Finder fd{f, refine_tol, opt, {}};
  const Box top = to_box(rect);
  const int w_count = fd.winding(top);
  fd.refine_or_split(top, w_count, 0);
  int total = 0;
  for (const auto& z : fd.out) total += z.order;
  if (total != w_count) {
    throw InternalError("refined zero orders do not sum to the winding count");
  }
  std::sort(fd.out.begin(), fd.out.end(),
            [](const FoundZero& a, const FoundZero& b) {
              if (a.location.modulus != b.location.modulus) {
                return a.location.modulus < b.location.modulus;
              }
              return a.location.argument < b.location.argument;
            });
  return fd.out;
}

AnalyticFn mode_function(const ScatteringModel& model, int n) {
  if (n < 0) throw UsageError("mode index must be nonnegative");
  return [model, n](const LogPoint& p) {
    const ModeTable t = mode_table(model, n + 1, p);
    const auto i = static_cast<std::size_t>(n);
    return std::make_pair(t.g1[i], t.dg1[i]);
  };
}

std::int64_t ResonanceSet::total_multiplicity() const {
  std::int64_t total = 0;
  for (const auto& e : entries) {
    total += static_cast<std::int64_t>(e.order_multiplicity) *
             e.channel_multiplicity;
  }
  return total;
}

Json ResonanceSet::to_json() const {
  Json j;
  j["schema"] = kSchemaTag;
  j["kind"] = "resonance_set";
  j["model_hash"] = model_hash;
  j["sector"] = sector;
  j["rmax"] = rmax_covered;
  Json arr = Json::array();
  for (const auto& e : entries) {
    Json je;
    je["modulus"] = e.location.modulus;
    je["argument"] = e.location.argument;
    je["order"] = e.order_multiplicity;
    je["channel"] = e.channel_multiplicity;
    je["mode"] = e.mode;
    je["residual"] = e.residual;
    arr.push_back(std::move(je));
  }
  j["entries"] = std::move(arr);
  return j;
}

ResonanceSet ResonanceSet::from_json(const Json& j) {
  if (!j.is_object() || j.value("kind", std::string()) != "resonance_set") {
    throw UsageError("not a resonance_set document");
  }
  if (j.value("schema", std::string()) != kSchemaTag) {
    throw UsageError("unsupported schema tag in resonance_set document");
  }
  ResonanceSet s;
  s.model_hash = j.at("model_hash").get<std::string>();
  s.sector = j.at("sector").get<std::int64_t>();
  s.rmax_covered = j.at("rmax").get<double>();
  for (const auto& je : j.at("entries")) {
    ResonanceEntry e;
    e.location = make_logpoint(je.at("modulus").get<double>(),
                               je.at("argument").get<double>());
    e.order_multiplicity = je.at("order").get<int>();
    e.channel_multiplicity = je.at("channel").get<std::int64_t>();
    e.mode = je.at("mode").get<int>();
    e.residual = je.at("residual").get<double>();
    if (e.order_multiplicity < 1 || e.channel_multiplicity < 1) {
      throw UsageError("resonance entry multiplicities must be positive");
    }
    s.entries.push_back(e);
  }
  return s;
}

namespace {

void sort_canonical(std::vector<ResonanceEntry>& v) {
  std::sort(v.begin(), v.end(),
            [](const ResonanceEntry& a, const ResonanceEntry& b) {
              if (a.location.modulus != b.location.modulus) {
                return a.location.modulus < b.location.modulus;
              }
              if (a.location.argument != b.location.argument) {
                return a.location.argument < b.location.argument;
              }
              return a.mode < b.mode;
            });
}

}  // namespace

double coverage_radius_limit(const ScatteringModel& model) {
  // Inverts the order-truncation gate in resonances(): orders up to
  // a*rmax/kZeroCurveBottom + 17 must stay inside the specfun envelope.
  return (specfun::kNuMax - 17.0) * kZeroCurveBottom / model.radius * 0.9995;
}

ResonanceSet resonances(const ScatteringModel& model, std::int64_t sector,
                        double rmax, const ZeroFindOptions& opt) {
  if (!(rmax > 0.0) || !std::isfinite(rmax)) {
    throw UsageError("rmax must be positive and finite");
  }
  if (rmax * model.radius > specfun::kZMax) {
    throw EnvelopeError("rmax exceeds the special-function envelope");
  }
  // Mode truncation: the lowest-modulus zero of the order-nu boundary
  // function sits near |z| = kZeroCurveBottom * nu, so every mode with
  // nu <= a*rmax/kZeroCurveBottom can still contribute below rmax.  The
  // margin absorbs the finite-order wiggle of the arc bottom, and the three
  // modes past the cutoff are verified empty below.
  const double a = model.radius;
  const double nu_cap = a * rmax / kZeroCurveBottom + 15.0;
  const int n_modes = std::max(
      1, static_cast<int>(std::floor(nu_cap - model.order_offset())) + 1);
  if (model.order(n_modes + 2) > specfun::kNuMax) {
    throw EnvelopeError(
        "rmax needs boundary-function orders beyond the order envelope");
  }
  const auto fams = modes(model, n_modes + 3);

  // inner radius: |z| below the lowest zero of any boundary function
  const double rmin = 0.01 / a;
  const double k = static_cast<double>(sector);

  std::vector<std::vector<FoundZero>> per_mode(
      static_cast<std::size_t>(n_modes + 3));
  parallel_for(per_mode.size(), opt.threads, [&](std::size_t i) {
    const AnalyticFn fn = mode_function(model, static_cast<int>(i));
    const double nu = fams[i].order;
    // The annulus is ours to perturb: when a contour lands on a zero, nudge
    // the radial edges outward and the sector insets slightly and retry.
    const int tries = std::max(1, opt.max_jitter);
    for (int t = 0; t < tries; ++t) {
      const double bump = 1e-7 * (1.0 + 2.0 * t);
      const double pad = rmax * (1.0 + bump);
      const double arg_lo =
          k * kPi + kSectorInset * (1.0 + 0.61803398874989485 * t);
      const double arg_hi =
          (k + 1.0) * kPi - kSectorInset * (1.0 + 0.41421356237309515 * t);
      try {
        if (sector == -1) {
          // fast path: march the zero arc, then certify the count with a
          // phase-tracked winding over the zero-carrying part of the sector
          std::vector<FoundZero> pts;
          const bool marched =
              chain_zeros(fn, nu, a, rmin * (1.0 - bump), pad, arg_lo,
                          arg_hi, 1e-12, pts);
          // The region below 0.55*nu/a is zero-free with a wide margin, so
          // the certificate rectangle may start there; cap it so it never
          // degenerates when the whole arc sits far outside rmax.
          const double lo =
              nu >= 3.0 ? std::min(std::max(rmin * (1.0 - bump),
                                            0.55 * nu / a),
                                   pad / 1.3)
                        : rmin * (1.0 - bump);
          const Box rect{std::log(lo), std::log(pad), arg_lo, arg_hi};
          const int expect = tracked_winding(fn, rect);
          if (marched && expect == order_sum(pts)) {
            per_mode[i] = std::move(pts);
            return;
          }
          if (!marched && expect == 0) {
            per_mode[i].clear();
            return;
          }
          // marching disagreed with the certified count: redo this mode by
          // banded generic subdivision
          per_mode[i] = banded_find_zeros(fn, lo, pad, arg_lo, arg_hi,
                                          14.0 / a, 1e-12, opt);
          if (order_sum(per_mode[i]) != expect) {
            throw BoundaryError(
                "banded subdivision and winding certificate disagree");
          }
          return;
        }
        const LogRect rect =
            make_logrect(rmin * (1.0 - bump), pad, arg_lo, arg_hi);
        per_mode[i] = find_zeros(fn, rect, 1e-12, opt);
        return;
      } catch (const BoundaryError&) {
        if (t + 1 == tries) throw;
      } catch (const InternalError&) {
        if (t + 1 == tries) throw;
      }
    }
  });

  for (int n = n_modes; n < n_modes + 3; ++n) {
    if (!per_mode[static_cast<std::size_t>(n)].empty()) {
      throw CoverageError(
          "mode truncation check failed: mode " + std::to_string(n) +
          " still has zeros below rmax; the margin heuristic does not cover "
          "this model");
    }
  }

  ResonanceSet set;
  set.model_hash = model.hash();
  set.sector = sector;
  set.rmax_covered = rmax;
  for (int n = 0; n < n_modes; ++n) {
    for (const auto& z : per_mode[static_cast<std::size_t>(n)]) {
      if (z.location.modulus >= rmax) continue;  // jitter rind
      set.entries.push_back(ResonanceEntry{
          z.location, z.order, fams[static_cast<std::size_t>(n)].multiplicity,
          n, z.residual});
    }
  }
  sort_canonical(set.entries);
  return set;
}

CountingTable counting_function(const ResonanceSet& set,
                                const std::vector<double>& radii) {
  CountingTable t;
  t.sector = set.sector;
  t.radii = radii;
  t.counts.reserve(radii.size());
  double prev = 0.0;
  for (double r : radii) {
    if (!(r > 0.0) || r <= prev) {
      throw UsageError("radii must be positive and strictly increasing");
    }
    prev = r;
    if (r > set.rmax_covered) {
      throw CoverageError("radius " + std::to_string(r) +
                          " exceeds the covered rmax " +
                          std::to_string(set.rmax_covered));
    }
    std::int64_t c = 0;
    for (const auto& e : set.entries) {
      if (e.location.modulus < r) {
        c += static_cast<std::int64_t>(e.order_multiplicity) *
             e.channel_multiplicity;
      }
    }
    t.counts.push_back(c);
  }
  return t;
}

std::string cache_path(const std::string& cache_dir,
                       const ScatteringModel& model, std::int64_t sector,
                       double rmax) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "sector%lld_r%.17g",
                static_cast<long long>(sector), rmax);
  return cache_dir + "/" + model.hash() + "/" + buf + ".json";
}

ResonanceSet resonances_cached(const ScatteringModel& model,
                               std::int64_t sector, double rmax,
                               const std::string& cache_dir,
                               const ZeroFindOptions& opt) {
  const std::string path = cache_path(cache_dir, model, sector, rmax);
  if (std::filesystem::exists(path)) {
    const ResonanceSet s =
        ResonanceSet::from_json(Json::parse(read_text_file(path)));
    if (s.model_hash != model.hash() || s.sector != sector ||
        s.rmax_covered != rmax) {
      throw UsageError("cache file " + path +
                       " does not match the requested query");
    }
    return s;
  }
  const ResonanceSet s = resonances(model, sector, rmax, opt);
  std::filesystem::create_directories(
      std::filesystem::path(path).parent_path());
  write_text_file(path, json_dump(s.to_json()) + "\n");
  return s;
}

}  // namespace evenres
