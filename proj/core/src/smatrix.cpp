#include "evenres/smatrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <utility>

#include "evenres/errors.hpp"
#include "evenres/fitting.hpp"
#include "evenres/parallel.hpp"
#include "evenres/scaled.hpp"
#include "evenres/specfun.hpp"

namespace evenres {

namespace {

constexpr double kLn2 = 0.69314718055994530941723212145818;
constexpr double kHalfPi = kPi / 2.0;
// |s_n - 1| below this threshold switches the mode into the principal-log
// accumulation path; above it the mode joins the scaled direct product.
constexpr double kNearOne = 0.5;
// log2(|s_n - 1|) above this is treated as "far" without projecting to
// double (the ratio would be representable but useless for log1p).
constexpr double kFarLog2 = 900.0;
constexpr int kMaxTrackDepth = 48;

// Compensated (Neumaier) accumulator; terms are added in a fixed mode order
// so grid sweeps are bit-reproducible regardless of thread count.
struct NeumaierSum {
  double sum = 0.0;
  double comp = 0.0;
  void add(double x) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) {
      comp += (sum - t) + x;
    } else {
      comp += (x - t) + sum;
    }
    sum = t;
  }
  double value() const { return sum + comp; }
};

struct NeumaierComplex {
  NeumaierSum re, im;
  void add(Complex z) {
    re.add(z.real());
    im.add(z.imag());
  }
  Complex value() const { return {re.value(), im.value()}; }
};

// log(1 + w) without cancellation for small |w|.
Complex clog1p(Complex w) {
  const double a = w.real();
  const double b = w.imag();
  return {0.5 * std::log1p(2.0 * a + a * a + b * b), std::atan2(b, 1.0 + a)};
}

// b^k for integer k >= 1 by binary exponentiation in scaled arithmetic.
ScaledC scaled_pow(ScaledC b, std::int64_t k) {
  ScaledC r = scaled_from({1.0, 0.0});
  while (k > 0) {
    if (k & 1) r = r * b;
    b = b * b;
    k >>= 1;
  }
  return r;
}

// Per-point mode scan shared by the determinant-family entry points: the
// mode table, per-mode |s_n - 1| and (when representable) s_n - 1 itself,
// and the truncation index chosen by the verified-tail rule: three
// consecutive modes with |s_n - 1| < tail_tol, each smaller than the last
// (ties allowed only at the underflow floor).
struct ModeScan {
  ModeTable table;
  std::vector<double> dist;  // |s_n - 1|, +inf for out-of-range modes
  std::vector<Complex> w;    // s_n - 1 where finite
  int stop = 0;              // modes 0..stop-1 enter the sum
  std::vector<std::int64_t> mult;
};

int max_mode_count(const ScatteringModel& model) {
  const int offset = (model.dimension - 2) / 2;
  return static_cast<int>(specfun::kNuMax) - offset + 1;
}

ModeScan scan_modes(const ScatteringModel& model, const LogPoint& p,
                    double tail_tol, int min_modes) {
  if (!(tail_tol > 0.0) || !(tail_tol < 1e-2)) {
    throw UsageError("tail tolerance must lie in (0, 1e-2)");
  }
  if (min_modes < 0) throw UsageError("min_modes must be nonnegative");
  const int cap = max_mode_count(model);
  if (min_modes > cap) {
    throw EnvelopeError("requested mode count exceeds the order envelope");
  }
  int count = std::max({4, min_modes + 3,
                        mode_count_for_radius(model, p.modulus)});
  count = std::min(count, cap);
  for (;;) {
    ModeScan scan;
    scan.table = mode_table(model, count, p);
    scan.dist.resize(static_cast<std::size_t>(count));
    scan.w.resize(static_cast<std::size_t>(count));
    scan.mult.resize(static_cast<std::size_t>(count));
    int streak = 0;
    double prev = std::numeric_limits<double>::infinity();
    int stop = -1;
    for (int n = 0; n < count; ++n) {
      const std::size_t i = static_cast<std::size_t>(n);
      scan.mult[i] = harmonic_multiplicity(model.dimension, n);
      require_pole_guard(scan.table.g1[i], scan.table.g2[i]);
      // s_n - 1 = -(G1 + G2)/G1
      const ScaledC num = -(scan.table.g1[i] + scan.table.g2[i]);
      const double dm = num.mag2() - scan.table.g1[i].mag2();
      if (dm > kFarLog2) {
        scan.w[i] = {std::numeric_limits<double>::quiet_NaN(), 0.0};
        scan.dist[i] = std::numeric_limits<double>::infinity();
      } else {
        scan.w[i] = scaled_ratio(num, scan.table.g1[i]);
        scan.dist[i] = std::abs(scan.w[i]);
      }
      const double dn = scan.dist[i];
      if (dn < tail_tol && (streak == 0 || dn < prev || dn <= 1e-300)) {
        ++streak;
      } else {
        streak = dn < tail_tol ? 1 : 0;
      }
      prev = dn;
      if (streak >= 3 && n + 1 >= min_modes) {
        stop = n + 1;
        break;
      }
    }
    if (stop > 0) {
      scan.stop = stop;
      return scan;
    }
    if (count >= cap) {
      throw EnvelopeError(
          "scattering mode tail did not fall below tolerance within the "
          "order envelope");
    }
    count = std::min(cap, count * 2);
  }
}

// Geometric extrapolation of the dropped remainder from the last two
// verified tail distances, inflated for the polynomial multiplicity growth.
double tail_estimate(const ModeScan& scan, int dimension, double last_term) {
  const std::size_t i = static_cast<std::size_t>(scan.stop - 1);
  const double d_last = scan.dist[i];
  const double d_prev = scan.dist[i - 1];
  double ratio = d_prev > 0.0 ? d_last / d_prev : 0.0;
  ratio = std::min(ratio * (1.0 + static_cast<double>(dimension) /
                                      static_cast<double>(scan.stop)),
                   0.95);
  const double m_next = static_cast<double>(
      harmonic_multiplicity(dimension, scan.stop));
  return m_next * last_term * ratio / (1.0 - ratio);
}

}  // namespace

Complex logdet_s(const ScatteringModel& model, const LogPoint& p,
                 double tail_tol, ModeSumTail* tail, int min_modes) {
  const ModeScan scan = scan_modes(model, p, tail_tol, min_modes);
  NeumaierComplex near_sum;
  ScaledC far_prod = scaled_from({1.0, 0.0});
  for (int n = 0; n < scan.stop; ++n) {
    const std::size_t i = static_cast<std::size_t>(n);
    const double mn = static_cast<double>(scan.mult[i]);
    if (scan.dist[i] < kNearOne) {
      const Complex term = clog1p(scan.w[i]);
      near_sum.add({mn * term.real(), mn * term.imag()});
    } else {
      const ScaledC sn = scaled_div(-scan.table.g2[i], scan.table.g1[i]);
      far_prod = far_prod * scaled_pow(sn, scan.mult[i]);
    }
  }
  Complex out = near_sum.value();
  if (!(far_prod.m.real() == 1.0 && far_prod.m.imag() == 0.0 &&
        far_prod.e == 0)) {
    out += Complex{far_prod.mag2() * kLn2, std::arg(far_prod.m)};
  }
  if (tail != nullptr) {
    tail->modes_used = scan.stop;
    tail->tail_bound = tail_estimate(
        scan, model.dimension,
        scan.dist[static_cast<std::size_t>(scan.stop - 1)]);
  }
  return out;
}

Complex det_s(const ScatteringModel& model, const LogPoint& p,
              double tail_tol, ModeSumTail* tail) {
  const Complex ld = logdet_s(model, p, tail_tol, tail);
  if (ld.real() > 709.0) {
    throw EnvelopeError("determinant modulus overflows double range");
  }
  return std::exp(ld);
}

Complex logderiv_s(const ScatteringModel& model, const LogPoint& p,
                   double tail_tol, ModeSumTail* tail) {
  const ModeScan scan = scan_modes(model, p, tail_tol, 0);
  const Complex lambda = to_complex(p);
  NeumaierComplex sum;
  double last_abs = 0.0;
  for (int n = 0; n < scan.stop; ++n) {
    const std::size_t i = static_cast<std::size_t>(n);
    const ScaledC num = scaled_from(Complex{0.0, -4.0} * scan.table.kappa[i] /
                                    (kPi * lambda));
    const Complex term =
        scaled_ratio(num, scan.table.g1[i] * scan.table.g2[i]);
    const double mn = static_cast<double>(scan.mult[i]);
    sum.add({mn * term.real(), mn * term.imag()});
    last_abs = std::abs(term);
  }
  if (tail != nullptr) {
    tail->modes_used = scan.stop;
    tail->tail_bound = tail_estimate(scan, model.dimension, last_abs);
  }
  return sum.value();
}

Complex f_ratio(const ScatteringModel& model, const LogPoint& p,
                double tail_tol) {
  const Complex ld = logdet_s(model, p, tail_tol) -
                     logdet_s(model, rotate(p, 1), tail_tol);
  if (ld.real() > 709.0) {
    throw EnvelopeError("determinant ratio overflows double range");
  }
  return std::exp(ld);
}

double trace_norm_deficit(const ScatteringModel& model, double tau,
                          double tail_tol) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw UsageError("trace norm deficit requires a positive real energy");
  }
  const ModeScan scan =
      scan_modes(model, make_logpoint(tau, 0.0), tail_tol, 0);
  NeumaierSum sum;
  for (int n = 0; n < scan.stop; ++n) {
    const std::size_t i = static_cast<std::size_t>(n);
    if (!std::isfinite(scan.dist[i])) {
      throw InternalError("unimodular eigenvalue out of range on real axis");
    }
    sum.add(static_cast<double>(scan.mult[i]) * scan.dist[i]);
  }
  return sum.value();
}

std::vector<double> tracked_arg(const ScatteringModel& model,
                                const std::vector<double>& tau_grid,
                                int halfturns, double tail_tol) {
  if (halfturns != 1 && halfturns != -1) {
    throw UsageError("argument tracking expects halfturns of +1 or -1");
  }
  if (tau_grid.empty()) throw UsageError("argument tracking grid is empty");
  for (std::size_t i = 0; i < tau_grid.size(); ++i) {
    if (!(tau_grid[i] > 0.0) || !std::isfinite(tau_grid[i])) {
      throw UsageError("argument tracking grid must be positive and finite");
    }
    if (i > 0 && !(tau_grid[i] > tau_grid[i - 1])) {
      throw UsageError("argument tracking grid must be strictly increasing");
    }
  }

  // Wrapped argument of det S on the rotated ray at a given energy.
  const auto wrapped = [&](double tau) {
    return logdet_s(model, rotate(make_logpoint(tau, 0.0), halfturns),
                    tail_tol)
        .imag();
  };

  // |d/dt arg det S(t e^{i pi h})| <= |logderiv_s| at the rotated point.
  const auto deriv_mag = [&](double t) {
    return std::abs(logderiv_s(
        model, rotate(make_logpoint(t, 0.0), halfturns), tail_tol));
  };

  // Continuous increment of the argument from a to b.  A step is accepted
  // only when (b-a) * max |logderiv| (sampled at endpoints and midpoint)
  // is below pi/2: then the true increment provably fits one branch and
  // the wrapped endpoint difference IS the increment.  A wrapped-difference
  // test alone can alias by whole turns when the phase grows fast, so the
  // derivative bound drives the refinement.
  std::function<double(double, double, double, double, double, double, int)>
      increment = [&](double a, double b, double wa, double wb, double da,
                      double db, int depth) -> double {
    const double d0 = std::remainder(wb - wa, 2.0 * kPi);
    const double mid = std::sqrt(a * b);
    if (!(mid > a) || !(mid < b)) return d0;  // interval at double resolution
    const double dm = deriv_mag(mid);
    if ((b - a) * std::max({da, dm, db}) < kHalfPi) return d0;
    if (depth >= kMaxTrackDepth) {
      throw BudgetError("argument tracking refinement exhausted");
    }
    const double wm = wrapped(mid);
    return increment(a, mid, wa, wm, da, dm, depth + 1) +
           increment(mid, b, wm, wb, dm, db, depth + 1);
  };

  std::vector<double> path = tau_grid;
  const bool has_anchor =
      std::binary_search(path.begin(), path.end(), 1.0);
  if (!has_anchor) {
    path.insert(std::upper_bound(path.begin(), path.end(), 1.0), 1.0);
  }
  std::vector<double> warg(path.size()), dmag(path.size());
  for (std::size_t i = 0; i < path.size(); ++i) {
    warg[i] = wrapped(path[i]);
    dmag[i] = deriv_mag(path[i]);
  }

  const std::size_t anchor = static_cast<std::size_t>(
      std::lower_bound(path.begin(), path.end(), 1.0) - path.begin());
  std::vector<double> theta(path.size());
  theta[anchor] = warg[anchor];
  for (std::size_t i = anchor + 1; i < path.size(); ++i) {
    theta[i] = theta[i - 1] + increment(path[i - 1], path[i], warg[i - 1],
                                        warg[i], dmag[i - 1], dmag[i], 0);
  }
  for (std::size_t i = anchor; i-- > 0;) {
    theta[i] = theta[i + 1] - increment(path[i], path[i + 1], warg[i],
                                        warg[i + 1], dmag[i], dmag[i + 1], 0);
  }

  std::vector<double> out(tau_grid.size());
  std::size_t j = 0;
  for (std::size_t i = 0; i < tau_grid.size(); ++i) {
    while (path[j] != tau_grid[i]) ++j;
    out[i] = theta[j];
  }
  return out;
}

std::string smatrix_csv(const ScatteringModel& model,
                        const std::vector<double>& tau_grid, int halfturns,
                        double tail_tol, int threads) {
  const std::vector<double> arg = tracked_arg(model, tau_grid, halfturns,
                                              tail_tol);
  const std::size_t n = tau_grid.size();
  std::vector<Complex> logdets(n);
  std::vector<double> deficits(n);
  parallel_for(n, threads, [&](std::size_t i) {
    logdets[i] = logdet_s(
        model, rotate(make_logpoint(tau_grid[i], 0.0), halfturns), tail_tol);
    deficits[i] = trace_norm_deficit(model, tau_grid[i], tail_tol);
  });
  std::string csv = "tau,re_dets,im_dets,deficit,tracked_arg\n";
  char line[256];
  for (std::size_t i = 0; i < n; ++i) {
    double re = std::numeric_limits<double>::infinity();
    double im = std::numeric_limits<double>::infinity();
    if (logdets[i].real() <= 709.0) {
      const Complex d = std::exp(logdets[i]);
      re = d.real();
      im = d.imag();
    }
    std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  tau_grid[i], re, im, deficits[i], arg[i]);
    csv += line;
  }
  return csv;
}

Json exponent_report(const std::vector<double>& grid,
                     const std::vector<double>& values, double floor) {
  if (grid.size() != values.size()) {
    throw UsageError("exponent report needs matching grid/value lengths");
  }
  std::vector<double> xs, ys, used;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double v = std::abs(values[i]);
    if (!(grid[i] > 0.0) || !std::isfinite(grid[i]) || !std::isfinite(v) ||
        v <= floor || v <= 0.0) {
      continue;
    }
    xs.push_back(std::log(grid[i]));
    ys.push_back(std::log(v));
    used.push_back(grid[i]);
  }
  if (xs.size() < 3) {
    throw UsageError("exponent report needs at least three usable points");
  }
  const LineFit fit = fit_line(xs, ys);
  Json j;
  j["exponent"] = fit.slope;
  j["ci_low"] = fit.slope - 2.0 * fit.slope_stderr;
  j["ci_high"] = fit.slope + 2.0 * fit.slope_stderr;
  j["grid"] = used;
  return j;
}

}  // namespace evenres
