#include "evenres/hadamard.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>
#include <vector>

#include "evenres/errors.hpp"
#include "evenres/parallel.hpp"
#include "evenres/smatrix.hpp"

namespace evenres {

namespace {

// Complex accumulator with a base-2 exponent so long products survive the
// double range; collapse() reports overflow honestly.
struct ScaledProduct {
  Complex m{1.0, 0.0};
  std::int64_t e = 0;

  void mul(Complex f) {
    m *= f;
    renorm();
  }
  void renorm() {
    double a = std::abs(m.real()) + std::abs(m.imag());
    if (a > 0x1p+400) {
      m *= 0x1p-512;
      e += 512;
    } else if (a != 0.0 && a < 0x1p-400) {
      m *= 0x1p+512;
      e -= 512;
    }
  }
  // Direct integer power by repeated squaring (multiplicative assembly, no
  // logarithms involved).
  void mul_pow(Complex f, std::int64_t k) {
    ScaledProduct base;
    base.m = f;
    base.renorm();
    while (k > 0) {
      if (k & 1) {
        m *= base.m;
        e += base.e;
        renorm();
      }
      base.m *= base.m;
      base.e *= 2;
      base.renorm();
      k >>= 1;
    }
  }
  Complex collapse(const char* what) const {
    if (m == Complex{0.0, 0.0}) return {0.0, 0.0};
    double mag = std::log2(std::abs(m.real()) + std::abs(m.imag())) +
                 static_cast<double>(e);
    if (mag > 1020.0)
      throw EnvelopeError(std::string(what) +
                          " overflows the double range; use the log-sum "
                          "assembly instead");
    return m * std::exp2(static_cast<double>(e));
  }
};

struct FactorRanges {
  bool upper = false;  // -pi/2 < arg < 3pi/2   (P1, Q2)
  bool lower = false;  // -3pi/2 < arg < pi/2   (Q1, P2)
};

FactorRanges classify(double theta) {
  FactorRanges r;
  r.upper = theta > -kPi / 2 && theta < 3 * kPi / 2;
  r.lower = theta > -3 * kPi / 2 && theta < kPi / 2;
  return r;
}

void check_coverage(const ZeroUnion& zeros, const LogPoint& lambda) {
  if (2.0 * lambda.modulus > zeros.rmax_covered()) {
    std::ostringstream os;
    os << "zero set covers modulus " << zeros.rmax_covered()
       << " but the factorization at |lambda| = " << lambda.modulus
       << " needs coverage to " << 2.0 * lambda.modulus;
    throw CoverageError(os.str());
  }
}

std::int64_t entry_multiplicity(const ResonanceEntry& en) {
  return static_cast<std::int64_t>(en.order_multiplicity) *
         en.channel_multiplicity;
}

}  // namespace

Complex canonical_factor(int p, Complex z) {
  if (p < 0) throw UsageError("canonical factor order must be >= 0");
  Complex tail{0.0, 0.0};
  Complex zm = z;
  for (int m = 1; m <= p; ++m) {
    tail += zm / static_cast<double>(m);
    zm *= z;
  }
  return (1.0 - z) * std::exp(tail);
}

Complex log_canonical_factor(int p, Complex z) {
  if (p < 0) throw UsageError("canonical factor order must be >= 0");
  Complex s = std::log(1.0 - z);
  Complex zm = z;
  for (int m = 1; m <= p; ++m) {
    s += zm / static_cast<double>(m);
    zm *= z;
  }
  return s;
}

ZeroUnion::ZeroUnion(const std::vector<ResonanceSet>& sets) {
  if (sets.empty()) throw UsageError("zero union needs at least one set");
  std::set<std::int64_t> seen;
  double rmax = std::numeric_limits<double>::infinity();
  for (const ResonanceSet& s : sets) {
    if (hash_.empty())
      hash_ = s.model_hash;
    else if (hash_ != s.model_hash)
      throw UsageError("zero union mixes sets from different models");
    if (s.sector < -2 || s.sector > 1)
      throw UsageError(
          "zero union takes sectors -2..1 (arguments in (-3pi/2, 3pi/2))");
    if (!seen.insert(s.sector).second)
      throw UsageError("zero union has two sets for the same sector");
    rmax = std::min(rmax, s.rmax_covered);
    entries_.insert(entries_.end(), s.entries.begin(), s.entries.end());
  }
  for (std::int64_t k = -2; k <= 1; ++k)
    if (!seen.count(k)) {
      std::ostringstream os;
      os << "zero union is missing sector " << k
         << "; the factorization products need every sector -2..1";
      throw CoverageError(os.str());
    }
  rmax_ = rmax;
  std::sort(entries_.begin(), entries_.end(),
            [](const ResonanceEntry& a, const ResonanceEntry& b) {
              if (a.location.modulus != b.location.modulus)
                return a.location.modulus < b.location.modulus;
              if (a.location.argument != b.location.argument)
                return a.location.argument < b.location.argument;
              return a.mode < b.mode;
            });
}

FourProducts truncated_products(const ZeroUnion& zeros, int p,
                                const LogPoint& lambda) {
  if (p < 0) throw UsageError("product order must be >= 0");
  check_coverage(zeros, lambda);
  const Complex z = to_complex(lambda);
  ScaledProduct p1, q1, p2, q2;
  for (const ResonanceEntry& en : zeros.entries()) {
    const Complex zj = to_complex(en.location);
    const Complex zjc = std::conj(zj);
    const std::int64_t mult = entry_multiplicity(en);
    const FactorRanges r = classify(en.location.argument);
    if (r.upper) {
      p1.mul_pow(canonical_factor(p, z / zjc), mult);
      q2.mul_pow(canonical_factor(p, -z / zj), mult);
    }
    if (r.lower) {
      q1.mul_pow(canonical_factor(p, z / zj), mult);
      p2.mul_pow(canonical_factor(p, -z / zjc), mult);
    }
  }
  FourProducts out;
  out.p1 = p1.collapse("product P1");
  out.q1 = q1.collapse("product Q1");
  out.p2 = p2.collapse("product P2");
  out.q2 = q2.collapse("product Q2");
  return out;
}

FourLogProducts log_truncated_products(const ZeroUnion& zeros, int p,
                                       const LogPoint& lambda) {
  if (p < 0) throw UsageError("product order must be >= 0");
  check_coverage(zeros, lambda);
  const Complex z = to_complex(lambda);
  FourLogProducts out;
  for (const ResonanceEntry& en : zeros.entries()) {
    const Complex zj = to_complex(en.location);
    const Complex zjc = std::conj(zj);
    const double mult = static_cast<double>(entry_multiplicity(en));
    const FactorRanges r = classify(en.location.argument);
    if (r.upper) {
      out.p1 += mult * log_canonical_factor(p, z / zjc);
      out.q2 += mult * log_canonical_factor(p, -z / zj);
    }
    if (r.lower) {
      out.q1 += mult * log_canonical_factor(p, z / zj);
      out.p2 += mult * log_canonical_factor(p, -z / zjc);
    }
  }
  return out;
}

namespace {

void check_guard(const ZeroUnion& zeros, const LogPoint& lambda,
                 double guard) {
  const Complex z = to_complex(lambda);
  for (const ResonanceEntry& en : zeros.entries()) {
    const Complex zj = to_complex(en.location);
    const Complex images[4] = {zj, std::conj(zj), -zj, -std::conj(zj)};
    for (const Complex& im : images) {
      if (std::abs(z - im) < guard * std::abs(im)) {
        std::ostringstream os;
        os << "grid point (" << z.real() << ", " << z.imag()
           << ") lies within the guard distance " << guard
           << " of the zero/pole image (" << im.real() << ", " << im.imag()
           << ")";
        throw PoleProximityError(os.str());
      }
    }
  }
}

// Untracked value of log det S(lambda) - log det S(lambda e^{i pi})
// + log Q1 + log P2 - log P1 - log Q2 at one grid point.
Complex raw_log_ratio(const ScatteringModel& model, const ZeroUnion& zeros,
                      int p, const LogPoint& lambda) {
  const Complex lf =
      logdet_s(model, lambda) - logdet_s(model, rotate(lambda, 1));
  const FourLogProducts lp = log_truncated_products(zeros, p, lambda);
  return lf + lp.q1 + lp.p2 - lp.p1 - lp.q2;
}

std::vector<Complex> tracked_values(const ScatteringModel& model,
                                    const ZeroUnion& zeros, int p,
                                    const std::vector<LogPoint>& grid,
                                    double guard, int threads) {
  if (grid.empty()) throw UsageError("estimate needs a non-empty grid");
  if (zeros.model_hash() != model.hash())
    throw UsageError("zero union was computed for a different model");
  for (const LogPoint& q : grid) {
    if (!(q.argument > -3 * kPi / 2 && q.argument < kPi / 2)) {
      std::ostringstream os;
      os << "grid argument " << q.argument
         << " is outside the factorization region (-3pi/2, pi/2)";
      throw UsageError(os.str());
    }
    check_coverage(zeros, q);
    check_guard(zeros, q, guard);
  }
  std::vector<Complex> raw(grid.size());
  parallel_for(grid.size(), threads, [&](std::size_t i) {
    raw[i] = raw_log_ratio(model, zeros, p, grid[i]);
  });
  // Continuous branch along the grid path: start from the principal
  // representative, then snap each step to the nearest 2*pi image of its
  // predecessor.
  std::vector<Complex> out(raw.size());
  double im0 = std::remainder(raw[0].imag(), 2 * kPi);
  out[0] = {raw[0].real(), im0};
  for (std::size_t i = 1; i < raw.size(); ++i) {
    double k =
        std::round((out[i - 1].imag() - raw[i].imag()) / (2 * kPi));
    out[i] = raw[i] + Complex{0.0, 2 * kPi * k};
  }
  return out;
}

}  // namespace

GEstimate g_estimate(const ScatteringModel& model, const ZeroUnion& zeros,
                     const std::vector<LogPoint>& grid, int p, double guard,
                     int threads) {
  const int p_eff = p < 0 ? model.dimension : p;
  GEstimate g;
  g.values = tracked_values(model, zeros, p_eff, grid, guard, threads);
  g.rmax = zeros.rmax_covered();
  g.p = p_eff;
  return g;
}

std::string g_estimate_csv(const std::vector<LogPoint>& grid,
                           const GEstimate& g) {
  if (grid.size() != g.values.size())
    throw UsageError("grid and estimate sizes differ");
  std::ostringstream os;
  os.precision(17);
  os << "re_lambda,im_lambda,arg_lambda,re_g,im_g,rmax,p\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Complex z = to_complex(grid[i]);
    os << z.real() << ',' << z.imag() << ',' << grid[i].argument << ','
       << g.values[i].real() << ',' << g.values[i].imag() << ',' << g.rmax
       << ',' << g.p << '\n';
  }
  return os.str();
}

WindingProbe ratio_winding(const ScatteringModel& model,
                           const ZeroUnion& zeros, const LogPoint& center,
                           double radius, int n_points, int p, int threads) {
  if (!(radius > 0.0) || radius >= center.modulus)
    throw UsageError(
        "winding circle radius must be positive and smaller than the "
        "center modulus (the loop may not wrap the branch point)");
  if (n_points < 8) throw UsageError("winding circle needs >= 8 points");
  const int p_eff = p < 0 ? model.dimension : p;
  const Complex c = to_complex(center);
  const double base_arg = std::arg(c);
  std::vector<LogPoint> loop;
  loop.reserve(static_cast<std::size_t>(n_points) + 1);
  for (int k = 0; k <= n_points; ++k) {
    const double t = 2 * kPi * k / n_points;
    const Complex z = c + radius * Complex{std::cos(t), std::sin(t)};
    const double darg = std::remainder(std::arg(z) - base_arg, 2 * kPi);
    loop.push_back(make_logpoint(std::abs(z), center.argument + darg));
  }
  const double guard = std::min(1e-3, 0.5 * radius / center.modulus);
  const std::vector<Complex> w =
      tracked_values(model, zeros, p_eff, loop, guard, threads);
  WindingProbe probe;
  const double turns = (w.back().imag() - w.front().imag()) / (2 * kPi);
  probe.winding = static_cast<int>(std::lround(turns));
  probe.residual = std::abs(turns - std::lround(turns));
  for (std::size_t i = 1; i < w.size(); ++i)
    probe.max_jump =
        std::max(probe.max_jump, std::abs(w[i].imag() - w[i - 1].imag()));
  return probe;
}

}  // namespace evenres
