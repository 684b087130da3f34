#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "evenres/jsonio.hpp"
#include "evenres/logcover.hpp"
#include "evenres/models.hpp"
#include "evenres/scaled.hpp"

namespace evenres {

// Analytic function handle: returns (f, df/dlambda) at a cover point, in
// scaled form so deep-sheet dynamic range does not overflow.
using AnalyticFn =
    std::function<std::pair<ScaledC, ScaledC>(const LogPoint&)>;

// Rectangle on the cover in (modulus, argument) coordinates.
struct LogRect {
  double rmin = 1.0;
  double rmax = 2.0;
  double argmin = 0.0;
  double argmax = 1.0;
};

// Validates 0 < rmin < rmax, argmin < argmax.
LogRect make_logrect(double rmin, double rmax, double argmin, double argmax);

struct ZeroFindOptions {
  double quad_tol = 0.1;      // winding uncertainty target, must be < 0.25
  double cluster_rel = 1e-8;  // zeros within this relative distance merge
  int max_jitter = 4;         // retries with jittered subdivision lines
  int max_depth = 48;
  int threads = 1;            // used by resonances() across modes
};

// Number of zeros of f inside rect, with multiplicity, by the argument
// principle.  Contour quadrature runs in (log modulus, argument) coordinates
// with error held below quad_tol before rounding.  Throws BoundaryError when
// a zero sits within the guard distance of the contour (caller perturbs the
// rectangle), BudgetError when quadrature cannot converge.
int winding_count(const AnalyticFn& f, const LogRect& rect,
                  double quad_tol = 0.1);

struct FoundZero {
  LogPoint location;
  int order = 1;
  // scale-free Newton residual |f/f'| / |lambda| at exit; for unresolved
  // clusters, the cell diameter that was collapsed.
  double residual = 0.0;
};

// All zeros of f inside rect: recursive quad-subdivision until each cell
// holds at most one zero (or is below the cluster threshold, reported as one
// zero of the total order), then damped Newton in the log chart until the
// relative step drops below refine_tol.  The sum of returned orders always
// equals winding_count(rect); violations raise InternalError.
std::vector<FoundZero> find_zeros(const AnalyticFn& f, const LogRect& rect,
                                  double refine_tol = 1e-12,
                                  const ZeroFindOptions& opt = {});

// Per-mode resonance function as an AnalyticFn (one order sweep per call).
AnalyticFn mode_function(const ScatteringModel& model, int n);

struct ResonanceEntry {
  LogPoint location;
  int order_multiplicity = 1;          // zero order
  std::int64_t channel_multiplicity = 1;  // m_n of the mode's harmonic space
  int mode = 0;
  double residual = 0.0;
};

// Multiset of resonances in one sector, canonically ordered by (modulus,
// argument, mode).
struct ResonanceSet {
  std::vector<ResonanceEntry> entries;
  std::string model_hash;
  double rmax_covered = 0.0;
  std::int64_t sector = 0;

  std::int64_t total_multiplicity() const;
  Json to_json() const;
  static ResonanceSet from_json(const Json& j);
};

// Innermost zero of a boundary function of order nu sits at modulus
// ~ kZeroCurveBottom * nu / radius (measured across boundary conditions;
// the analytic bottom of the zero curve).  Drives the order truncation.
inline constexpr double kZeroCurveBottom = 0.66274341934918;

// Largest coverage radius the order envelope admits for this model: modes
// beyond the special-function order cap could still place zeros below any
// larger radius.
double coverage_radius_limit(const ScatteringModel& model);

// Scans every mode family whose innermost zero can lie below rmax (orders
// up to a*rmax/kZeroCurveBottom plus margin) and verifies the next three
// families are empty (CoverageError otherwise).  Locations lie strictly
// inside the open sector (argument at least 1e-9 from pi*Z).
ResonanceSet resonances(const ScatteringModel& model, std::int64_t sector,
                        double rmax, const ZeroFindOptions& opt = {});

struct CountingTable {
  std::vector<double> radii;
  std::vector<std::int64_t> counts;  // n_k(r), all multiplicities included
  std::int64_t sector = 0;
};

// counts[i] = total multiplicity of entries with modulus < radii[i].
// radii must be increasing and within set.rmax_covered.
CountingTable counting_function(const ResonanceSet& set,
                                const std::vector<double>& radii);

// cache_dir/<model-hash>/sector<k>_r<rmax>.json
std::string cache_path(const std::string& cache_dir,
                       const ScatteringModel& model, std::int64_t sector,
                       double rmax);

// Returns the cached set when present (validating the model hash), computing
// and atomically writing it otherwise.
ResonanceSet resonances_cached(const ScatteringModel& model,
                               std::int64_t sector, double rmax,
                               const std::string& cache_dir,
                               const ZeroFindOptions& opt = {});

}  // namespace evenres
