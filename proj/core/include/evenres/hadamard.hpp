#pragma once

#include <string>
#include <vector>

#include "evenres/logcover.hpp"
#include "evenres/models.hpp"
#include "evenres/zerofinder.hpp"

namespace evenres {

// Weierstrass elementary factor E_p(z) = (1-z) exp(z + z^2/2 + ... + z^p/p),
// E_0(z) = 1-z.
Complex canonical_factor(int p, Complex z);

// Principal-branch log of E_p: log(1-z) + z + z^2/2 + ... + z^p/p.  Finite
// wherever z != 1.
Complex log_canonical_factor(int p, Complex z);

// The four truncated products of the factorization
//   ratio(lambda) = e^{g} P1/Q1 * Q2/P2  of  det S(lambda)/det S(lambda e^{i pi})
// assembled over the computed zero set:
//   P1: factors E_p(z/conj(z_j))  over  -pi/2 < arg lambda_j < 3pi/2
//   Q1: factors E_p(z/z_j)        over  -3pi/2 < arg lambda_j < pi/2
//   P2: factors E_p(-z/conj(z_j)) over  -3pi/2 < arg lambda_j < pi/2
//   Q2: factors E_p(-z/z_j)       over  -pi/2 < arg lambda_j < 3pi/2
// where z, z_j are the complex embeddings of the cover points.
struct FourProducts {
  Complex p1{1.0, 0.0}, q1{1.0, 0.0}, p2{1.0, 0.0}, q2{1.0, 0.0};
};

// Log-sum assembly of the same four products (sum of principal factor
// logs); immune to double-range overflow of the plain products.
struct FourLogProducts {
  Complex p1{0.0, 0.0}, q1{0.0, 0.0}, p2{0.0, 0.0}, q2{0.0, 0.0};
};

// The product domain needs zeros with arguments in (-3pi/2, 3pi/2): one
// set per sector -2..1, same model, each covering modulus >= 2|lambda|.
// Input sets may come in any order; entries are re-sorted into one
// deterministic factor order (modulus, then argument, then mode).
class ZeroUnion {
 public:
  explicit ZeroUnion(const std::vector<ResonanceSet>& sets);
  const std::vector<ResonanceEntry>& entries() const { return entries_; }
  const std::string& model_hash() const { return hash_; }
  double rmax_covered() const { return rmax_; }

 private:
  std::vector<ResonanceEntry> entries_;
  std::string hash_;
  double rmax_ = 0.0;
};

FourProducts truncated_products(const ZeroUnion& zeros, int p,
                                const LogPoint& lambda);
FourLogProducts log_truncated_products(const ZeroUnion& zeros, int p,
                                       const LogPoint& lambda);

// Continuously tracked log of det S(lambda)/det S(lambda e^{i pi}) *
// Q1 P2 / (P1 Q2) along the grid path: the truncated-product estimate of
// the analytic g.  Grid points must lie in -3pi/2 < arg < pi/2, keep a
// relative guard distance from every zero/pole image of the assembled
// ratio, and satisfy 2|lambda| <= rmax_covered (CoverageError otherwise).
// p < 0 picks the default growth order p = dimension.
struct GEstimate {
  std::vector<Complex> values;
  double rmax = 0.0;
  int p = 0;
};

GEstimate g_estimate(const ScatteringModel& model, const ZeroUnion& zeros,
                     const std::vector<LogPoint>& grid, int p = -1,
                     double guard = 1e-3, int threads = 1);

// CSV rows (re lambda, im lambda, arg lambda, re g, im g, rmax, p); the
// argument column carries the sheet information the embedding loses.
std::string g_estimate_csv(const std::vector<LogPoint>& grid,
                           const GEstimate& g);

// Winding number of the assembled ratio around a circle in the embedding
// plane (center is a cover point fixing the sheet; radius < |center| so the
// loop cannot wrap the branch point): tracked log over n_points, returned
// as the nearest integer; max_jump reports the largest adjacent phase step
// (branch-continuity diagnostic).
struct WindingProbe {
  int winding = 0;
  double max_jump = 0.0;
  double residual = 0.0;  // |tracked winding - integer|
};

WindingProbe ratio_winding(const ScatteringModel& model,
                           const ZeroUnion& zeros, const LogPoint& center,
                           double radius, int n_points, int p = -1,
                           int threads = 1);

}  // namespace evenres
