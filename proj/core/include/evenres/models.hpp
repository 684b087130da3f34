#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evenres/jsonio.hpp"
#include "evenres/logcover.hpp"
#include "evenres/scaled.hpp"
#include "evenres/specfun.hpp"

namespace evenres {

enum class BoundaryCondition { kDirichlet, kNeumann, kRobin };

// Radially symmetric exterior obstacle in even dimension d: the ball of
// radius `radius`, with Dirichlet, Neumann, or Robin boundary data.  The
// scattering matrix diagonalizes over spherical harmonics; everything the
// toolkit computes reduces to the per-mode functions below.
struct ScatteringModel {
  int dimension = 2;
  double radius = 1.0;
  BoundaryCondition bc = BoundaryCondition::kDirichlet;
  double robin_gamma = 0.0;          // boundary coupling, Robin only
  std::vector<double> eigenvalues;   // always empty for these obstacles
  int zero_multiplicity = 0;         // threshold multiplicity m(0)

  // order offset: nu_n = n + (d-2)/2
  int order_offset() const { return (dimension - 2) / 2; }
  double order(int n) const { return static_cast<double>(n + order_offset()); }
  // coefficient c in G = z H' - c H (Neumann/Robin)
  double boundary_coefficient() const;

  Json to_json() const;
  static ScatteringModel from_json(const Json& j);
  std::string hash() const;  // stable cache key
};

// Validating constructor.
ScatteringModel make_model(int dimension, double radius, BoundaryCondition bc,
                           double robin_gamma = 0.0);

struct ModeFamily {
  int index = 0;               // n
  double order = 0.0;          // nu_n
  std::int64_t multiplicity = 1;  // dimension of the degree-n harmonic space
};

// dim of degree-n spherical harmonics on S^{d-1}:
// C(n+d-1, d-1) - C(n+d-3, d-1).
std::int64_t harmonic_multiplicity(int dimension, int n);

std::vector<ModeFamily> modes(const ScatteringModel& model, int count);

// Number of mode families needed to cover |lambda| <= rmax: all n with
// nu_n <= e*rmax*radius/2 + margin.  Downstream scans verify emptiness of
// the next few families rather than trusting this heuristic.
int mode_count_for_radius(const ScatteringModel& model, double rmax,
                          double margin = 15.0);

// Per-point table of the mode data for families 0..count-1, from a single
// order sweep: G1/G2 (boundary functions built on H1/H2), the lambda
// derivative of G1, and the channel factor kappa_n with
// d/dlambda log s_n = -4i kappa_n / (pi lambda G1_n G2_n).
struct ModeTable {
  Complex z;  // lambda * radius, projected to C
  int count = 0;
  std::vector<ScaledC> g1, g2, dg1;
  std::vector<Complex> kappa;
  double max_cancellation_digits = 0.0;
};

ModeTable mode_table(const ScatteringModel& model, int count,
                     const LogPoint& p);

// Scalar entry points (single sweep each; use mode_table for whole families).
// resonance_function: zeros on the cover are the mode-n resonances.
Complex resonance_function(const ScatteringModel& model, int n,
                           const LogPoint& p,
                           specfun::SpecfunDiag* diag = nullptr);
Complex resonance_function_deriv(const ScatteringModel& model, int n,
                                 const LogPoint& p,
                                 specfun::SpecfunDiag* diag = nullptr);

// s_n(lambda) = -G2_n/G1_n; throws PoleProximityError within the guard
// ratio of a pole (resonance) or zero (reflected resonance).
Complex smatrix_eigenvalue(const ScatteringModel& model, int n,
                           const LogPoint& p);

// d/dlambda log s_n by the Wronskian closed form.
Complex smatrix_eigenvalue_logderiv(const ScatteringModel& model, int n,
                                    const LogPoint& p);

// |G1|/|G2| (either direction) below this ratio counts as pole proximity.
inline constexpr double kPoleGuardRatio = 1e-6;

// Throws PoleProximityError when the point is within the guard ratio of a
// resonance (G1 ~ 0) or a reflected resonance (G2 ~ 0).
void require_pole_guard(const ScaledC& g1, const ScaledC& g2);

}  // namespace evenres
