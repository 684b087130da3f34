#include "evenres/models.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "evenres/errors.hpp"

namespace evenres {
namespace {

const char* bc_name(BoundaryCondition bc) {
  switch (bc) {
    case BoundaryCondition::kDirichlet: return "dirichlet";
    case BoundaryCondition::kNeumann: return "neumann";
    case BoundaryCondition::kRobin: return "robin";
  }
  throw InternalError("unreachable boundary condition");
}

BoundaryCondition bc_from_name(const std::string& s) {
  if (s == "dirichlet") return BoundaryCondition::kDirichlet;
  if (s == "neumann") return BoundaryCondition::kNeumann;
  if (s == "robin") return BoundaryCondition::kRobin;
  throw UsageError("unknown boundary condition \"" + s + "\"");
}

void validate(const ScatteringModel& m) {
  if (m.dimension < 2 || m.dimension % 2 != 0 || m.dimension > 10) {
    throw UsageError("dimension must be even and within [2, 10]");
  }
  if (!(m.radius > 0.0) || !std::isfinite(m.radius)) {
    throw UsageError("radius must be a positive finite real");
  }
  if (!std::isfinite(m.robin_gamma)) {
    throw UsageError("robin coupling must be finite");
  }
  if (m.bc != BoundaryCondition::kRobin && m.robin_gamma != 0.0) {
    throw UsageError("robin coupling given for a non-Robin boundary");
  }
  if (!m.eigenvalues.empty()) {
    throw UsageError("exterior obstacle models have no eigenvalues");
  }
  if (m.zero_multiplicity < 0) {
    throw UsageError("threshold multiplicity must be nonnegative");
  }
}

std::int64_t binom(std::int64_t k, std::int64_t j) {
  if (j < 0 || k < j) return 0;
  j = std::min(j, k - j);
  std::int64_t r = 1;
  for (std::int64_t i = 1; i <= j; ++i) r = r * (k - j + i) / i;
  return r;
}

}  // namespace

double ScatteringModel::boundary_coefficient() const {
  if (bc == BoundaryCondition::kDirichlet) return 0.0;
  return 0.5 * static_cast<double>(dimension - 2) + robin_gamma * radius;
}

Json ScatteringModel::to_json() const {
  Json j;
  j["d"] = dimension;
  j["radius"] = radius;
  j["bc"] = bc_name(bc);
  if (bc == BoundaryCondition::kRobin) j["gamma"] = robin_gamma;
  if (!eigenvalues.empty()) j["eigenvalues"] = eigenvalues;
  if (zero_multiplicity != 0) j["m0"] = zero_multiplicity;
  return j;
}

ScatteringModel ScatteringModel::from_json(const Json& j) {
  if (!j.is_object()) throw UsageError("model must be a JSON object");
  ScatteringModel m;
  m.dimension = j.value("d", 2);
  m.radius = j.value("radius", 1.0);
  m.bc = bc_from_name(j.value("bc", std::string("dirichlet")));
  m.robin_gamma = j.value("gamma", 0.0);
  if (j.contains("eigenvalues")) {
    m.eigenvalues = j.at("eigenvalues").get<std::vector<double>>();
  }
  m.zero_multiplicity = j.value("m0", 0);
  for (const auto& [key, _] : j.items()) {
    if (key != "d" && key != "radius" && key != "bc" && key != "gamma" &&
        key != "eigenvalues" && key != "m0") {
      throw UsageError("unknown model field \"" + key + "\"");
    }
  }
  validate(m);
  return m;
}

std::string ScatteringModel::hash() const { return stable_hash_hex(to_json()); }

ScatteringModel make_model(int dimension, double radius, BoundaryCondition bc,
                           double robin_gamma) {
  ScatteringModel m;
  m.dimension = dimension;
  m.radius = radius;
  m.bc = bc;
  m.robin_gamma = robin_gamma;
  validate(m);
  return m;
}

std::int64_t harmonic_multiplicity(int dimension, int n) {
  const std::int64_t d = dimension;
  return binom(n + d - 1, d - 1) - binom(n + d - 3, d - 1);
}

std::vector<ModeFamily> modes(const ScatteringModel& model, int count) {
  if (count < 1) throw UsageError("mode count must be >= 1");
  std::vector<ModeFamily> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int n = 0; n < count; ++n) {
    out.push_back(ModeFamily{n, model.order(n),
                             harmonic_multiplicity(model.dimension, n)});
  }
  return out;
}

int mode_count_for_radius(const ScatteringModel& model, double rmax,
                          double margin) {
  if (!(rmax > 0.0)) throw UsageError("rmax must be positive");
  const double bound =
      std::exp(1.0) * rmax * model.radius * 0.5 + margin;
  const int last = static_cast<int>(std::floor(bound)) - model.order_offset();
  return std::max(1, last + 1);
}

ModeTable mode_table(const ScatteringModel& model, int count,
                     const LogPoint& p) {
  if (count < 1) throw UsageError("mode count must be >= 1");
  const int off = model.order_offset();
  const int kmax = count - 1 + off;
  const LogPoint pz = make_logpoint(p.modulus * model.radius, p.argument);
  const specfun::SweepResult sw = specfun::hankel_sweep(0.0, kmax, pz);

  ModeTable t;
  t.z = to_complex(pz);
  t.count = count;
  t.max_cancellation_digits = sw.max_cancellation_digits;
  t.g1.resize(static_cast<std::size_t>(count));
  t.g2.resize(static_cast<std::size_t>(count));
  t.dg1.resize(static_cast<std::size_t>(count));
  t.kappa.resize(static_cast<std::size_t>(count));

  const double a = model.radius;
  const double c = model.boundary_coefficient();
  const bool dirichlet = model.bc == BoundaryCondition::kDirichlet;
  for (int n = 0; n < count; ++n) {
    const std::size_t k = static_cast<std::size_t>(n + off);
    const std::size_t i = static_cast<std::size_t>(n);
    const double nu = model.order(n);
    if (dirichlet) {
      t.g1[i] = sw.h1[k];
      t.g2[i] = sw.h2[k];
      t.dg1[i] = sw.h1p[k] * a;
      t.kappa[i] = Complex{1.0, 0.0};
    } else {
      t.g1[i] = sw.h1p[k] * t.z - sw.h1[k] * c;
      t.g2[i] = sw.h2p[k] * t.z - sw.h2[k] * c;
      // d/dlambda (z H' - c H) = a [-(z - nu^2/z) H - c H']  (Bessel ODE)
      const Complex q = t.z - (nu * nu) / t.z;
      t.dg1[i] = (sw.h1[k] * q + sw.h1p[k] * c) * (-a);
      t.kappa[i] = t.z * t.z - Complex{nu * nu, 0.0} + Complex{c * c, 0.0};
    }
  }
  return t;
}

Complex resonance_function(const ScatteringModel& model, int n,
                           const LogPoint& p, specfun::SpecfunDiag* diag) {
  if (n < 0) throw UsageError("mode index must be nonnegative");
  const ModeTable t = mode_table(model, n + 1, p);
  if (diag != nullptr) {
    diag->cancellation_digits = t.max_cancellation_digits;
    diag->warn =
        t.max_cancellation_digits > specfun::SpecfunDiag::warn_threshold;
  }
  return scaled_to_complex(t.g1[static_cast<std::size_t>(n)]);
}

Complex resonance_function_deriv(const ScatteringModel& model, int n,
                                 const LogPoint& p,
                                 specfun::SpecfunDiag* diag) {
  if (n < 0) throw UsageError("mode index must be nonnegative");
  const ModeTable t = mode_table(model, n + 1, p);
  if (diag != nullptr) {
    diag->cancellation_digits = t.max_cancellation_digits;
    diag->warn =
        t.max_cancellation_digits > specfun::SpecfunDiag::warn_threshold;
  }
  return scaled_to_complex(t.dg1[static_cast<std::size_t>(n)]);
}

// Guard shared by the s_n entry points: reject points within the guard
// ratio of a pole (G1 ~ 0, a resonance) or zero (G2 ~ 0, its reflection).
void require_pole_guard(const ScaledC& g1, const ScaledC& g2) {
  const double m1 = g1.mag2();
  const double m2 = g2.mag2();
  static const double guard = std::log2(kPoleGuardRatio);
  if (m1 - m2 < guard) {
    throw PoleProximityError("point is within the guard ratio of a resonance");
  }
  if (m2 - m1 < guard) {
    throw PoleProximityError(
        "point is within the guard ratio of a reflected resonance");
  }
}

Complex smatrix_eigenvalue(const ScatteringModel& model, int n,
                           const LogPoint& p) {
  if (n < 0) throw UsageError("mode index must be nonnegative");
  const ModeTable t = mode_table(model, n + 1, p);
  const std::size_t i = static_cast<std::size_t>(n);
  require_pole_guard(t.g1[i], t.g2[i]);
  return -scaled_ratio(t.g2[i], t.g1[i]);
}

Complex smatrix_eigenvalue_logderiv(const ScatteringModel& model, int n,
                                    const LogPoint& p) {
  if (n < 0) throw UsageError("mode index must be nonnegative");
  const ModeTable t = mode_table(model, n + 1, p);
  const std::size_t i = static_cast<std::size_t>(n);
  require_pole_guard(t.g1[i], t.g2[i]);
  const Complex lambda = to_complex(p);
  const ScaledC num =
      scaled_from(Complex{0.0, -4.0} * t.kappa[i] / (kPi * lambda));
  return scaled_ratio(num, t.g1[i] * t.g2[i]);
}

}  // namespace evenres
