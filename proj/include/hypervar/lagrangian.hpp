// Mechanical Lagrangians L = |v|^2 / 2 - V(x, t) on the disk, their
// Euler-Lagrange flow, discrete action and the average-action bounds.
#pragma once

#include <memory>
#include <vector>

#include "hypervar/core.hpp"
#include "hypervar/fuchsian.hpp"

namespace hypervar {

struct ELState {
  DiskPoint position;
  TangentVec velocity;
  double time = 0.0;
};

class MechanicalLagrangian {
 public:
  explicit MechanicalLagrangian(std::shared_ptr<const EquivariantPotential> potential);

  const EquivariantPotential& potential() const { return *potential_; }
  std::shared_ptr<const EquivariantPotential> potential_ptr() const { return potential_; }

  double value(const TangentVec& v, double t) const;
  double value(const ELState& s) const { return value(s.velocity, s.time); }
  /// E = |v|^2 / 2 + V(x, t); conserved only when V does not depend on t.
  double energy(const ELState& s) const;

  /// Superquadratic constant C in L >= C |v|^2 (the kinetic metric is the
  /// hyperbolic metric itself, so C = 1/2).
  static constexpr double superquadratic_constant = 0.5;

 private:
  std::shared_ptr<const EquivariantPotential> potential_;
};

/// Euclidean-coordinate form of the Euler-Lagrange vector field.
struct ELField {
  Complex velocity;
  Complex acceleration;
};

ELField el_vector_field(const MechanicalLagrangian& L, const ELState& s);

/// Geodesic spray of the conformal metric lambda^2 |dz|^2 at z for velocity zdot.
Complex geodesic_spray(Complex z, Complex zdot);

struct StepControl {
  double max_step = 0.02;
  double min_step = 1e-9;
  /// Local error tolerance per step (hyperbolic units).
  double tolerance = 1e-12;
  /// Output spacing; 0 records every accepted step.
  double sample_dt = 0.0;
};

struct StepStatistics {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  double smallest_step = 0.0;
  double largest_local_error = 0.0;
};

struct ELTrajectory {
  SampledCurve curve;
  ELState final_state;
  StepStatistics stats;
};

/// Integrates the E-L flow for signed duration T with an error-controlled
/// classical Runge-Kutta scheme written in a frame re-centred at the current
/// point every step (Mobius invariance keeps it well conditioned).
ELTrajectory integrate_el(const MechanicalLagrangian& L, const ELState& start, double duration,
                          const StepControl& control = {});

/// Discrete action of the geodesic polygon through the samples: per segment
/// dt * (d^2 / (2 dt^2)) minus the trapezoid average of V at both nodes,
/// evaluated at the segment's mid-time.
double action(const MechanicalLagrangian& L, const SampledCurve& c);

/// Metric gradient of `action` with respect to every node (endpoints included).
std::vector<TangentVec> action_gradient(const MechanicalLagrangian& L, const SampledCurve& c);

/// Average-action bounds for minimizers with average displacement K.
struct ActionBoundLedger {
  double C = MechanicalLagrangian::superquadratic_constant;
  double V_min = 0.0;

  double C_K_min(double K) const { return C * K / 4.0; }
  /// sup{ L : |v| <= K } / K, attained at |v| = K and V = V_min.
  double C_K_max(double K) const { return 0.5 * K - V_min / K; }
  /// min over K > 0 of C_K_max, attained at K = sqrt(-2 V_min).
  double min_C_K_max() const;
};

ActionBoundLedger make_ledger(const MechanicalLagrangian& L);

struct ActionBounds {
  double lower = 0.0;
  double upper = 0.0;
};

ActionBounds action_bounds(const ActionBoundLedger& ledger, double K, double duration);

}  // namespace hypervar
