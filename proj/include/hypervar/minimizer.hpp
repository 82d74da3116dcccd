// Boundary-value minimizers of the discrete action and the discrete twist-map
// variational problem W = sum S(x_k, x_{k+1}).
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "hypervar/core.hpp"
#include "hypervar/fuchsian.hpp"
#include "hypervar/lagrangian.hpp"

namespace hypervar {

/// Objective over a chain of nodes whose first and last entries are fixed.
class ChainObjective {
 public:
  virtual ~ChainObjective() = default;
  virtual double value(const std::vector<DiskPoint>& nodes) const = 0;
  /// Metric gradient at every node (entries for fixed endpoints are ignored).
  virtual std::vector<TangentVec> gradient(const std::vector<DiskPoint>& nodes) const = 0;
  /// Per-node normalization of the gradient (time step for actions).
  virtual double node_scale(std::size_t node) const = 0;
};

struct DescentOptions {
  double tol_grad = 1e-10;
  int max_iterations = 200;
  /// Hessian blocks come from central differences of the gradient.
  double fd_step = 1e-5;
};

struct DescentOutcome {
  double value = 0.0;
  /// Euclidean norm of the raw interior gradient (hyperbolic norms per node).
  double grad_norm = 0.0;
  /// max over interior nodes of |gradient| / node_scale.
  double scaled_residual = 0.0;
  /// Tolerance applied to grad_norm: tol_grad, or the rounding floor of the
  /// node coordinates when that is larger (nodes far from the center).
  double tolerance_used = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Damped Newton iteration on the interior nodes: block-tridiagonal Hessian,
/// Levenberg shift when it is not positive definite, Armijo backtracking.
DescentOutcome minimize_chain(const ChainObjective& f, std::vector<DiskPoint>& nodes,
                              const DescentOptions& opts);

struct BVProblem {
  DiskPoint x_a;
  DiskPoint x_b;
  double a = 0.0;
  double b = 1.0;
  int n = 64;  ///< node count including both endpoints
  double tol_grad = 1e-10;
  int restarts = 0;
  int max_iterations = 200;
  std::uint64_t seed = 0;
};

struct MinimizeResult {
  SampledCurve curve;
  double action = 0.0;
  double grad_norm = 0.0;
  double el_residual = 0.0;
  bool restarts_agree = true;
  bool converged = false;
  /// See DescentOutcome::tolerance_used.
  double tolerance_used = 0.0;
  int iterations = 0;
};

MinimizeResult solve_bvp(const MechanicalLagrangian& L, const BVProblem& prob);

/// max over interior nodes of the metric norm of d(action)/d(node), divided
/// by the mean of the adjacent time steps.
double el_residual(const MechanicalLagrangian& L, const SampledCurve& c);

struct SubsegmentCheck {
  std::size_t first = 0;
  std::size_t last = 0;
  double restricted_action = 0.0;
  double resolved_action = 0.0;
  double relative_excess = 0.0;
};

struct SubsegmentReport {
  std::vector<SubsegmentCheck> checks;
  double max_excess = 0.0;
  /// All relative excesses below 1e-5. A tolerance-level certificate only.
  bool certified = false;
};

SubsegmentReport verify_subsegment_minimality(const MechanicalLagrangian& L, const SampledCurve& c,
                                              std::size_t samples, std::uint64_t seed = 0,
                                              double tol_grad = 1e-10);

// --- twist map -------------------------------------------------------------

/// S(x, X) = dist(x, X)^2 / 2 + V(x, 0).
double generating_S(const EquivariantPotential& V, const DiskPoint& x, const DiskPoint& X);
TangentVec grad1_S(const EquivariantPotential& V, const DiskPoint& x, const DiskPoint& X);
TangentVec grad2_S(const EquivariantPotential& V, const DiskPoint& x, const DiskPoint& X);

struct TwistPoint {
  DiskPoint X;
  TangentVec P;
};

/// Solves p = -d1 S(x, X), P = d2 S(x, X) for (X, P).
TwistPoint twist_step(const EquivariantPotential& V, const DiskPoint& x, const TangentVec& p);

struct TwistSequence {
  std::vector<DiskPoint> points;
  std::optional<std::vector<TangentVec>> momenta;
};

struct TwistResult {
  TwistSequence sequence;
  double W = 0.0;
  /// sup over interior nodes of |dW/dx_k|.
  double grad_sup = 0.0;
  /// Largest distance between the sequence and its replay under twist_step.
  double replay_error = 0.0;
  bool converged = false;
};

double discrete_W(const EquivariantPotential& V, const std::vector<DiskPoint>& x);

/// Minimizes W over sequences of `length` points with fixed first and last
/// points, then recovers momenta and replays the orbit.
TwistResult minimize_W(const EquivariantPotential& V, const DiskPoint& first, const DiskPoint& last,
                       int length, const DescentOptions& opts = {1e-12, 200, 1e-5});

/// Iterates twist_step from (x, p) and returns the first `count` points.
std::vector<DiskPoint> twist_orbit(const EquivariantPotential& V, const DiskPoint& x, const TangentVec& p,
                                   int count);

}  // namespace hypervar
