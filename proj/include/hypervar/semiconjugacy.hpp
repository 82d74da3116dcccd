// Finite-horizon orbit projection onto asymptotic geodesics: the shadow
// parameter s(t), the additive cocycle a, the running average over a window
// alpha, and the displacement cocycle D.
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "hypervar/core.hpp"
#include "hypervar/lagrangian.hpp"
#include "hypervar/qg_analysis.hpp"

namespace hypervar {

struct QKFlags {
  /// Subsegment certificate at tolerance plus the (lambda, epsilon) check.
  bool minimizer = false;
  /// rho >= k'' on every sample window of length >= N0.
  bool window_speed = false;
  /// Speed <= K'' everywhere.
  bool speed_bound = false;

  bool all() const { return minimizer && window_speed && speed_bound; }
};

struct OrbitRecord {
  /// Lifted orbit on a uniform time grid; velocities when it came from the flow.
  SampledCurve trajectory;
  std::optional<QKFlags> qk_flags;
};

/// E-L orbit through `start` (at time start.time) sampled every sample_dt on
/// [start.time - T_max, start.time + T_max].
OrbitRecord el_orbit(const MechanicalLagrangian& L, const ELState& start, double T_max, double sample_dt);

/// t -> g.fermi_point(s(t), h(t)) on the grid t_k = -T_max + k dt.
template <class S, class H>
OrbitRecord synthetic_orbit(const Geodesic& g, double T_max, double dt, S s, H h) {
  const long steps = static_cast<long>(std::lround(2.0 * T_max / dt));
  std::vector<double> times;
  std::vector<DiskPoint> points;
  for (long k = 0; k <= steps; ++k) {
    const double t = -T_max + static_cast<double>(k) * dt;
    times.push_back(t);
    points.push_back(g.fermi_point(s(t), h(t)));
  }
  return {SampledCurve(std::move(times), std::move(points)), std::nullopt};
}

/// Unit-free geodesic motion s(t) = speed * t on g.
OrbitRecord geodesic_orbit(const Geodesic& g, double speed, double T_max, double dt);

struct AsymptoticGeodesic {
  Geodesic gamma;
  /// Largest boundary-angle change against the estimate at half the horizon.
  double estimator_delta = 0.0;
};

/// Boundary angles of the far endpoints seen from the midpoint of the orbit.
/// Throws when either far endpoint is within distance 5 of the midpoint.
AsymptoticGeodesic asymptotic_geodesic(const OrbitRecord& orbit);

/// Orbit together with its asymptotic geodesic and s on the native samples.
class ShadowTrack {
 public:
  explicit ShadowTrack(const OrbitRecord& orbit);
  ShadowTrack(const OrbitRecord& orbit, AsymptoticGeodesic gamma);

  const SampledCurve& trajectory() const { return trajectory_; }
  const AsymptoticGeodesic& asymptote() const { return asymptote_; }
  const Geodesic& gamma() const { return asymptote_.gamma; }
  const std::vector<double>& s_samples() const { return s_; }
  double t_begin() const { return trajectory_.t_begin(); }
  double t_end() const { return trajectory_.t_end(); }

  /// Arclength parameter of the projection of the orbit at time t.
  double s(double t) const;

 private:
  SampledCurve trajectory_;
  AsymptoticGeodesic asymptote_;
  std::vector<double> s_;
};

struct SigmaValue {
  TangentVec tangent;
  double s = 0.0;
};

SigmaValue sigma_of(const ShadowTrack& track, double t);

/// a(t0, t) = s(t0 + t) - s(t0).
double cocycle_a(const ShadowTrack& track, double t0, double t);

/// max over sampled triples of |a(t0, t1 + t2) - a(t0, t1) - a(t0 + t1, t2)|.
double additivity_residual(const ShadowTrack& track, std::size_t samples, std::uint64_t seed);

/// (1 / alpha) * integral of s over [t, t + alpha], composite trapezoid at the
/// native samples.
double fuller_average(const ShadowTrack& track, double alpha, double t);

/// |sigma_bar(t + beta) - sigma_bar(t) - (1/alpha) int_t^{t+beta} a(u, alpha) du|.
double telescoping_residual(const ShadowTrack& track, double alpha, double t, double beta);

struct AlphaChoice {
  double alpha = 0.0;
  /// min of a(., alpha) over the fitting starts.
  double margin = 0.0;
  /// The same over the held-out starts.
  double holdout_margin = 0.0;
};

/// Smallest alpha on the grid {step, 2 step, ...} up to `budget` with a(., alpha) > 0
/// on every orbit and every even-indexed start; odd-indexed starts are held out.
AlphaChoice choose_alpha(const std::vector<const ShadowTrack*>& ensemble, double step = 0.25,
                         double budget = 64.0);

struct MonotonicityReport {
  /// min over beta and start times of sigma_bar(t + beta) - sigma_bar(t).
  double min_increment = 0.0;
  /// The same for the raw s.
  double raw_min_increment = 0.0;
};

/// Starts run over the native samples (every `stride`-th) with t + beta + alpha
/// inside the horizon.
MonotonicityReport monotonicity_check(const ShadowTrack& track, double alpha, const std::vector<double>& beta_grid,
                                      std::size_t stride = 1);

/// D(t0, t) = dist(orbit(t0 + t), orbit(t0)).
double displacement_cocycle(const OrbitRecord& orbit, double t0, double t);

/// max over sampled (t0, t, s) of D(t0, t + s) - D(t0, t) - D(t0 + t, s), floored at 0.
double subadditivity_residual(const OrbitRecord& orbit, std::size_t samples, std::uint64_t seed);

struct DStarEstimate {
  double estimate = 0.0;
  /// Spread of D(t0, T) / T over T in [T_max / 2, T_max].
  double halfwidth = 0.0;
  double T_max = 0.0;
  /// halfwidth above the requested tolerance.
  bool horizon_too_short = false;
};

/// D(t0, T_max) / T_max from t0 to the end of the orbit.
DStarEstimate cesaro_Dstar(const OrbitRecord& orbit, double t0 = 0.0, double tolerance = 1e-2);

/// Q_K membership at tolerance level for the sampled orbit.
QKFlags qk_flags(const MechanicalLagrangian& L, const OrbitRecord& orbit, const PropConstants& constants,
                 std::size_t subsegment_samples = 8, std::uint64_t seed = 0);

}  // namespace hypervar
