#include "hypervar/semiconjugacy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace hypervar {

OrbitRecord el_orbit(const MechanicalLagrangian& L, const ELState& start, double T_max, double sample_dt) {
  if (!(T_max > 0.0) || !(sample_dt > 0.0)) throw Error("el_orbit needs T_max > 0 and sample_dt > 0");
  StepControl control;
  control.sample_dt = sample_dt;
  const ELTrajectory back = integrate_el(L, start, -T_max, control);
  const ELTrajectory fwd = integrate_el(L, start, T_max, control);
  std::vector<double> times(back.curve.times().begin(), back.curve.times().end() - 1);
  std::vector<DiskPoint> points(back.curve.points().begin(), back.curve.points().end() - 1);
  std::vector<TangentVec> vels(back.curve.velocities()->begin(), back.curve.velocities()->end() - 1);
  times.insert(times.end(), fwd.curve.times().begin(), fwd.curve.times().end());
  points.insert(points.end(), fwd.curve.points().begin(), fwd.curve.points().end());
  vels.insert(vels.end(), fwd.curve.velocities()->begin(), fwd.curve.velocities()->end());
  return {SampledCurve(std::move(times), std::move(points), std::move(vels)), std::nullopt};
}

OrbitRecord geodesic_orbit(const Geodesic& g, double speed, double T_max, double dt) {
  return synthetic_orbit(
      g, T_max, dt, [speed](double t) { return speed * t; }, [](double) { return 0.0; });
}

namespace {

struct EndpointEstimate {
  BoundaryPoint minus;
  BoundaryPoint plus;
  double reach = 0.0;
};

EndpointEstimate estimate_endpoints(const SampledCurve& c, double t_lo, double t_hi) {
  const double mid = 0.5 * (t_lo + t_hi);
  const DiskPoint pm = c.at(mid);
  const Isometry frame = Isometry::translation_to(pm);
  const Isometry back = frame.inverse();
  const DiskPoint lo = c.at(t_lo);
  const DiskPoint hi = c.at(t_hi);
  const Complex w_lo = back.apply(lo).z();
  const Complex w_hi = back.apply(hi).z();
  if (w_lo == Complex{} || w_hi == Complex{}) throw Error("no asymptotic direction at horizon");
  return {frame.apply(BoundaryPoint(std::arg(w_lo))), frame.apply(BoundaryPoint(std::arg(w_hi))),
          std::min(dist(pm, lo), dist(pm, hi))};
}

}  // namespace

AsymptoticGeodesic asymptotic_geodesic(const OrbitRecord& orbit) {
  const SampledCurve& c = orbit.trajectory;
  const EndpointEstimate full = estimate_endpoints(c, c.t_begin(), c.t_end());
  if (!(full.reach > 5.0)) throw Error("no asymptotic direction at horizon");
  const double mid = 0.5 * (c.t_begin() + c.t_end());
  const double quarter = 0.25 * (c.t_end() - c.t_begin());
  const EndpointEstimate half = estimate_endpoints(c, mid - quarter, mid + quarter);
  const double delta =
      std::max(angular_distance(full.minus, half.minus), angular_distance(full.plus, half.plus));
  return {Geodesic(full.minus, full.plus), delta};
}

// ---------------------------------------------------------------------------

ShadowTrack::ShadowTrack(const OrbitRecord& orbit) : ShadowTrack(orbit, asymptotic_geodesic(orbit)) {}

ShadowTrack::ShadowTrack(const OrbitRecord& orbit, AsymptoticGeodesic gamma)
    : trajectory_(orbit.trajectory), asymptote_(std::move(gamma)) {
  s_.reserve(trajectory_.size());
  for (const DiskPoint& p : trajectory_.points()) s_.push_back(asymptote_.gamma.foot_parameter(p));
}

double ShadowTrack::s(double t) const {
  const auto& times = trajectory_.times();
  const std::size_t i = trajectory_.segment_index(t);
  const double snap = 1e-12 * (1.0 + std::fabs(t));
  if (std::fabs(t - times[i]) <= snap) return s_[i];
  if (i + 1 < times.size() && std::fabs(t - times[i + 1]) <= snap) return s_[i + 1];
  return asymptote_.gamma.foot_parameter(trajectory_.at(t));
}

SigmaValue sigma_of(const ShadowTrack& track, double t) {
  const double s = track.s(t);
  return {track.gamma().unit_tangent_at(s), s};
}

double cocycle_a(const ShadowTrack& track, double t0, double t) { return track.s(t0 + t) - track.s(t0); }

double additivity_residual(const ShadowTrack& track, std::size_t samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double span = track.t_end() - track.t_begin();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  for (std::size_t k = 0; k < samples; ++k) {
    const double t0 = track.t_begin() + span * unit(rng);
    const double room = track.t_end() - t0;
    const double t1 = room * unit(rng);
    const double t2 = (room - t1) * unit(rng);
    const double r = cocycle_a(track, t0, t1 + t2) - cocycle_a(track, t0, t1) - cocycle_a(track, t0 + t1, t2);
    worst = std::max(worst, std::fabs(r));
  }
  return worst;
}

namespace {

/// Composite trapezoid of f over [lo, hi] on the native samples plus both ends.
template <class F>
double trapezoid(const SampledCurve& c, double lo, double hi, F f) {
  const auto& t = c.times();
  const double snap = 1e-12 * (1.0 + std::fabs(hi));
  double prev_t = lo;
  double prev_f = f(lo);
  double sum = 0.0;
  auto it = std::upper_bound(t.begin(), t.end(), lo + snap);
  for (; it != t.end() && *it < hi - snap; ++it) {
    const double fv = f(*it);
    sum += 0.5 * (*it - prev_t) * (prev_f + fv);
    prev_t = *it;
    prev_f = fv;
  }
  sum += 0.5 * (hi - prev_t) * (prev_f + f(hi));
  return sum;
}

void require_window(const ShadowTrack& track, double lo, double hi) {
  const double snap = 1e-9;
  if (lo < track.t_begin() - snap || hi > track.t_end() + snap) throw Error("window exceeds orbit horizon");
}

}  // namespace

double fuller_average(const ShadowTrack& track, double alpha, double t) {
  if (!(alpha > 0.0)) throw Error("fuller_average needs alpha > 0");
  require_window(track, t, t + alpha);
  return trapezoid(track.trajectory(), t, t + alpha, [&](double u) { return track.s(u); }) / alpha;
}

double telescoping_residual(const ShadowTrack& track, double alpha, double t, double beta) {
  require_window(track, t, t + beta + alpha);
  const double lhs = fuller_average(track, alpha, t + beta) - fuller_average(track, alpha, t);
  const double rhs =
      trapezoid(track.trajectory(), t, t + beta, [&](double u) { return cocycle_a(track, u, alpha); }) / alpha;
  return std::fabs(lhs - rhs);
}

AlphaChoice choose_alpha(const std::vector<const ShadowTrack*>& ensemble, double step, double budget) {
  if (ensemble.empty()) throw Error("choose_alpha needs a nonempty ensemble");
  if (!(step > 0.0)) throw Error("choose_alpha needs a positive grid step");
  for (int k = 1; step * k <= budget + 1e-12; ++k) {
    const double alpha = step * k;
    double fit = std::numeric_limits<double>::infinity();
    double held = std::numeric_limits<double>::infinity();
    bool any = false;
    for (const ShadowTrack* tr : ensemble) {
      const auto& t = tr->trajectory().times();
      for (std::size_t i = 0; i < t.size() && t[i] + alpha <= tr->t_end() + 1e-9; ++i) {
        const double a = tr->s(t[i] + alpha) - tr->s_samples()[i];
        double& slot = i % 2 == 0 ? fit : held;
        slot = std::min(slot, a);
        any = true;
      }
    }
    if (!any) break;
    if (fit > 0.0) return {alpha, fit, held};
  }
  throw Error("no uniform alpha at this horizon");
}

MonotonicityReport monotonicity_check(const ShadowTrack& track, double alpha, const std::vector<double>& beta_grid,
                                      std::size_t stride) {
  if (stride == 0) stride = 1;
  MonotonicityReport rep;
  rep.min_increment = std::numeric_limits<double>::infinity();
  rep.raw_min_increment = std::numeric_limits<double>::infinity();
  const auto& t = track.trajectory().times();
  for (double beta : beta_grid) {
    for (std::size_t i = 0; i < t.size() && t[i] + beta + alpha <= track.t_end() + 1e-9; i += stride) {
      const double inc = fuller_average(track, alpha, t[i] + beta) - fuller_average(track, alpha, t[i]);
      rep.min_increment = std::min(rep.min_increment, inc);
      rep.raw_min_increment = std::min(rep.raw_min_increment, track.s(t[i] + beta) - track.s_samples()[i]);
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------

double displacement_cocycle(const OrbitRecord& orbit, double t0, double t) {
  return dist(orbit.trajectory.at(t0 + t), orbit.trajectory.at(t0));
}

double subadditivity_residual(const OrbitRecord& orbit, std::size_t samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const SampledCurve& c = orbit.trajectory;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  for (std::size_t k = 0; k < samples; ++k) {
    const double t0 = c.t_begin() + (c.t_end() - c.t_begin()) * unit(rng);
    const double room = c.t_end() - t0;
    const double t = room * unit(rng);
    const double s = (room - t) * unit(rng);
    const double excess = displacement_cocycle(orbit, t0, t + s) - displacement_cocycle(orbit, t0, t) -
                          displacement_cocycle(orbit, t0 + t, s);
    worst = std::max(worst, excess);
  }
  return worst;
}

DStarEstimate cesaro_Dstar(const OrbitRecord& orbit, double t0, double tolerance) {
  const SampledCurve& c = orbit.trajectory;
  if (t0 < c.t_begin() || t0 >= c.t_end()) throw Error("cesaro_Dstar: t0 outside the orbit");
  DStarEstimate est;
  est.T_max = c.t_end() - t0;
  est.estimate = displacement_cocycle(orbit, t0, est.T_max) / est.T_max;
  double lo = est.estimate, hi = est.estimate;
  for (double t : c.times()) {
    const double T = t - t0;
    if (T < 0.5 * est.T_max) continue;
    const double r = displacement_cocycle(orbit, t0, T) / T;
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  est.halfwidth = 0.5 * (hi - lo);
  est.horizon_too_short = est.halfwidth > tolerance;
  return est;
}

QKFlags qk_flags(const MechanicalLagrangian& L, const OrbitRecord& orbit, const PropConstants& constants,
                 std::size_t subsegment_samples, std::uint64_t seed) {
  const SampledCurve& c = orbit.trajectory;
  QKFlags f;
  const std::size_t stride = std::max<std::size_t>(1, (c.size() + 999) / 1000);
  f.minimizer = verify_subsegment_minimality(L, c, subsegment_samples, seed).certified &&
                qg_check(c, constants.lambda, constants.epsilon, stride).ok;

  const auto& t = c.times();
  const auto& p = c.points();
  f.window_speed = true;
  for (std::size_t i = 0; i < c.size() && f.window_speed; ++i) {
    for (std::size_t j = i + 1; j < c.size(); ++j) {
      const double dt = t[j] - t[i];
      if (dt >= constants.N0 && dist(p[i], p[j]) / dt < constants.k_dprime) {
        f.window_speed = false;
        break;
      }
    }
  }

  double top = 0.0;
  if (c.velocities()) {
    for (const TangentVec& v : *c.velocities()) top = std::max(top, v.norm());
  } else {
    for (std::size_t k = 0; k + 1 < c.size(); ++k) top = std::max(top, dist(p[k], p[k + 1]) / (t[k + 1] - t[k]));
  }
  f.speed_bound = top <= constants.K_dprime;
  return f;
}

}  // namespace hypervar
