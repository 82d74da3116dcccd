#include "doctest.h"

#include "hypervar/semiconjugacy.hpp"
#include "support.hpp"

using namespace hypervar;

namespace {

const Geodesic& chord() {
  static const Geodesic g(BoundaryPoint(2.6), BoundaryPoint(-0.4));
  return g;
}

/// s(t) = t + amp sin(2 pi t / period), h vanishing at integer times.
OrbitRecord wobble(double amp, double period, double T_max) {
  return synthetic_orbit(
      chord(), T_max, 1.0 / 32, [=](double t) { return t + amp * std::sin(2 * M_PI * t / period); },
      [](double t) { return 0.2 * std::sin(2 * M_PI * t); });
}

/// Smallest alpha on the 0.25 grid with min_t (s(t + alpha) - s(t)) > 0, scanned
/// densely from the closed form.
double alpha_oracle(double amp, double period) {
  for (int k = 1; k <= 256; ++k) {
    const double alpha = 0.25 * k;
    double lo = 1e300;
    for (int j = 0; j < 4096; ++j) {
      const double t = period * j / 4096.0;
      lo = std::min(lo, alpha + amp * (std::sin(2 * M_PI * (t + alpha) / period) - std::sin(2 * M_PI * t / period)));
    }
    if (lo > 0.0) return alpha;
  }
  return 0.0;
}

}  // namespace

TEST_CASE("geodesic orbit") {
  const OrbitRecord o = geodesic_orbit(chord(), 1.0, 10.0, 1.0 / 32);
  const ShadowTrack track(o);
  CHECK(track.asymptote().estimator_delta < 1e-9);
  CHECK(angular_distance(track.gamma().xi_minus(), chord().xi_minus()) < 1e-9);
  CHECK(angular_distance(track.gamma().xi_plus(), chord().xi_plus()) < 1e-9);

  const double s0 = track.s(0.0);
  for (double t : {-9.5, -3.0, 0.25, 4.0, 9.75}) {
    CHECK(track.s(t) - s0 == doctest::Approx(t).epsilon(1e-9));
    CHECK(cocycle_a(track, t - 0.5, 0.5) == doctest::Approx(0.5).epsilon(1e-9));
    // trapezoid is exact on linear s
    CHECK(fuller_average(track, 0.25, t - 0.25) == doctest::Approx(track.s(t - 0.25) + 0.125).epsilon(1e-9));
    CHECK(telescoping_residual(track, 0.25, std::max(t - 2.0, -9.0), 1.0) < 1e-9);
  }
  const SigmaValue sv = sigma_of(track, 1.0);
  CHECK(std::abs(to_orthonormal(sv.tangent) - to_orthonormal(chord().unit_tangent_at(chord().foot_parameter(
                                                   o.trajectory.at(1.0))))) < 1e-9);

  const ShadowTrack* ens[] = {&track};
  const AlphaChoice ac = choose_alpha({ens[0]});
  CHECK(ac.alpha == 0.25);
  CHECK(ac.margin == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(ac.holdout_margin == doctest::Approx(0.25).epsilon(1e-9));

  const MonotonicityReport m = monotonicity_check(track, 0.25, {0.25, 0.5, 1.0, 2.0});
  CHECK(m.min_increment == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(m.raw_min_increment == doctest::Approx(0.25).epsilon(1e-9));

  CHECK(additivity_residual(track, 1000, 3) < 1e-9);
  CHECK(displacement_cocycle(o, -2.0, 5.0) == doctest::Approx(5.0).epsilon(1e-9));
  CHECK(subadditivity_residual(o, 1000, 5) < 1e-9);
}

TEST_CASE("wobbling orbit") {
  const OrbitRecord o = wobble(0.3, 1.0, 10.0);
  const ShadowTrack track(o);
  CHECK(track.asymptote().estimator_delta < 1e-9);
  const double s0 = track.s(0.0);
  for (double t : {-7.25, -0.375, 2.5, 8.125}) {  // sample times
    CHECK(track.s(t) - s0 == doctest::Approx(t + 0.3 * std::sin(2 * M_PI * t)).epsilon(1e-6));
  }

  const ShadowTrack* ens[] = {&track};
  const AlphaChoice ac = choose_alpha({ens[0]});
  CHECK(ac.alpha == alpha_oracle(0.3, 1.0));
  CHECK(ac.alpha == 0.75);
  CHECK(monotonicity_check(track, ac.alpha, {0.25, 0.5, 1.0, 2.0}).min_increment > 0.0);

  const MonotonicityReport m = monotonicity_check(track, 1.0, {0.25, 0.5, 1.0, 2.0});
  CHECK(m.raw_min_increment < 0.0);
  // over a full period the wobble averages out, so the increments are exactly beta
  CHECK(m.min_increment == doctest::Approx(0.25).epsilon(1e-9));
  for (double t : {-6.0, 0.5, 3.0}) CHECK(telescoping_residual(track, 1.0, t, 2.0) < 1e-9);

  CHECK(additivity_residual(track, 1000, 7) < 1e-9);
  CHECK(subadditivity_residual(o, 1000, 9) == 0.0);
}

TEST_CASE("backtracking orbit") {
  const OrbitRecord o = wobble(1.5, 2.0, 12.0);
  const ShadowTrack track(o);
  const ShadowTrack* ens[] = {&track};
  const AlphaChoice ac = choose_alpha({ens[0]});
  CHECK(ac.alpha > 1.0);
  CHECK(ac.alpha == alpha_oracle(1.5, 2.0));
  CHECK(ac.margin > 0.0);
  CHECK(monotonicity_check(track, ac.alpha, {0.25, 1.0}).min_increment > 0.0);
  CHECK(monotonicity_check(track, 0.25, {0.25}).min_increment < 0.0);

  CHECK_THROWS_AS(choose_alpha({ens[0]}, 0.25, 1.0), Error);
}

TEST_CASE("asymptotic geodesic needs reach") {
  const OrbitRecord o = geodesic_orbit(chord(), 0.2, 10.0, 0.125);
  CHECK_THROWS_WITH_AS(ShadowTrack{o}, "no asymptotic direction at horizon", Error);
}

TEST_CASE("Cesaro limit of the displacement") {
  for (double speed : {1.0, 0.4}) {
    const double T = 25.0;
    const OrbitRecord o = geodesic_orbit(chord(), speed, speed == 1.0 ? T : T / speed / 2, 1.0 / 16);
    const DStarEstimate est = cesaro_Dstar(o, o.trajectory.t_begin());
    CHECK(est.estimate == doctest::Approx(speed).epsilon(1e-3));
    CHECK(est.halfwidth < 1e-6);
    CHECK_FALSE(est.horizon_too_short);
  }
  const OrbitRecord w = wobble(0.3, 1.0, 10.0);
  const DStarEstimate est = cesaro_Dstar(w, -10.0, 1e-6);
  CHECK(est.T_max == 20.0);
  CHECK(est.horizon_too_short);
  CHECK_THROWS_AS(cesaro_Dstar(w, 10.0), Error);
}

TEST_CASE("Euler-Lagrange orbit flags") {
  const MechanicalLagrangian L(hvtest::bump_potential(0.05));
  const DiskPoint x(-0.1, 0.05);
  const OrbitRecord o = el_orbit(L, {x, from_orthonormal(x, {1.0, 0.2}), 0.0}, 8.0, 1.0 / 16);
  CHECK(o.trajectory.t_begin() == -8.0);
  CHECK(o.trajectory.t_end() == 8.0);
  CHECK(o.trajectory.size() == 257);

  PropConstants pc;
  pc.K_dprime = 2.0;
  pc.N0 = 4;
  pc.k_dprime = 0.5;
  pc.lambda = 2.0;
  pc.epsilon = 1.0;
  const QKFlags f = qk_flags(L, o, pc);
  CHECK(f.minimizer);
  CHECK(f.window_speed);
  CHECK(f.speed_bound);
  CHECK(f.all());

  pc.K_dprime = 0.5;
  CHECK_FALSE(qk_flags(L, o, pc).speed_bound);
  pc.k_dprime = 1.5;
  CHECK_FALSE(qk_flags(L, o, pc).window_speed);

  const ShadowTrack track(o);
  CHECK(track.asymptote().estimator_delta < 0.05);
  CHECK(additivity_residual(track, 500, 11) < 1e-9);
  const AlphaChoice ac = choose_alpha({&track});
  CHECK(ac.alpha == 0.25);
  CHECK(monotonicity_check(track, ac.alpha, {0.25, 0.5, 1.0, 2.0}).min_increment > 0.0);
  CHECK(subadditivity_residual(o, 1000, 13) < 1e-9);
}
