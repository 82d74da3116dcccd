// Fixtures and independent oracles shared by the unit and acceptance tests.
#pragma once

#include <cmath>
#include <complex>
#include <memory>
#include <random>
#include <vector>

#include "hypervar/core.hpp"
#include "hypervar/fuchsian.hpp"
#include "hypervar/lagrangian.hpp"

namespace hvtest {

using hypervar::Complex;
using hypervar::DiskPoint;
using hypervar::TangentVec;

inline std::shared_ptr<const hypervar::Surface> octagon() {
  static const auto s = std::make_shared<const hypervar::Surface>(hypervar::build_octagon_group());
  return s;
}

inline std::shared_ptr<const hypervar::EquivariantPotential> zero_potential() {
  return std::make_shared<const hypervar::EquivariantPotential>(hypervar::EquivariantPotential::zero(octagon()));
}

/// One bump per domain at `center`, orbit cutoff set to the exact value.
inline std::shared_ptr<const hypervar::EquivariantPotential> bump_potential(double depth, DiskPoint center = {0.1, 0.05},
                                                                           double radius = 0.8,
                                                                           double amplitude = 0.2) {
  hypervar::PotentialSpec spec;
  spec.centers = {center};
  spec.depth = depth;
  spec.bump_radius = radius;
  spec.time_amplitude = amplitude;
  spec.orbit_cutoff = hypervar::required_orbit_cutoff(*octagon(), spec);
  return std::make_shared<const hypervar::EquivariantPotential>(octagon(), spec);
}

inline hypervar::MechanicalLagrangian lagrangian(std::shared_ptr<const hypervar::EquivariantPotential> V) {
  return hypervar::MechanicalLagrangian(std::move(V));
}

/// Uniform in hyperbolic radius up to r_max, uniform angle.
inline DiskPoint random_point(std::mt19937_64& rng, double r_max = 4.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = r_max * u(rng);
  return DiskPoint(std::polar(std::tanh(0.5 * r), 2.0 * M_PI * u(rng)));
}

inline Complex random_complex(std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  return {n(rng), n(rng)};
}

inline TangentVec random_vector(std::mt19937_64& rng, const DiskPoint& base, double norm_scale = 1.0) {
  return hypervar::from_orthonormal(base, random_complex(rng, norm_scale));
}

inline hypervar::Isometry random_isometry(std::mt19937_64& rng, double r_max = 3.0) {
  std::uniform_real_distribution<double> u(0.0, 2.0 * M_PI);
  return hypervar::Isometry::translation_to(random_point(rng, r_max)) * hypervar::Isometry::rotation(u(rng));
}

/// Geodesic ODE z'' = -2 conj(z) z'^2 / (1 - |z|^2) of the metric
/// 4 |dz|^2 / (1 - |z|^2)^2, integrated by fixed-step RK4.
inline DiskPoint geodesic_ode(const TangentVec& w, double s, int steps = 4000) {
  Complex z = w.base.z(), v = w.v * s;
  auto acc = [](Complex z0, Complex v0) { return -2.0 * std::conj(z0) * v0 * v0 / (1.0 - std::norm(z0)); };
  const double h = 1.0 / steps;
  for (int k = 0; k < steps; ++k) {
    const Complex k1z = v, k1v = acc(z, v);
    const Complex k2z = v + 0.5 * h * k1v, k2v = acc(z + 0.5 * h * k1z, v + 0.5 * h * k1v);
    const Complex k3z = v + 0.5 * h * k2v, k3v = acc(z + 0.5 * h * k2z, v + 0.5 * h * k2v);
    const Complex k4z = v + h * k3v, k4v = acc(z + h * k3z, v + h * k3v);
    z += h / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z);
    v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
  }
  return DiskPoint(z);
}

/// Metric gradient of f at x by central differences in disk coordinates:
/// grad = (df/dx + i df/dy) / lambda^2, returned in orthonormal coordinates.
template <class F>
Complex fd_gradient(F f, const DiskPoint& x, double h = 1e-6) {
  const double dx = (f(DiskPoint(x.z() + Complex{h, 0.0})) - f(DiskPoint(x.z() - Complex{h, 0.0}))) / (2.0 * h);
  const double dy = (f(DiskPoint(x.z() + Complex{0.0, h})) - f(DiskPoint(x.z() - Complex{0.0, h}))) / (2.0 * h);
  return Complex{dx, dy} / x.conformal_factor();
}

inline double rel_err(Complex a, Complex b) { return std::abs(a - b) / std::max(std::abs(b), 1e-8); }

/// Samples of the geodesic through base with unit initial direction `dir`,
/// at speed `speed`, over [t0, t1] with `n` segments.
inline hypervar::SampledCurve geodesic_curve(const hypervar::Geodesic& g, double speed, double t0, double t1, int n) {
  std::vector<double> t;
  std::vector<DiskPoint> p;
  for (int k = 0; k <= n; ++k) {
    const double tk = t0 + (t1 - t0) * k / n;
    t.push_back(tk);
    p.push_back(g.point_at(speed * tk));
  }
  return {std::move(t), std::move(p)};
}

}  // namespace hvtest
