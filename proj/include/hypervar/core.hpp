// Poincare-disk geometry: points, tangent vectors, isometries, geodesics and
// sampled curves. All formulas use the conformal factor 2 / (1 - |z|^2), so the
// metric has constant curvature -1.
#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hypervar {

using Complex = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Points closer than this to the unit circle are rejected.
inline constexpr double kBoundaryMargin = 1e-12;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A computation left the numerically safe part of the disk.
class BoundaryOverflow : public Error {
 public:
  using Error::Error;
};

/// An iterative method ran out of budget.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class DiskPoint {
 public:
  DiskPoint() = default;
  explicit DiskPoint(Complex z);
  DiskPoint(double x, double y) : DiskPoint(Complex{x, y}) {}

  static DiskPoint origin() { return DiskPoint{}; }

  const Complex& z() const { return z_; }
  double x() const { return z_.real(); }
  double y() const { return z_.imag(); }
  /// 1 - |z|^2, strictly positive.
  double one_minus_norm2() const { return 1.0 - std::norm(z_); }
  /// lambda(z) = 2 / (1 - |z|^2).
  double conformal_factor() const { return 2.0 / one_minus_norm2(); }

  friend bool operator==(const DiskPoint& a, const DiskPoint& b) { return a.z_ == b.z_; }

 private:
  Complex z_{0.0, 0.0};
};

/// A point e^{i theta} of the circle at infinity.
class BoundaryPoint {
 public:
  BoundaryPoint() = default;
  explicit BoundaryPoint(double theta);
  static BoundaryPoint from_complex(Complex w) { return BoundaryPoint(std::arg(w)); }

  double theta() const { return theta_; }
  Complex point() const { return std::polar(1.0, theta_); }

 private:
  double theta_ = 0.0;
};

/// Smallest absolute angular separation of two boundary points, in [0, pi].
double angular_distance(const BoundaryPoint& a, const BoundaryPoint& b);

/// Tangent vector stored by its Euclidean components at `base`.
struct TangentVec {
  DiskPoint base;
  Complex v{0.0, 0.0};

  TangentVec() = default;
  TangentVec(const DiskPoint& p, Complex comps) : base(p), v(comps) {}

  static TangentVec zero(const DiskPoint& p) { return {p, Complex{}}; }

  /// Hyperbolic norm 2|v| / (1 - |base|^2).
  double norm() const { return base.conformal_factor() * std::abs(v); }
  bool is_zero() const { return v == Complex{}; }

  TangentVec operator*(double s) const { return {base, v * s}; }
  TangentVec operator-() const { return {base, -v}; }
};

/// Hyperbolic inner product; both vectors must share a base point.
double inner(const TangentVec& a, const TangentVec& b);

/// Orthonormal-frame coordinates lambda * v of a tangent vector.
inline Complex to_orthonormal(const TangentVec& w) { return w.v * w.base.conformal_factor(); }
inline TangentVec from_orthonormal(const DiskPoint& p, Complex u) {
  return {p, u / p.conformal_factor()};
}

double dist(const DiskPoint& p, const DiskPoint& q);

/// Point reached at time s along the geodesic with initial velocity w.
/// A zero vector returns the base point for every s.
DiskPoint exp_map(const TangentVec& w, double s = 1.0);

/// Initial velocity of the unit-time geodesic from p to q; zero when p == q.
TangentVec log_map(const DiskPoint& p, const DiskPoint& q);

/// Orientation-preserving isometry z -> (a z + b) / (conj(b) z + conj(a))
/// normalized so that |a|^2 - |b|^2 = 1.
class Isometry {
 public:
  Isometry() = default;
  /// Throws when |a|^2 - |b|^2 is not within 1e-6 of a positive multiple of 1
  /// (i.e. the matrix is singular or orientation reversing).
  Isometry(Complex a, Complex b);

  static Isometry identity() { return {}; }
  static Isometry rotation(double angle);
  /// The transvection along the diameter through 0 and w taking 0 to w.
  static Isometry translation_to(const DiskPoint& w);
  /// Translation by hyperbolic `length` along the diameter in direction `angle`.
  static Isometry axial_translation(double angle, double length);

  const Complex& a() const { return a_; }
  const Complex& b() const { return b_; }

  DiskPoint apply(const DiskPoint& p) const;
  Complex apply_raw(Complex z) const;
  BoundaryPoint apply(const BoundaryPoint& xi) const;
  /// Pushes a tangent vector forward; the result is based at apply(w.base).
  TangentVec differential(const TangentVec& w) const;
  /// Complex derivative of the Mobius map at z.
  Complex derivative(Complex z) const;

  Isometry inverse() const;
  /// (f * g)(z) = f(g(z)).
  friend Isometry operator*(const Isometry& f, const Isometry& g);

  double trace() const { return 2.0 * a_.real(); }
  bool is_hyperbolic() const { return std::abs(trace()) > 2.0; }
  /// |a|^2 - |b|^2 - 1, meaningful while the entries are moderate.
  double determinant_defect() const;
  /// Distance of the matrix to +-Id in the max-entry norm.
  double distance_to_identity() const;

 private:
  Complex a_{1.0, 0.0};
  Complex b_{0.0, 0.0};
};

/// Oriented, arclength-parameterized geodesic. The parameter equals
/// origin_param at the point of the geodesic closest to the disk center.
class Geodesic {
 public:
  Geodesic(const BoundaryPoint& xi_minus, const BoundaryPoint& xi_plus, double origin_param = 0.0);

  const BoundaryPoint& xi_minus() const { return xi_minus_; }
  const BoundaryPoint& xi_plus() const { return xi_plus_; }
  double origin_param() const { return origin_param_; }
  /// Isometry carrying the real diameter (parameterized by 2 artanh x) onto
  /// this geodesic with the parameter shifted by origin_param.
  const Isometry& frame() const { return frame_; }

  DiskPoint point_at(double s) const;
  TangentVec unit_tangent_at(double s) const;
  /// Arclength parameter of the orthogonal projection of p.
  double foot_parameter(const DiskPoint& p) const;
  /// Point at signed normal distance h from point_at(s); positive h lies to
  /// the left of the direction of travel.
  DiskPoint fermi_point(double s, double h) const;

  Geodesic transformed(const Isometry& g) const;
  Geodesic with_origin_param(double origin_param) const;

 private:
  BoundaryPoint xi_minus_;
  BoundaryPoint xi_plus_;
  double origin_param_ = 0.0;
  Isometry frame_;
};

/// Geodesic through p and q oriented from p toward q.
Geodesic geodesic_through(const DiskPoint& p, const DiskPoint& q);

struct Projection {
  DiskPoint foot;
  double s = 0.0;
};

Projection project_to_geodesic(const Geodesic& g, const DiskPoint& p);

/// Foot of the projection together with the unit tangent of g there.
TangentVec sigma_project(const Geodesic& g, const DiskPoint& p);

class SampledCurve {
 public:
  SampledCurve(std::vector<double> times, std::vector<DiskPoint> points,
               std::optional<std::vector<TangentVec>> velocities = std::nullopt);

  std::size_t size() const { return times_.size(); }
  const std::vector<double>& times() const { return times_; }
  const std::vector<DiskPoint>& points() const { return points_; }
  const std::optional<std::vector<TangentVec>>& velocities() const { return velocities_; }
  double t_begin() const { return times_.front(); }
  double t_end() const { return times_.back(); }

  /// Position at time t, geodesically interpolated between samples.
  DiskPoint at(double t) const;
  /// Index i with times[i] <= t < times[i+1] (clamped to the last segment).
  std::size_t segment_index(double t) const;

  SampledCurve restricted(std::size_t first, std::size_t last) const;

 private:
  std::vector<double> times_;
  std::vector<DiskPoint> points_;
  std::optional<std::vector<TangentVec>> velocities_;
};

/// Average displacement dist(c(a), c(b)) / (b - a).
double rho(const SampledCurve& c, double a, double b);

/// Polygonal length of c on [a, b] through the samples in between.
double curve_length(const SampledCurve& c, double a, double b);

/// Hausdorff distance between the sampled curve (as a geodesic polygon) and
/// the segment g([s_min, s_max]); the segment side uses `scan_points` samples.
double hausdorff_to_geodesic(const SampledCurve& c, const Geodesic& g, double s_min, double s_max,
                             std::size_t scan_points = 2048);

/// Distance from p to the geodesic segment [a, b].
double dist_to_segment(const DiskPoint& p, const DiskPoint& a, const DiskPoint& b);

}  // namespace hypervar
