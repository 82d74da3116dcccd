#include "hypervar/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hypervar {

namespace {

double reduce_angle(double theta) {
  double r = std::fmod(theta, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;
  return r;
}

}  // namespace

DiskPoint::DiskPoint(Complex z) : z_(z) {
  if (!std::isfinite(z.real()) || !std::isfinite(z.imag()) || std::abs(z) >= 1.0 - kBoundaryMargin) {
    throw BoundaryOverflow("boundary overflow: |z| = " + std::to_string(std::abs(z)));
  }
}

BoundaryPoint::BoundaryPoint(double theta) : theta_(reduce_angle(theta)) {}

double angular_distance(const BoundaryPoint& a, const BoundaryPoint& b) {
  const double d = std::fabs(a.theta() - b.theta());
  return std::min(d, kTwoPi - d);
}

double inner(const TangentVec& a, const TangentVec& b) {
  const double lam = a.base.conformal_factor();
  return lam * lam * (a.v.real() * b.v.real() + a.v.imag() * b.v.imag());
}

double dist(const DiskPoint& p, const DiskPoint& q) {
  // sinh(d/2) = |p - q| / sqrt((1-|p|^2)(1-|q|^2)); accurate for small and large d.
  const double num = std::abs(p.z() - q.z());
  if (num == 0.0) return 0.0;
  return 2.0 * std::asinh(num / std::sqrt(p.one_minus_norm2() * q.one_minus_norm2()));
}

DiskPoint exp_map(const TangentVec& w, double s) {
  const double speed = w.norm();
  if (speed == 0.0 || s == 0.0) return w.base;
  const Isometry to_base = Isometry::translation_to(w.base);
  const Complex dir = w.v / std::abs(w.v);
  const double r = s * speed;
  return to_base.apply(DiskPoint(std::tanh(0.5 * r) * dir));
}

TangentVec log_map(const DiskPoint& p, const DiskPoint& q) {
  const Complex q0 = (q.z() - p.z()) / (1.0 - std::conj(p.z()) * q.z());
  const double m = std::abs(q0);
  if (m == 0.0) return TangentVec::zero(p);
  const double r = dist(p, q);
  // Velocity r/2 * q0/|q0| at the origin, pushed forward by d(translation) = 1 - |p|^2.
  return {p, (0.5 * r / m) * q0 * p.one_minus_norm2()};
}

// ---------------------------------------------------------------------------
// Isometry

Isometry::Isometry(Complex a, Complex b) {
  const double det = std::norm(a) - std::norm(b);
  if (!(det > 1e-6) || !std::isfinite(det)) {
    throw Error("non-invertible isometry matrix: |a|^2 - |b|^2 = " + std::to_string(det));
  }
  const double s = std::sqrt(det);
  a_ = a / s;
  b_ = b / s;
}

Isometry Isometry::rotation(double angle) { return {std::polar(1.0, 0.5 * angle), Complex{}}; }

Isometry Isometry::translation_to(const DiskPoint& w) {
  const double s = std::sqrt(w.one_minus_norm2());
  Isometry g;
  g.a_ = Complex{1.0 / s, 0.0};
  g.b_ = w.z() / s;
  return g;
}

Isometry Isometry::axial_translation(double angle, double length) {
  const double c = std::cosh(0.5 * length);
  const double sh = std::sinh(0.5 * length);
  Isometry g;
  g.a_ = Complex{c, 0.0};
  g.b_ = sh * std::polar(1.0, angle);
  return g;
}

Complex Isometry::apply_raw(Complex z) const {
  return (a_ * z + b_) / (std::conj(b_) * z + std::conj(a_));
}

DiskPoint Isometry::apply(const DiskPoint& p) const { return DiskPoint(apply_raw(p.z())); }

BoundaryPoint Isometry::apply(const BoundaryPoint& xi) const {
  return BoundaryPoint::from_complex(apply_raw(xi.point()));
}

Complex Isometry::derivative(Complex z) const {
  const Complex den = std::conj(b_) * z + std::conj(a_);
  return (std::norm(a_) - std::norm(b_)) / (den * den);
}

TangentVec Isometry::differential(const TangentVec& w) const {
  return {apply(w.base), derivative(w.base.z()) * w.v};
}

Isometry Isometry::inverse() const {
  Isometry g;
  g.a_ = std::conj(a_);
  g.b_ = -b_;
  return g;
}

Isometry operator*(const Isometry& f, const Isometry& g) {
  Isometry h;
  h.a_ = f.a_ * g.a_ + f.b_ * std::conj(g.b_);
  h.b_ = f.a_ * g.b_ + f.b_ * std::conj(g.a_);
  // The determinant can only be recomputed reliably while the entries are
  // moderate; beyond that the product of unimodular factors is kept as is.
  const double n2 = std::norm(h.a_);
  if (n2 < 1e6) {
    const double det = n2 - std::norm(h.b_);
    const double s = std::sqrt(det);
    h.a_ /= s;
    h.b_ /= s;
  }
  return h;
}

double Isometry::determinant_defect() const { return std::norm(a_) - std::norm(b_) - 1.0; }

double Isometry::distance_to_identity() const {
  const double plus = std::max(std::abs(a_ - 1.0), std::abs(b_));
  const double minus = std::max(std::abs(a_ + 1.0), std::abs(b_));
  return std::min(plus, minus);
}

// ---------------------------------------------------------------------------
// Geodesic

Geodesic::Geodesic(const BoundaryPoint& xi_minus, const BoundaryPoint& xi_plus, double origin_param)
    : xi_minus_(xi_minus), xi_plus_(xi_plus), origin_param_(origin_param) {
  double span = reduce_angle(xi_plus.theta() - xi_minus.theta());
  if (span < 1e-15 || kTwoPi - span < 1e-15) {
    throw Error("geodesic endpoints coincide");
  }
  // Rot(m) o T(t) o Rot(pi/2) sends -1, 1 to e^{i(m -+ psi)} and 0 to the
  // point of the geodesic nearest the origin.
  const double psi = 0.5 * span;
  const double m = xi_minus.theta() + psi;
  const double t = std::tan(0.25 * kPi - 0.5 * psi);
  const double s = std::sqrt(1.0 - t * t);
  Isometry shift(Complex{1.0 / s, 0.0}, Complex{t / s, 0.0});
  frame_ = Isometry::rotation(m) * shift * Isometry::rotation(0.5 * kPi);
}

DiskPoint Geodesic::point_at(double s) const {
  return frame_.apply(DiskPoint(std::tanh(0.5 * (s - origin_param_))));
}

TangentVec Geodesic::unit_tangent_at(double s) const {
  const double x = std::tanh(0.5 * (s - origin_param_));
  return frame_.differential(TangentVec(DiskPoint(x), Complex{0.5 * (1.0 - x * x), 0.0}));
}

double Geodesic::foot_parameter(const DiskPoint& p) const {
  // In the standard frame the geodesic is the real diameter; the Cayley map to
  // the upper half-plane sends it to the imaginary axis where the foot of w
  // sits at height |(1 + w) / (1 - w)|.
  const Complex w = frame_.inverse().apply_raw(p.z());
  return std::log(std::abs(1.0 + w)) - std::log(std::abs(1.0 - w)) + origin_param_;
}

DiskPoint Geodesic::fermi_point(double s, double h) const {
  const double t = std::tanh(0.5 * (s - origin_param_));
  const Complex w{0.0, std::tanh(0.5 * h)};
  const Complex moved = (w + t) / (t * w + 1.0);
  return frame_.apply(DiskPoint(moved));
}

Geodesic Geodesic::transformed(const Isometry& g) const {
  return Geodesic(g.apply(xi_minus_), g.apply(xi_plus_), origin_param_);
}

Geodesic Geodesic::with_origin_param(double origin_param) const {
  return Geodesic(xi_minus_, xi_plus_, origin_param);
}

Geodesic geodesic_through(const DiskPoint& p, const DiskPoint& q) {
  const Complex q0 = (q.z() - p.z()) / (1.0 - std::conj(p.z()) * q.z());
  if (std::abs(q0) < 1e-15) throw Error("degenerate chord");
  const Complex dir = q0 / std::abs(q0);
  const Isometry to_p = Isometry::translation_to(p);
  return Geodesic(BoundaryPoint::from_complex(to_p.apply_raw(-dir)),
                  BoundaryPoint::from_complex(to_p.apply_raw(dir)));
}

Projection project_to_geodesic(const Geodesic& g, const DiskPoint& p) {
  const double s = g.foot_parameter(p);
  return {g.point_at(s), s};
}

TangentVec sigma_project(const Geodesic& g, const DiskPoint& p) {
  return g.unit_tangent_at(g.foot_parameter(p));
}

// ---------------------------------------------------------------------------
// SampledCurve

SampledCurve::SampledCurve(std::vector<double> times, std::vector<DiskPoint> points,
                           std::optional<std::vector<TangentVec>> velocities)
    : times_(std::move(times)), points_(std::move(points)), velocities_(std::move(velocities)) {
  if (times_.size() < 2) throw Error("sampled curve needs at least 2 samples");
  if (times_.size() != points_.size()) throw Error("sampled curve: times and points differ in length");
  for (std::size_t i = 1; i < times_.size(); ++i) {
    if (!(times_[i] > times_[i - 1])) throw Error("sampled curve: times must be strictly increasing");
  }
  if (velocities_) {
    if (velocities_->size() != points_.size()) throw Error("sampled curve: velocity count mismatch");
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (!((*velocities_)[i].base == points_[i])) {
        throw Error("sampled curve: velocity not based at its sample point");
      }
    }
  }
}

std::size_t SampledCurve::segment_index(double t) const {
  auto it = std::upper_bound(times_.begin(), times_.end(), t);
  std::size_t i = it == times_.begin() ? 0 : static_cast<std::size_t>(it - times_.begin()) - 1;
  return std::min(i, times_.size() - 2);
}

DiskPoint SampledCurve::at(double t) const {
  if (t < times_.front() || t > times_.back()) {
    throw Error("time " + std::to_string(t) + " outside curve range");
  }
  const std::size_t i = segment_index(t);
  if (t == times_[i]) return points_[i];
  if (t == times_[i + 1]) return points_[i + 1];
  const double frac = (t - times_[i]) / (times_[i + 1] - times_[i]);
  return exp_map(log_map(points_[i], points_[i + 1]), frac);
}

SampledCurve SampledCurve::restricted(std::size_t first, std::size_t last) const {
  if (!(first < last) || last >= size()) throw Error("invalid curve restriction");
  std::vector<double> t(times_.begin() + first, times_.begin() + last + 1);
  std::vector<DiskPoint> p(points_.begin() + first, points_.begin() + last + 1);
  std::optional<std::vector<TangentVec>> v;
  if (velocities_) v.emplace(velocities_->begin() + first, velocities_->begin() + last + 1);
  return SampledCurve(std::move(t), std::move(p), std::move(v));
}

double rho(const SampledCurve& c, double a, double b) {
  if (!(a < b)) throw Error("rho: need a < b");
  return dist(c.at(a), c.at(b)) / (b - a);
}

double curve_length(const SampledCurve& c, double a, double b) {
  if (!(a < b)) throw Error("curve_length: need a < b");
  DiskPoint prev = c.at(a);
  double total = 0.0;
  const auto& t = c.times();
  auto it = std::upper_bound(t.begin(), t.end(), a);
  for (; it != t.end() && *it < b; ++it) {
    const DiskPoint& p = c.points()[static_cast<std::size_t>(it - t.begin())];
    total += dist(prev, p);
    prev = p;
  }
  return total + dist(prev, c.at(b));
}

double dist_to_segment(const DiskPoint& p, const DiskPoint& a, const DiskPoint& b) {
  if (dist(a, b) < 1e-14) return dist(p, a);
  const Geodesic g = geodesic_through(a, b);
  const double sa = g.foot_parameter(a);
  const double sb = g.foot_parameter(b);
  const double s = std::clamp(g.foot_parameter(p), std::min(sa, sb), std::max(sa, sb));
  return dist(p, g.point_at(s));
}

double hausdorff_to_geodesic(const SampledCurve& c, const Geodesic& g, double s_min, double s_max,
                             std::size_t scan_points) {
  if (!(s_min < s_max)) throw Error("hausdorff_to_geodesic: need s_min < s_max");
  // Curve -> segment: clamped projection is the exact nearest point because
  // the distance to g(s) grows monotonically away from the foot.
  double curve_side = 0.0;
  for (const DiskPoint& p : c.points()) {
    const double s = std::clamp(g.foot_parameter(p), s_min, s_max);
    curve_side = std::max(curve_side, dist(p, g.point_at(s)));
  }
  // Segment -> curve: dense scan against the curve's geodesic pieces.
  scan_points = std::max<std::size_t>(scan_points, 2);
  const auto& pts = c.points();
  double segment_side = 0.0;
  for (std::size_t k = 0; k < scan_points; ++k) {
    const double s = s_min + (s_max - s_min) * static_cast<double>(k) / static_cast<double>(scan_points - 1);
    const DiskPoint q = g.point_at(s);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      // Cheap lower bound skips pieces that cannot beat the current best.
      const double da = dist(q, pts[i]);
      const double len = dist(pts[i], pts[i + 1]);
      if (da - len >= best) continue;
      best = std::min(best, dist_to_segment(q, pts[i], pts[i + 1]));
    }
    segment_side = std::max(segment_side, best);
  }
  return std::max(curve_side, segment_side);
}

}  // namespace hypervar
