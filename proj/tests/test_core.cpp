#include "doctest.h"

#include <sstream>

#include "hypervar/core.hpp"
#include "hypervar/io.hpp"
#include "support.hpp"

using namespace hypervar;
using hvtest::random_point;

TEST_CASE("dist closed forms") {
  CHECK(dist(DiskPoint(), DiskPoint(0.5, 0.0)) == doctest::Approx(std::log(3.0)).epsilon(1e-15));
  CHECK(dist(DiskPoint(0.2, -0.3), DiskPoint(0.2, -0.3)) == 0.0);
  CHECK(dist(DiskPoint(-0.5, 0.0), DiskPoint(0.5, 0.0)) == doctest::Approx(std::log(9.0)).epsilon(1e-15));
}

TEST_CASE("disk point guard") {
  CHECK_THROWS_AS(DiskPoint(1.0, 0.0), BoundaryOverflow);
  CHECK_THROWS_AS(DiskPoint(0.0, 1.0 - 1e-13), BoundaryOverflow);
  CHECK_NOTHROW(DiskPoint(0.0, 1.0 - 1e-11));
  CHECK(BoundaryPoint(-M_PI / 2).theta() == doctest::Approx(1.5 * M_PI));
  CHECK(BoundaryPoint(5 * M_PI).theta() == doctest::Approx(M_PI));
}

TEST_CASE("metric axioms on random triples") {
  std::mt19937_64 rng(11);
  for (int k = 0; k < 2000; ++k) {
    const DiskPoint p = random_point(rng), q = random_point(rng), r = random_point(rng);
    const double pq = dist(p, q), qp = dist(q, p);
    CHECK(std::fabs(pq - qp) <= 1e-12 * (1 + pq));
    CHECK(dist(p, r) <= pq + dist(q, r) + 1e-9);
  }
}

TEST_CASE("exp map") {
  const TangentVec unit_x = from_orthonormal(DiskPoint(), {1.0, 0.0});
  const DiskPoint e = exp_map(unit_x, 1.0);
  CHECK(e.x() == doctest::Approx(std::tanh(0.5)).epsilon(1e-15));
  CHECK(e.y() == 0.0);
  const TangentVec w{DiskPoint(0.3, 0.1), {0.2, -0.4}};
  CHECK(exp_map(w, 0.0) == w.base);
  CHECK(exp_map(TangentVec::zero(w.base), 3.0) == w.base);

  SUBCASE("matches a numerically integrated geodesic") {
    std::mt19937_64 rng(3);
    for (int k = 0; k < 50; ++k) {
      const DiskPoint p = random_point(rng, 2.0);
      const TangentVec v = hvtest::random_vector(rng, p);
      const double s = 1.5;
      const DiskPoint a = exp_map(v, s);
      const DiskPoint b = hvtest::geodesic_ode(v, s);
      CHECK(dist(a, b) < 1e-9);
      CHECK(dist(p, a) == doctest::Approx(s * v.norm()).epsilon(1e-9));
    }
  }
}

TEST_CASE("log map") {
  const TangentVec v = log_map(DiskPoint(), DiskPoint(std::tanh(0.5), 0.0));
  CHECK(v.norm() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(v.v.imag() == 0.0);
  CHECK(v.v.real() > 0.0);
  CHECK(log_map(DiskPoint(0.3, 0.3), DiskPoint(0.3, 0.3)).is_zero());

  std::mt19937_64 rng(5);
  for (int k = 0; k < 1000; ++k) {
    const DiskPoint p = random_point(rng), q = random_point(rng);
    const TangentVec w = log_map(p, q);
    CHECK(dist(exp_map(w), q) < 1e-9);
    CHECK(w.norm() == doctest::Approx(dist(p, q)).epsilon(1e-9));
  }
}

TEST_CASE("isometries") {
  std::mt19937_64 rng(7);
  const DiskPoint p(0.4, -0.2);
  CHECK(dist(Isometry::identity().apply(p), p) == 0.0);
  CHECK(Isometry::rotation(1.1).apply(DiskPoint()) == DiskPoint());
  CHECK_THROWS_AS(Isometry(Complex{1.0, 0.0}, Complex{1.0, 0.0}), Error);
  for (int k = 0; k < 500; ++k) {
    const Isometry g = hvtest::random_isometry(rng), h = hvtest::random_isometry(rng);
    const DiskPoint a = random_point(rng, 3.0), b = random_point(rng, 3.0);
    CHECK(std::fabs(dist(g.apply(a), g.apply(b)) - dist(a, b)) < 1e-10);
    CHECK(dist((g * h).apply(a), g.apply(h.apply(a))) < 1e-10);
    CHECK(dist(g.inverse().apply(g.apply(a)), a) < 1e-10);
    CHECK(std::fabs((g * h).determinant_defect()) < 1e-10);
    const TangentVec v = hvtest::random_vector(rng, a);
    CHECK(g.differential(v).norm() == doctest::Approx(v.norm()).epsilon(1e-10));
  }
}

TEST_CASE("geodesic_through") {
  const Geodesic g = geodesic_through(DiskPoint(-0.3, 0.0), DiskPoint(0.5, 0.0));
  CHECK(g.xi_minus().theta() == doctest::Approx(M_PI));
  CHECK(angular_distance(g.xi_plus(), BoundaryPoint(0.0)) < 1e-14);
  const Geodesic v = geodesic_through(DiskPoint(), DiskPoint(0.0, 0.3));
  CHECK(v.xi_plus().theta() == doctest::Approx(M_PI / 2));
  CHECK(v.xi_minus().theta() == doctest::Approx(1.5 * M_PI));
  CHECK_THROWS_WITH_AS(geodesic_through(DiskPoint(0.1, 0.1), DiskPoint(0.1, 0.1)), "degenerate chord", Error);

  SUBCASE("endpoints are the limit of the extended chord") {
    std::mt19937_64 rng(9);
    for (int k = 0; k < 100; ++k) {
      const DiskPoint p = random_point(rng, 2.0), q = random_point(rng, 2.0);
      const Geodesic h = geodesic_through(p, q);
      CHECK(dist(h.point_at(h.foot_parameter(p)), p) < 1e-10);
      CHECK(dist(h.point_at(h.foot_parameter(q)), q) < 1e-10);
      CHECK(h.foot_parameter(q) > h.foot_parameter(p));
      TangentVec w = log_map(p, q);
      w = w * (1.0 / w.norm());
      const DiskPoint far_plus = exp_map(w, 20.0);
      const DiskPoint far_minus = exp_map(-w, 20.0);
      CHECK(angular_distance(BoundaryPoint(std::arg(far_plus.z())), h.xi_plus()) < 1e-6);
      CHECK(angular_distance(BoundaryPoint(std::arg(far_minus.z())), h.xi_minus()) < 1e-6);
    }
  }
}

TEST_CASE("geodesic parameterization") {
  std::mt19937_64 rng(13);
  const Geodesic g(BoundaryPoint(2.0), BoundaryPoint(0.4), 0.7);
  CHECK(g.origin_param() == 0.7);
  double closest = 1e9, at = 0.0;
  for (double s = -5; s <= 5; s += 1e-4) {
    const double r = std::abs(g.point_at(s).z());
    if (r < closest) closest = r, at = s;
  }
  CHECK(at == doctest::Approx(0.7).epsilon(1e-3));
  for (double s = -8; s <= 8; s += 0.5) {
    CHECK(g.unit_tangent_at(s).norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(dist(g.point_at(s), g.point_at(s + 0.25)) == doctest::Approx(0.25).epsilon(1e-9));
  }
  const DiskPoint f = g.fermi_point(1.0, 0.6);
  CHECK(g.foot_parameter(f) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(dist(f, g.point_at(1.0)) == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("projection") {
  const Geodesic real_axis(BoundaryPoint(M_PI), BoundaryPoint(0.0));
  const Projection pr = project_to_geodesic(real_axis, DiskPoint(0.0, 0.3));
  CHECK(std::abs(pr.foot.z()) < 1e-15);
  CHECK(pr.s == doctest::Approx(0.0));
  const Projection on = project_to_geodesic(real_axis, DiskPoint(0.4, 0.0));
  CHECK(dist(on.foot, DiskPoint(0.4, 0.0)) < 1e-14);

  SUBCASE("minimal against a dense parameter scan") {
    std::mt19937_64 rng(17);
    for (int k = 0; k < 40; ++k) {
      const Geodesic g(BoundaryPoint(6.0 * std::uniform_real_distribution<double>(0, 1)(rng)),
                       BoundaryPoint(3.0 + 0.1 * k));
      const DiskPoint p = random_point(rng, 3.0);
      const Projection q = project_to_geodesic(g, p);
      const double d = dist(p, q.foot);
      double best = 1e9;
      for (double u = q.s - 4.0; u <= q.s + 4.0; u += 1e-3) best = std::min(best, dist(p, g.point_at(u)));
      CHECK(d <= best + 1e-12);
      CHECK(best - d < 1e-6);
      // the connecting geodesic meets g orthogonally
      if (d > 1e-6) CHECK(std::fabs(inner(log_map(q.foot, p), g.unit_tangent_at(q.s))) < 1e-9);
    }
  }
}

TEST_CASE("sigma projection") {
  const Geodesic real_axis(BoundaryPoint(M_PI), BoundaryPoint(0.0));
  const TangentVec s = sigma_project(real_axis, DiskPoint(0.0, 0.3));
  CHECK(s.norm() == doctest::Approx(1.0));
  CHECK(std::abs(s.base.z()) < 1e-15);
  CHECK(s.v.real() > 0.0);
  CHECK(std::fabs(s.v.imag()) < 1e-15);

  std::mt19937_64 rng(19);
  for (int k = 0; k < 200; ++k) {
    const Geodesic g = geodesic_through(random_point(rng, 2.0), random_point(rng, 2.0));
    const DiskPoint p = random_point(rng, 2.0);
    const Isometry h = hvtest::random_isometry(rng, 2.0);
    const TangentVec lhs = sigma_project(g.transformed(h), h.apply(p));
    const TangentVec rhs = h.differential(sigma_project(g, p));
    CHECK(dist(lhs.base, rhs.base) < 1e-9);
    CHECK(std::abs(to_orthonormal(lhs) - to_orthonormal(rhs)) < 1e-9);
  }
}

TEST_CASE("rho and curve length") {
  const SampledCurve line({0.0, 2.0}, {DiskPoint(), DiskPoint(0.5, 0.0)});
  CHECK(rho(line, 0.0, 2.0) == doctest::Approx(std::log(3.0) / 2));
  CHECK_THROWS_AS(rho(line, 1.0, 1.0), Error);
  CHECK_THROWS_AS(curve_length(line, 2.0, 1.0), Error);
  const SampledCurve still({0.0, 1.0, 2.0}, {DiskPoint(0.1, 0.1), DiskPoint(0.1, 0.1), DiskPoint(0.1, 0.1)});
  CHECK(rho(still, 0.0, 2.0) == 0.0);
  CHECK(curve_length(still, 0.0, 2.0) == 0.0);

  // unit-speed geodesic built by exp_map sampling
  const TangentVec w = from_orthonormal(DiskPoint(0.2, -0.1), std::polar(1.0, 0.8));
  std::vector<double> t;
  std::vector<DiskPoint> p;
  for (int k = 0; k <= 40; ++k) {
    t.push_back(0.1 * k);
    p.push_back(exp_map(w, 0.1 * k));
  }
  const SampledCurve geo(t, p);
  CHECK(rho(geo, 0.0, 4.0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(rho(geo, 0.35, 2.05) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(curve_length(geo, 0.0, 4.0) == doctest::Approx(dist(p.front(), p.back())).epsilon(1e-9));

  // hyperbolic circle of radius 1 about the origin: refinement lengthens the polygon
  auto circle = [](int n) {
    std::vector<double> tt;
    std::vector<DiskPoint> pp;
    for (int k = 0; k <= n; ++k) {
      tt.push_back(static_cast<double>(k) / n);
      pp.push_back(DiskPoint(std::polar(std::tanh(0.5), M_PI * k / n)));
    }
    return SampledCurve(tt, pp);
  };
  const double l8 = curve_length(circle(8), 0.0, 1.0), l16 = curve_length(circle(16), 0.0, 1.0);
  const double exact = M_PI * std::sinh(1.0);
  CHECK(l8 < l16);
  CHECK(l16 < exact);
  CHECK((exact - l16) < 0.3 * (exact - l8));
}

TEST_CASE("hausdorff to geodesic") {
  const Geodesic g(BoundaryPoint(M_PI), BoundaryPoint(0.0));
  const SampledCurve on = hvtest::geodesic_curve(g, 1.0, -1.0, 1.0, 20);
  CHECK(hausdorff_to_geodesic(on, g, -1.0, 1.0) < 1e-12);
  const DiskPoint p(0.0, 0.3);
  const SampledCurve one({0.0, 1.0}, {p, p});
  // the segment [-1e-9, 1e-9] is essentially the foot of p
  CHECK(hausdorff_to_geodesic(one, g, -1e-9, 1e-9) == doctest::Approx(dist(p, DiskPoint())).epsilon(1e-8));

  SUBCASE("circle arc against the brute-force double scan") {
    const double r = std::tanh(0.5);
    std::vector<double> t;
    std::vector<DiskPoint> pts;
    for (int k = 0; k <= 64; ++k) {
      t.push_back(k);
      pts.push_back(DiskPoint(std::polar(r, M_PI * k / 64.0)));
    }
    const SampledCurve arc(t, pts);
    const double s0 = g.foot_parameter(pts.back()), s1 = g.foot_parameter(pts.front());
    // dense polygon points against dense segment points
    std::vector<DiskPoint> dense_curve, dense_seg;
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
      for (int j = 0; j < 20; ++j) dense_curve.push_back(arc.at(t[k] + j / 20.0));
    }
    dense_curve.push_back(pts.back());
    for (int j = 0; j <= 4000; ++j) dense_seg.push_back(g.point_at(s0 + (s1 - s0) * j / 4000.0));
    auto one_side = [](const std::vector<DiskPoint>& a, const std::vector<DiskPoint>& b) {
      double worst = 0.0;
      for (const DiskPoint& x : a) {
        double best = 1e9;
        for (const DiskPoint& y : b) best = std::min(best, dist(x, y));
        worst = std::max(worst, best);
      }
      return worst;
    };
    const double brute = std::max(one_side(dense_curve, dense_seg), one_side(dense_seg, dense_curve));
    CHECK(hausdorff_to_geodesic(arc, g, s0, s1) == doctest::Approx(brute).epsilon(1e-3));
  }
}

TEST_CASE("sampled curve") {
  CHECK_THROWS_AS(SampledCurve({0.0}, {DiskPoint()}), Error);
  CHECK_THROWS_AS(SampledCurve({0.0, 0.0}, {DiskPoint(), DiskPoint()}), Error);
  CHECK_THROWS_AS(SampledCurve({0.0, 1.0}, {DiskPoint()}), Error);
  const SampledCurve c({0.0, 1.0, 3.0}, {DiskPoint(), DiskPoint(0.2, 0.0), DiskPoint(0.2, 0.3)});
  CHECK(c.segment_index(0.5) == 0);
  CHECK(c.segment_index(1.0) == 1);
  CHECK(c.segment_index(3.0) == 1);
  CHECK(dist(c.at(2.0), c.at(1.0)) == doctest::Approx(0.5 * dist(c.points()[1], c.points()[2])).epsilon(1e-12));
  const SampledCurve r = c.restricted(1, 2);
  CHECK(r.size() == 2);
  CHECK(r.t_begin() == 1.0);
}

TEST_CASE("curve csv roundtrip") {
  const Geodesic g(BoundaryPoint(1.0), BoundaryPoint(4.0));
  const SampledCurve c = hvtest::geodesic_curve(g, 1.3, -2.0, 2.0, 17);
  std::stringstream ss;
  write_curve_csv(ss, c);
  CHECK(ss.str().rfind("t,x,y\n", 0) == 0);
  const SampledCurve back = read_curve_csv(ss);
  REQUIRE(back.size() == c.size());
  for (std::size_t k = 0; k < c.size(); ++k) {
    CHECK(back.times()[k] == c.times()[k]);
    CHECK(back.points()[k] == c.points()[k]);
  }
  std::stringstream bad("t,x\n0,0\n");
  CHECK_THROWS_AS(read_curve_csv(bad), Error);
  std::stringstream worse("t,x,y\n0,0,0\n1,zz,0\n");
  CHECK_THROWS_AS(read_curve_csv(worse), Error);
}
