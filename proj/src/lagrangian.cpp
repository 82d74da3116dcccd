#include "hypervar/lagrangian.hpp"

#include <algorithm>
#include <cmath>

namespace hypervar {

MechanicalLagrangian::MechanicalLagrangian(std::shared_ptr<const EquivariantPotential> potential)
    : potential_(std::move(potential)) {
  if (!potential_) throw Error("lagrangian needs a potential");
}

double MechanicalLagrangian::value(const TangentVec& v, double t) const {
  const double n = v.norm();
  return 0.5 * n * n - potential_->value(v.base, t);
}

double MechanicalLagrangian::energy(const ELState& s) const {
  const double n = s.velocity.norm();
  return 0.5 * n * n + potential_->value(s.position, s.time);
}

Complex geodesic_spray(Complex z, Complex zdot) {
  // Conformal metric e^{2 phi} |dz|^2 with phi = log(2 / (1 - |z|^2)):
  // zddot = -2 <grad phi, zdot> zdot + |zdot|^2 grad phi.
  const Complex grad_phi = 2.0 * z / (1.0 - std::norm(z));
  const double dot = grad_phi.real() * zdot.real() + grad_phi.imag() * zdot.imag();
  return -2.0 * dot * zdot + std::norm(zdot) * grad_phi;
}

ELField el_vector_field(const MechanicalLagrangian& L, const ELState& s) {
  if (std::abs(s.position.z()) >= 1.0 - 1e-9) throw BoundaryOverflow("boundary overflow in E-L field");
  const Complex zdot = s.velocity.v;
  const Complex force = -L.potential().gradient(s.position, s.time).v;
  return {zdot, geodesic_spray(s.position.z(), zdot) + force};
}

namespace {

struct LocalState {
  Complex w;
  Complex wd;
};

/// E-L field expressed in the frame F (F(0) = current base point).
LocalState local_field(const MechanicalLagrangian& L, const Isometry& frame, const LocalState& s, double t) {
  Complex acc = geodesic_spray(s.w, s.wd);
  if (!L.potential().is_zero()) {
    const DiskPoint x = frame.apply(DiskPoint(s.w));
    const Complex g = L.potential().gradient(x, t).v;
    acc -= g / frame.derivative(s.w);
  }
  return {s.wd, acc};
}

LocalState rk4(const MechanicalLagrangian& L, const Isometry& frame, const LocalState& s, double t, double h) {
  auto add = [](const LocalState& a, const LocalState& k, double c) {
    return LocalState{a.w + c * k.w, a.wd + c * k.wd};
  };
  const LocalState k1 = local_field(L, frame, s, t);
  const LocalState k2 = local_field(L, frame, add(s, k1, 0.5 * h), t + 0.5 * h);
  const LocalState k3 = local_field(L, frame, add(s, k2, 0.5 * h), t + 0.5 * h);
  const LocalState k4 = local_field(L, frame, add(s, k3, h), t + h);
  return {s.w + (h / 6.0) * (k1.w + 2.0 * k2.w + 2.0 * k3.w + k4.w),
          s.wd + (h / 6.0) * (k1.wd + 2.0 * k2.wd + 2.0 * k3.wd + k4.wd)};
}

}  // namespace

ELTrajectory integrate_el(const MechanicalLagrangian& L, const ELState& start, double duration,
                          const StepControl& control) {
  if (!std::isfinite(duration)) throw Error("integrate_el: duration must be finite");
  if (!(start.velocity.base == start.position)) throw Error("integrate_el: velocity not based at position");
  const double dir = duration >= 0.0 ? 1.0 : -1.0;
  const double t0 = start.time;
  const double t_end = t0 + duration;

  std::vector<double> times{t0};
  std::vector<DiskPoint> points{start.position};
  std::vector<TangentVec> vels{start.velocity};
  StepStatistics stats;
  stats.smallest_step = std::fabs(duration);

  Complex z = start.position.z();
  Complex zd = start.velocity.v;
  double t = t0;
  double h = std::min(control.max_step, std::fabs(duration));
  std::size_t next_sample = 1;
  auto sample_time = [&](std::size_t k) {
    return control.sample_dt > 0.0 ? t0 + dir * static_cast<double>(k) * control.sample_dt : t_end;
  };

  while (dir * (t_end - t) > 0.0) {
    double target = t_end;
    if (control.sample_dt > 0.0) {
      const double ts = sample_time(next_sample);
      if (dir * (ts - t_end) < 0.0) target = ts;
    }
    const bool lands = std::fabs(target - t) <= h;
    const double step = lands ? target - t : dir * h;

    const Isometry frame = Isometry::translation_to(DiskPoint(z));
    const LocalState s0{Complex{}, zd / frame.derivative(Complex{})};
    bool ok = true;
    LocalState full{}, half{};
    try {
      full = rk4(L, frame, s0, t, step);
      half = rk4(L, frame, rk4(L, frame, s0, t, 0.5 * step), t + 0.5 * step, 0.5 * step);
    } catch (const BoundaryOverflow&) {
      ok = false;
    }
    double err = 0.0;
    if (ok) {
      err = 2.0 * (std::abs(full.w - half.w) + std::fabs(step) * std::abs(full.wd - half.wd));
      ok = std::isfinite(err) && err <= control.tolerance;
    }
    if (!ok) {
      ++stats.rejected;
      h = 0.5 * std::fabs(step);
      if (h < control.min_step) {
        throw ConvergenceError("integrate_el: step underflow at t = " + std::to_string(t));
      }
      continue;
    }
    // Richardson extrapolation of the two half steps.
    const LocalState best{half.w + (half.w - full.w) / 15.0, half.wd + (half.wd - full.wd) / 15.0};
    const DiskPoint next = frame.apply(DiskPoint(best.w));
    if (std::abs(next.z()) >= 1.0 - 1e-9) throw BoundaryOverflow("boundary overflow in E-L integration");
    z = next.z();
    zd = frame.derivative(best.w) * best.wd;
    t = lands ? target : t + step;
    ++stats.accepted;
    stats.smallest_step = std::min(stats.smallest_step, std::fabs(step));
    stats.largest_local_error = std::max(stats.largest_local_error, err);
    if (!lands) {
      if (err < control.tolerance / 64.0) h = std::min(2.0 * h, control.max_step);
    }
    if (control.sample_dt <= 0.0 || lands) {
      const DiskPoint p(z);
      times.push_back(t);
      points.push_back(p);
      vels.emplace_back(p, zd);
      if (lands && control.sample_dt > 0.0) ++next_sample;
    }
  }

  const DiskPoint pf(z);
  ELState final_state{pf, TangentVec(pf, zd), t_end};
  if (times.size() < 2) {
    // Zero duration: a degenerate two-sample record of the start state.
    times.push_back(std::nextafter(t0, t0 + 1.0));
    points.push_back(pf);
    vels.push_back(final_state.velocity);
  }
  if (dir < 0.0) {
    std::reverse(times.begin(), times.end());
    std::reverse(points.begin(), points.end());
    std::reverse(vels.begin(), vels.end());
  }
  return {SampledCurve(std::move(times), std::move(points), std::move(vels)), final_state, stats};
}

double action(const MechanicalLagrangian& L, const SampledCurve& c) {
  const auto& t = c.times();
  const auto& q = c.points();
  const EquivariantPotential& V = L.potential();
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < q.size(); ++k) {
    const double dt = t[k + 1] - t[k];
    const double d = dist(q[k], q[k + 1]);
    const double tm = t[k] + 0.5 * dt;
    total += 0.5 * d * d / dt - 0.5 * dt * (V.value(q[k], tm) + V.value(q[k + 1], tm));
  }
  return total;
}

std::vector<TangentVec> action_gradient(const MechanicalLagrangian& L, const SampledCurve& c) {
  const auto& t = c.times();
  const auto& q = c.points();
  const EquivariantPotential& V = L.potential();
  std::vector<TangentVec> g;
  g.reserve(q.size());
  for (const DiskPoint& p : q) g.push_back(TangentVec::zero(p));
  for (std::size_t k = 0; k + 1 < q.size(); ++k) {
    const double dt = t[k + 1] - t[k];
    const double tm = t[k] + 0.5 * dt;
    // d/dx (d(x, y)^2 / 2) = -log_x(y).
    g[k].v -= log_map(q[k], q[k + 1]).v / dt;
    g[k + 1].v -= log_map(q[k + 1], q[k]).v / dt;
    if (!V.is_zero()) {
      g[k].v -= 0.5 * dt * V.gradient(q[k], tm).v;
      g[k + 1].v -= 0.5 * dt * V.gradient(q[k + 1], tm).v;
    }
  }
  return g;
}

double ActionBoundLedger::min_C_K_max() const {
  if (V_min >= 0.0) return 0.0;
  return std::sqrt(-2.0 * V_min);
}

ActionBoundLedger make_ledger(const MechanicalLagrangian& L) {
  ActionBoundLedger ledger;
  ledger.V_min = L.potential().min_value();
  return ledger;
}

ActionBounds action_bounds(const ActionBoundLedger& ledger, double K, double duration) {
  if (!(K > 0.0)) throw Error("action_bounds: K must be positive");
  return {ledger.C_K_min(K) * K * duration, ledger.C_K_max(K) * K * duration};
}

}  // namespace hypervar
