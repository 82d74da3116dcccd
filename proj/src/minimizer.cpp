#include "hypervar/minimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace hypervar {

namespace {

/// 2x2 real block [[a, b], [c, d]] acting on Complex-encoded 2-vectors.
struct Mat2 {
  double a = 0, b = 0, c = 0, d = 0;

  Complex operator*(Complex v) const { return {a * v.real() + b * v.imag(), c * v.real() + d * v.imag()}; }
  Mat2 operator*(const Mat2& o) const {
    return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
  }
  Mat2 operator-(const Mat2& o) const { return {a - o.a, b - o.b, c - o.c, d - o.d}; }
  Mat2 transposed() const { return {a, c, b, d}; }
  double det() const { return a * d - b * c; }
  Mat2 inverse() const {
    const double k = 1.0 / det();
    return {d * k, -b * k, -c * k, a * k};
  }
  void set_column(int col, Complex v) {
    if (col == 0) {
      a = v.real();
      c = v.imag();
    } else {
      b = v.real();
      d = v.imag();
    }
  }
};

double dot2(Complex x, Complex y) { return x.real() * y.real() + x.imag() * y.imag(); }

std::vector<Complex> orthonormal_gradient(const std::vector<TangentVec>& g, std::size_t m) {
  std::vector<Complex> out(m);
  for (std::size_t j = 0; j < m; ++j) out[j] = to_orthonormal(g[j + 1]);
  return out;
}

/// Solves the symmetric block-tridiagonal system (diag D, super-diagonal U)
/// by block LDL^T. Returns false when a pivot is not positive definite.
bool solve_block_tridiagonal(const std::vector<Mat2>& D, const std::vector<Mat2>& U, double shift,
                             const std::vector<Complex>& rhs, std::vector<Complex>& x) {
  const std::size_t m = D.size();
  std::vector<Mat2> S_inv(m);
  std::vector<Complex> y(m);
  for (std::size_t j = 0; j < m; ++j) {
    Mat2 S = D[j];
    S.a += shift;
    S.d += shift;
    Complex r = rhs[j];
    if (j > 0) {
      const Mat2 Bt = U[j - 1].transposed();
      S = S - Bt * S_inv[j - 1] * U[j - 1];
      r -= Bt * (S_inv[j - 1] * y[j - 1]);
    }
    if (!(S.a > 0.0) || !(S.det() > 0.0) || !std::isfinite(S.det())) return false;
    S_inv[j] = S.inverse();
    y[j] = r;
  }
  x.assign(m, Complex{});
  for (std::size_t jj = m; jj-- > 0;) {
    Complex r = y[jj];
    if (jj + 1 < m) r -= U[jj] * x[jj + 1];
    x[jj] = S_inv[jj] * r;
  }
  return true;
}

struct GradientSummary {
  double norm = 0.0;
  double scaled = 0.0;
  /// Rounding floors of norm and scaled, from the coordinate resolution
  /// eps * lambda of each node (large only near the boundary).
  double norm_floor = 0.0;
  double scaled_floor = 0.0;
};

GradientSummary summarize(const ChainObjective& f, const std::vector<TangentVec>& g) {
  constexpr double kFloor = 32.0 * std::numeric_limits<double>::epsilon();
  GradientSummary s;
  double sum = 0.0;
  double floor_sum = 0.0;
  for (std::size_t j = 1; j + 1 < g.size(); ++j) {
    const double n = g[j].norm();
    const double scale = f.node_scale(j);
    const double floor = kFloor * g[j].base.conformal_factor() / scale;
    sum += n * n;
    floor_sum += floor * floor;
    s.scaled = std::max(s.scaled, n / scale);
    s.scaled_floor = std::max(s.scaled_floor, floor / scale);
  }
  s.norm = std::sqrt(sum);
  s.norm_floor = std::sqrt(floor_sum);
  return s;
}

std::vector<DiskPoint> step_nodes(const std::vector<DiskPoint>& nodes, const std::vector<Complex>& delta,
                                  double alpha) {
  std::vector<DiskPoint> out = nodes;
  for (std::size_t j = 0; j < delta.size(); ++j) {
    out[j + 1] = exp_map(from_orthonormal(nodes[j + 1], alpha * delta[j]));
  }
  return out;
}

}  // namespace

DescentOutcome minimize_chain(const ChainObjective& f, std::vector<DiskPoint>& nodes, const DescentOptions& opts) {
  DescentOutcome out;
  const std::size_t n = nodes.size();
  out.value = f.value(nodes);
  if (n <= 2) {
    out.converged = true;
    return out;
  }
  const std::size_t m = n - 2;
  const double h = opts.fd_step;

  std::vector<TangentVec> grad = f.gradient(nodes);
  GradientSummary gs = summarize(f, grad);
  for (int iter = 0;; ++iter) {
    out.iterations = iter;
    out.grad_norm = gs.norm;
    out.scaled_residual = gs.scaled;
    out.tolerance_used = std::max(opts.tol_grad, gs.norm_floor);
    if (gs.norm <= out.tolerance_used && gs.scaled <= std::max(opts.tol_grad, gs.scaled_floor)) {
      out.converged = true;
      break;
    }
    if (iter >= opts.max_iterations) break;

    // Hessian blocks: perturb every third interior node at once.
    std::vector<Mat2> D(m), Lo(m), Up(m);
    for (std::size_t color = 0; color < 3; ++color) {
      for (int e = 0; e < 2; ++e) {
        const Complex dir = e == 0 ? Complex{1.0, 0.0} : Complex{0.0, 1.0};
        std::vector<DiskPoint> plus = nodes, minus = nodes;
        for (std::size_t j = color; j < m; j += 3) {
          plus[j + 1] = exp_map(from_orthonormal(nodes[j + 1], h * dir));
          minus[j + 1] = exp_map(from_orthonormal(nodes[j + 1], -h * dir));
        }
        const std::vector<Complex> gp = orthonormal_gradient(f.gradient(plus), m);
        const std::vector<Complex> gm = orthonormal_gradient(f.gradient(minus), m);
        for (std::size_t j = color; j < m; j += 3) {
          D[j].set_column(e, (gp[j] - gm[j]) / (2.0 * h));
          if (j > 0) Lo[j].set_column(e, (gp[j - 1] - gm[j - 1]) / (2.0 * h));      // d g_{j-1} / d x_j
          if (j + 1 < m) Up[j].set_column(e, (gp[j + 1] - gm[j + 1]) / (2.0 * h));  // d g_{j+1} / d x_j
        }
      }
    }
    // Off-diagonal block H_{j, j+1} = d g_j / d x_{j+1}; symmetrize.
    std::vector<Mat2> U(m > 0 ? m - 1 : 0);
    double diag_scale = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const Mat2 sym{D[j].a, 0.5 * (D[j].b + D[j].c), 0.5 * (D[j].b + D[j].c), D[j].d};
      D[j] = sym;
      diag_scale = std::max({diag_scale, std::fabs(sym.a), std::fabs(sym.d)});
      if (j + 1 < m) {
        const Mat2 from_lower = Lo[j + 1];
        const Mat2 from_upper = Up[j].transposed();
        U[j] = {0.5 * (from_lower.a + from_upper.a), 0.5 * (from_lower.b + from_upper.b),
                0.5 * (from_lower.c + from_upper.c), 0.5 * (from_lower.d + from_upper.d)};
      }
    }

    const std::vector<Complex> g = orthonormal_gradient(grad, m);
    std::vector<Complex> rhs(m);
    for (std::size_t j = 0; j < m; ++j) rhs[j] = -g[j];
    std::vector<Complex> delta;
    double shift = 0.0;
    while (!solve_block_tridiagonal(D, U, shift, rhs, delta)) {
      shift = shift == 0.0 ? 1e-8 * std::max(diag_scale, 1.0) : 10.0 * shift;
      if (shift > 1e12 * std::max(diag_scale, 1.0)) throw ConvergenceError("Hessian shift diverged");
    }
    double slope = 0.0;
    for (std::size_t j = 0; j < m; ++j) slope += dot2(g[j], delta[j]);
    if (!(slope < 0.0)) {
      for (std::size_t j = 0; j < m; ++j) delta[j] = -g[j] / std::max(diag_scale, 1.0);
      slope = 0.0;
      for (std::size_t j = 0; j < m; ++j) slope += dot2(g[j], delta[j]);
    }

    bool accepted = false;
    double alpha = 1.0;
    for (int ls = 0; ls < 40 && !accepted; ++ls, alpha *= 0.5) {
      std::vector<DiskPoint> trial;
      double value = 0.0;
      try {
        trial = step_nodes(nodes, delta, alpha);
        value = f.value(trial);
      } catch (const BoundaryOverflow&) {
        continue;
      }
      if (!std::isfinite(value)) continue;
      std::vector<TangentVec> trial_grad;
      bool take = value <= out.value + 1e-4 * alpha * slope;
      if (!take && std::fabs(value - out.value) <= 1e-12 * (1.0 + std::fabs(out.value))) {
        // At the rounding floor of the objective; fall back on gradient decrease.
        trial_grad = f.gradient(trial);
        take = summarize(f, trial_grad).norm < gs.norm;
      }
      if (take) {
        nodes = std::move(trial);
        out.value = value;
        grad = trial_grad.empty() ? f.gradient(nodes) : std::move(trial_grad);
        gs = summarize(f, grad);
        accepted = true;
      }
    }
    if (!accepted) {
      out.iterations = iter + 1;
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Boundary-value problem

namespace {

class ActionObjective : public ChainObjective {
 public:
  ActionObjective(const MechanicalLagrangian& L, std::vector<double> times) : L_(L), times_(std::move(times)) {}

  double value(const std::vector<DiskPoint>& nodes) const override {
    return action(L_, SampledCurve(times_, nodes));
  }
  std::vector<TangentVec> gradient(const std::vector<DiskPoint>& nodes) const override {
    return action_gradient(L_, SampledCurve(times_, nodes));
  }
  double node_scale(std::size_t j) const override {
    return 0.5 * (times_[j + 1] - times_[j - 1]);
  }
  const std::vector<double>& times() const { return times_; }

 private:
  const MechanicalLagrangian& L_;
  std::vector<double> times_;
};

std::vector<double> uniform_times(double a, double b, int n) {
  std::vector<double> t(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) t[static_cast<std::size_t>(j)] = a + (b - a) * j / (n - 1);
  t.back() = b;
  return t;
}

std::vector<DiskPoint> geodesic_nodes(const DiskPoint& x_a, const DiskPoint& x_b, const std::vector<double>& t) {
  std::vector<DiskPoint> nodes(t.size(), x_a);
  if (!(x_a == x_b)) {
    // Parameterize along the geodesic frame: exp_map from a far endpoint
    // would pass through points too close to the boundary.
    const Geodesic g = geodesic_through(x_a, x_b);
    const double sa = g.foot_parameter(x_a);
    const double sb = g.foot_parameter(x_b);
    const double span = t.back() - t.front();
    for (std::size_t k = 0; k < t.size(); ++k) nodes[k] = g.point_at(sa + (sb - sa) * ((t[k] - t.front()) / span));
  }
  nodes.front() = x_a;
  nodes.back() = x_b;
  return nodes;
}

std::vector<DiskPoint> perturbed(const std::vector<DiskPoint>& base, double scale, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const std::size_t n = base.size();
  Complex coeff[3];
  for (Complex& c : coeff) c = {unit(rng), unit(rng)};
  const double amplitude = scale * (0.75 + 0.25 * unit(rng));
  std::vector<Complex> disp(n);
  double peak = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double x = static_cast<double>(j) / static_cast<double>(n - 1);
    for (int k = 0; k < 3; ++k) disp[j] += coeff[k] * std::sin(kPi * (k + 1) * x);
    peak = std::max(peak, std::abs(disp[j]));
  }
  std::vector<DiskPoint> out = base;
  if (peak == 0.0) return out;
  for (std::size_t j = 1; j + 1 < n; ++j) {
    out[j] = exp_map(from_orthonormal(base[j], disp[j] * (amplitude / peak)));
  }
  return out;
}

}  // namespace

MinimizeResult solve_bvp(const MechanicalLagrangian& L, const BVProblem& prob) {
  if (!(prob.b > prob.a)) throw Error("BV problem needs b > a");
  if (prob.n < 8) throw Error("BV problem needs at least 8 nodes");
  ActionObjective objective(L, uniform_times(prob.a, prob.b, prob.n));
  const DescentOptions opts{prob.tol_grad, prob.max_iterations, 1e-5};

  const std::vector<DiskPoint> chord = geodesic_nodes(prob.x_a, prob.x_b, objective.times());
  std::vector<DiskPoint> best_nodes = chord;
  DescentOutcome best = minimize_chain(objective, best_nodes, opts);
  int iterations = best.iterations;
  std::vector<double> actions{best.value};
  bool all_converged = best.converged;

  const double scale = L.potential().is_zero() ? 0.25 : 0.5 * L.potential().spec().bump_radius;
  std::mt19937_64 rng(prob.seed);
  for (int r = 0; r < prob.restarts; ++r) {
    std::vector<DiskPoint> nodes = perturbed(chord, scale, rng);
    DescentOutcome o = minimize_chain(objective, nodes, opts);
    iterations += o.iterations;
    actions.push_back(o.value);
    all_converged = all_converged && o.converged;
    if (o.converged && (!best.converged || o.value < best.value)) {
      best = o;
      best_nodes = std::move(nodes);
    }
  }
  bool agree = all_converged;
  for (double a : actions) {
    agree = agree && std::fabs(a - best.value) <= 1e-6 * std::max(std::fabs(best.value), 1e-6);
  }

  SampledCurve curve(objective.times(), best_nodes);
  MinimizeResult res{curve, best.value, best.grad_norm, el_residual(L, curve),
                     agree, best.converged, best.tolerance_used, iterations};
  return res;
}

double el_residual(const MechanicalLagrangian& L, const SampledCurve& c) {
  if (c.size() < 3) throw Error("el_residual needs at least 3 nodes");
  const std::vector<TangentVec> g = action_gradient(L, c);
  const auto& t = c.times();
  double worst = 0.0;
  for (std::size_t j = 1; j + 1 < c.size(); ++j) {
    worst = std::max(worst, g[j].norm() / (0.5 * (t[j + 1] - t[j - 1])));
  }
  return worst;
}

SubsegmentReport verify_subsegment_minimality(const MechanicalLagrangian& L, const SampledCurve& c,
                                              std::size_t samples, std::uint64_t seed, double tol_grad) {
  if (c.size() < 8) throw Error("subsegment check needs at least 8 samples");
  SubsegmentReport report;
  std::mt19937_64 rng(seed);
  const std::size_t n = c.size();
  for (std::size_t s = 0; s < samples; ++s) {
    std::uniform_int_distribution<std::size_t> pick_first(0, n - 8);
    const std::size_t i = pick_first(rng);
    std::uniform_int_distribution<std::size_t> pick_last(i + 7, n - 1);
    const std::size_t j = pick_last(rng);
    const SampledCurve piece = c.restricted(i, j);
    ActionObjective objective(L, piece.times());
    std::vector<DiskPoint> nodes = geodesic_nodes(piece.points().front(), piece.points().back(), piece.times());
    const DescentOutcome o = minimize_chain(objective, nodes, {tol_grad, 200, 1e-5});
    SubsegmentCheck check;
    check.first = i;
    check.last = j;
    check.restricted_action = action(L, piece);
    check.resolved_action = o.value;
    check.relative_excess =
        (check.restricted_action - check.resolved_action) / std::max(std::fabs(check.resolved_action), 1e-12);
    report.max_excess = s == 0 ? check.relative_excess : std::max(report.max_excess, check.relative_excess);
    report.checks.push_back(check);
  }
  report.certified = report.max_excess < 1e-5;
  return report;
}

// ---------------------------------------------------------------------------
// Twist map

double generating_S(const EquivariantPotential& V, const DiskPoint& x, const DiskPoint& X) {
  const double d = dist(x, X);
  return 0.5 * d * d + V.value(x, 0.0);
}

TangentVec grad1_S(const EquivariantPotential& V, const DiskPoint& x, const DiskPoint& X) {
  return {x, -log_map(x, X).v + V.gradient(x, 0.0).v};
}

TangentVec grad2_S(const EquivariantPotential& /*V*/, const DiskPoint& x, const DiskPoint& X) {
  return -log_map(X, x);
}

TwistPoint twist_step(const EquivariantPotential& V, const DiskPoint& x, const TangentVec& p) {
  if (!(p.base == x)) throw Error("twist_step: momentum not based at x");
  const DiskPoint X = exp_map(TangentVec(x, p.v + V.gradient(x, 0.0).v), 1.0);
  return {X, -log_map(X, x)};
}

double discrete_W(const EquivariantPotential& V, const std::vector<DiskPoint>& x) {
  double w = 0.0;
  for (std::size_t k = 0; k + 1 < x.size(); ++k) w += generating_S(V, x[k], x[k + 1]);
  return w;
}

namespace {

class WObjective : public ChainObjective {
 public:
  explicit WObjective(const EquivariantPotential& V) : V_(V) {}
  double value(const std::vector<DiskPoint>& nodes) const override { return discrete_W(V_, nodes); }
  std::vector<TangentVec> gradient(const std::vector<DiskPoint>& x) const override {
    std::vector<TangentVec> g;
    g.reserve(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
      Complex v{};
      if (j > 0) v += grad2_S(V_, x[j - 1], x[j]).v;
      if (j + 1 < x.size()) v += grad1_S(V_, x[j], x[j + 1]).v;
      g.emplace_back(x[j], v);
    }
    return g;
  }
  double node_scale(std::size_t) const override { return 1.0; }

 private:
  const EquivariantPotential& V_;
};

}  // namespace

TwistResult minimize_W(const EquivariantPotential& V, const DiskPoint& first, const DiskPoint& last, int length,
                       const DescentOptions& opts) {
  if (length < 2) throw Error("minimize_W needs length >= 2");
  std::vector<double> t = uniform_times(0.0, 1.0, length);
  std::vector<DiskPoint> x = geodesic_nodes(first, last, t);
  WObjective objective(V);
  const DescentOutcome o = minimize_chain(objective, x, opts);

  TwistResult res;
  res.W = o.value;
  res.converged = o.converged;
  res.grad_sup = o.scaled_residual;
  std::vector<TangentVec> momenta;
  for (std::size_t k = 0; k + 1 < x.size(); ++k) momenta.push_back(-grad1_S(V, x[k], x[k + 1]));
  momenta.push_back(grad2_S(V, x[x.size() - 2], x.back()));

  DiskPoint cur = x.front();
  TangentVec p = momenta.front();
  for (std::size_t k = 0; k + 1 < x.size(); ++k) {
    const TwistPoint next = twist_step(V, cur, p);
    res.replay_error = std::max(res.replay_error, dist(next.X, x[k + 1]));
    cur = next.X;
    p = next.P;
  }
  res.sequence.points = std::move(x);
  res.sequence.momenta = std::move(momenta);
  return res;
}

std::vector<DiskPoint> twist_orbit(const EquivariantPotential& V, const DiskPoint& x, const TangentVec& p, int count) {
  std::vector<DiskPoint> out{x};
  DiskPoint cur = x;
  TangentVec mom = p;
  for (int k = 1; k < count; ++k) {
    const TwistPoint next = twist_step(V, cur, mom);
    out.push_back(next.X);
    cur = next.X;
    mom = next.P;
  }
  return out;
}

}  // namespace hypervar
