#include "hypervar/qg_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace hypervar {

namespace {

std::vector<std::size_t> strided_indices(std::size_t n, std::size_t stride) {
  if (stride == 0) stride = 1;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < n; i += stride) idx.push_back(i);
  if (!idx.empty() && idx.back() != n - 1) idx.push_back(n - 1);
  return idx;
}

bool is_integer(double x) { return std::fabs(x - std::round(x)) <= 1e-9; }

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

QGCheck qg_check(const SampledCurve& c, double lambda, double epsilon, std::size_t stride) {
  if (!(lambda >= 1.0) || !(epsilon >= 0.0)) throw Error("qg_check needs lambda >= 1 and epsilon >= 0");
  QGCheck out;
  out.violation = -std::numeric_limits<double>::infinity();
  const auto& t = c.times();
  const auto& p = c.points();
  const std::vector<std::size_t> idx = strided_indices(c.size(), stride);
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      const std::size_t i = idx[a], j = idx[b];
      const double dt = t[j] - t[i];
      const double d = dist(p[i], p[j]);
      const double lower = (dt / lambda - d) - epsilon;
      const double upper = (d - lambda * dt) - epsilon;
      if (lower > out.violation) {
        out.violation = lower;
        out.worst = {t[i], t[j], -1};
      }
      if (upper > out.violation) {
        out.violation = upper;
        out.worst = {t[i], t[j], +1};
      }
    }
  }
  if (idx.size() < 2) out.violation = 0.0;
  out.ok = out.violation <= 0.0;
  return out;
}

QGFit qg_fit(const SampledCurve& c, const std::vector<double>& lambda_grid, std::size_t stride) {
  if (lambda_grid.empty()) throw Error("qg_fit needs a nonempty lambda grid");
  for (double l : lambda_grid) {
    if (!(l >= 1.0)) throw Error("qg_fit: grid values must be >= 1");
  }
  const auto& t = c.times();
  const auto& p = c.points();
  const std::vector<std::size_t> idx = strided_indices(c.size(), stride);
  std::vector<double> eps(lambda_grid.size(), 0.0);
  std::vector<QGPair> worst(lambda_grid.size());
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      const std::size_t i = idx[a], j = idx[b];
      const double dt = t[j] - t[i];
      const double d = dist(p[i], p[j]);
      for (std::size_t k = 0; k < lambda_grid.size(); ++k) {
        // Same expressions as qg_check, so the fitted pair passes it exactly.
        const double lower = dt / lambda_grid[k] - d;
        const double upper = d - lambda_grid[k] * dt;
        if (lower > eps[k]) {
          eps[k] = lower;
          worst[k] = {t[i], t[j], -1};
        }
        if (upper > eps[k]) {
          eps[k] = upper;
          worst[k] = {t[i], t[j], +1};
        }
      }
    }
  }
  std::size_t best = 0;
  for (std::size_t k = 1; k < lambda_grid.size(); ++k) {
    if (eps[k] < eps[best] || (eps[k] == eps[best] && lambda_grid[k] < lambda_grid[best])) best = k;
  }
  return {lambda_grid[best], eps[best], worst[best]};
}

std::vector<double> default_lambda_grid() {
  std::vector<double> g;
  for (int k = 0; k <= 12; ++k) g.push_back(1.0 + 0.25 * k);
  return g;
}

// ---------------------------------------------------------------------------

double threshold_K0(const ActionBoundLedger& ledger) { return 28.0 * ledger.min_C_K_max() / ledger.C; }

int n0_for(double K, double K_prime) {
  if (!(K_prime > 0.0) || !(K > 0.0)) throw Error("N0 needs K > 0 and K' > 0");
  return 2 * static_cast<int>(std::ceil(K / K_prime));
}

double k_dprime_for(double C, double K_prime, double C_Kmax_at_K_dprime) {
  return C * K_prime * K_prime / (4.0 * C_Kmax_at_K_dprime);
}

double lambda_for(double K_dprime, double k_dprime) { return std::max({K_dprime, 1.0 / k_dprime, 1.0}); }

double epsilon_for(int N0, double lambda) { return static_cast<double>(N0) / lambda; }

double choose_K_prime(const ActionBoundLedger& ledger, double K) {
  const double target = ledger.C * K / 4.0;
  for (int j = 1; j <= 200; ++j) {
    const double Kp = std::ldexp(K, -j);
    if (7.0 * ledger.C_K_max(2.0 * Kp) < target) return Kp;
  }
  throw Error("no K' = K / 2^j satisfies 7 C_max(2 K') < C K / 4");
}

PropConstants compute_constants(const ActionBoundLedger& ledger, double K, double K_dprime) {
  PropConstants pc;
  pc.C = ledger.C;
  pc.m = ledger.min_C_K_max();
  pc.K0 = threshold_K0(ledger);
  pc.K = K;
  if (!(K > pc.K0)) {
    throw Error("K = " + fmt(K) + " is below the K0 threshold (K0 = " + fmt(pc.K0) + ")");
  }
  if (!(K_dprime > 0.0)) throw Error("K'' must be positive");
  pc.K_prime = choose_K_prime(ledger, K);
  pc.N0 = n0_for(K, pc.K_prime);
  pc.K_dprime = K_dprime;
  pc.C_Kmax_at_K_dprime = ledger.C_K_max(K_dprime);
  pc.k_dprime = k_dprime_for(pc.C, pc.K_prime, pc.C_Kmax_at_K_dprime);
  pc.lambda = lambda_for(K_dprime, pc.k_dprime);
  pc.epsilon = epsilon_for(pc.N0, pc.lambda);
  return pc;
}

double measure_K_dprime(const std::vector<SampledCurve>& curves) {
  double top = 0.0;
  for (const SampledCurve& c : curves) {
    const auto& t = c.times();
    const auto& p = c.points();
    for (std::size_t k = 0; k + 1 < c.size(); ++k) top = std::max(top, dist(p[k], p[k + 1]) / (t[k + 1] - t[k]));
  }
  return 1.1 * top;
}

// ---------------------------------------------------------------------------

WindowSpeeds window_speeds(const SampledCurve& c, double min_length) {
  WindowSpeeds w;
  const auto& t = c.times();
  const auto& p = c.points();
  for (std::size_t i = 0; i < c.size(); ++i) {
    for (std::size_t j = i + 1; j < c.size(); ++j) {
      const double dt = t[j] - t[i];
      if (dt < min_length - 1e-9 || !is_integer(dt)) continue;
      const double r = dist(p[i], p[j]) / dt;
      if (w.count == 0) {
        w.min = w.max = r;
      } else {
        w.min = std::min(w.min, r);
        w.max = std::max(w.max, r);
      }
      ++w.count;
    }
  }
  return w;
}

double max_safe_N(const Geodesic& gamma, double K, double horizon_radius) {
  if (!(K > 0.0)) throw Error("max_safe_N needs K > 0");
  // |z| <= 1 - 1e-9 is the binding constraint once horizon_radius exceeds ~21.4.
  const double radius = std::min(horizon_radius, 2.0 * std::atanh(1.0 - 1e-9));
  const double h0 = dist(DiskPoint::origin(), gamma.point_at(gamma.origin_param()));
  if (h0 >= radius) return 0.0;
  const double along = std::acosh(std::cosh(radius) / std::cosh(h0));
  return std::max(0.0, (along - std::fabs(gamma.origin_param())) / K);
}

ShadowReport shadow_run(const MechanicalLagrangian& L, const Geodesic& gamma, double K, double N,
                        const ShadowOptions& opts) {
  if (!(N > 0.0) || !(K > 0.0)) throw Error("shadow run needs N > 0 and K > 0");
  const double safe = max_safe_N(gamma, K, opts.horizon_radius);
  if (N > safe) {
    throw BoundaryOverflow("N = " + fmt(N) + " exceeds numerical horizon (max safe N = " + fmt(safe) + ")");
  }
  BVProblem prob;
  prob.x_a = gamma.point_at(-K * N);
  prob.x_b = gamma.point_at(K * N);
  prob.a = -N;
  prob.b = N;
  prob.n = static_cast<int>(std::lround(2.0 * N * opts.nodes_per_unit)) + 1;
  prob.tol_grad = opts.tol_grad;
  prob.restarts = opts.restarts;
  prob.max_iterations = opts.max_iterations;
  prob.seed = opts.seed;
  const MinimizeResult res = solve_bvp(L, prob);

  ShadowReport r;
  r.N = N;
  r.K = K;
  r.chord_hausdorff = hausdorff_to_geodesic(res.curve, gamma, -K * N, K * N);
  r.unit_windows = window_speeds(res.curve, 1.0);
  const QGFit fit = qg_fit(res.curve, opts.lambda_grid);
  r.lambda_fit = fit.lambda;
  r.epsilon_fit = fit.epsilon;
  r.endpoint_minus = gamma.xi_minus();
  r.endpoint_plus = gamma.xi_plus();
  r.action = res.action;
  r.grad_norm = res.grad_norm;
  r.converged = res.converged;
  r.restarts_agree = res.restarts_agree;
  r.midpoint = res.curve.at(0.0);
  r.midpoint_offset = dist(r.midpoint, gamma.point_at(0.0));
  r.curve = res.curve;
  return r;
}

ShadowExperiment finalize_shadow(const MechanicalLagrangian& L, double K, std::vector<ShadowReport> reports) {
  std::vector<SampledCurve> curves;
  double kappa = 0.0;
  for (const ShadowReport& r : reports) {
    curves.push_back(*r.curve);
    kappa = std::max(kappa, r.chord_hausdorff);
  }
  ShadowExperiment ex;
  ex.constants = compute_constants(make_ledger(L), K, measure_K_dprime(curves));
  ex.constants.kappa = kappa;
  for (ShadowReport& r : reports) r.long_windows = window_speeds(*r.curve, ex.constants.N0);
  ex.reports = std::move(reports);
  return ex;
}

ShadowExperiment shadow_experiment(const MechanicalLagrangian& L, const Geodesic& gamma, double K,
                                   const std::vector<double>& N_list, const ShadowOptions& opts) {
  const ActionBoundLedger ledger = make_ledger(L);
  const double K0 = threshold_K0(ledger);
  if (!(K > K0)) throw Error("K = " + fmt(K) + " is below the K0 threshold (K0 = " + fmt(K0) + ")");
  std::vector<ShadowReport> reports;
  for (double N : N_list) reports.push_back(shadow_run(L, gamma, K, N, opts));
  return finalize_shadow(L, K, std::move(reports));
}

std::optional<double> min_length_ratio(const SampledCurve& c, double N0) {
  const auto& t = c.times();
  const auto& p = c.points();
  std::vector<double> prefix(c.size(), 0.0);
  for (std::size_t k = 1; k < c.size(); ++k) prefix[k] = prefix[k - 1] + dist(p[k - 1], p[k]);
  std::optional<double> best;
  for (std::size_t i = 0; i < c.size(); ++i) {
    for (std::size_t j = i + 1; j < c.size(); ++j) {
      const double dt = t[j] - t[i];
      if (!(dt > N0)) continue;
      const double r = (prefix[j] - prefix[i]) / dt;
      if (!best || r < *best) best = r;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------

std::optional<double> find_fast_interval(const SampledCurve& gamma, double c, double d) {
  const double a = gamma.t_begin();
  const double b = gamma.t_end();
  const double K = rho(gamma, a, b);
  for (double s = a; s + 1.0 <= b + 1e-9; s += 1.0) {
    const double e = std::min(s + 1.0, b);
    const bool outside = e <= c + 1e-9 || s >= d - 1e-9;
    if (outside && rho(gamma, s, e) > K) return s;
  }
  return std::nullopt;
}

namespace {

struct CurveBuilder {
  std::vector<double> times;
  std::vector<DiskPoint> points;

  void push(double t, const DiskPoint& p) {
    if (!times.empty() && std::fabs(t - times.back()) <= 1e-12) return;
    times.push_back(t);
    points.push_back(p);
  }

  /// gamma on [s0, s1], re-timed by `shift`.
  void copy(const SampledCurve& g, double s0, double s1, double shift) {
    push(s0 + shift, g.at(s0));
    if (s1 - s0 <= 1e-12) return;
    const auto& t = g.times();
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (t[k] > s0 + 1e-9 && t[k] < s1 - 1e-9) push(t[k] + shift, g.points()[k]);
    }
    push(s1 + shift, g.at(s1));
  }

  void append(const SampledCurve& piece) {
    for (std::size_t k = 0; k < piece.size(); ++k) push(piece.times()[k], piece.points()[k]);
  }
};

SampledCurve connect(const MechanicalLagrangian& L, const DiskPoint& from, const DiskPoint& to, double t0,
                     double t1, double spacing, double tol_grad) {
  BVProblem prob;
  prob.x_a = from;
  prob.x_b = to;
  prob.a = t0;
  prob.b = t1;
  prob.n = std::max(8, static_cast<int>(std::lround((t1 - t0) / spacing)) + 1);
  prob.tol_grad = tol_grad;
  const MinimizeResult r = solve_bvp(L, prob);
  if (!r.converged) throw ConvergenceError("surgery: connecting segment did not converge");
  return r.curve;
}

/// Root of f on [lo, hi] with f(lo) < 0 <= f(hi), by bisection.
template <class F>
double bisect(F f, double lo, double hi) {
  for (int k = 0; k < 200 && hi - lo > 1e-15 * (1.0 + std::fabs(hi)); ++k) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

SurgeryResult surgery_comparison(const MechanicalLagrangian& L, const SampledCurve& gamma, double a_prime,
                                 double b_prime, double c, double d, double tol_grad) {
  const double a = gamma.t_begin();
  const double b = gamma.t_end();
  std::vector<std::string> failed;
  if (!is_integer(b - a)) failed.push_back("b - a is not an integer");
  if (std::fabs(b_prime - a_prime - 1.0) > 1e-9) failed.push_back("b' - a' != 1");
  if (!is_integer(a_prime - a)) failed.push_back("a' - a is not an integer");
  const double window = d - c;
  const long N0 = std::lround(window);
  if (!is_integer(window) || N0 <= 0 || N0 % 2 != 0) failed.push_back("d - c is not a positive even integer");
  if (!is_integer(b - d)) failed.push_back("b - d is not an integer");
  if (!(a <= c && d <= b)) failed.push_back("[c, d] is not inside [a, b]");
  const bool before = a_prime >= a - 1e-9 && b_prime <= c + 1e-9;
  const bool after = a_prime >= d - 1e-9 && b_prime <= b + 1e-9;
  if (!before && !after) failed.push_back("[a', b'] is not inside [a, c] or [d, b]");
  const double K = rho(gamma, a, b);
  if (failed.empty() && rho(gamma, a_prime, b_prime) < K * (1.0 - 1e-12)) {
    failed.push_back("rho(a', b') < rho(a, b)");
  }
  if (!failed.empty()) {
    std::string msg = "surgery preconditions failed:";
    for (const std::string& f : failed) msg += " " + f + ";";
    throw Error(msg);
  }

  const double spacing = (b - a) / static_cast<double>(gamma.size() - 1);
  const double n = static_cast<double>(N0 / 2);
  double turn = 0.0;
  CurveBuilder out;
  if (before) {
    const DiskPoint start = gamma.at(a_prime);
    auto f = [&](double t) { return dist(start, gamma.at(t)) - K; };
    const double b2 = f(b_prime) <= 0.0 ? b_prime : bisect(f, a_prime, b_prime);
    turn = b2;
    out.copy(gamma, a, a_prime, 0.0);
    out.append(connect(L, start, gamma.at(b2), a_prime, b2 + n, spacing, tol_grad));
    out.copy(gamma, b2, c, n);
    out.append(connect(L, gamma.at(c), gamma.at(d), c + n, d, spacing, tol_grad));
    out.copy(gamma, d, b, 0.0);
  } else {
    const DiskPoint end = gamma.at(b_prime);
    auto g = [&](double t) { return K - dist(gamma.at(t), end); };
    const double a2 = g(a_prime) <= 0.0 ? a_prime : bisect(g, a_prime, b_prime);
    turn = a2;
    out.copy(gamma, a, c, 0.0);
    out.append(connect(L, gamma.at(c), gamma.at(d), c, d - n, spacing, tol_grad));
    out.copy(gamma, d, a2, -n);
    out.append(connect(L, gamma.at(a2), end, a2 - n, b_prime, spacing, tol_grad));
    out.copy(gamma, b_prime, b, 0.0);
  }
  out.times.back() = b;
  SampledCurve star(std::move(out.times), std::move(out.points));
  const double a_gamma = action(L, gamma);
  const double a_star = action(L, star);
  return {std::move(star), a_gamma, a_star, a_gamma - a_star, turn, static_cast<int>(N0 / 2), !before};
}

}  // namespace hypervar
