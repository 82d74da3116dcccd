// Quasi-geodesic checks and fits, the displacement constant ledger, the
// shadowing experiment and the shortcut-surgery comparison.
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "hypervar/core.hpp"
#include "hypervar/lagrangian.hpp"
#include "hypervar/minimizer.hpp"

namespace hypervar {

/// The pair of sample times binding a quasi-geodesic inequality.
struct QGPair {
  double c = 0.0;
  double d = 0.0;
  /// -1: lower bound (too slow), +1: upper bound (too fast), 0: no pair.
  int side = 0;
};

struct QGCheck {
  bool ok = true;
  QGPair worst;
  /// Largest signed violation; <= 0 when ok.
  double violation = 0.0;
};

/// Tests lambda^-1 (d - c) - eps <= dist(c(c), c(d)) <= lambda (d - c) + eps
/// over all pairs of samples taken every `stride` samples.
QGCheck qg_check(const SampledCurve& c, double lambda, double epsilon, std::size_t stride = 1);

struct QGFit {
  double lambda = 1.0;
  double epsilon = 0.0;
  QGPair worst_pair;
};

/// Minimal epsilon for every grid lambda, then the lambda with the smallest
/// epsilon (ties go to the smaller lambda).
QGFit qg_fit(const SampledCurve& c, const std::vector<double>& lambda_grid, std::size_t stride = 1);

/// 1, 1.25, ..., 4.
std::vector<double> default_lambda_grid();

// --- constant ledger ---------------------------------------------------------

struct PropConstants {
  double C = 0.5;
  double m = 0.0;
  double K0 = 0.0;
  double K = 0.0;
  double K_prime = 0.0;
  double K_dprime = 0.0;
  double C_Kmax_at_K_dprime = 0.0;
  int N0 = 0;
  double k_dprime = 0.0;
  double lambda = 1.0;
  double epsilon = 0.0;
  /// Empirical shadowing constant; filled in by experiments.
  std::optional<double> kappa;
};

/// K0 = 28 m / C with m = min over K of C_K_max.
double threshold_K0(const ActionBoundLedger& ledger);
/// The even N0 with K/K' <= N0/2 < K/K' + 1.
int n0_for(double K, double K_prime);
/// k'' = C K'^2 / (4 C_max(K'')).
double k_dprime_for(double C, double K_prime, double C_Kmax_at_K_dprime);
/// lambda = max{K'', 1/k'', 1}.
double lambda_for(double K_dprime, double k_dprime);
/// epsilon = N0 / lambda.
double epsilon_for(int N0, double lambda);
/// Largest K / 2^j (j >= 1) with 7 C_max(2 K') < C K / 4.
double choose_K_prime(const ActionBoundLedger& ledger, double K);

/// Full ledger for displacement K with the measured speed bound K''.
/// Throws when K <= K0.
PropConstants compute_constants(const ActionBoundLedger& ledger, double K, double K_dprime);

/// Largest segment speed over the curves, times 1.1.
double measure_K_dprime(const std::vector<SampledCurve>& curves);

// --- shadowing experiment ----------------------------------------------------

struct ShadowOptions {
  int nodes_per_unit = 16;
  double tol_grad = 1e-10;
  int restarts = 0;
  int max_iterations = 200;
  std::uint64_t seed = 0;
  std::vector<double> lambda_grid = default_lambda_grid();
  /// Largest allowed hyperbolic distance of an endpoint from the disk center.
  double horizon_radius = 25.0;
};

struct WindowSpeeds {
  double min = 0.0;
  double max = 0.0;
  std::size_t count = 0;
};

/// rho over all sample pairs whose time gap is an integer >= min_length
/// (up to 1e-9); count = 0 when there is none.
WindowSpeeds window_speeds(const SampledCurve& c, double min_length);

struct ShadowReport {
  double N = 0.0;
  double K = 0.0;
  double chord_hausdorff = 0.0;
  /// Windows of length >= N0.
  WindowSpeeds long_windows;
  /// Integer windows of length >= 1.
  WindowSpeeds unit_windows;
  double lambda_fit = 1.0;
  double epsilon_fit = 0.0;
  BoundaryPoint endpoint_minus;
  BoundaryPoint endpoint_plus;
  double action = 0.0;
  double grad_norm = 0.0;
  bool converged = false;
  bool restarts_agree = true;
  /// gamma_N(0) and its distance to Gamma(0).
  DiskPoint midpoint;
  double midpoint_offset = 0.0;
  std::optional<SampledCurve> curve;
};

struct ShadowExperiment {
  PropConstants constants;
  std::vector<ShadowReport> reports;
};

/// Largest N with Gamma(+-K N) inside the numerical horizon.
double max_safe_N(const Geodesic& gamma, double K, double horizon_radius = 25.0);

/// One experiment run: solve on [-N, N], Hausdorff distance, quasi-geodesic
/// fit and unit-window speeds. Long-window speeds are left empty.
ShadowReport shadow_run(const MechanicalLagrangian& L, const Geodesic& gamma, double K, double N,
                        const ShadowOptions& opts);

/// Measures K'' on the runs, computes the ledger and the long-window speeds.
ShadowExperiment finalize_shadow(const MechanicalLagrangian& L, double K, std::vector<ShadowReport> reports);

/// Solves the boundary-value problems on [-N, N] from Gamma(-K N) to
/// Gamma(K N), then fills the ledger (K'' measured on the solutions) and the
/// window statistics.
ShadowExperiment shadow_experiment(const MechanicalLagrangian& L, const Geodesic& gamma, double K,
                                   const std::vector<double>& N_list, const ShadowOptions& opts = {});

/// min over sample windows longer than N0 of curve_length / duration; nullopt
/// when the curve has no such window.
std::optional<double> min_length_ratio(const SampledCurve& c, double N0);

// --- shortcut surgery --------------------------------------------------------

struct SurgeryResult {
  SampledCurve gamma_star;
  double action_gamma = 0.0;
  double action_star = 0.0;
  /// A(gamma) - A(gamma*).
  double action_diff = 0.0;
  double b_dprime = 0.0;
  int n = 0;
  /// True when the fast unit interval lies after d.
  bool after_window = false;
};

/// Start of the first unit interval [a', a'+1] at integer offset from the
/// curve start, outside [c, d], with rho > rho(a, b).
std::optional<double> find_fast_interval(const SampledCurve& gamma, double c, double d);

/// Replaces gamma by the five-piece competitor that slows down near [a', b']
/// and reuses the time saved on [c, d]. The connecting pieces are solved as
/// boundary-value problems at gamma's node density.
SurgeryResult surgery_comparison(const MechanicalLagrangian& L, const SampledCurve& gamma, double a_prime,
                                 double b_prime, double c, double d, double tol_grad = 1e-10);

}  // namespace hypervar
