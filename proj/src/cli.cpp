#include "hypervar/cli.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "hypervar/core.hpp"
#include "hypervar/fuchsian.hpp"
#include "hypervar/io.hpp"
#include "hypervar/lagrangian.hpp"
#include "hypervar/minimizer.hpp"
#include "hypervar/qg_analysis.hpp"
#include "hypervar/semiconjugacy.hpp"

namespace hypervar::cli {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"geom", "minimize", "shadow", "qg", "constants", "twist", "semiconj"};
  return names;
}

namespace {

// ---------------------------------------------------------------------------
// Strict JSON field access

/// A JSON object whose keys must all be consumed; records resolved values
/// (defaults included) for the dry-run ledger.
class Block {
 public:
  Block(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  double number(const std::string& key, std::optional<double> def = std::nullopt) {
    const json* v = find(key, def.has_value());
    const double x = v ? as_number(*v, key) : *def;
    resolved[key] = x;
    return x;
  }

  int integer(const std::string& key, std::optional<int> def = std::nullopt) {
    const json* v = find(key, def.has_value());
    int x = def.value_or(0);
    if (v) {
      if (!v->is_number_integer()) throw ConfigError(field(key) + ": expected an integer");
      x = v->get<int>();
    }
    resolved[key] = x;
    return x;
  }

  std::string string(const std::string& key, std::optional<std::string> def = std::nullopt) {
    const json* v = find(key, def.has_value());
    std::string x = def.value_or("");
    if (v) {
      if (!v->is_string()) throw ConfigError(field(key) + ": expected a string");
      x = v->get<std::string>();
    }
    resolved[key] = x;
    return x;
  }

  std::vector<double> numbers(const std::string& key, std::optional<std::vector<double>> def = std::nullopt) {
    const json* v = find(key, def.has_value());
    std::vector<double> x = def.value_or(std::vector<double>{});
    if (v) {
      if (!v->is_array() || v->empty()) throw ConfigError(field(key) + ": expected a nonempty array of numbers");
      x.clear();
      for (const json& e : *v) x.push_back(as_number(e, key));
    }
    resolved[key] = x;
    return x;
  }

  DiskPoint point(const std::string& key) {
    const json* v = find(key, false);
    const DiskPoint p = to_point(*v, field(key));
    resolved[key] = {p.x(), p.y()};
    return p;
  }

  /// Raw access for nested structures; the caller validates.
  const json& raw(const std::string& key) {
    const json* v = find(key, false);
    resolved[key] = *v;
    return *v;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) throw ConfigError(field(it.key()) + ": unknown key");
    }
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  static DiskPoint to_point(const json& v, const std::string& where) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      throw ConfigError(where + ": expected [x, y]");
    }
    try {
      return DiskPoint(v[0].get<double>(), v[1].get<double>());
    } catch (const Error& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }

  json resolved = json::object();

 private:
  const json* find(const std::string& key, bool optional) {
    used_.insert(key);
    if (!j_.contains(key)) {
      if (optional) return nullptr;
      throw ConfigError(field(key) + ": missing required field");
    }
    return &j_.at(key);
  }

  double as_number(const json& v, const std::string& key) const {
    if (!v.is_number()) throw ConfigError(field(key) + ": expected a number");
    return v.get<double>();
  }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

// ---------------------------------------------------------------------------
// Shared context

struct SolverConfig {
  int nodes = 64;
  double tol_grad = 1e-10;
  int restarts = 0;
  int max_iterations = 200;
};

struct Context {
  std::shared_ptr<const Surface> surface;
  std::shared_ptr<const EquivariantPotential> potential;
  std::shared_ptr<const MechanicalLagrangian> lagrangian;
  SolverConfig solver;
  std::uint64_t seed = 0;
  fs::path out_dir;
  int threads = 1;
  std::istream* in = nullptr;
  std::ostream* out = nullptr;
};

std::string fmt(double x) { return format_double(x); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path.string());
  os << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json point_json(const DiskPoint& p) { return {p.x(), p.y()}; }

/// Runs f(0..n-1) on up to `threads` workers; results must be stored by index.
/// The first failing index (in index order) is rethrown.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& f) {
  std::vector<std::exception_ptr> errors(n);
  auto body = [&](std::size_t i) {
    try {
      f(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) body(i);
      });
    }
    for (std::thread& t : pool) t.join();
  }
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

json constants_json(const PropConstants& c) {
  json j;
  j["C"] = c.C;
  j["m"] = c.m;
  j["K0"] = c.K0;
  j["K"] = c.K;
  j["K_prime"] = c.K_prime;
  j["K_dprime"] = c.K_dprime;
  j["C_Kmax_at_K_dprime"] = c.C_Kmax_at_K_dprime;
  j["N0"] = c.N0;
  j["k_dprime"] = c.k_dprime;
  j["lambda"] = c.lambda;
  j["epsilon"] = c.epsilon;
  j["kappa"] = c.kappa ? json(*c.kappa) : json(nullptr);
  return j;
}

json windows_json(const WindowSpeeds& w) {
  if (w.count == 0) return {{"count", 0}, {"min", nullptr}, {"max", nullptr}};
  return {{"count", w.count}, {"min", w.min}, {"max", w.max}};
}

/// A prepared subcommand: the resolved experiment ledger plus the action.
struct Prepared {
  json experiment;
  std::function<int()> execute;
};

// ---------------------------------------------------------------------------
// geom

int run_geom(Context& ctx) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(*ctx.in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::string op;
    if (!(ss >> op) || op[0] == '#') continue;
    std::vector<double> a;
    for (double x; ss >> x;) a.push_back(x);
    if (!ss.eof()) throw ConfigError("geom line " + std::to_string(lineno) + ": bad number");
    auto need = [&](std::size_t n) {
      if (a.size() != n) {
        throw ConfigError("geom line " + std::to_string(lineno) + ": '" + op + "' takes " + std::to_string(n) +
                          " numbers");
      }
    };
    std::ostream& o = *ctx.out;
    if (op == "dist") {
      need(4);
      o << "dist," << fmt(dist(DiskPoint(a[0], a[1]), DiskPoint(a[2], a[3]))) << "\n";
    } else if (op == "exp") {
      need(4);
      const DiskPoint p = exp_map(TangentVec(DiskPoint(a[0], a[1]), Complex{a[2], a[3]}));
      o << "exp," << fmt(p.x()) << "," << fmt(p.y()) << "\n";
    } else if (op == "log") {
      need(4);
      const TangentVec v = log_map(DiskPoint(a[0], a[1]), DiskPoint(a[2], a[3]));
      o << "log," << fmt(v.v.real()) << "," << fmt(v.v.imag()) << "\n";
    } else if (op == "geodesic") {
      need(4);
      const Geodesic g = geodesic_through(DiskPoint(a[0], a[1]), DiskPoint(a[2], a[3]));
      o << "geodesic," << fmt(g.xi_minus().theta()) << "," << fmt(g.xi_plus().theta()) << "\n";
    } else if (op == "project") {
      need(6);
      const Geodesic g = geodesic_through(DiskPoint(a[0], a[1]), DiskPoint(a[2], a[3]));
      const Projection pr = project_to_geodesic(g, DiskPoint(a[4], a[5]));
      o << "project," << fmt(pr.foot.x()) << "," << fmt(pr.foot.y()) << "," << fmt(pr.s) << "\n";
    } else if (op == "reduce") {
      need(2);
      const auto [p, w] = reduce_to_domain(*ctx.surface, DiskPoint(a[0], a[1]));
      o << "reduce," << fmt(p.x()) << "," << fmt(p.y()) << ",";
      for (std::size_t k = 0; k < w.size(); ++k) o << (k ? " " : "") << w[k];
      o << "\n";
    } else {
      throw ConfigError("geom line " + std::to_string(lineno) + ": unknown operation '" + op + "'");
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------
// minimize

Prepared prepare_minimize(Context& ctx, Block& exp) {
  BVProblem prob;
  prob.x_a = exp.point("x_a");
  prob.x_b = exp.point("x_b");
  prob.a = exp.number("a", 0.0);
  prob.b = exp.number("b", 1.0);
  const int samples = exp.integer("subsegment_samples", 0);
  exp.finish();
  if (!(prob.b > prob.a)) throw ConfigError("experiment.b: must exceed experiment.a");
  if (ctx.solver.nodes < 8) throw ConfigError("solver.nodes: must be at least 8");
  prob.n = ctx.solver.nodes;
  prob.tol_grad = ctx.solver.tol_grad;
  prob.restarts = ctx.solver.restarts;
  prob.max_iterations = ctx.solver.max_iterations;
  prob.seed = ctx.seed;
  return {exp.resolved, [&ctx, prob, samples] {
            const MechanicalLagrangian& L = *ctx.lagrangian;
            const MinimizeResult r = solve_bvp(L, prob);
            json j;
            j["endpoints"] = {point_json(prob.x_a), point_json(prob.x_b)};
            j["interval"] = {prob.a, prob.b};
            j["duration"] = prob.b - prob.a;
            j["n"] = prob.n;
            j["action"] = r.action;
            j["grad_norm"] = r.grad_norm;
            j["tolerance_used"] = r.tolerance_used;
            j["el_residual"] = r.el_residual;
            j["restarts_agree"] = r.restarts_agree;
            j["converged"] = r.converged;
            j["iterations"] = r.iterations;
            if (samples > 0) {
              const SubsegmentReport rep = verify_subsegment_minimality(L, r.curve, static_cast<std::size_t>(samples),
                                                                        ctx.seed, prob.tol_grad);
              j["subsegment"] = {{"samples", samples}, {"max_excess", rep.max_excess}, {"certified", rep.certified}};
            }
            write_json(ctx.out_dir / "minimize.json", j);
            write_curve_csv((ctx.out_dir / "minimize_curve.csv").string(), r.curve);
            if (!r.converged) throw ConvergenceError("boundary-value solve did not converge");
            return 0;
          }};
}

// ---------------------------------------------------------------------------
// shadow

Prepared prepare_shadow(Context& ctx, Block& exp) {
  const double K = exp.number("K");
  const std::vector<double> N_list = exp.numbers("N_list");
  const std::vector<double> ends = exp.numbers("gamma");
  ShadowOptions so;
  so.nodes_per_unit = exp.integer("nodes_per_unit", so.nodes_per_unit);
  so.lambda_grid = exp.numbers("lambda_grid", so.lambda_grid);
  so.horizon_radius = exp.number("horizon_radius", so.horizon_radius);
  exp.finish();
  if (ends.size() != 2) throw ConfigError("experiment.gamma: expected [theta_minus, theta_plus]");
  if (!(K > 0.0)) throw ConfigError("experiment.K: must be positive");
  for (double N : N_list) {
    if (!(N > 0.0)) throw ConfigError("experiment.N_list: entries must be positive");
  }
  if (so.nodes_per_unit < 1) throw ConfigError("experiment.nodes_per_unit: must be positive");
  so.tol_grad = ctx.solver.tol_grad;
  so.restarts = ctx.solver.restarts;
  so.max_iterations = ctx.solver.max_iterations;
  so.seed = ctx.seed;
  const Geodesic gamma{BoundaryPoint(ends[0]), BoundaryPoint(ends[1])};
  const double K0 = threshold_K0(make_ledger(*ctx.lagrangian));
  if (!(K > K0)) throw ConfigError("experiment.K: K = " + fmt(K) + " is below the K0 threshold (K0 = " + fmt(K0) + ")");
  json resolved = exp.resolved;
  resolved["K0"] = K0;
  resolved["max_safe_N"] = max_safe_N(gamma, K, so.horizon_radius);
  return {resolved, [&ctx, K, N_list, so, gamma] {
            const MechanicalLagrangian& L = *ctx.lagrangian;
            std::vector<std::optional<ShadowReport>> runs(N_list.size());
            parallel_for(N_list.size(), ctx.threads,
                         [&](std::size_t i) { runs[i] = shadow_run(L, gamma, K, N_list[i], so); });
            std::vector<ShadowReport> reports;
            for (auto& r : runs) reports.push_back(std::move(*r));
            const ShadowExperiment ex = finalize_shadow(L, K, std::move(reports));

            std::string csv = "N,K,chord_hausdorff,speed_min,speed_max,lambda_fit,epsilon_fit\n";
            json runs_json = json::array();
            bool all_converged = true;
            std::optional<DiskPoint> prev_mid;
            for (const ShadowReport& r : ex.reports) {
              const bool any = r.long_windows.count > 0;
              csv += fmt(r.N) + "," + fmt(r.K) + "," + fmt(r.chord_hausdorff) + "," +
                     (any ? fmt(r.long_windows.min) : "nan") + "," + (any ? fmt(r.long_windows.max) : "nan") + "," +
                     fmt(r.lambda_fit) + "," + fmt(r.epsilon_fit) + "\n";
              json rj;
              rj["N"] = r.N;
              rj["converged"] = r.converged;
              rj["grad_norm"] = r.grad_norm;
              rj["action"] = r.action;
              rj["restarts_agree"] = r.restarts_agree;
              rj["chord_hausdorff"] = r.chord_hausdorff;
              rj["long_windows"] = windows_json(r.long_windows);
              rj["unit_windows"] = windows_json(r.unit_windows);
              rj["endpoint_angles"] = {r.endpoint_minus.theta(), r.endpoint_plus.theta()};
              rj["midpoint"] = point_json(r.midpoint);
              rj["midpoint_offset"] = r.midpoint_offset;
              rj["midpoint_shift_from_previous"] = prev_mid ? json(dist(*prev_mid, r.midpoint)) : json(nullptr);
              prev_mid = r.midpoint;
              runs_json.push_back(rj);
              all_converged = all_converged && r.converged;
              write_curve_csv((ctx.out_dir / ("shadow_curve_N" + fmt(r.N) + ".csv")).string(), *r.curve);
            }
            write_text(ctx.out_dir / "shadow.csv", csv);
            json summary;
            summary["constants"] = constants_json(ex.constants);
            summary["runs"] = runs_json;
            write_json(ctx.out_dir / "shadow_summary.json", summary);
            if (!all_converged) throw ConvergenceError("a shadowing run did not converge");
            return 0;
          }};
}

// ---------------------------------------------------------------------------
// qg

Prepared prepare_qg(Context& ctx, Block& exp) {
  const std::string path = exp.string("curve");
  const std::vector<double> grid = exp.numbers("lambda_grid", default_lambda_grid());
  const int stride = exp.integer("stride", 1);
  std::optional<std::pair<double, double>> check;
  if (exp.has("lambda") || exp.has("epsilon")) check = std::pair{exp.number("lambda"), exp.number("epsilon")};
  exp.finish();
  if (stride < 1) throw ConfigError("experiment.stride: must be positive");
  for (double l : grid) {
    if (!(l >= 1.0)) throw ConfigError("experiment.lambda_grid: values must be >= 1");
  }
  if (check && (!(check->first >= 1.0) || !(check->second >= 0.0))) {
    throw ConfigError("experiment.lambda/epsilon: need lambda >= 1 and epsilon >= 0");
  }
  return {exp.resolved, [&ctx, path, grid, stride, check] {
            SampledCurve c = [&] {
              try {
                return read_curve_csv(path);
              } catch (const Error& e) {
                throw ConfigError(std::string("experiment.curve: ") + e.what());
              }
            }();
            const QGFit fit = qg_fit(c, grid, static_cast<std::size_t>(stride));
            json j;
            j["samples"] = c.size();
            j["fit"] = {{"lambda", fit.lambda},
                        {"epsilon", fit.epsilon},
                        {"worst_pair", {fit.worst_pair.c, fit.worst_pair.d, fit.worst_pair.side}}};
            if (check) {
              const QGCheck q = qg_check(c, check->first, check->second, static_cast<std::size_t>(stride));
              j["check"] = {{"lambda", check->first},
                            {"epsilon", check->second},
                            {"ok", q.ok},
                            {"violation", q.violation},
                            {"worst_pair", {q.worst.c, q.worst.d, q.worst.side}}};
            }
            write_json(ctx.out_dir / "qg.json", j);
            *ctx.out << j.dump(2) << "\n";
            return 0;
          }};
}

// ---------------------------------------------------------------------------
// constants

Prepared prepare_constants(Context& ctx, Block& exp) {
  const double K = exp.number("K");
  const double K_dprime = exp.number("K_dprime");
  std::optional<double> K_prime, C_override;
  if (exp.has("K_prime")) K_prime = exp.number("K_prime");
  if (exp.has("C_Kmax_at_K_dprime")) C_override = exp.number("C_Kmax_at_K_dprime");
  exp.finish();
  if (!(K > 0.0)) throw ConfigError("experiment.K: must be positive");
  if (!(K_dprime > 0.0)) throw ConfigError("experiment.K_dprime: must be positive");
  if (K_prime && !(*K_prime > 0.0 && *K_prime < K)) throw ConfigError("experiment.K_prime: need 0 < K_prime < K");
  if (C_override && !K_prime) throw ConfigError("experiment.C_Kmax_at_K_dprime: only allowed with K_prime");
  if (C_override && !(*C_override > 0.0)) throw ConfigError("experiment.C_Kmax_at_K_dprime: must be positive");
  if (!K_prime) {
    const double K0 = threshold_K0(make_ledger(*ctx.lagrangian));
    if (!(K > K0)) {
      throw ConfigError("experiment.K: K = " + fmt(K) + " is below the K0 threshold (K0 = " + fmt(K0) +
                        "); give K_prime for formula mode");
    }
  }
  return {exp.resolved, [&ctx, K, K_dprime, K_prime, C_override] {
            const ActionBoundLedger ledger = make_ledger(*ctx.lagrangian);
            json j;
            j["V_min"] = ledger.V_min;
            j["average_action_window"] = {ledger.C_K_min(K) * K, ledger.C_K_max(K) * K};
            if (!K_prime) {
              j["mode"] = "ledger";
              j["constants"] = constants_json(compute_constants(ledger, K, K_dprime));
            } else {
              // Formula mode: evaluate the formulas at the given K' and report
              // which standing conditions the inputs satisfy instead of failing.
              PropConstants pc;
              pc.C = ledger.C;
              pc.m = ledger.min_C_K_max();
              pc.K0 = threshold_K0(ledger);
              pc.K = K;
              pc.K_prime = *K_prime;
              pc.K_dprime = K_dprime;
              pc.C_Kmax_at_K_dprime = C_override.value_or(ledger.C_K_max(K_dprime));
              pc.N0 = n0_for(K, *K_prime);
              pc.k_dprime = k_dprime_for(pc.C, pc.K_prime, pc.C_Kmax_at_K_dprime);
              pc.lambda = lambda_for(K_dprime, pc.k_dprime);
              pc.epsilon = epsilon_for(pc.N0, pc.lambda);
              j["mode"] = "formula";
              j["constants"] = constants_json(pc);
              j["conditions"] = {
                  {"K_above_K0", K > pc.K0},
                  {"K_prime_admissible", 7.0 * ledger.C_K_max(2.0 * *K_prime) < ledger.C * K / 4.0},
                  {"C_Kmax_matches_potential", pc.C_Kmax_at_K_dprime == ledger.C_K_max(K_dprime)}};
            }
            write_json(ctx.out_dir / "constants.json", j);
            *ctx.out << j.dump(2) << "\n";
            return 0;
          }};
}

// ---------------------------------------------------------------------------
// twist

Prepared prepare_twist(Context& ctx, Block& exp) {
  const std::string mode = exp.string("mode", "orbit");
  if (mode == "orbit") {
    const DiskPoint x0 = exp.point("x0");
    const std::vector<double> p0 = exp.numbers("p0");
    const int count = exp.integer("count", 16);
    exp.finish();
    if (p0.size() != 2) throw ConfigError("experiment.p0: expected [px, py] in the orthonormal frame");
    if (count < 1) throw ConfigError("experiment.count: must be positive");
    return {exp.resolved, [&ctx, x0, p0, count] {
              const EquivariantPotential& V = *ctx.potential;
              std::string csv = "k,x,y,px,py\n";
              DiskPoint x = x0;
              TangentVec p = from_orthonormal(x0, Complex{p0[0], p0[1]});
              for (int k = 0; k < count; ++k) {
                const Complex u = to_orthonormal(p);
                csv += std::to_string(k) + "," + fmt(x.x()) + "," + fmt(x.y()) + "," + fmt(u.real()) + "," +
                       fmt(u.imag()) + "\n";
                if (k + 1 < count) {
                  const TwistPoint next = twist_step(V, x, p);
                  x = next.X;
                  p = next.P;
                }
              }
              write_text(ctx.out_dir / "twist.csv", csv);
              write_json(ctx.out_dir / "twist.json", {{"mode", "orbit"}, {"count", count}});
              return 0;
            }};
  }
  if (mode != "minimize_W") throw ConfigError("experiment.mode: expected \"orbit\" or \"minimize_W\"");
  const DiskPoint first = exp.point("first");
  const DiskPoint last = exp.point("last");
  const int length = exp.integer("length");
  const double tol = exp.number("tol", 1e-12);
  exp.finish();
  if (length < 2) throw ConfigError("experiment.length: must be at least 2");
  return {exp.resolved, [&ctx, first, last, length, tol] {
            const TwistResult r =
                minimize_W(*ctx.potential, first, last, length, {tol, ctx.solver.max_iterations, 1e-5});
            std::string csv = "k,x,y,px,py\n";
            for (std::size_t k = 0; k < r.sequence.points.size(); ++k) {
              const DiskPoint& x = r.sequence.points[k];
              const Complex p = to_orthonormal((*r.sequence.momenta)[k]);
              csv += std::to_string(k) + "," + fmt(x.x()) + "," + fmt(x.y()) + "," + fmt(p.real()) + "," +
                     fmt(p.imag()) + "\n";
            }
            write_text(ctx.out_dir / "twist.csv", csv);
            write_json(ctx.out_dir / "twist.json", {{"mode", "minimize_W"},
                                                    {"length", length},
                                                    {"W", r.W},
                                                    {"grad_sup", r.grad_sup},
                                                    {"replay_error", r.replay_error},
                                                    {"converged", r.converged}});
            if (!r.converged) throw ConvergenceError("W minimization did not converge");
            return 0;
          }};
}

// ---------------------------------------------------------------------------
// semiconj

struct OrbitStart {
  DiskPoint position;
  Complex velocity;  // orthonormal frame
};

struct OrbitAnalysis {
  std::optional<OrbitRecord> orbit;
  std::optional<ShadowTrack> track;
  double additivity = 0.0;
  double subadditivity = 0.0;
  DStarEstimate dstar;
};

Prepared prepare_semiconj(Context& ctx, Block& exp) {
  const json& list = exp.raw("orbits");
  if (!list.is_array() || list.empty()) throw ConfigError("experiment.orbits: expected a nonempty array");
  std::vector<OrbitStart> starts;
  for (std::size_t i = 0; i < list.size(); ++i) {
    Block ob(list[i], "experiment.orbits[" + std::to_string(i) + "]");
    const DiskPoint p = ob.point("position");
    const std::vector<double> v = ob.numbers("velocity");
    ob.finish();
    if (v.size() != 2) throw ConfigError(ob.field("velocity") + ": expected [u, v]");
    starts.push_back({p, Complex{v[0], v[1]}});
  }
  const double T_max = exp.number("T_max");
  const double sample_dt = exp.number("sample_dt", 1.0 / 32.0);
  const double alpha_step = exp.number("alpha_step", 0.25);
  const double alpha_budget = exp.number("alpha_budget", 64.0);
  const std::vector<double> betas = exp.numbers("beta_grid", std::vector<double>{0.25, 0.5, 1.0, 2.0});
  std::optional<double> K;
  if (exp.has("K")) K = exp.number("K");
  const int sub_samples = exp.integer("subsegment_samples", 8);
  const double d_tol = exp.number("D_tolerance", 1e-2);
  const int add_samples = exp.integer("additivity_samples", 1000);
  exp.finish();
  if (!(T_max > 0.0) || !(sample_dt > 0.0)) throw ConfigError("experiment.T_max/sample_dt: must be positive");
  if (!(alpha_step > 0.0) || !(alpha_budget >= alpha_step)) {
    throw ConfigError("experiment.alpha_step/alpha_budget: need 0 < alpha_step <= alpha_budget");
  }
  if (sub_samples < 0 || add_samples < 0) throw ConfigError("experiment: sample counts must be non-negative");

  return {exp.resolved, [&ctx, starts, T_max, sample_dt, alpha_step, alpha_budget, betas, K, sub_samples, d_tol,
                         add_samples] {
            const MechanicalLagrangian& L = *ctx.lagrangian;
            std::vector<OrbitAnalysis> res(starts.size());
            parallel_for(starts.size(), ctx.threads, [&](std::size_t i) {
              const ELState s{starts[i].position, from_orthonormal(starts[i].position, starts[i].velocity), 0.0};
              OrbitAnalysis& a = res[i];
              a.orbit = el_orbit(L, s, T_max, sample_dt);
              a.track.emplace(*a.orbit);
              a.additivity = additivity_residual(*a.track, static_cast<std::size_t>(add_samples), ctx.seed + i);
              a.subadditivity = subadditivity_residual(*a.orbit, static_cast<std::size_t>(add_samples), ctx.seed + i);
              a.dstar = cesaro_Dstar(*a.orbit, 0.0, d_tol);
            });
            std::vector<const ShadowTrack*> tracks;
            std::vector<SampledCurve> curves;
            for (const OrbitAnalysis& a : res) {
              tracks.push_back(&*a.track);
              curves.push_back(a.orbit->trajectory);
            }
            const AlphaChoice alpha = choose_alpha(tracks, alpha_step, alpha_budget);

            json flags_note = nullptr;
            std::optional<PropConstants> pc;
            if (K) {
              try {
                pc = compute_constants(make_ledger(L), *K, measure_K_dprime(curves));
              } catch (const Error& e) {
                flags_note = e.what();
              }
            }
            json orbits = json::array();
            for (std::size_t i = 0; i < res.size(); ++i) {
              const OrbitAnalysis& a = res[i];
              const MonotonicityReport mono = monotonicity_check(*a.track, alpha.alpha, betas);
              double tele = 0.0;
              for (double beta : betas) {
                tele = std::max(tele, telescoping_residual(*a.track, alpha.alpha, a.track->t_begin(), beta));
              }
              json oj;
              oj["start"] = {{"position", point_json(starts[i].position)},
                             {"velocity", {starts[i].velocity.real(), starts[i].velocity.imag()}}};
              oj["gamma_endpoints"] = {a.track->gamma().xi_minus().theta(), a.track->gamma().xi_plus().theta()};
              oj["estimator_delta"] = a.track->asymptote().estimator_delta;
              oj["min_sigma_bar_increment"] = mono.min_increment;
              oj["min_raw_sigma_increment"] = mono.raw_min_increment;
              oj["telescoping_residual"] = tele;
              oj["additivity_residual"] = a.additivity;
              oj["subadditivity_residual"] = a.subadditivity;
              oj["D_star"] = {{"estimate", a.dstar.estimate},
                              {"halfwidth", a.dstar.halfwidth},
                              {"T_max", a.dstar.T_max},
                              {"horizon_too_short", a.dstar.horizon_too_short}};
              if (pc) {
                const QKFlags f = qk_flags(L, *a.orbit, *pc, static_cast<std::size_t>(sub_samples), ctx.seed + i);
                oj["qk_flags"] = {{"minimizer_certificate_at_tolerance", f.minimizer},
                                  {"window_speed", f.window_speed},
                                  {"speed_bound", f.speed_bound}};
              } else {
                oj["qk_flags"] = nullptr;
              }
              orbits.push_back(oj);
              write_curve_csv((ctx.out_dir / ("semiconj_orbit_" + std::to_string(i) + ".csv")).string(),
                              a.orbit->trajectory);
            }
            json j;
            j["alpha"] = {{"value", alpha.alpha}, {"margin", alpha.margin}, {"holdout_margin", alpha.holdout_margin}};
            j["constants"] = pc ? constants_json(*pc) : json(nullptr);
            if (!flags_note.is_null()) j["qk_flags_unavailable"] = flags_note;
            j["orbits"] = orbits;
            write_json(ctx.out_dir / "semiconj.json", j);
            return 0;
          }};
}

// ---------------------------------------------------------------------------

json read_config(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read config " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  const std::string text = ss.str();
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t k = 0; k + 1 < e.byte && k < text.size(); ++k) {
      if (text[k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(path + ":" + std::to_string(line) + ":" + std::to_string(col) + ": invalid JSON");
  }
}

void write_error(const fs::path& dir, const std::string& subcommand, int code, const std::string& kind,
                 const std::string& message) {
  if (dir.empty()) return;
  std::error_code ec;
  fs::create_directories(dir, ec);
  json j;
  j["subcommand"] = subcommand;
  j["exit_code"] = code;
  j["error"] = kind;
  j["message"] = message;
  std::ofstream os(dir / "error.json", std::ios::binary);
  if (os) os << j.dump(2) << "\n";
}

}  // namespace

int run(const RunOptions& opts, std::istream& in, std::ostream& out, std::ostream& err) {
  fs::path out_dir = opts.out_dir ? fs::path(*opts.out_dir) : fs::path();
  try {
    const auto& names = subcommands();
    if (std::find(names.begin(), names.end(), opts.subcommand) == names.end()) {
      throw ConfigError("unknown subcommand '" + opts.subcommand + "'");
    }
    if (opts.threads < 1) throw ConfigError("--threads must be at least 1");

    Context ctx;
    ctx.in = &in;
    ctx.out = &out;
    ctx.threads = opts.threads;
    json ledger;
    ledger["subcommand"] = opts.subcommand;

    const bool need_config = opts.subcommand != "geom";
    if (need_config && opts.config_path.empty()) throw ConfigError("--config is required for " + opts.subcommand);
    const json cfg = opts.config_path.empty() ? json::object() : read_config(opts.config_path);
    Block top(cfg, "");

    const std::string group = top.string("group", "octagon");
    if (group == "octagon") {
      ctx.surface = std::make_shared<const Surface>(build_octagon_group());
    } else if (group == "cyclic-test") {
      ctx.surface = std::make_shared<const Surface>(build_cyclic_test_group());
    } else {
      throw ConfigError("group: expected \"octagon\" or \"cyclic-test\"");
    }

    PotentialSpec spec;
    json pot_ledger = nullptr;
    if (top.has("potential")) {
      Block pb(top.raw("potential"), "potential");
      const json& centers = pb.raw("centers");
      if (!centers.is_array()) throw ConfigError("potential.centers: expected an array of [x, y]");
      for (std::size_t i = 0; i < centers.size(); ++i) {
        spec.centers.push_back(Block::to_point(centers[i], "potential.centers[" + std::to_string(i) + "]"));
      }
      spec.depth = pb.number("depth");
      spec.bump_radius = pb.number("bump_radius", 1.0);
      spec.time_amplitude = pb.number("time_amplitude", 0.0);
      spec.orbit_cutoff = pb.number("orbit_cutoff", required_orbit_cutoff(*ctx.surface, spec));
      pb.finish();
      pot_ledger = pb.resolved;
    }
    try {
      ctx.potential = std::make_shared<const EquivariantPotential>(ctx.surface, spec);
    } catch (const Error& e) {
      throw ConfigError(std::string("potential: ") + e.what());
    }
    ctx.lagrangian = std::make_shared<const MechanicalLagrangian>(ctx.potential);

    json solver_ledger = nullptr;
    if (top.has("solver")) {
      Block sb(top.raw("solver"), "solver");
      ctx.solver.nodes = sb.integer("nodes", ctx.solver.nodes);
      ctx.solver.tol_grad = sb.number("tol_grad", ctx.solver.tol_grad);
      ctx.solver.restarts = sb.integer("restarts", ctx.solver.restarts);
      ctx.solver.max_iterations = sb.integer("max_iterations", ctx.solver.max_iterations);
      sb.finish();
      if (!(ctx.solver.tol_grad > 0.0) || ctx.solver.restarts < 0 || ctx.solver.max_iterations < 1) {
        throw ConfigError("solver: need tol_grad > 0, restarts >= 0, max_iterations >= 1");
      }
    }
    solver_ledger = {{"nodes", ctx.solver.nodes},
                     {"tol_grad", ctx.solver.tol_grad},
                     {"restarts", ctx.solver.restarts},
                     {"max_iterations", ctx.solver.max_iterations}};

    if (top.has("seed")) {
      const json& s = top.raw("seed");
      if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0)) {
        throw ConfigError("seed: expected a non-negative integer");
      }
      ctx.seed = s.get<std::uint64_t>();
    }
    if (opts.seed) ctx.seed = *opts.seed;
    const std::string output = top.string("output", "out");
    if (out_dir.empty()) out_dir = output;
    ctx.out_dir = out_dir;

    static const json empty = json::object();
    const json& exp_json = top.has("experiment") ? top.raw("experiment") : empty;
    top.finish();

    Prepared prepared;
    if (opts.subcommand == "geom") {
      Block exp(exp_json, "experiment");
      exp.finish();
      prepared = {exp.resolved, [&ctx] { return run_geom(ctx); }};
    } else {
      Block exp(exp_json, "experiment");
      if (opts.subcommand == "minimize") prepared = prepare_minimize(ctx, exp);
      if (opts.subcommand == "shadow") prepared = prepare_shadow(ctx, exp);
      if (opts.subcommand == "qg") prepared = prepare_qg(ctx, exp);
      if (opts.subcommand == "constants") prepared = prepare_constants(ctx, exp);
      if (opts.subcommand == "twist") prepared = prepare_twist(ctx, exp);
      if (opts.subcommand == "semiconj") prepared = prepare_semiconj(ctx, exp);
    }

    if (opts.dry_run) {
      ledger["group"] = group;
      ledger["potential"] = pot_ledger;
      ledger["solver"] = solver_ledger;
      ledger["experiment"] = prepared.experiment;
      ledger["seed"] = ctx.seed;
      ledger["output"] = out_dir.string();
      ledger["threads"] = opts.threads;
      out << ledger.dump(2) << "\n";
      return 0;
    }
    if (opts.subcommand != "geom") fs::create_directories(out_dir);
    return prepared.execute();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    write_error(out_dir, opts.subcommand, 1, "config", e.what());
    return 1;
  } catch (const BoundaryOverflow& e) {
    err << "boundary overflow: " << e.what() << "\n";
    write_error(out_dir, opts.subcommand, 2, "boundary_overflow", e.what());
    return 2;
  } catch (const ConvergenceError& e) {
    err << "non-convergence: " << e.what() << "\n";
    write_error(out_dir, opts.subcommand, 2, "non_convergence", e.what());
    return 2;
  } catch (const std::exception& e) {
    err << "numeric failure: " << e.what() << "\n";
    write_error(out_dir, opts.subcommand, 2, "numeric", e.what());
    return 2;
  }
}

}  // namespace hypervar::cli
