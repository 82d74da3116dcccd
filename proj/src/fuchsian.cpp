#include "hypervar/fuchsian.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <unordered_map>

namespace hypervar {

double FundamentalDomain::vertex_euclidean_radius() const { return std::tanh(0.5 * vertex_radius); }

double FundamentalDomain::interior_angle(int k) const {
  const int n = static_cast<int>(vertices.size());
  if (n < 3) throw Error("domain has no vertices");
  const DiskPoint& v = vertices.at(static_cast<std::size_t>(k));
  const DiskPoint& prev = vertices[static_cast<std::size_t>((k + n - 1) % n)];
  const DiskPoint& next = vertices[static_cast<std::size_t>((k + 1) % n)];
  const Complex u1 = log_map(v, prev).v;
  const Complex u2 = log_map(v, next).v;
  return std::fabs(std::arg(u2 / u1));
}

FuchsianGroup::FuchsianGroup(std::vector<Isometry> generators, std::vector<int> inverse_index,
                             Word vertex_cycle, bool cocompact)
    : generators_(std::move(generators)),
      inverse_index_(std::move(inverse_index)),
      vertex_cycle_(std::move(vertex_cycle)),
      cocompact_(cocompact) {
  if (generators_.size() != inverse_index_.size()) throw Error("generator/inverse table mismatch");
}

Isometry FuchsianGroup::element(const Word& w) const {
  Isometry g = Isometry::identity();
  for (int k : w) g = g * generator(k);
  return g;
}

Word FuchsianGroup::inverse_word(const Word& w) const {
  Word r;
  r.reserve(w.size());
  for (auto it = w.rbegin(); it != w.rend(); ++it) r.push_back(inverse_index(*it));
  return r;
}

Word FuchsianGroup::free_reduce(Word w) const {
  Word out;
  out.reserve(w.size());
  for (int k : w) {
    if (!out.empty() && out.back() == inverse_index(k)) {
      out.pop_back();
    } else {
      out.push_back(k);
    }
  }
  return out;
}

double FuchsianGroup::relator_residual() const {
  if (vertex_cycle_.empty()) return 0.0;
  return element(vertex_cycle_).distance_to_identity();
}

namespace {

/// Walks once around vertex 0 of the octagon, crossing sides, and records the
/// side-pairing generators used. The product of the recorded word fixes the
/// tile, so it is the vertex relator.
Word compute_vertex_cycle(const std::vector<Isometry>& gens, const std::vector<DiskPoint>& vertices) {
  const int n = static_cast<int>(vertices.size());
  Word word;
  Isometry h = Isometry::identity();
  int vertex = 0;
  int cross = 0;
  for (int step = 0; step < 4 * n; ++step) {
    word.push_back(cross);
    h = h * gens[static_cast<std::size_t>(cross)];
    const Complex back = gens[static_cast<std::size_t>(cross)].inverse().apply_raw(
        vertices[static_cast<std::size_t>(vertex)].z());
    int found = -1;
    for (int j = 0; j < n; ++j) {
      if (std::abs(vertices[static_cast<std::size_t>(j)].z() - back) < 1e-9) found = j;
    }
    if (found < 0) throw Error("vertex cycle: side pairing does not map vertices to vertices");
    const int arrived = (cross + n / 2) % n;
    const int side_before = (found + n - 1) % n;
    const int side_after = found;
    if (arrived != side_before && arrived != side_after) {
      throw Error("vertex cycle: arrival side is not incident to the vertex");
    }
    vertex = found;
    cross = arrived == side_after ? side_before : side_after;
    if (vertex == 0 && h.distance_to_identity() < 1e-8) return word;
  }
  throw Error("vertex cycle did not close");
}

}  // namespace

Surface build_octagon_group() {
  constexpr int n = 8;
  const double cot8 = 1.0 / std::tan(kPi / 8.0);
  // Regular n-gon with interior angle a: cosh R = cot(pi/n) cot(a/2),
  // cosh r = cos(a/2) / sin(pi/n); here n = 8, a = pi/4.
  const double vertex_radius = std::acosh(cot8 * cot8);
  const double side_distance = std::acosh(cot8);

  FundamentalDomain domain;
  domain.center = DiskPoint::origin();
  domain.sides = n;
  domain.vertex_radius = vertex_radius;
  domain.side_distance = side_distance;
  domain.diameter = 2.0 * vertex_radius;
  domain.compact = true;
  const double re = std::tanh(0.5 * vertex_radius);
  for (int j = 0; j < n; ++j) {
    domain.vertices.emplace_back(std::polar(re, j * kPi / 4.0));
  }

  std::vector<Isometry> gens;
  std::vector<int> inv;
  for (int k = 0; k < n; ++k) {
    // g_k translates across side k (between vertices k and k+1) and maps the
    // opposite side k+4 onto it.
    gens.push_back(Isometry::axial_translation((k + 0.5) * kPi / 4.0, 2.0 * side_distance));
    inv.push_back((k + n / 2) % n);
  }
  Word cycle = compute_vertex_cycle(gens, domain.vertices);
  FuchsianGroup group(std::move(gens), std::move(inv), std::move(cycle), true);
  if (group.vertex_cycle().size() != static_cast<std::size_t>(n)) {
    throw Error("octagon vertex cycle has unexpected length");
  }
  if (group.relator_residual() > 1e-8) throw Error("octagon relator residual too large");
  return Surface{std::move(group), std::move(domain)};
}

Surface build_cyclic_test_group(double translation_length) {
  if (!(translation_length > 0.0)) throw Error("translation length must be positive");
  std::vector<Isometry> gens{Isometry::axial_translation(0.0, translation_length),
                             Isometry::axial_translation(kPi, translation_length)};
  FuchsianGroup group(std::move(gens), {1, 0}, {}, false);
  FundamentalDomain domain;
  domain.center = DiskPoint::origin();
  domain.sides = 2;
  domain.side_distance = 0.5 * translation_length;
  domain.diameter = translation_length;
  domain.compact = false;
  return Surface{std::move(group), std::move(domain)};
}

std::pair<DiskPoint, Word> reduce_to_domain(const Surface& s, const DiskPoint& p, std::size_t max_steps) {
  const FuchsianGroup& g = s.group;
  const DiskPoint& c = s.domain.center;
  DiskPoint cur = p;
  double cur_d = dist(cur, c);
  Word applied;  // in application order
  for (std::size_t step = 0; step < max_steps; ++step) {
    int best = -1;
    double best_d = cur_d;
    DiskPoint best_p = cur;
    for (int k = 0; k < g.generator_count(); ++k) {
      const DiskPoint q = g.generator(k).apply(cur);
      const double d = dist(q, c);
      if (d < best_d - 1e-12) {
        best = k;
        best_d = d;
        best_p = q;
      }
    }
    if (best < 0) {
      std::reverse(applied.begin(), applied.end());
      return {cur, g.free_reduce(std::move(applied))};
    }
    applied.push_back(best);
    cur = best_p;
    cur_d = best_d;
  }
  throw ConvergenceError("reduce_to_domain: no termination within step budget");
}

namespace {

struct CellKey {
  std::int64_t x, y;
  bool operator==(const CellKey& o) const { return x == o.x && y == o.y; }
};
struct CellHash {
  std::size_t operator()(const CellKey& k) const {
    return std::hash<std::int64_t>()(k.x * 73856093LL) ^ std::hash<std::int64_t>()(k.y * 19349663LL);
  }
};

/// Spatial hash of points used to recognise repeated group elements by the
/// image of the domain center.
class PointSet {
 public:
  bool insert(const DiskPoint& p) {
    const CellKey key = cell(p);
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        auto it = cells_.find({key.x + dx, key.y + dy});
        if (it == cells_.end()) continue;
        for (const DiskPoint& q : it->second) {
          if (dist(p, q) < 1e-6) return false;
        }
      }
    }
    cells_[key].push_back(p);
    return true;
  }

 private:
  static CellKey cell(const DiskPoint& p) {
    constexpr double kCell = 1e-7;
    return {static_cast<std::int64_t>(std::floor(p.x() / kCell)),
            static_cast<std::int64_t>(std::floor(p.y() / kCell))};
  }
  std::unordered_map<CellKey, std::vector<DiskPoint>, CellHash> cells_;
};

std::vector<OrbitPoint> cyclic_orbit(const Surface& s, const DiskPoint& reduced, const Word& w,
                                     const DiskPoint& around, double radius, const OrbitOptions& opts) {
  const FuchsianGroup& g = s.group;
  auto point_for = [&](long k) {
    Isometry e = Isometry::identity();
    const Isometry& step = k >= 0 ? g.generator(0) : g.generator(1);
    for (long i = 0; i < std::labs(k); ++i) e = e * step;
    return e.apply(reduced);
  };
  auto word_for = [&](long k) {
    Word word(static_cast<std::size_t>(std::labs(k)), k >= 0 ? 0 : 1);
    word.insert(word.end(), w.begin(), w.end());
    return g.free_reduce(std::move(word));
  };
  // dist(g^k p, around) is unimodal in k; walk downhill first.
  long k = 0;
  double dk = dist(point_for(0), around);
  for (std::size_t n = 0;; ++n) {
    if (n > opts.element_budget) throw Error("orbit budget exceeded");
    const double up = dist(point_for(k + 1), around);
    const double down = dist(point_for(k - 1), around);
    if (up < dk) {
      ++k;
      dk = up;
    } else if (down < dk) {
      --k;
      dk = down;
    } else {
      break;
    }
  }
  std::vector<OrbitPoint> out;
  if (dk > radius) return out;
  long lo = k;
  while (dist(point_for(lo - 1), around) <= radius) {
    --lo;
    if (static_cast<std::size_t>(k - lo) > opts.element_budget) throw Error("orbit budget exceeded");
  }
  long hi = k;
  while (dist(point_for(hi + 1), around) <= radius) {
    ++hi;
    if (static_cast<std::size_t>(hi - lo) > opts.element_budget) throw Error("orbit budget exceeded");
  }
  for (long j = lo; j <= hi; ++j) out.push_back({point_for(j), word_for(j)});
  return out;
}

}  // namespace

std::vector<OrbitPoint> orbit_near(const Surface& s, const DiskPoint& p, const DiskPoint& around,
                                   double radius, const OrbitOptions& opts) {
  if (radius < 0.0) throw Error("orbit radius must be non-negative");
  const auto [reduced, w] = reduce_to_domain(s, p);
  if (!s.domain.compact) return cyclic_orbit(s, reduced, w, around, radius, opts);

  const FuchsianGroup& g = s.group;
  // Every tile met by the segment from `around` to a target orbit point holds
  // an orbit point within radius + diameter of `around`, and consecutive
  // tiles differ by one generator on the right; pruning there is exact.
  const double prune = radius + s.domain.diameter;
  const Word start_word = g.inverse_word(reduce_to_domain(s, around).second);

  struct Node {
    Isometry element;
    Word word;
  };
  std::deque<Node> queue;
  PointSet seen;
  std::vector<OrbitPoint> out;
  queue.push_back({g.element(start_word), start_word});
  seen.insert(queue.front().element.apply(s.domain.center));
  std::size_t visited = 0;
  while (!queue.empty()) {
    Node node = std::move(queue.front());
    queue.pop_front();
    if (++visited > opts.element_budget) throw Error("orbit budget exceeded");
    const DiskPoint q = node.element.apply(reduced);
    const double d = dist(q, around);
    if (d > prune) continue;
    if (d <= radius) {
      Word full = node.word;
      full.insert(full.end(), w.begin(), w.end());
      out.push_back({q, g.free_reduce(std::move(full))});
    }
    for (int k = 0; k < g.generator_count(); ++k) {
      Isometry next = node.element * g.generator(k);
      if (!seen.insert(next.apply(s.domain.center))) continue;
      Word word = node.word;
      word.push_back(k);
      queue.push_back({std::move(next), g.free_reduce(std::move(word))});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// EquivariantPotential

EquivariantPotential::EquivariantPotential(std::shared_ptr<const Surface> surface, PotentialSpec spec)
    : surface_(std::move(surface)), spec_(std::move(spec)) {
  if (!surface_) throw Error("potential needs a surface");
  if (spec_.centers.empty()) return;
  if (!(spec_.depth > 0.0)) throw Error("potential depth must be positive");
  if (!(spec_.bump_radius > 0.0)) throw Error("bump radius must be positive");
  if (!(spec_.time_amplitude >= 0.0 && spec_.time_amplitude < 1.0)) {
    throw Error("time amplitude must lie in [0, 1)");
  }
  for (DiskPoint& c : spec_.centers) c = reduce_to_domain(*surface_, c).first;
  const double need = required_cutoff();
  if (spec_.orbit_cutoff < need) {
    throw Error("orbit cutoff " + std::to_string(spec_.orbit_cutoff) +
                " too small for exact truncation; need at least " + std::to_string(need));
  }
  const double r = spec_.bump_radius;
  const FundamentalDomain& dom = surface_->domain;
  double max_center = 0.0;
  for (const DiskPoint& c : spec_.centers) max_center = std::max(max_center, dist(c, dom.center));
  // Points are reduced into the domain before evaluation; only translates that
  // can reach a reduced point matter.
  const double reach = dom.compact ? dom.vertex_radius : r + max_center;
  for (const DiskPoint& c : spec_.centers) {
    for (const OrbitPoint& op : orbit_near(*surface_, c, dom.center, spec_.orbit_cutoff)) {
      if (dist(op.point, dom.center) <= r + reach) translates_.push_back(op.point);
    }
  }
  for (std::size_t i = 0; i < spec_.centers.size(); ++i) {
    for (std::size_t j = 0; j < spec_.centers.size(); ++j) {
      for (const OrbitPoint& op : orbit_near(*surface_, spec_.centers[j], spec_.centers[i], 2.0 * r)) {
        if (i == j && dist(op.point, spec_.centers[i]) < 1e-9) continue;
        throw Error("potential bumps overlap");
      }
    }
  }
}

EquivariantPotential EquivariantPotential::zero(std::shared_ptr<const Surface> surface) {
  return EquivariantPotential(std::move(surface), PotentialSpec{});
}

double required_orbit_cutoff(const Surface& surface, const PotentialSpec& spec) {
  const FundamentalDomain& dom = surface.domain;
  if (dom.compact) return spec.bump_radius + dom.diameter;
  double max_center = 0.0;
  for (const DiskPoint& c : spec.centers) {
    max_center = std::max(max_center, dist(reduce_to_domain(surface, c).first, dom.center));
  }
  return 2.0 * spec.bump_radius + max_center;
}

double EquivariantPotential::required_cutoff() const { return required_orbit_cutoff(*surface_, spec_); }

double EquivariantPotential::min_value() const {
  return is_zero() ? 0.0 : -spec_.depth * (1.0 + spec_.time_amplitude);
}

double EquivariantPotential::time_factor(double t) const {
  const double tau = t - std::floor(t);
  return 1.0 + spec_.time_amplitude * std::cos(kTwoPi * tau);
}

double EquivariantPotential::value(const DiskPoint& x, double t) const {
  if (is_zero()) return 0.0;
  const DiskPoint xr = reduce_to_domain(*surface_, x).first;
  const double r = spec_.bump_radius;
  double sum = 0.0;
  for (const DiskPoint& q : translates_) {
    const double d = dist(xr, q);
    if (d >= r) continue;
    const double u2 = (d / r) * (d / r);
    const double w = 1.0 - u2;
    sum += w * w * w;
  }
  return -spec_.depth * time_factor(t) * sum;
}

TangentVec EquivariantPotential::gradient(const DiskPoint& x, double t) const {
  if (is_zero()) return TangentVec::zero(x);
  const auto [xr, word] = reduce_to_domain(*surface_, x);
  const double r = spec_.bump_radius;
  Complex g{};
  for (const DiskPoint& q : translates_) {
    const double d = dist(xr, q);
    if (d >= r || d == 0.0) continue;
    const double u = d / r;
    const double w = 1.0 - u * u;
    // d/dd (1 - (d/r)^2)^3 = -6 u (1 - u^2)^2 / r and grad d = -log(x, q) / d.
    const double dphi = -6.0 * u * w * w / r;
    g += dphi * (-log_map(xr, q).v / d);
  }
  g *= -spec_.depth * time_factor(t);
  if (word.empty()) return {x, g};
  // V(x) = V(w x): pull the gradient back with the inverse element.
  const Isometry back = surface_->group.element(word).inverse();
  return {x, back.derivative(xr.z()) * g};
}

}  // namespace hypervar
