// Covering groups of closed hyperbolic surfaces and equivariant potentials.
#pragma once

#include <memory>
#include <vector>

#include "hypervar/core.hpp"

namespace hypervar {

/// Group word; the element is g[w[0]] * g[w[1]] * ... (rightmost acts first).
using Word = std::vector<int>;

struct FundamentalDomain {
  DiskPoint center;
  int sides = 0;
  /// Hyperbolic distance from the center to a vertex (0 for non-compact domains).
  double vertex_radius = 0.0;
  /// Hyperbolic distance from the center to each side.
  double side_distance = 0.0;
  std::vector<DiskPoint> vertices;
  /// Diameter of the domain; for the non-compact test strip this is the
  /// strip width and is only used as an orbit-search margin.
  double diameter = 0.0;
  bool compact = true;

  /// Euclidean radius of the vertices, tanh(vertex_radius / 2).
  double vertex_euclidean_radius() const;
  /// Interior angle at vertex k, measured between the two incident sides.
  double interior_angle(int k) const;
};

class FuchsianGroup {
 public:
  FuchsianGroup(std::vector<Isometry> generators, std::vector<int> inverse_index, Word vertex_cycle,
                bool cocompact);

  int generator_count() const { return static_cast<int>(generators_.size()); }
  const Isometry& generator(int k) const { return generators_.at(static_cast<std::size_t>(k)); }
  int inverse_index(int k) const { return inverse_index_.at(static_cast<std::size_t>(k)); }
  const Word& vertex_cycle() const { return vertex_cycle_; }
  /// False for the cyclic smoke-test fixture.
  bool cocompact() const { return cocompact_; }

  Isometry element(const Word& w) const;
  Word inverse_word(const Word& w) const;
  /// Cancels adjacent generator/inverse pairs.
  Word free_reduce(Word w) const;
  /// Deviation of the vertex-cycle product from the identity.
  double relator_residual() const;

 private:
  std::vector<Isometry> generators_;
  std::vector<int> inverse_index_;
  Word vertex_cycle_;
  bool cocompact_;
};

struct Surface {
  FuchsianGroup group;
  FundamentalDomain domain;
};

/// Genus-2 surface from the regular octagon with interior angles pi/4 and
/// opposite sides paired by translations.
Surface build_octagon_group();

/// Cyclic group generated by one hyperbolic translation along the real axis.
/// Its quotient is a non-compact annulus: the standing hypotheses on the
/// configuration space are NOT satisfied, so it is for smoke tests only.
Surface build_cyclic_test_group(double translation_length = 2.0);

struct OrbitPoint {
  DiskPoint point;
  Word word;
};

struct OrbitOptions {
  std::size_t element_budget = 2'000'000;
};

/// (p', w) with p' = element(w) * p inside the Dirichlet domain of the center.
std::pair<DiskPoint, Word> reduce_to_domain(const Surface& s, const DiskPoint& p,
                                            std::size_t max_steps = 10'000);

/// All orbit points g p with dist(g p, around) <= radius, deduplicated.
std::vector<OrbitPoint> orbit_near(const Surface& s, const DiskPoint& p, const DiskPoint& around,
                                   double radius, const OrbitOptions& opts = {});

/// Orbit points of p within `radius` of p itself.
inline std::vector<OrbitPoint> orbit_ball(const Surface& s, const DiskPoint& p, double radius,
                                          const OrbitOptions& opts = {}) {
  return orbit_near(s, p, p, radius, opts);
}

struct PotentialSpec {
  std::vector<DiskPoint> centers;
  double depth = 0.0;
  double bump_radius = 1.0;
  double time_amplitude = 0.0;
  double orbit_cutoff = 0.0;
};

/// Smallest orbit_cutoff that makes the truncated orbit sums of `spec` exact.
double required_orbit_cutoff(const Surface& surface, const PotentialSpec& spec);

/// V(x, t) = (1 + A cos 2 pi t) * sum over the orbits of the centers of
/// -depth * (1 - (d/r)^2)^3 on d < r. Non-positive, invariant under the group
/// and 1-periodic in t.
class EquivariantPotential {
 public:
  EquivariantPotential(std::shared_ptr<const Surface> surface, PotentialSpec spec);

  /// V identically zero.
  static EquivariantPotential zero(std::shared_ptr<const Surface> surface);

  const PotentialSpec& spec() const { return spec_; }
  const Surface& surface() const { return *surface_; }
  std::shared_ptr<const Surface> surface_ptr() const { return surface_; }
  bool is_zero() const { return spec_.centers.empty() || spec_.depth == 0.0; }

  double value(const DiskPoint& x, double t) const;
  /// Metric gradient, based at x.
  TangentVec gradient(const DiskPoint& x, double t) const;
  /// -depth * (1 + A); the bumps are disjoint so this is the minimum.
  double min_value() const;
  /// Smallest orbit_cutoff that makes the truncated orbit sums exact.
  double required_cutoff() const;
  std::size_t translate_count() const { return translates_.size(); }

 private:
  double time_factor(double t) const;

  std::shared_ptr<const Surface> surface_;
  PotentialSpec spec_;
  std::vector<DiskPoint> translates_;
};

}  // namespace hypervar
