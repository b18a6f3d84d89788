#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "polyiso/complex.hpp"

namespace polyiso {

/// Maps every vertex of a subdivided complex back to barycentric coordinates
/// over a simplex of the level-0 complex.
struct SubdivisionLineage {
  int level = 0;
  struct ParentCoord {
    int base_simplex = -1;
    Eigen::VectorXd weights;
  };
  std::vector<ParentCoord> parents;
};

/// A complex together with the chain of its edgewise (midpoint) subdivisions.
/// Subdivision is deterministic, so two Refinements of structurally equal
/// bases agree level by level. Levels are immutable and shared between
/// copies; refined_to() extends the chain without recomputing lower levels.
class Refinement {
 public:
  Refinement() = default;
  static Refinement of(const MetricComplex& base, int levels);

  Refinement refined_to(int levels) const;

  int max_level() const { return static_cast<int>(levels_.size()) - 1; }
  const MetricComplex& at(int level) const { return *levels_.at(level)->complex; }
  std::shared_ptr<const MetricComplex> at_shared(int level) const {
    return levels_.at(level)->complex;
  }
  const MetricComplex& base() const { return at(0); }
  const SubdivisionLineage& lineage(int level) const { return levels_.at(level)->lineage; }

  /// Base top cell from which a top cell at some level descends.
  int origin_top(int level, int top_cell) const;

  /// Ancestor top cell of a top cell, at any shallower level.
  int ancestor_top(int level, int top_cell, int at_level) const;

  /// Vertex id of the midpoint of an edge of the previous level.
  int midpoint_vertex(int level, int a, int b) const;

  struct Located {
    int cell = -1;  // simplex id of a top cell at the target level
    Eigen::VectorXd weights;
  };

  /// Locate a point of the base complex inside the level-k subdivision.
  /// Deterministic on cell boundaries; the choice is unobservable for any
  /// map that is affine per cell.
  Located locate(const BaryPoint& base_point, int level) const;

  /// Push a located point one or more levels deeper.
  Located locate_from(int from_level, int cell, const Eigen::VectorXd& weights,
                      int to_level) const;

  BaryPoint base_point_of_vertex(int level, int v) const;

 private:
  struct Level {
    std::shared_ptr<const MetricComplex> complex;
    SubdivisionLineage lineage;
    std::vector<int> origin_top;            // per top cell, base top cell id
    std::vector<int> parent_top;            // per top cell, prev-level top cell id
    std::map<VertexPair, int> midpoint;     // prev-level vertex pair -> vertex id
  };
  std::vector<std::shared_ptr<const Level>> levels_;

  Located step_down(int level, int cell, const Eigen::VectorXd& weights) const;
};

/// Edgewise midpoint subdivision applied `levels` times. The intrinsic
/// metric is unchanged; new edge lengths are computed inside each flat
/// simplex chart. Rejects invalid complexes.
std::pair<MetricComplex, SubdivisionLineage> subdivide(const MetricComplex& c, int levels);

/// Children of one application of edgewise subdivision to the ordered
/// k-simplex, as paths of lattice points in ordered coordinates scaled by 2.
/// Exposed for tests; there are exactly 2^k children.
std::vector<std::vector<std::vector<int>>> kuhn_children(int k);

/// Weights of `sub` re-expressed over the containing tuple `super`.
Eigen::VectorXd embed_weights(const std::vector<int>& sub, const Eigen::VectorXd& w,
                              const std::vector<int>& super);

/// Ordered coordinates of barycentric weights over a sorted tuple:
/// y_j = sum of the trailing weights, nonincreasing in j. Inverse below.
Eigen::VectorXd ordered_coords(const Eigen::VectorXd& weights);
Eigen::VectorXd weights_from_ordered(const Eigen::VectorXd& y);

}  // namespace polyiso
