#pragma once

#include <vector>

#include "polyiso/complex.hpp"
#include "polyiso/pl_map.hpp"
#include "polyiso/subdivide.hpp"

namespace polyiso {

/// One-sided distance approximation: graph shortest paths over-estimate the
/// intrinsic distance and are nonincreasing under refinement.
struct DistanceEstimate {
  double value = 0.0;
  int level = 0;
  bool upper_bound = true;
};

/// Graph over the level-k subdivision vertices. Within each chord group (a
/// top cell of the chord level; the input complex's top cells by default)
/// all node pairs are connected with their straight-line chart length.
/// Induced graphs reuse the topology with ambient image lengths instead, so
/// every edge stays inside one affinity cell of the measured map.
struct GeodesicGraph {
  int level = 0;
  int chord_level = 0;
  Refinement refinement;
  std::vector<int> offsets;
  std::vector<int> nbr;
  std::vector<double> weight;

  int num_nodes() const { return static_cast<int>(offsets.size()) - 1; }
};

GeodesicGraph geodesic_graph(const MetricComplex& c, int k);
GeodesicGraph geodesic_graph(const Refinement& ref, int k, int chord_level);

/// Same topology as `g`, edge weights replaced by |f(u) - f(v)|.
GeodesicGraph with_image_weights(const GeodesicGraph& g, const PLMap& f);

/// Shortest path between nodes; full single-source variant below.
double node_distance(const GeodesicGraph& g, int u, int v);
std::vector<double> node_distances_from(const GeodesicGraph& g, int u);

/// Graph distance between two points of the base complex, attached to the
/// nodes of every chord group containing them. When `image_map` is given the
/// attachment and direct-chord lengths use ambient image distances, matching
/// graphs built with with_image_weights.
DistanceEstimate point_distance(const GeodesicGraph& g, const BaryPoint& x, const BaryPoint& y,
                                const PLMap* image_map = nullptr);

/// Intrinsic (length-metric) distance to certified refinement accuracy:
/// the value is an upper bound and nonincreasing in k. Disconnected pairs
/// report +infinity.
DistanceEstimate intrinsic_distance(const MetricComplex& c, const BaryPoint& x,
                                    const BaryPoint& y, int k);

/// Length metric induced by an ambient-valued map: shortest paths with edge
/// weights |f(u) - f(v)|. Requires k >= f.level().
DistanceEstimate induced_distance(const PLMap& f, const BaryPoint& x, const BaryPoint& y, int k);

/// Exact length of the image of a polyline under f: each piece is cut at the
/// affinity-cell boundaries it crosses, so every summand is the length of a
/// straight ambient segment.
double path_image_length(const PLMap& f, const std::vector<BaryPoint>& polyline);

void check_point(const MetricComplex& c, const BaryPoint& p);

}  // namespace polyiso
