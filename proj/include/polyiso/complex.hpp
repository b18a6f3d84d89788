#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace polyiso {

using VertexPair = std::pair<int, int>;  // always stored with first <= second

inline VertexPair ordered(int a, int b) { return a <= b ? VertexPair{a, b} : VertexPair{b, a}; }

// Numerical policy shared across the library.
constexpr double kDegeneracyTol = 1e-10;    // Gram eigenvalue ratio below which a simplex is flat
constexpr double kShortnessSlack = 1e-9;    // absolute slack on stretch factors
constexpr double kWeightTol = 1e-12;        // barycentric bookkeeping tolerance
constexpr double kCoordTol = 1e-9;          // relative coords-vs-lengths consistency

/// A finite simplicial complex whose simplices carry flat metrics given by
/// edge lengths. Vertices are 0..num_vertices-1; simplices are stored as
/// sorted vertex tuples. Coordinates are an optional convenience input; the
/// metric data is authoritative.
struct MetricComplex {
  int dim = 0;
  int num_vertices = 0;
  std::vector<std::vector<int>> simplices;
  std::map<VertexPair, double> edge_lengths;
  std::optional<Eigen::MatrixXd> coords;

  // Derived topology, rebuilt by finalize(). Values are immutable afterwards.
  std::map<std::vector<int>, int> simplex_index;
  std::vector<int> top_cells;                       // ids of maximal simplices
  std::vector<std::vector<int>> vertex_to_tops;     // per vertex, top cell ids

  void finalize();

  int simplex_id(const std::vector<int>& tuple) const;
  bool has_simplex(const std::vector<int>& tuple) const;
  const std::vector<int>& tuple(int simplex) const { return simplices.at(simplex); }
  int simplex_dim(int simplex) const { return static_cast<int>(tuple(simplex).size()) - 1; }
  double edge_length(int a, int b) const;

  /// Lowest-index top cell whose tuple contains all of `verts`; -1 if none.
  int containing_top(const std::vector<int>& verts) const;

  bool structurally_equal(const MetricComplex& o) const;
};

/// Point of a complex in barycentric coordinates over one simplex.
struct BaryPoint {
  int simplex = -1;
  Eigen::VectorXd weights;

  /// Drop (exactly) zero weights: the minimal face carrying the point,
  /// as a sorted vertex tuple plus matching weights.
  std::pair<std::vector<int>, Eigen::VectorXd> support(const MetricComplex& c,
                                                       double tol = kWeightTol) const;
};

BaryPoint vertex_point(const MetricComplex& c, int v);

struct Violation {
  enum Kind {
    kFaceClosure,
    kEdgeLength,
    kNotRealizable,
    kDegenerate,
    kCoordMismatch,
    kDimMismatch,
    kBondingNotShort,
    kRankExceeded,
    kInconsistentComposite,
  };
  Kind kind;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::string summary() const;
};

/// Check every structural and metric invariant; an empty report means the
/// complex is a valid Euclidean polyhedron presentation.
ValidationReport validate_complex(const MetricComplex& c);

void require_valid(const MetricComplex& c);

/// Gram matrix of the edge vectors (v1-v0, ..., vk-v0) of a simplex, built
/// purely from edge lengths via the polarization identity.
Eigen::MatrixXd simplex_gram(const MetricComplex& c, const std::vector<int>& tuple);

/// Isometric coordinates of a simplex in E^dim(s): first vertex at the
/// origin, Gram-Schmidt orientation in vertex-index order (Cholesky of the
/// Gram matrix). Pairwise distances reproduce the edge lengths.
Eigen::MatrixXd simplex_chart(const MetricComplex& c, int simplex);
Eigen::MatrixXd simplex_chart(const MetricComplex& c, const std::vector<int>& tuple);

/// Position of barycentric weights inside a chart: weights * chart rows.
Eigen::VectorXd chart_position(const Eigen::MatrixXd& chart, const Eigen::VectorXd& weights);

// --- small builders used by tests, sample data and the docs -------------

/// 1-complex from sorted breakpoints b0 < b1 < ... < bn on a line.
MetricComplex make_interval(const std::vector<double>& breakpoints);

/// Cycle of n edges with the given common edge length.
MetricComplex make_circle(int n_edges, double edge_len);

/// Unit square [0,1]^2 as two triangles glued along the diagonal.
MetricComplex make_square();

/// Single simplex with the given pairwise edge lengths (row-major upper
/// triangle: d01, d02, ..., d0k, d12, ...).
MetricComplex make_simplex(int k, const std::vector<double>& upper_lengths);

/// Complex from top simplices only; faces are generated and closed.
MetricComplex from_top_simplices(int num_vertices,
                                 const std::vector<std::vector<int>>& tops,
                                 const std::map<VertexPair, double>& lengths,
                                 std::optional<Eigen::MatrixXd> coords = std::nullopt);

}  // namespace polyiso
