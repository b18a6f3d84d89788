#pragma once

#include <map>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "polyiso/complex.hpp"
#include "polyiso/subdivide.hpp"

namespace polyiso {

/// Piecewise-affine map: affine on every top cell of the level-`level`
/// subdivision of its domain, determined by the images of that level's
/// vertices. Images are either ambient points of E^N or points of a codomain
/// complex (simplicial toward the codomain: the vertex images of every cell
/// lie in a common codomain simplex).
class PLMap {
 public:
  PLMap() = default;

  static PLMap ambient(Refinement domain, int level, Eigen::MatrixXd images);
  static PLMap into(Refinement domain, int level,
                    std::shared_ptr<const MetricComplex> codomain,
                    std::vector<BaryPoint> images);

  bool is_ambient() const { return ambient_dim_ > 0; }
  int level() const { return level_; }
  int ambient_dim() const { return ambient_dim_; }

  const Refinement& refinement() const { return ref_; }
  const MetricComplex& domain() const { return ref_.base(); }
  const MetricComplex& level_complex() const { return ref_.at(level_); }
  const MetricComplex& codomain() const;
  std::shared_ptr<const MetricComplex> codomain_shared() const { return codomain_; }

  const Eigen::MatrixXd& images() const;
  const std::vector<BaryPoint>& point_images() const;

  /// Minimal codomain simplex containing all vertex images of a level cell.
  int cell_codomain_simplex(int cell) const;

  /// Same map, affine structure refined to a deeper level. Exact: new vertex
  /// images are the affine interpolants of the old ones.
  PLMap refined(int new_level) const;

 private:
  Refinement ref_;
  int level_ = 0;
  int ambient_dim_ = 0;  // 0 means codomain-valued
  Eigen::MatrixXd images_;
  std::shared_ptr<const MetricComplex> codomain_;
  std::vector<BaryPoint> point_images_;
  std::map<int, int> cell_codomain_;  // level top cell -> codomain simplex

  void index_codomain_cells();
};

Eigen::VectorXd evaluate_ambient(const PLMap& f, const BaryPoint& x);
BaryPoint evaluate_point(const PLMap& f, const BaryPoint& x);

/// Per-cell maximal stretch factors: largest generalized singular value of
/// the affine differential against the intrinsic metric of the cell.
struct ShortnessCertificate {
  std::map<int, double> per_cell_stretch;
  double max_stretch = 0.0;
  bool is_short() const { return max_stretch <= 1.0 + kShortnessSlack; }
};

ShortnessCertificate shortness_certificate(const PLMap& f);

/// Exact supremum of |f - g| over the common domain; attained at a vertex of
/// the common refinement because the difference is affine per cell.
double sup_displacement(const PLMap& f, const PLMap& g);

/// g after f, exact by refinement: the domain of f is subdivided until every
/// cell maps into a single affinity cell of g. Throws if the refinement
/// budget is exceeded (inputs then need compatible re-subdivision).
PLMap compose(const PLMap& g, const PLMap& f, int max_extra_levels = 12);

struct InjectivityResult {
  bool injective = false;
  /// Exact minimum distance between images of non-adjacent cells (certified
  /// lower bound when the check fails early). +inf when no such pair exists.
  double min_separation = 0.0;
  std::optional<std::pair<int, int>> witness;  // cell pair; (c,c) = degenerate cell
};

/// True iff every pair of non-adjacent cells keeps image distance >= min_sep
/// (exact convex distance between the affine cell images) and every cell map
/// is nondegenerate.
InjectivityResult injectivity_check(const PLMap& f, double min_sep);

/// Exact distance between two simplices given their vertex coordinates
/// (rows). Enumerates face pairs and solves the closest-point systems.
double simplex_distance(const Eigen::MatrixXd& P, const Eigen::MatrixXd& Q);

}  // namespace polyiso
