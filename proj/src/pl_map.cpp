#include "polyiso/pl_map.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

namespace polyiso {

namespace {

std::vector<int> support_union(const MetricComplex& codom, const std::vector<BaryPoint>& pts) {
  std::set<int> verts;
  for (const auto& p : pts) {
    auto [v, w] = p.support(codom);
    verts.insert(v.begin(), v.end());
  }
  return {verts.begin(), verts.end()};
}

// Lowest-id top cell of c containing all of `verts`, via the per-vertex
// incidence lists; -1 if none.
int common_top(const MetricComplex& c, const std::vector<int>& verts) {
  if (verts.empty()) return -1;
  std::vector<int> cand = c.vertex_to_tops[verts[0]];
  for (std::size_t i = 1; i < verts.size() && !cand.empty(); ++i) {
    const auto& lst = c.vertex_to_tops[verts[i]];
    std::vector<int> keep;
    for (int t : cand)
      if (std::find(lst.begin(), lst.end(), t) != lst.end()) keep.push_back(t);
    cand = std::move(keep);
  }
  if (cand.empty()) return -1;
  return *std::min_element(cand.begin(), cand.end());
}

}  // namespace

PLMap PLMap::ambient(Refinement domain, int level, Eigen::MatrixXd images) {
  if (level < 0) throw std::invalid_argument("map level must be nonnegative");
  PLMap f;
  f.ref_ = domain.refined_to(level);
  f.level_ = level;
  const int nv = f.ref_.at(level).num_vertices;
  if (images.rows() != nv)
    throw std::invalid_argument("vertex image count does not match level vertex count");
  if (images.cols() < 1) throw std::invalid_argument("ambient dimension must be positive");
  if (!images.allFinite()) throw std::invalid_argument("vertex images must be finite");
  f.ambient_dim_ = static_cast<int>(images.cols());
  f.images_ = std::move(images);
  return f;
}

PLMap PLMap::into(Refinement domain, int level, std::shared_ptr<const MetricComplex> codomain,
                  std::vector<BaryPoint> images) {
  if (level < 0) throw std::invalid_argument("map level must be nonnegative");
  PLMap f;
  f.ref_ = domain.refined_to(level);
  f.level_ = level;
  const int nv = f.ref_.at(level).num_vertices;
  if (static_cast<int>(images.size()) != nv)
    throw std::invalid_argument("vertex image count does not match level vertex count");
  f.codomain_ = std::move(codomain);
  f.point_images_ = std::move(images);
  f.index_codomain_cells();
  return f;
}

void PLMap::index_codomain_cells() {
  // Each cell's vertex images must share a codomain simplex; by face closure
  // the minimal such simplex is exactly the union of their supports.
  const MetricComplex& lc = level_complex();
  for (int tc : lc.top_cells) {
    const auto& t = lc.tuple(tc);
    std::vector<BaryPoint> imgs;
    imgs.reserve(t.size());
    for (int v : t) imgs.push_back(point_images_[v]);
    std::vector<int> uni = support_union(*codomain_, imgs);
    if (!codomain_->has_simplex(uni)) {
      std::ostringstream os;
      os << "map is not simplicial toward the codomain: cell " << tc
         << " vertex images share no codomain simplex";
      throw std::invalid_argument(os.str());
    }
    cell_codomain_[tc] = codomain_->simplex_id(uni);
  }
}

const MetricComplex& PLMap::codomain() const {
  if (!codomain_) throw std::logic_error("map is ambient-valued");
  return *codomain_;
}

const Eigen::MatrixXd& PLMap::images() const {
  if (!is_ambient()) throw std::logic_error("map is codomain-valued");
  return images_;
}

const std::vector<BaryPoint>& PLMap::point_images() const {
  if (is_ambient()) throw std::logic_error("map is ambient-valued");
  return point_images_;
}

int PLMap::cell_codomain_simplex(int cell) const {
  auto it = cell_codomain_.find(cell);
  if (it == cell_codomain_.end()) throw std::invalid_argument("not a level cell of this map");
  return it->second;
}

PLMap PLMap::refined(int new_level) const {
  if (new_level < level_) throw std::invalid_argument("cannot coarsen a map");
  if (new_level == level_) return *this;

  PLMap f = *this;
  f.ref_ = ref_.refined_to(new_level);
  for (int lvl = level_; lvl < new_level; ++lvl) {
    const MetricComplex& cur = f.ref_.at(lvl);
    const MetricComplex& nxt = f.ref_.at(lvl + 1);
    if (is_ambient()) {
      Eigen::MatrixXd X(nxt.num_vertices, ambient_dim_);
      X.topRows(cur.num_vertices) = f.images_;
      for (const auto& t : cur.simplices) {
        if (t.size() != 2) continue;
        const int m = f.ref_.midpoint_vertex(lvl + 1, t[0], t[1]);
        X.row(m) = 0.5 * (f.images_.row(t[0]) + f.images_.row(t[1]));
      }
      f.images_ = std::move(X);
    } else {
      std::vector<BaryPoint> pts(nxt.num_vertices);
      for (int v = 0; v < cur.num_vertices; ++v) pts[v] = f.point_images_[v];
      for (const auto& t : cur.simplices) {
        if (t.size() != 2) continue;
        const int m = f.ref_.midpoint_vertex(lvl + 1, t[0], t[1]);
        const auto& pa = f.point_images_[t[0]];
        const auto& pb = f.point_images_[t[1]];
        std::vector<int> uni = support_union(*codomain_, {pa, pb});
        if (!codomain_->has_simplex(uni))
          throw std::logic_error("edge endpoints share no codomain simplex");
        const auto& tt = codomain_->tuple(codomain_->simplex_id(uni));
        auto [va, wa] = pa.support(*codomain_);
        auto [vb, wb] = pb.support(*codomain_);
        BaryPoint mid;
        mid.simplex = codomain_->simplex_id(uni);
        mid.weights = 0.5 * (embed_weights(va, wa, tt) + embed_weights(vb, wb, tt));
        pts[m] = std::move(mid);
      }
      f.point_images_ = std::move(pts);
    }
  }
  f.level_ = new_level;
  if (!f.is_ambient()) {
    f.cell_codomain_.clear();
    f.index_codomain_cells();
  }
  return f;
}

namespace {

Refinement::Located locate_in_map(const PLMap& f, const BaryPoint& x) {
  return f.refinement().locate(x, f.level());
}

}  // namespace

Eigen::VectorXd evaluate_ambient(const PLMap& f, const BaryPoint& x) {
  if (!f.is_ambient()) throw std::invalid_argument("evaluate_ambient on codomain-valued map");
  auto loc = locate_in_map(f, x);
  const auto& t = f.level_complex().tuple(loc.cell);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(f.ambient_dim());
  for (std::size_t i = 0; i < t.size(); ++i)
    out += loc.weights[static_cast<int>(i)] * f.images().row(t[i]).transpose();
  return out;
}

BaryPoint evaluate_point(const PLMap& f, const BaryPoint& x) {
  if (f.is_ambient()) throw std::invalid_argument("evaluate_point on ambient-valued map");
  auto loc = locate_in_map(f, x);
  const auto& t = f.level_complex().tuple(loc.cell);
  const MetricComplex& codom = f.codomain();
  const int tau = f.cell_codomain_simplex(loc.cell);
  const auto& tt = codom.tuple(tau);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<int>(tt.size()));
  for (std::size_t i = 0; i < t.size(); ++i) {
    auto [v, wi] = f.point_images()[t[i]].support(codom);
    w += loc.weights[static_cast<int>(i)] * embed_weights(v, wi, tt);
  }
  BaryPoint out;
  out.simplex = tau;
  out.weights = std::move(w);
  return out;
}

ShortnessCertificate shortness_certificate(const PLMap& f) {
  ShortnessCertificate cert;
  const MetricComplex& lc = f.level_complex();
  for (int tc : lc.top_cells) {
    const auto& t = lc.tuple(tc);
    const int k = static_cast<int>(t.size()) - 1;
    if (k == 0) {
      cert.per_cell_stretch[tc] = 0.0;
      continue;
    }
    Eigen::MatrixXd A = simplex_gram(lc, t);
    {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
      if (!(es.eigenvalues().minCoeff() > kDegeneracyTol * es.eigenvalues().maxCoeff()))
        throw std::invalid_argument("degenerate cell chart");
    }

    Eigen::MatrixXd V(f.is_ambient() ? f.ambient_dim() : k, k);
    if (f.is_ambient()) {
      for (int i = 1; i <= k; ++i)
        V.col(i - 1) = (f.images().row(t[i]) - f.images().row(t[0])).transpose();
    } else {
      const MetricComplex& codom = f.codomain();
      const int tau = f.cell_codomain_simplex(tc);
      const auto& tt = codom.tuple(tau);
      Eigen::MatrixXd chart = simplex_chart(codom, tau);
      V.resize(chart.cols(), k);
      auto pos = [&](int v) {
        auto [vv, ww] = f.point_images()[v].support(codom);
        return chart_position(chart, embed_weights(vv, ww, tt));
      };
      Eigen::VectorXd p0 = pos(t[0]);
      for (int i = 1; i <= k; ++i) V.col(i - 1) = pos(t[i]) - p0;
    }
    Eigen::MatrixXd B = V.transpose() * V;
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(B, A, Eigen::EigenvaluesOnly);
    const double lmax = ges.eigenvalues().maxCoeff();
    cert.per_cell_stretch[tc] = std::sqrt(std::max(0.0, lmax));
  }
  for (const auto& [cell, s] : cert.per_cell_stretch)
    cert.max_stretch = std::max(cert.max_stretch, s);
  return cert;
}

double sup_displacement(const PLMap& f, const PLMap& g) {
  if (!f.is_ambient() || !g.is_ambient())
    throw std::invalid_argument("sup_displacement needs ambient-valued maps");
  if (f.ambient_dim() != g.ambient_dim())
    throw std::invalid_argument("sup_displacement: ambient dimensions differ");
  if (!f.domain().structurally_equal(g.domain()))
    throw std::invalid_argument("sup_displacement: domains differ");
  const int L = std::max(f.level(), g.level());
  PLMap fr = f.refined(L);
  PLMap gr = g.refined(L);
  return (fr.images() - gr.images()).rowwise().norm().maxCoeff();
}

PLMap compose(const PLMap& g, const PLMap& f, int max_extra_levels) {
  if (f.is_ambient()) throw std::invalid_argument("compose: inner map must be codomain-valued");
  if (!f.codomain().structurally_equal(g.domain()))
    throw std::invalid_argument("compose: codomain of f is not the domain of g");

  const MetricComplex& Q = g.level_complex();
  const Refinement& gref = g.refinement();

  constexpr int kComposeVertexBudget = 4 << 20;
  for (int L = f.level(); L <= f.level() + max_extra_levels; ++L) {
    PLMap fr = f.refined(L);
    const MetricComplex& lc = fr.level_complex();
    const int nv = lc.num_vertices;
    if (nv > kComposeVertexBudget) break;

    // Locate every vertex image inside g's affinity subdivision once.
    std::vector<std::vector<int>> vsupp(nv);
    std::vector<Eigen::VectorXd> vw(nv);
    for (int v = 0; v < nv; ++v) {
      auto loc = gref.locate(fr.point_images()[v], g.level());
      const auto& t = Q.tuple(loc.cell);
      std::vector<int> s;
      std::vector<double> w;
      for (std::size_t i = 0; i < t.size(); ++i)
        if (loc.weights[static_cast<int>(i)] > kWeightTol) {
          s.push_back(t[i]);
          w.push_back(loc.weights[static_cast<int>(i)]);
        }
      vsupp[v] = std::move(s);
      vw[v] = Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<int>(w.size()));
      vw[v] /= vw[v].sum();
    }

    bool aligned = true;
    std::vector<int> cell_of(lc.top_cells.size(), -1);
    for (std::size_t ci = 0; ci < lc.top_cells.size() && aligned; ++ci) {
      const auto& t = lc.tuple(lc.top_cells[ci]);
      std::set<int> uni;
      for (int v : t) uni.insert(vsupp[v].begin(), vsupp[v].end());
      int cc = common_top(Q, {uni.begin(), uni.end()});
      if (cc < 0)
        aligned = false;
      else
        cell_of[ci] = cc;
    }
    if (!aligned) continue;

    // Every cell lands in one affinity cell of g; combine g's vertex images.
    if (g.is_ambient()) {
      Eigen::MatrixXd X(nv, g.ambient_dim());
      for (int v = 0; v < nv; ++v) {
        Eigen::VectorXd out = Eigen::VectorXd::Zero(g.ambient_dim());
        for (std::size_t i = 0; i < vsupp[v].size(); ++i)
          out += vw[v][static_cast<int>(i)] * g.images().row(vsupp[v][i]).transpose();
        X.row(v) = out.transpose();
      }
      return PLMap::ambient(fr.refinement(), L, std::move(X));
    }
    std::vector<BaryPoint> pts(nv);
    for (int v = 0; v < nv; ++v) {
      BaryPoint x;
      x.simplex = Q.simplex_id(vsupp[v]);
      x.weights = vw[v];
      pts[v] = evaluate_point(g, x);
    }
    return PLMap::into(fr.refinement(), L, g.codomain_shared(), std::move(pts));
  }
  throw std::runtime_error(
      "compose: refinement budget exceeded; the image cells of the inner map do not align "
      "with the affinity cells of the outer map — re-subdivide the inputs compatibly");
}

// --- injectivity ---------------------------------------------------------

double simplex_distance(const Eigen::MatrixXd& P, const Eigen::MatrixXd& Q) {
  const int m = static_cast<int>(P.rows());
  const int n = static_cast<int>(Q.rows());
  double best = std::numeric_limits<double>::infinity();
  for (unsigned fm = 1; fm < (1u << m); ++fm) {
    std::vector<int> F;
    for (int i = 0; i < m; ++i)
      if (fm & (1u << i)) F.push_back(i);
    for (unsigned gm = 1; gm < (1u << n); ++gm) {
      std::vector<int> G;
      for (int j = 0; j < n; ++j)
        if (gm & (1u << j)) G.push_back(j);

      const int a = static_cast<int>(F.size());
      const int b = static_cast<int>(G.size());
      if (a == 1 && b == 1) {
        best = std::min(best, (P.row(F[0]) - Q.row(G[0])).norm());
        continue;
      }
      Eigen::MatrixXd Pf(a, P.cols()), Qg(b, Q.cols());
      for (int i = 0; i < a; ++i) Pf.row(i) = P.row(F[i]);
      for (int j = 0; j < b; ++j) Qg.row(j) = Q.row(G[j]);

      // KKT system for min |Pf'a - Qg'b|^2 over the two affine hulls.
      const int dim = a + b + 2;
      Eigen::MatrixXd M = Eigen::MatrixXd::Zero(dim, dim);
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
      M.block(0, 0, a, a) = Pf * Pf.transpose();
      M.block(0, a, a, b) = -Pf * Qg.transpose();
      M.block(a, 0, b, a) = -Qg * Pf.transpose();
      M.block(a, a, b, b) = Qg * Qg.transpose();
      M.block(0, a + b, a, 1).setOnes();
      M.block(a, a + b + 1, b, 1).setOnes();
      M.block(a + b, 0, 1, a).setOnes();
      M.block(a + b + 1, a, 1, b).setOnes();
      rhs[a + b] = 1.0;
      rhs[a + b + 1] = 1.0;

      Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
      Eigen::VectorXd sol = lu.solve(rhs);
      if ((M * sol - rhs).norm() > 1e-9 * (1.0 + rhs.norm())) continue;  // inconsistent
      bool feasible = true;
      for (int i = 0; i < a + b; ++i)
        if (sol[i] < -1e-12) {
          feasible = false;
          break;
        }
      if (!feasible) continue;
      Eigen::VectorXd x = Pf.transpose() * sol.head(a);
      Eigen::VectorXd y = Qg.transpose() * sol.segment(a, b);
      best = std::min(best, (x - y).norm());
    }
  }
  return best;
}

InjectivityResult injectivity_check(const PLMap& f, double min_sep) {
  if (!f.is_ambient()) throw std::invalid_argument("injectivity_check needs an ambient map");
  InjectivityResult res;
  const MetricComplex& lc = f.level_complex();
  const auto& tops = lc.top_cells;
  const int C = static_cast<int>(tops.size());
  const int N = f.ambient_dim();

  // Per-cell nondegeneracy: smallest generalized stretch bounded away from 0.
  for (int ci = 0; ci < C; ++ci) {
    const auto& t = lc.tuple(tops[ci]);
    const int k = static_cast<int>(t.size()) - 1;
    if (k == 0) continue;
    Eigen::MatrixXd A = simplex_gram(lc, t);
    Eigen::MatrixXd V(N, k);
    for (int i = 1; i <= k; ++i)
      V.col(i - 1) = (f.images().row(t[i]) - f.images().row(t[0])).transpose();
    Eigen::MatrixXd B = V.transpose() * V;
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(B, A, Eigen::EigenvaluesOnly);
    if (!(ges.eigenvalues().minCoeff() > kDegeneracyTol)) {
      res.injective = false;
      res.min_separation = 0.0;
      res.witness = std::make_pair(tops[ci], tops[ci]);
      return res;
    }
  }

  // Bounding boxes for pruning.
  Eigen::MatrixXd lo(C, N), hi(C, N);
  std::vector<Eigen::MatrixXd> pts(C);
  for (int ci = 0; ci < C; ++ci) {
    const auto& t = lc.tuple(tops[ci]);
    Eigen::MatrixXd p(static_cast<int>(t.size()), N);
    for (std::size_t i = 0; i < t.size(); ++i) p.row(static_cast<int>(i)) = f.images().row(t[i]);
    lo.row(ci) = p.colwise().minCoeff();
    hi.row(ci) = p.colwise().maxCoeff();
    pts[ci] = std::move(p);
  }
  auto box_gap = [&](int i, int j) {
    double s = 0.0;
    for (int d = 0; d < N; ++d) {
      const double gap = std::max({0.0, lo(j, d) - hi(i, d), lo(i, d) - hi(j, d)});
      s += gap * gap;
    }
    return std::sqrt(s);
  };
  auto adjacent = [&](int i, int j) {
    const auto& a = lc.tuple(tops[i]);
    const auto& b = lc.tuple(tops[j]);
    std::size_t x = 0, y = 0;
    while (x < a.size() && y < b.size()) {
      if (a[x] == b[y]) return true;
      (a[x] < b[y]) ? ++x : ++y;
    }
    return false;
  };

  double best = std::numeric_limits<double>::infinity();
  // Seed with the exact distance of the closest pair by box gap, then sweep
  // with pruning; only near-minimal pairs need the exact solve.
  int si = -1, sj = -1;
  double sgap = std::numeric_limits<double>::infinity();
  for (int i = 0; i < C; ++i)
    for (int j = i + 1; j < C; ++j) {
      if (adjacent(i, j)) continue;
      const double gapd = box_gap(i, j);
      if (gapd < sgap) {
        sgap = gapd;
        si = i;
        sj = j;
      }
    }
  if (si < 0) {  // no non-adjacent pairs at all
    res.injective = true;
    res.min_separation = std::numeric_limits<double>::infinity();
    return res;
  }
  best = simplex_distance(pts[si], pts[sj]);
  std::pair<int, int> best_pair{tops[si], tops[sj]};
  for (int i = 0; i < C; ++i)
    for (int j = i + 1; j < C; ++j) {
      if ((i == si && j == sj) || adjacent(i, j)) continue;
      if (box_gap(i, j) >= best) continue;
      const double d = simplex_distance(pts[i], pts[j]);
      if (d < best) {
        best = d;
        best_pair = {tops[i], tops[j]};
      }
    }

  res.min_separation = best;
  if (best >= min_sep && best > 0.0) {
    res.injective = true;
  } else {
    res.injective = false;
    res.witness = best_pair;
  }
  return res;
}

}  // namespace polyiso
