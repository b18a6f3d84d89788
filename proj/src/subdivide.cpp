#include "polyiso/subdivide.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace polyiso {

Eigen::VectorXd ordered_coords(const Eigen::VectorXd& b) {
  const int k = static_cast<int>(b.size()) - 1;
  Eigen::VectorXd y(k);
  double acc = 0.0;
  for (int j = k; j >= 1; --j) {
    acc += b[j];
    y[j - 1] = acc;
  }
  return y;
}

Eigen::VectorXd weights_from_ordered(const Eigen::VectorXd& y) {
  const int k = static_cast<int>(y.size());
  Eigen::VectorXd b(k + 1);
  double prev = 1.0;
  for (int j = 0; j < k; ++j) {
    b[j] = prev - y[j];
    prev = y[j];
  }
  b[k] = prev;
  return b;
}

namespace {

// A lattice point of the scale-2 ordered simplex is either a parent vertex
// or the midpoint of a parent vertex pair.
struct LatticeKey {
  int a = -1, b = -1;  // positions within the parent tuple, a <= b
};

LatticeKey lattice_key(const std::vector<int>& q) {
  const int k = static_cast<int>(q.size());
  LatticeKey key;
  std::vector<int> half;  // positions j with doubled weight 1
  int prev = 2;
  for (int j = 0; j <= k; ++j) {
    const int cur = (j < k) ? q[j] : 0;
    const int d = prev - cur;  // doubled barycentric weight of position j
    if (d == 2) {
      key.a = key.b = j;
      return key;
    }
    if (d == 1) half.push_back(j);
    prev = cur;
  }
  key.a = half[0];
  key.b = half[1];
  return key;
}

bool lattice_valid(const std::vector<int>& q) {
  int prev = 2;
  for (int v : q) {
    if (v < 0 || v > prev) return false;
    prev = v;
  }
  return true;
}

}  // namespace

std::vector<std::vector<std::vector<int>>> kuhn_children(int k) {
  std::vector<std::vector<std::vector<int>>> children;
  if (k == 0) {
    children.push_back({{}});
    return children;
  }
  // Enumerate base lattice points (nonincreasing, entries in {0,1,2}) and
  // increment orders; keep the paths that stay inside the ordered region.
  std::vector<std::vector<int>> bases;
  std::vector<int> cur(k, 0);
  while (true) {
    if (lattice_valid(cur)) bases.push_back(cur);
    int i = k - 1;
    while (i >= 0 && cur[i] == 2) {
      cur[i] = 0;
      --i;
    }
    if (i < 0) break;
    ++cur[i];
  }
  std::vector<int> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  for (const auto& p : bases) {
    std::vector<int> order = perm;
    do {
      std::vector<std::vector<int>> path{p};
      std::vector<int> q = p;
      bool ok = true;
      for (int step : order) {
        ++q[step];
        if (!lattice_valid(q)) {
          ok = false;
          break;
        }
        path.push_back(q);
      }
      if (ok) children.push_back(std::move(path));
    } while (std::next_permutation(order.begin(), order.end()));
  }
  return children;
}

Eigen::VectorXd embed_weights(const std::vector<int>& sub, const Eigen::VectorXd& w,
                              const std::vector<int>& super) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<int>(super.size()));
  for (std::size_t i = 0; i < sub.size(); ++i) {
    auto it = std::lower_bound(super.begin(), super.end(), sub[i]);
    if (it == super.end() || *it != sub[i])
      throw std::invalid_argument("embed_weights: sub tuple not contained in super tuple");
    out[static_cast<int>(it - super.begin())] = w[static_cast<int>(i)];
  }
  return out;
}

namespace {

struct OneLevel {
  MetricComplex complex;
  std::map<VertexPair, int> midpoint;
  std::vector<std::pair<int, int>> vertex_parent;  // per new vertex, prev-level pair
  std::map<std::vector<int>, int> child_origin;    // child tuple -> prev-level top cell
};

OneLevel subdivide_once(const MetricComplex& c) {
  OneLevel out;

  std::set<VertexPair> edges;
  for (const auto& t : c.simplices)
    if (t.size() == 2) edges.insert({t[0], t[1]});

  int next = c.num_vertices;
  for (const auto& e : edges) out.midpoint[e] = next++;

  out.vertex_parent.resize(next);
  for (int v = 0; v < c.num_vertices; ++v) out.vertex_parent[v] = {v, v};
  for (const auto& [e, id] : out.midpoint) out.vertex_parent[id] = {e.first, e.second};

  std::optional<Eigen::MatrixXd> coords;
  if (c.coords) {
    Eigen::MatrixXd X(next, c.coords->cols());
    X.topRows(c.num_vertices) = *c.coords;
    for (const auto& [e, id] : out.midpoint)
      X.row(id) = 0.5 * (c.coords->row(e.first) + c.coords->row(e.second));
    coords = std::move(X);
  }

  std::vector<std::vector<int>> tops;
  std::map<VertexPair, double> lengths;
  for (int tc : c.top_cells) {
    const auto& t = c.simplices[tc];
    const int k = static_cast<int>(t.size()) - 1;
    const Eigen::MatrixXd chart = simplex_chart(c, t);

    auto global_id = [&](const LatticeKey& key) {
      if (key.a == key.b) return t[key.a];
      return out.midpoint.at(ordered(t[key.a], t[key.b]));
    };
    auto position = [&](const std::vector<int>& q) {
      Eigen::VectorXd y(k);
      for (int j = 0; j < k; ++j) y[j] = 0.5 * q[j];
      return chart_position(chart, weights_from_ordered(y));
    };

    for (const auto& path : kuhn_children(k)) {
      std::vector<int> tuple;
      std::vector<Eigen::VectorXd> pos;
      tuple.reserve(path.size());
      for (const auto& q : path) {
        tuple.push_back(global_id(lattice_key(q)));
        pos.push_back(position(q));
      }
      for (std::size_t i = 0; i < tuple.size(); ++i)
        for (std::size_t j = i + 1; j < tuple.size(); ++j) {
          VertexPair e = ordered(tuple[i], tuple[j]);
          if (!lengths.count(e)) lengths[e] = (pos[i] - pos[j]).norm();
        }
      std::sort(tuple.begin(), tuple.end());
      if (!out.child_origin.count(tuple)) out.child_origin[tuple] = tc;
      tops.push_back(std::move(tuple));
    }
  }

  out.complex = from_top_simplices(next, tops, lengths, std::move(coords));
  return out;
}

}  // namespace

Refinement Refinement::of(const MetricComplex& base, int levels) {
  if (levels < 0) throw std::invalid_argument("levels must be nonnegative");
  require_valid(base);
  Refinement r;
  auto l0 = std::make_shared<Level>();
  l0->complex = std::make_shared<MetricComplex>(base);
  l0->lineage.level = 0;
  l0->lineage.parents.resize(base.num_vertices);
  for (int v = 0; v < base.num_vertices; ++v)
    l0->lineage.parents[v] = {l0->complex->simplex_id({v}), Eigen::VectorXd::Ones(1)};
  l0->origin_top.assign(base.simplices.size(), -1);
  l0->parent_top.assign(base.simplices.size(), -1);
  for (int tc : base.top_cells) {
    l0->origin_top[tc] = tc;
    l0->parent_top[tc] = tc;
  }
  r.levels_.push_back(std::move(l0));
  return r.refined_to(levels);
}

Refinement Refinement::refined_to(int levels) const {
  if (levels < max_level()) return *this;  // chains only grow
  Refinement r = *this;
  while (r.max_level() < levels) {
    const Level& prev = *r.levels_.back();
    const MetricComplex& pc = *prev.complex;
    OneLevel one = subdivide_once(pc);

    auto lvl = std::make_shared<Level>();
    lvl->complex = std::make_shared<MetricComplex>(std::move(one.complex));
    lvl->midpoint = std::move(one.midpoint);

    // Lineage: kept vertices carry over, midpoints average inside a common
    // base simplex. Dyadic weights stay exact, so support stripping is exact.
    const MetricComplex& base = r.base();
    lvl->lineage.level = prev.lineage.level + 1;
    lvl->lineage.parents.resize(lvl->complex->num_vertices);
    for (int v = 0; v < lvl->complex->num_vertices; ++v) {
      auto [a, b] = one.vertex_parent[v];
      if (a == b) {
        lvl->lineage.parents[v] = prev.lineage.parents[a];
        continue;
      }
      const auto& pa = prev.lineage.parents[a];
      const auto& pb = prev.lineage.parents[b];
      std::vector<int> uni;
      const auto& ta = base.tuple(pa.base_simplex);
      const auto& tb = base.tuple(pb.base_simplex);
      std::set_union(ta.begin(), ta.end(), tb.begin(), tb.end(), std::back_inserter(uni));
      int top = base.containing_top(uni);
      if (top < 0) throw std::logic_error("midpoint endpoints share no base top cell");
      const auto& tt = base.tuple(top);
      Eigen::VectorXd w =
          0.5 * (embed_weights(ta, pa.weights, tt) + embed_weights(tb, pb.weights, tt));
      std::vector<int> face;
      std::vector<double> fw;
      for (int i = 0; i < w.size(); ++i)
        if (w[i] != 0.0) {
          face.push_back(tt[i]);
          fw.push_back(w[i]);
        }
      SubdivisionLineage::ParentCoord pcrd;
      pcrd.base_simplex = base.simplex_id(face);
      pcrd.weights = Eigen::Map<Eigen::VectorXd>(fw.data(), static_cast<int>(fw.size()));
      lvl->lineage.parents[v] = std::move(pcrd);
    }

    lvl->origin_top.assign(lvl->complex->simplices.size(), -1);
    lvl->parent_top.assign(lvl->complex->simplices.size(), -1);
    for (int tc : lvl->complex->top_cells) {
      auto it = one.child_origin.find(lvl->complex->tuple(tc));
      if (it == one.child_origin.end()) throw std::logic_error("child cell without origin");
      lvl->parent_top[tc] = it->second;
      lvl->origin_top[tc] = prev.origin_top[it->second];
    }

    r.levels_.push_back(std::move(lvl));
  }
  return r;
}

int Refinement::origin_top(int level, int top_cell) const {
  int o = levels_.at(level)->origin_top.at(top_cell);
  if (o < 0) throw std::invalid_argument("simplex is not a top cell");
  return o;
}

int Refinement::ancestor_top(int level, int top_cell, int at_level) const {
  if (at_level > level) throw std::invalid_argument("ancestor level must not be deeper");
  int cur = top_cell;
  for (int lvl = level; lvl > at_level; --lvl) cur = levels_.at(lvl)->parent_top.at(cur);
  return cur;
}

int Refinement::midpoint_vertex(int level, int a, int b) const {
  return levels_.at(level)->midpoint.at(ordered(a, b));
}

Refinement::Located Refinement::step_down(int level, int cell,
                                          const Eigen::VectorXd& weights) const {
  const MetricComplex& cur = at(level);
  const MetricComplex& nxt = at(level + 1);
  const auto& t = cur.tuple(cell);
  const int k = static_cast<int>(t.size()) - 1;
  if (k == 0) {
    Located l;
    l.cell = nxt.simplex_id(t);
    l.weights = weights;
    return l;
  }

  Eigen::VectorXd z = 2.0 * ordered_coords(weights);
  std::vector<int> base(k);
  Eigen::VectorXd frac(k);
  for (int j = 0; j < k; ++j) {
    double zj = std::min(2.0, std::max(0.0, z[j]));
    int p = std::min(1, static_cast<int>(std::floor(zj)));  // base entries in {0,1}
    // a coordinate exactly at 2 belongs to the top corner cell
    if (zj >= 2.0) p = 1;
    base[j] = p;
    frac[j] = zj - p;
  }
  // Stable argsort of the fractional parts, descending; ties by index keep
  // the path inside the ordered region.
  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&frac](int a, int b) { return frac[a] > frac[b]; });

  // Path vertices and barycentric weights along the path.
  std::vector<std::vector<int>> path{base};
  {
    std::vector<int> q = base;
    for (int r = 0; r < k; ++r) {
      ++q[order[r]];
      path.push_back(q);
    }
  }
  Eigen::VectorXd cw(k + 1);
  cw[0] = 1.0 - frac[order[0]];
  for (int r = 1; r < k; ++r) cw[r] = frac[order[r - 1]] - frac[order[r]];
  cw[k] = frac[order[k - 1]];

  const auto& mid = levels_.at(level + 1)->midpoint;
  std::vector<std::pair<int, double>> named(k + 1);
  for (int i = 0; i <= k; ++i) {
    LatticeKey key = lattice_key(path[i]);
    int gid = (key.a == key.b) ? t[key.a] : mid.at(ordered(t[key.a], t[key.b]));
    named[i] = {gid, cw[i]};
  }
  std::sort(named.begin(), named.end());
  std::vector<int> tuple(k + 1);
  Eigen::VectorXd w(k + 1);
  for (int i = 0; i <= k; ++i) {
    tuple[i] = named[i].first;
    w[i] = named[i].second;
  }
  Located l;
  l.cell = nxt.simplex_id(tuple);
  l.weights = std::move(w);
  return l;
}

Refinement::Located Refinement::locate_from(int from_level, int cell,
                                            const Eigen::VectorXd& weights, int to_level) const {
  if (to_level < from_level) throw std::invalid_argument("cannot locate upward");
  if (to_level > max_level()) throw std::invalid_argument("refinement not deep enough");
  Located l{cell, weights};
  for (int lvl = from_level; lvl < to_level; ++lvl) l = step_down(lvl, l.cell, l.weights);
  return l;
}

Refinement::Located Refinement::locate(const BaryPoint& p, int level) const {
  const MetricComplex& b = base();
  auto [verts, w] = p.support(b);
  int top = b.containing_top(verts);
  if (top < 0) throw std::invalid_argument("point support lies in no top cell");
  Located l;
  l.cell = top;
  l.weights = embed_weights(verts, w, b.tuple(top));
  return locate_from(0, l.cell, l.weights, level);
}

BaryPoint Refinement::base_point_of_vertex(int level, int v) const {
  const auto& pc = levels_.at(level)->lineage.parents.at(v);
  BaryPoint p;
  p.simplex = pc.base_simplex;
  p.weights = pc.weights;
  return p;
}

std::pair<MetricComplex, SubdivisionLineage> subdivide(const MetricComplex& c, int levels) {
  Refinement r = Refinement::of(c, levels);
  return {r.at(levels), r.lineage(levels)};
}

}  // namespace polyiso
