#include "polyiso/metric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <set>
#include <stdexcept>

namespace polyiso {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using HeapItem = std::pair<double, int>;
using MinHeap = std::priority_queue<HeapItem, std::vector<HeapItem>, std::greater<HeapItem>>;

struct ChordGroup {
  int cell = -1;      // top cell id at the chord level
  int base_top = -1;  // origin top cell in the base complex
  std::vector<int> verts;
  Eigen::MatrixXd chart;  // chart of the base top cell
  Eigen::MatrixXd pos;    // vertex positions inside that chart
};

// Group data is rebuilt on demand from the graph's refinement; it is cheap
// relative to the shortest-path work and keeps GeodesicGraph a plain value.
std::vector<ChordGroup> chord_groups(const Refinement& ref, int k, int chord_level) {
  const MetricComplex& ck = ref.at(k);
  const MetricComplex& base = ref.base();

  std::map<int, std::set<int>> members;
  for (int tc : ck.top_cells) {
    const int anc = ref.ancestor_top(k, tc, chord_level);
    for (int v : ck.tuple(tc)) members[anc].insert(v);
  }

  std::map<int, Eigen::MatrixXd> charts;
  std::vector<ChordGroup> groups;
  for (const auto& [cell, verts] : members) {
    ChordGroup g;
    g.cell = cell;
    g.base_top = ref.origin_top(chord_level, cell);
    auto it = charts.find(g.base_top);
    if (it == charts.end())
      it = charts.emplace(g.base_top, simplex_chart(base, g.base_top)).first;
    g.chart = it->second;
    g.verts.assign(verts.begin(), verts.end());
    const auto& tt = base.tuple(g.base_top);
    g.pos.resize(static_cast<int>(g.verts.size()), g.chart.cols());
    for (std::size_t i = 0; i < g.verts.size(); ++i) {
      BaryPoint bp = ref.base_point_of_vertex(k, g.verts[i]);
      auto [sv, sw] = bp.support(base);
      g.pos.row(static_cast<int>(i)) =
          chart_position(g.chart, embed_weights(sv, sw, tt)).transpose();
    }
    groups.push_back(std::move(g));
  }
  return groups;
}

GeodesicGraph build_graph(const Refinement& ref, int k, int chord_level) {
  GeodesicGraph g;
  g.level = k;
  g.chord_level = chord_level;
  g.refinement = ref.refined_to(k);

  std::map<VertexPair, double> edges;
  for (const auto& grp : chord_groups(g.refinement, k, chord_level)) {
    for (std::size_t i = 0; i < grp.verts.size(); ++i)
      for (std::size_t j = i + 1; j < grp.verts.size(); ++j) {
        VertexPair e = ordered(grp.verts[i], grp.verts[j]);
        if (!edges.count(e))
          edges[e] = (grp.pos.row(static_cast<int>(i)) - grp.pos.row(static_cast<int>(j))).norm();
      }
  }

  const int n = g.refinement.at(k).num_vertices;
  std::vector<int> degree(n, 0);
  for (const auto& [e, w] : edges) {
    ++degree[e.first];
    ++degree[e.second];
  }
  g.offsets.assign(n + 1, 0);
  for (int v = 0; v < n; ++v) g.offsets[v + 1] = g.offsets[v] + degree[v];
  g.nbr.resize(g.offsets[n]);
  g.weight.resize(g.offsets[n]);
  std::vector<int> fill(g.offsets.begin(), g.offsets.end() - 1);
  for (const auto& [e, w] : edges) {
    g.nbr[fill[e.first]] = e.second;
    g.weight[fill[e.first]++] = w;
    g.nbr[fill[e.second]] = e.first;
    g.weight[fill[e.second]++] = w;
  }
  return g;
}

struct Attachment {
  std::vector<std::pair<int, double>> links;  // (node, distance to the point)
  std::vector<int> groups;                    // chord group cells containing the point
};

// Chord-level top cells containing a base point, with per-node link lengths.
Attachment attach_point(const GeodesicGraph& g, const BaryPoint& x, const PLMap* image_map) {
  const Refinement& ref = g.refinement;
  const MetricComplex& base = ref.base();
  const MetricComplex& cc = ref.at(g.chord_level);

  auto loc = ref.locate(x, g.chord_level);
  const auto& t = cc.tuple(loc.cell);
  std::vector<int> supp;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (loc.weights[static_cast<int>(i)] > kWeightTol) supp.push_back(t[i]);

  std::vector<int> cells = cc.vertex_to_tops[supp[0]];
  for (std::size_t i = 1; i < supp.size(); ++i) {
    std::vector<int> keep;
    for (int c : cells) {
      const auto& tt = cc.tuple(c);
      if (std::binary_search(tt.begin(), tt.end(), supp[i])) keep.push_back(c);
    }
    cells = std::move(keep);
  }
  std::sort(cells.begin(), cells.end());

  Attachment at;
  at.groups = cells;
  auto [bs, bw] = x.support(base);

  Eigen::VectorXd fx;
  PLMap fr;
  if (image_map) {
    fx = evaluate_ambient(*image_map, x);
    fr = image_map->refined(g.level);
  }

  for (const auto& grp : chord_groups(ref, g.level, g.chord_level)) {
    if (!std::binary_search(cells.begin(), cells.end(), grp.cell)) continue;
    const auto& tt = base.tuple(grp.base_top);
    Eigen::VectorXd px = chart_position(grp.chart, embed_weights(bs, bw, tt));
    for (std::size_t i = 0; i < grp.verts.size(); ++i) {
      double d;
      if (image_map)
        d = (fx - fr.images().row(grp.verts[i]).transpose()).norm();
      else
        d = (px - grp.pos.row(static_cast<int>(i)).transpose()).norm();
      at.links.emplace_back(grp.verts[i], d);
    }
  }
  return at;
}

}  // namespace

DistanceEstimate point_distance(const GeodesicGraph& g, const BaryPoint& x, const BaryPoint& y,
                                const PLMap* image_map) {
  Attachment ax = attach_point(g, x, image_map);
  Attachment ay = attach_point(g, y, image_map);

  std::vector<double> dist(g.num_nodes(), kInf);
  MinHeap heap;
  for (const auto& [u, d] : ax.links) {
    if (d < dist[u]) {
      dist[u] = d;
      heap.emplace(d, u);
    }
  }
  while (!heap.empty()) {
    auto [d, u] = heap.top();
    heap.pop();
    if (d > dist[u]) continue;
    for (int e = g.offsets[u]; e < g.offsets[u + 1]; ++e) {
      const double nd = d + g.weight[e];
      if (nd < dist[g.nbr[e]]) {
        dist[g.nbr[e]] = nd;
        heap.emplace(nd, g.nbr[e]);
      }
    }
  }

  double best = kInf;
  for (const auto& [v, d] : ay.links)
    if (dist[v] + d < best) best = dist[v] + d;

  // Direct chord when both points share a chord group.
  std::vector<int> shared;
  std::set_intersection(ax.groups.begin(), ax.groups.end(), ay.groups.begin(), ay.groups.end(),
                        std::back_inserter(shared));
  if (!shared.empty()) {
    const Refinement& ref = g.refinement;
    const MetricComplex& base = ref.base();
    if (image_map) {
      best = std::min(best, (evaluate_ambient(*image_map, x) - evaluate_ambient(*image_map, y)).norm());
    } else {
      const int cell = shared.front();
      const int bt = ref.origin_top(g.chord_level, cell);
      Eigen::MatrixXd chart = simplex_chart(base, bt);
      const auto& tt = base.tuple(bt);
      auto [xs, xw] = x.support(base);
      auto [ys, yw] = y.support(base);
      best = std::min(best, (chart_position(chart, embed_weights(xs, xw, tt)) -
                             chart_position(chart, embed_weights(ys, yw, tt)))
                                .norm());
    }
  }

  DistanceEstimate est;
  est.value = best;
  est.level = g.level;
  est.upper_bound = true;
  return est;
}

void check_point(const MetricComplex& c, const BaryPoint& p) {
  if (p.simplex < 0 || p.simplex >= static_cast<int>(c.simplices.size()))
    throw std::invalid_argument("point simplex id out of range");
  const auto& t = c.tuple(p.simplex);
  if (p.weights.size() != static_cast<int>(t.size()))
    throw std::invalid_argument("point weight count does not match simplex vertex count");
  if (p.weights.minCoeff() < -kWeightTol)
    throw std::invalid_argument("point weights must be nonnegative");
  if (std::abs(p.weights.sum() - 1.0) > kWeightTol)
    throw std::invalid_argument("point weights must sum to 1");
}

GeodesicGraph geodesic_graph(const MetricComplex& c, int k) {
  if (k < 0) throw std::invalid_argument("subdivision level must be nonnegative");
  return build_graph(Refinement::of(c, k), k, 0);
}

GeodesicGraph geodesic_graph(const Refinement& ref, int k, int chord_level) {
  if (k < 0 || chord_level < 0 || chord_level > k)
    throw std::invalid_argument("invalid graph levels");
  return build_graph(ref, k, chord_level);
}

GeodesicGraph with_image_weights(const GeodesicGraph& g, const PLMap& f) {
  if (!f.is_ambient()) throw std::invalid_argument("induced weights need an ambient map");
  if (g.chord_level < f.level())
    throw std::invalid_argument("graph chord level is below the map's affinity level");
  PLMap fr = f.refined(g.level);
  GeodesicGraph out = g;
  for (int u = 0; u < g.num_nodes(); ++u)
    for (int e = g.offsets[u]; e < g.offsets[u + 1]; ++e)
      out.weight[e] = (fr.images().row(u) - fr.images().row(g.nbr[e])).norm();
  return out;
}

double node_distance(const GeodesicGraph& g, int u, int v) {
  std::vector<double> dist(g.num_nodes(), kInf);
  MinHeap heap;
  dist[u] = 0.0;
  heap.emplace(0.0, u);
  while (!heap.empty()) {
    auto [d, a] = heap.top();
    heap.pop();
    if (a == v) return d;
    if (d > dist[a]) continue;
    for (int e = g.offsets[a]; e < g.offsets[a + 1]; ++e) {
      const double nd = d + g.weight[e];
      if (nd < dist[g.nbr[e]]) {
        dist[g.nbr[e]] = nd;
        heap.emplace(nd, g.nbr[e]);
      }
    }
  }
  return dist[v];
}

std::vector<double> node_distances_from(const GeodesicGraph& g, int u) {
  std::vector<double> dist(g.num_nodes(), kInf);
  MinHeap heap;
  dist[u] = 0.0;
  heap.emplace(0.0, u);
  while (!heap.empty()) {
    auto [d, a] = heap.top();
    heap.pop();
    if (d > dist[a]) continue;
    for (int e = g.offsets[a]; e < g.offsets[a + 1]; ++e) {
      const double nd = d + g.weight[e];
      if (nd < dist[g.nbr[e]]) {
        dist[g.nbr[e]] = nd;
        heap.emplace(nd, g.nbr[e]);
      }
    }
  }
  return dist;
}

DistanceEstimate intrinsic_distance(const MetricComplex& c, const BaryPoint& x,
                                    const BaryPoint& y, int k) {
  check_point(c, x);
  check_point(c, y);
  GeodesicGraph g = geodesic_graph(c, k);
  return point_distance(g, x, y, nullptr);
}

DistanceEstimate induced_distance(const PLMap& f, const BaryPoint& x, const BaryPoint& y, int k) {
  if (!f.is_ambient()) throw std::invalid_argument("induced_distance needs an ambient map");
  if (k < f.level())
    throw std::invalid_argument("graph level below the map's affinity level");
  check_point(f.domain(), x);
  check_point(f.domain(), y);
  GeodesicGraph g = geodesic_graph(f.refinement().refined_to(k), k, f.level());
  GeodesicGraph gi = with_image_weights(g, f);
  return point_distance(gi, x, y, &f);
}

namespace {

// Length of the image of the straight segment between two weight vectors of
// one cell, recursing through subdivision levels until the map is affine.
double segment_image_length(const PLMap& f, int lvl, int cell, const Eigen::VectorXd& wa,
                            const Eigen::VectorXd& wb) {
  const Refinement& ref = f.refinement();
  const MetricComplex& cur = ref.at(lvl);
  const auto& t = cur.tuple(cell);

  if (lvl == f.level()) {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(f.ambient_dim());
    for (std::size_t i = 0; i < t.size(); ++i)
      d += (wa[static_cast<int>(i)] - wb[static_cast<int>(i)]) *
           f.images().row(t[i]).transpose();
    return d.norm();
  }

  const int k = static_cast<int>(t.size()) - 1;
  std::vector<double> cuts{0.0, 1.0};
  if (k > 0) {
    Eigen::VectorXd za = 2.0 * ordered_coords(wa);
    Eigen::VectorXd zb = 2.0 * ordered_coords(wb);
    auto add_cut = [&cuts](double num, double den) {
      if (std::abs(den) < 1e-15) return;
      const double s = num / den;
      if (s > 1e-12 && s < 1.0 - 1e-12) cuts.push_back(s);
    };
    for (int i = 0; i < k; ++i) add_cut(1.0 - za[i], zb[i] - za[i]);
    for (int i = 0; i < k; ++i)
      for (int j = i + 1; j < k; ++j)
        for (int m : {-1, 0, 1})
          add_cut(m - (za[i] - za[j]), (zb[i] - za[i]) - (zb[j] - za[j]));
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end(),
                           [](double a, double b) { return std::abs(a - b) < 1e-13; }),
               cuts.end());
  }

  double total = 0.0;
  for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
    const double ta = cuts[s], tb = cuts[s + 1];
    const double tm = 0.5 * (ta + tb);
    Eigen::VectorXd wm = (1.0 - tm) * wa + tm * wb;
    auto mid = ref.locate_from(lvl, cell, wm, lvl + 1);
    const auto& ct = ref.at(lvl + 1).tuple(mid.cell);

    auto reexpress = [&](double tt) {
      Eigen::VectorXd w = (1.0 - tt) * wa + tt * wb;
      auto loc = ref.locate_from(lvl, cell, w, lvl + 1);
      const auto& lt = ref.at(lvl + 1).tuple(loc.cell);
      std::vector<int> sv;
      std::vector<double> sw;
      for (std::size_t i = 0; i < lt.size(); ++i)
        if (loc.weights[static_cast<int>(i)] > kWeightTol) {
          sv.push_back(lt[i]);
          sw.push_back(loc.weights[static_cast<int>(i)]);
        }
      Eigen::VectorXd swv = Eigen::Map<Eigen::VectorXd>(sw.data(), static_cast<int>(sw.size()));
      swv /= swv.sum();
      return embed_weights(sv, swv, ct);
    };
    total += segment_image_length(f, lvl + 1, mid.cell, reexpress(ta), reexpress(tb));
  }
  return total;
}

}  // namespace

double path_image_length(const PLMap& f, const std::vector<BaryPoint>& polyline) {
  if (!f.is_ambient()) throw std::invalid_argument("path_image_length needs an ambient map");
  if (polyline.size() < 2) return 0.0;
  const MetricComplex& base = f.domain();
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < polyline.size(); ++i) {
    check_point(base, polyline[i]);
    check_point(base, polyline[i + 1]);
    auto [va, wa] = polyline[i].support(base);
    auto [vb, wb] = polyline[i + 1].support(base);
    std::vector<int> uni;
    std::set_union(va.begin(), va.end(), vb.begin(), vb.end(), std::back_inserter(uni));
    int top = base.containing_top(uni);
    if (top < 0)
      throw std::invalid_argument("broken polyline: consecutive points share no simplex");
    const auto& tt = base.tuple(top);
    total += segment_image_length(f, 0, top, embed_weights(va, wa, tt),
                                  embed_weights(vb, wb, tt));
  }
  return total;
}

}  // namespace polyiso
