#include "polyiso/corrugation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "polyiso/rng.hpp"

namespace polyiso {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int next_pow2(int m) {
  int p = 1;
  while (p < m) p <<= 1;
  return p;
}

// Largest generalized eigenvalue of (B, A) with A positive definite, plus an
// eigenvector normalized to y'Ay = 1. Closed forms for the 1x1/2x2 cells the
// optimizer touches every iteration.
double max_gen_eig(const Eigen::MatrixXd& B, const Eigen::MatrixXd& A, Eigen::VectorXd* y) {
  const int k = static_cast<int>(A.rows());
  if (k == 1) {
    if (y) {
      y->resize(1);
      (*y)[0] = 1.0 / std::sqrt(A(0, 0));
    }
    return B(0, 0) / A(0, 0);
  }
  if (k == 2) {
    const double a2 = A(0, 0) * A(1, 1) - A(0, 1) * A(1, 0);
    const double a1 = A(1, 1) * B(0, 0) - A(0, 1) * B(1, 0) - A(1, 0) * B(0, 1) +
                      A(0, 0) * B(1, 1);
    const double a0 = B(0, 0) * B(1, 1) - B(0, 1) * B(1, 0);
    const double disc = std::max(0.0, a1 * a1 - 4.0 * a2 * a0);
    const double lam = (a1 + std::sqrt(disc)) / (2.0 * a2);
    if (y) {
      Eigen::Matrix2d M = B - lam * A;
      Eigen::Vector2d r0(M(0, 0), M(0, 1)), r1(M(1, 0), M(1, 1));
      Eigen::Vector2d v = (r0.norm() >= r1.norm()) ? Eigen::Vector2d(-r0[1], r0[0])
                                                   : Eigen::Vector2d(-r1[1], r1[0]);
      if (v.norm() < 1e-300) v = Eigen::Vector2d(1, 0);
      const double s = std::sqrt(v.dot(A * v));
      y->resize(2);
      (*y)[0] = v[0] / s;
      (*y)[1] = v[1] / s;
    }
    return lam;
  }
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(B, A);
  const int last = k - 1;
  if (y) *y = ges.eigenvectors().col(last);
  return ges.eigenvalues()[last];
}

// Principal directions of the image point cloud (computed once per embed).
Eigen::MatrixXd span_basis(const Eigen::MatrixXd& cloud) {
  Eigen::MatrixXd centered = cloud.rowwise() - cloud.colwise().mean();
  Eigen::MatrixXd cov = centered.transpose() * centered;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const double lmax = es.eigenvalues().maxCoeff();
  std::vector<int> keep;
  for (int i = 0; i < es.eigenvalues().size(); ++i)
    if (es.eigenvalues()[i] > 1e-12 * std::max(1.0, lmax)) keep.push_back(i);
  Eigen::MatrixXd U(cloud.cols(), static_cast<int>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) U.col(static_cast<int>(i)) =
      es.eigenvectors().col(keep[i]);
  return U;
}

// Unit vector orthogonal to `chord` and, as far as possible, to the span of
// the whole image point cloud; fresh ambient directions give corrugations
// room that in-span directions do not.
Eigen::VectorXd pick_normal(const Eigen::MatrixXd& span, const Eigen::VectorXd& chord,
                            Rng& rng) {
  const int N = static_cast<int>(chord.size());
  Eigen::VectorXd c = chord.normalized();
  auto drop_chord = [&c](Eigen::VectorXd v) {
    v -= c.dot(v) * c;
    return v;
  };
  auto drop_all = [&](Eigen::VectorXd v) {
    for (int sweep = 0; sweep < 2; ++sweep) {  // span and chord overlap
      for (int i = 0; i < span.cols(); ++i) v -= span.col(i).dot(v) * span.col(i);
      v = drop_chord(v);
    }
    return v;
  };
  int best_j = -1;
  double best = 0.0;
  for (int j = 0; j < N; ++j) {
    Eigen::VectorXd r = drop_all(Eigen::VectorXd::Unit(N, j));
    if (r.norm() >= 0.5) return (r / r.norm()).eval();
    if (r.norm() > best) {
      best = r.norm();
      best_j = j;
    }
  }
  if (best_j >= 0 && best > 1e-6) {
    Eigen::VectorXd r = drop_all(Eigen::VectorXd::Unit(N, best_j));
    return (r / r.norm()).eval();
  }
  // Cloud spans the ambient space; any direction orthogonal to the chord.
  for (int tries = 0; tries < 64; ++tries) {
    Eigen::VectorXd r = drop_chord(rng.unit(N));
    if (r.norm() > 1e-6) return (r / r.norm()).eval();
  }
  throw std::runtime_error("no direction orthogonal to the image chord available");
}

// Early-exit Dijkstra with reusable buffers; measurement runs one per edge.
struct ShortestPathBuffer {
  std::vector<double> dist;
  std::vector<int> stamp;
  int run = 0;

  void reset(int n) {
    if (static_cast<int>(dist.size()) != n) {
      dist.assign(n, kInf);
      stamp.assign(n, 0);
      run = 0;
    }
  }

  double distance(const GeodesicGraph& g, int u, int v) {
    reset(g.num_nodes());
    ++run;
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
    auto get = [&](int a) { return stamp[a] == run ? dist[a] : kInf; };
    auto set = [&](int a, double d) {
      stamp[a] = run;
      dist[a] = d;
    };
    set(u, 0.0);
    heap.emplace(0.0, u);
    while (!heap.empty()) {
      auto [d, a] = heap.top();
      heap.pop();
      if (a == v) return d;
      if (d > get(a)) continue;
      for (int e = g.offsets[a]; e < g.offsets[a + 1]; ++e) {
        const double nd = d + g.weight[e];
        if (nd < get(g.nbr[e])) {
          set(g.nbr[e], nd);
          heap.emplace(nd, g.nbr[e]);
        }
      }
    }
    return get(v);
  }
};

double tooth_profile(double t, int m) {
  // Nodes at even grid positions, apexes alternating +1, -1 at odd ones.
  const double x = t * 2.0 * m;
  const int j = std::min(static_cast<int>(std::floor(x)), 2 * m - 1);
  const double r = x - j;
  auto node = [](int i) {
    if (i % 2 == 0) return 0.0;
    return (i % 4 == 1) ? 1.0 : -1.0;
  };
  return (1.0 - r) * node(j) + r * node(j + 1);
}

}  // namespace

void StretchConfig::validate() const {
  if (!(eta > 0.0)) throw std::invalid_argument("eta must be positive");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("rho must be in (0,1)");
  if (max_rounds < 1) throw std::invalid_argument("max_rounds must be positive");
  if (iterations_per_round < 1 || random_pairs < 0 || cell_budget < 1)
    throw std::invalid_argument("invalid tuning parameters");
}

int sawtooth_teeth(double target_len, double chord_len, double eps) {
  const double disc = target_len * target_len - chord_len * chord_len;
  if (disc <= 0.0) return 0;
  return static_cast<int>(std::ceil(std::sqrt(disc) / (2.0 * eps)));
}

std::vector<Eigen::VectorXd> sawtooth_1d(double target_len, const Eigen::VectorXd& p,
                                         const Eigen::VectorXd& q,
                                         const Eigen::VectorXd& normal, double eps) {
  const double chord = (q - p).norm();
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
  if (chord > target_len * (1.0 + kShortnessSlack))
    throw std::invalid_argument("chord longer than target length: map not short on this edge");
  if (!(chord > 0.0)) throw std::invalid_argument("degenerate image segment");
  if (std::abs(normal.norm() - 1.0) > 1e-9) throw std::invalid_argument("normal must be unit");
  if (std::abs(normal.dot(q - p)) > 1e-9 * chord)
    throw std::invalid_argument("normal must be orthogonal to the segment");

  const int m = sawtooth_teeth(target_len, chord, eps);
  if (m == 0) return {p, q};
  const double amp = std::sqrt(target_len * target_len - chord * chord) / (2.0 * m);

  std::vector<Eigen::VectorXd> poly;
  poly.reserve(2 * m + 1);
  for (int j = 0; j <= 2 * m; ++j) {
    const double t = static_cast<double>(j) / (2.0 * m);
    poly.push_back(p + t * (q - p) + amp * tooth_profile(t, m) * normal);
  }
  return poly;
}

PLMap stretch_round(const PLMap& f, const StretchConfig& cfg, double eps_round,
                    int round_index) {
  cfg.validate();
  if (!f.is_ambient()) throw std::invalid_argument("stretch_round needs an ambient map");
  if (!(eps_round > 0.0)) throw std::invalid_argument("round budget must be positive");
  if (f.ambient_dim() < 2 * f.domain().dim + 1)
    throw std::invalid_argument("ambient dimension below 2*dim+1");
  {
    ShortnessCertificate cert = shortness_certificate(f);
    if (!cert.is_short()) throw std::invalid_argument("stretch_round input map is not short");
  }

  const int L = f.level() + 1;
  PLMap fr = f.refined(L);
  const MetricComplex& lc = fr.level_complex();
  const int nv = lc.num_vertices;
  const int N = fr.ambient_dim();
  const Eigen::MatrixXd X0 = fr.images();

  struct Edge {
    int u, v;
    double target, w;
  };
  std::vector<Edge> edges;
  for (const auto& t : lc.simplices)
    if (t.size() == 2) {
      const double len = lc.edge_length(t[0], t[1]);
      edges.push_back({t[0], t[1], len, 1.0 / (len * len)});
    }

  struct Cell {
    std::vector<int> verts;
    Eigen::MatrixXd gram;
  };
  std::vector<Cell> cells;
  for (int tc : lc.top_cells) {
    const auto& t = lc.tuple(tc);
    if (t.size() < 2) continue;
    cells.push_back({t, simplex_gram(lc, t)});
  }

  Eigen::MatrixXd X = X0;

  // Residual in the edge objective decides whether symmetry must be broken;
  // an already isometric map stays exactly fixed.
  double initial = 0.0;
  for (const auto& e : edges) {
    const double len = (X.row(e.u) - X.row(e.v)).norm();
    initial += e.w * (e.target - len) * (e.target - len);
  }
  Rng rng = Rng(cfg.seed).fork(0x57e7c4).fork(static_cast<std::uint64_t>(round_index));
  if (initial > 1e-24) {
    // Seed transverse modes: per-vertex offsets orthogonal to the local
    // image span, magnitude 0.01 * eps_round.
    std::vector<std::vector<int>> nbrs(nv);
    for (const auto& e : edges) {
      nbrs[e.u].push_back(e.v);
      nbrs[e.v].push_back(e.u);
    }
    for (int v = 0; v < nv; ++v) {
      Eigen::VectorXd dir = rng.unit(N);
      for (int u : nbrs[v]) {
        Eigen::VectorXd t = (X.row(u) - X.row(v)).transpose();
        const double tn = t.norm();
        if (tn > 1e-300) dir -= (dir.dot(t) / (tn * tn)) * t;
      }
      const double n = dir.norm();
      if (n > 1e-9) X.row(v) += (0.01 * eps_round / n) * dir.transpose();
    }
  }

  // Jacobi-preconditioned descent with momentum inside the displacement
  // ball; the hinge penalty prices per-cell stretch above 1.
  Eigen::VectorXd precond = Eigen::VectorXd::Constant(nv, 1e-12);
  for (const auto& e : edges) {
    precond[e.u] += 2.0 * e.w;
    precond[e.v] += 2.0 * e.w;
  }
  const double kappa = 100.0;
  const double lr = 0.15;
  const double momentum = 0.8;
  Eigen::MatrixXd G(nv, N), M = Eigen::MatrixXd::Zero(nv, N);

  for (int it = 0; it < cfg.iterations_per_round; ++it) {
    G.setZero();
    for (const auto& e : edges) {
      Eigen::VectorXd d = (X.row(e.u) - X.row(e.v)).transpose();
      const double len = d.norm();
      if (len < 1e-300) continue;
      const double coef = -2.0 * e.w * (e.target - len) / len;
      G.row(e.u) += coef * d.transpose();
      G.row(e.v) -= coef * d.transpose();
    }
    for (const auto& c : cells) {
      const int k = static_cast<int>(c.verts.size()) - 1;
      Eigen::MatrixXd V(N, k);
      for (int i = 1; i <= k; ++i)
        V.col(i - 1) = (X.row(c.verts[i]) - X.row(c.verts[0])).transpose();
      Eigen::MatrixXd B = V.transpose() * V;
      Eigen::VectorXd y;
      const double lam = max_gen_eig(B, c.gram, &y);
      if (lam <= 1.0) continue;
      const double coef = kappa * 2.0 * (lam - 1.0);
      Eigen::VectorXd Vy = V * y;
      double ysum = 0.0;
      for (int i = 1; i <= k; ++i) {
        G.row(c.verts[i]) += coef * 2.0 * y[i - 1] * Vy.transpose();
        ysum += y[i - 1];
      }
      G.row(c.verts[0]) -= coef * 2.0 * ysum * Vy.transpose();
    }

    M = momentum * M - G;
    for (int v = 0; v < nv; ++v) {
      X.row(v) += (lr / precond[v]) * M.row(v);
      Eigen::VectorXd d = (X.row(v) - X0.row(v)).transpose();
      const double dn = d.norm();
      if (dn > eps_round) X.row(v) = X0.row(v) + (eps_round / dn) * d.transpose();
    }
  }

  // Exact re-certification; shrink toward the short start until it passes.
  auto certify = [&](const Eigen::MatrixXd& Y) {
    PLMap cand = PLMap::ambient(fr.refinement(), L, Y);
    return shortness_certificate(cand).max_stretch;
  };
  double lo = 0.0, hi = 1.0;
  if (certify(X) > 1.0 + kShortnessSlack) {
    for (int it = 0; it < 40 && hi - lo > 1e-12; ++it) {
      const double mid = 0.5 * (lo + hi);
      Eigen::MatrixXd Y = X0 + mid * (X - X0);
      if (certify(Y) <= 1.0 + 0.5 * kShortnessSlack)
        lo = mid;
      else
        hi = mid;
    }
    X = X0 + lo * (X - X0);
  }
  return PLMap::ambient(fr.refinement(), L, std::move(X));
}

DefectReport measure_defect(const PLMap& f, const PLMap& reference, const StretchConfig& cfg,
                            bool with_injectivity) {
  if (!f.is_ambient()) throw std::invalid_argument("measure_defect needs an ambient map");
  DefectReport rep;
  const int L = f.level();
  GeodesicGraph gi = geodesic_graph(f.refinement(), L, L);
  GeodesicGraph gm = with_image_weights(gi, f);
  const MetricComplex& lc = f.level_complex();

  ShortestPathBuffer buf_i, buf_m;
  double defect = 0.0;
  int count = 0;
  for (const auto& t : lc.simplices) {
    if (t.size() != 2) continue;
    const double di = buf_i.distance(gi, t[0], t[1]);
    const double dm = buf_m.distance(gm, t[0], t[1]);
    defect = std::max(defect, std::max(0.0, di - dm));
    ++count;
  }

  Rng rng = Rng(cfg.seed).fork(0xdefec7).fork(static_cast<std::uint64_t>(L));
  const int nv = lc.num_vertices;
  for (int i = 0; i < cfg.random_pairs; ++i) {
    const int u = static_cast<int>(rng.index(nv));
    const int v = static_cast<int>(rng.index(nv));
    std::vector<double> di = node_distances_from(gi, u);
    std::vector<double> dm = node_distances_from(gm, u);
    if (std::isfinite(di[v]) && std::isfinite(dm[v]))
      defect = std::max(defect, std::max(0.0, di[v] - dm[v]));
    ++count;
  }

  rep.length_defect = defect;
  rep.pairs_measured = count;
  rep.displacement = sup_displacement(f, reference);
  rep.max_stretch = shortness_certificate(f).max_stretch;
  if (with_injectivity) rep.min_separation = injectivity_check(f, 0.0).min_separation;
  return rep;
}

namespace {

// Exact corrugation of a 1-complex map, cell by cell. Isometric cells stay
// untouched; degenerate cells (image collapsed to a point) are first spread
// by a seeded general-position nudge of their movable vertices.
EmbedResult embed_dim1(const PLMap& f0, const StretchConfig& cfg) {
  EmbedResult res;
  const int L0 = f0.level();
  const MetricComplex& lc = f0.level_complex();
  const int N = f0.ambient_dim();
  Eigen::MatrixXd X = f0.images();

  struct Cell {
    int a, b;
    double target;
  };
  std::vector<Cell> cells;
  std::vector<std::vector<int>> incident(lc.num_vertices);
  for (int tc : lc.top_cells) {
    const auto& t = lc.tuple(tc);
    if (t.size() != 2) continue;
    incident[t[0]].push_back(static_cast<int>(cells.size()));
    incident[t[1]].push_back(static_cast<int>(cells.size()));
    cells.push_back({t[0], t[1], lc.edge_length(t[0], t[1])});
  }

  auto chord = [&X](const Cell& c) { return (X.row(c.b) - X.row(c.a)).norm(); };
  auto degenerate = [&](const Cell& c) { return chord(c) <= 1e-9 * c.target; };

  Rng rng = Rng(cfg.seed).fork(0xd1);
  bool nudged = false;
  for (int v = 0; v < lc.num_vertices; ++v) {
    if (incident[v].empty()) continue;
    bool all_degenerate = true;
    double min_target = kInf;
    for (int ci : incident[v]) {
      all_degenerate = all_degenerate && degenerate(cells[ci]);
      min_target = std::min(min_target, cells[ci].target);
    }
    if (!all_degenerate) continue;
    const double tau = std::min(0.45 * cfg.epsilon, 0.2 * min_target);
    X.row(v) += tau * rng.unit(N).transpose();
    nudged = true;
  }

  double eps_cell = 0.45 * cfg.epsilon;
  int max_m = 0;
  std::vector<int> teeth(cells.size(), 0);
  std::vector<double> amp(cells.size(), 0.0);
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    const Cell& c = cells[ci];
    const double len = chord(c);
    if (len <= 1e-12 * c.target) {
      res.success = false;
      res.failure_reason = "degenerate cell with pinned endpoints cannot be corrugated";
      res.map = f0;
      res.report = measure_defect(f0, f0, cfg, true);
      return res;
    }
    if (len > c.target * (1.0 + kShortnessSlack)) {
      res.success = false;
      res.failure_reason = "input map is not short on a cell";
      res.map = f0;
      res.report = measure_defect(f0, f0, cfg, true);
      return res;
    }
    const double disc = std::max(0.0, c.target * c.target - len * len);
    if (std::sqrt(disc) <= 1e-12 * c.target) continue;  // already isometric
    const int m = next_pow2(sawtooth_teeth(c.target, len, eps_cell));
    teeth[ci] = m;
    amp[ci] = std::sqrt(disc) / (2.0 * m);
    max_m = std::max(max_m, m);
  }

  if (max_m == 0 && !nudged) {
    res.map = f0;
    res.report = measure_defect(f0, f0, cfg, true);
    res.success = res.report.length_defect <= cfg.eta && res.report.min_separation > 0.0;
    if (!res.success) res.failure_reason = "input map already tight but not injective";
    return res;
  }

  int depth = 1;
  while ((1 << depth) < 2 * std::max(max_m, 1)) ++depth;
  const int L = L0 + depth;
  if (static_cast<long>(lc.top_cells.size()) << depth > cfg.cell_budget) {
    res.success = false;
    res.failure_reason = "tooth budget exceeds the cell budget; increase eps or the budget";
    res.map = f0;
    res.report = measure_defect(f0, f0, cfg, true);
    return res;
  }

  const Eigen::MatrixXd span = span_basis(X);
  std::vector<Eigen::VectorXd> normals(cells.size());
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    if (teeth[ci] == 0) continue;
    Eigen::VectorXd dir = (X.row(cells[ci].b) - X.row(cells[ci].a)).transpose();
    normals[ci] = pick_normal(span, dir, rng);
  }

  Refinement ref = f0.refinement().refined_to(L);
  const MetricComplex& fine = ref.at(L);
  Eigen::MatrixXd Y(fine.num_vertices, N);
  std::map<std::pair<int, int>, std::size_t> cell_of;  // level-L0 edge -> cells index
  for (std::size_t ci = 0; ci < cells.size(); ++ci)
    cell_of[{cells[ci].a, cells[ci].b}] = ci;

  for (int v = 0; v < fine.num_vertices; ++v) {
    BaryPoint bp = ref.base_point_of_vertex(L, v);
    auto loc = ref.locate(bp, L0);
    const auto& t = lc.tuple(loc.cell);
    const std::size_t ci = cell_of.at({t[0], t[1]});
    const Cell& c = cells[ci];
    const double s = loc.weights[1];  // position from t[0] toward t[1]
    Eigen::VectorXd base =
        (1.0 - s) * X.row(c.a).transpose() + s * X.row(c.b).transpose();
    if (teeth[ci] > 0)
      base += amp[ci] * tooth_profile(s, teeth[ci]) * normals[ci];
    Y.row(v) = base.transpose();
  }

  PLMap g = PLMap::ambient(ref, L, std::move(Y));
  res.report = measure_defect(g, f0, cfg, true);
  res.map = g;

  // General-position jitter as a last resort for injectivity; it trades the
  // exact per-cell isometry for separation, so only failed checks pay it.
  Rng jrng = rng.fork(0x11);
  int tries = 0;
  while (!(res.report.min_separation > 0.0) && tries < 3) {
    ++tries;
    // nudges and teeth use at most 0.9 epsilon; jitter takes 1% of the rest
    const double mag = 0.01 * 0.1 * cfg.epsilon;
    Eigen::MatrixXd Z = res.map.images();
    for (int v = 0; v < Z.rows(); ++v) Z.row(v) += (mag * jrng.real()) * jrng.unit(N).transpose();
    PLMap jg = PLMap::ambient(res.map.refinement(), res.map.level(), std::move(Z));
    res.map = jg;
    res.report = measure_defect(jg, f0, cfg, true);
    res.jittered = true;
  }

  res.success = res.report.length_defect <= cfg.eta && res.report.min_separation > 0.0 &&
                res.report.displacement < cfg.epsilon &&
                res.report.max_stretch <= 1.0 + kShortnessSlack;
  if (!res.success && res.failure_reason.empty())
    res.failure_reason = "corrugated map missed a contract bound";
  return res;
}

}  // namespace

EmbedResult embed_polyhedron(const MetricComplex& c, const PLMap& f0, const StretchConfig& cfg) {
  cfg.validate();
  if (!f0.is_ambient()) throw std::invalid_argument("embed_polyhedron needs an ambient map");
  if (!f0.domain().structurally_equal(c))
    throw std::invalid_argument("initial map is not defined on the given complex");
  if (f0.ambient_dim() < 2 * c.dim + 1)
    throw std::invalid_argument("ambient dimension below 2*dim+1");
  {
    ShortnessCertificate cert = shortness_certificate(f0);
    if (!cert.is_short())
      throw std::invalid_argument("initial map is not short");
  }

  if (c.dim <= 1) return embed_dim1(f0, cfg);

  EmbedResult res;
  PLMap g = f0;
  DefectReport current = measure_defect(g, f0, cfg);
  if (current.length_defect <= cfg.eta) {
    InjectivityResult inj = injectivity_check(g, 0.0);
    current.min_separation = inj.min_separation;
    if (inj.injective) {
      res.map = g;
      res.report = current;
      res.success = true;
      return res;
    }
  }

  for (int round = 1; round <= cfg.max_rounds; ++round) {
    RoundInfo info;
    info.round = round;
    info.eps_round = cfg.epsilon * std::pow(0.5, round);
    info.level = g.level() + 1;

    long next_cells = static_cast<long>(g.level_complex().top_cells.size()) << c.dim;
    if (next_cells > cfg.cell_budget) {
      res.failure_reason = "cell budget exhausted before reaching the defect target";
      break;
    }

    PLMap cand = stretch_round(g, cfg, info.eps_round, round);
    info.report = measure_defect(cand, f0, cfg);
    info.stalled = info.report.length_defect > cfg.rho * current.length_defect;
    info.accepted = info.report.length_defect <= current.length_defect + 1e-12;

    if (info.accepted) {
      g = cand;
      current = info.report;
    }
    res.rounds.push_back(info);

    if (current.length_defect <= cfg.eta) {
      InjectivityResult inj = injectivity_check(g, 0.0);
      current.min_separation = inj.min_separation;
      Rng jrng = Rng(cfg.seed).fork(0x9d).fork(static_cast<std::uint64_t>(round));
      int tries = 0;
      while (!inj.injective && tries < 3) {
        ++tries;
        const double mag = 0.01 * cfg.epsilon * std::pow(0.5, round);
        Eigen::MatrixXd Z = g.images();
        for (int v = 0; v < Z.rows(); ++v)
          Z.row(v) += (mag * jrng.real()) * jrng.unit(g.ambient_dim()).transpose();
        PLMap jg = PLMap::ambient(g.refinement(), g.level(), std::move(Z));
        if (shortness_certificate(jg).is_short()) {
          DefectReport jrep = measure_defect(jg, f0, cfg);
          if (jrep.length_defect <= cfg.eta) {
            inj = injectivity_check(jg, 0.0);
            if (inj.injective) {
              g = jg;
              current = jrep;
              current.min_separation = inj.min_separation;
              res.jittered = true;
            }
          }
        }
      }
      if (inj.injective) {
        res.map = g;
        res.report = current;
        res.success = true;
        return res;
      }
    }
  }

  res.map = g;
  res.report = measure_defect(g, f0, cfg, true);
  res.success = false;
  if (res.failure_reason.empty())
    res.failure_reason = res.report.length_defect > cfg.eta
                             ? "max_rounds exhausted with defect above eta"
                             : "injectivity unresolved after jitter retries";
  return res;
}

}  // namespace polyiso
