#include "polyiso/complex.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace polyiso {

namespace {

bool is_sorted_unique(const std::vector<int>& t) {
  for (std::size_t i = 1; i < t.size(); ++i)
    if (t[i] <= t[i - 1]) return false;
  return true;
}

// All proper faces of a tuple, one dimension down.
std::vector<std::vector<int>> facets(const std::vector<int>& t) {
  std::vector<std::vector<int>> out;
  if (t.size() <= 1) return out;
  for (std::size_t skip = 0; skip < t.size(); ++skip) {
    std::vector<int> f;
    f.reserve(t.size() - 1);
    for (std::size_t i = 0; i < t.size(); ++i)
      if (i != skip) f.push_back(t[i]);
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace

void MetricComplex::finalize() {
  simplex_index.clear();
  for (std::size_t i = 0; i < simplices.size(); ++i)
    simplex_index[simplices[i]] = static_cast<int>(i);

  top_cells.clear();
  for (std::size_t i = 0; i < simplices.size(); ++i) {
    const auto& t = simplices[i];
    bool maximal = true;
    for (const auto& other : simplices) {
      if (other.size() <= t.size()) continue;
      if (std::includes(other.begin(), other.end(), t.begin(), t.end())) {
        maximal = false;
        break;
      }
    }
    if (maximal) top_cells.push_back(static_cast<int>(i));
  }

  vertex_to_tops.assign(num_vertices, {});
  for (int tc : top_cells)
    for (int v : simplices[tc])
      if (v >= 0 && v < num_vertices) vertex_to_tops[v].push_back(tc);
}

int MetricComplex::simplex_id(const std::vector<int>& t) const {
  auto it = simplex_index.find(t);
  if (it == simplex_index.end()) throw std::invalid_argument("simplex not in complex");
  return it->second;
}

bool MetricComplex::has_simplex(const std::vector<int>& t) const {
  return simplex_index.count(t) > 0;
}

double MetricComplex::edge_length(int a, int b) const {
  auto it = edge_lengths.find(ordered(a, b));
  if (it == edge_lengths.end()) throw std::invalid_argument("missing edge length");
  return it->second;
}

int MetricComplex::containing_top(const std::vector<int>& verts) const {
  for (int tc : top_cells) {
    const auto& t = simplices[tc];
    if (std::includes(t.begin(), t.end(), verts.begin(), verts.end())) return tc;
  }
  return -1;
}

bool MetricComplex::structurally_equal(const MetricComplex& o) const {
  return dim == o.dim && num_vertices == o.num_vertices && simplices == o.simplices &&
         edge_lengths == o.edge_lengths;
}

std::pair<std::vector<int>, Eigen::VectorXd> BaryPoint::support(const MetricComplex& c,
                                                                double tol) const {
  const auto& t = c.tuple(simplex);
  std::vector<int> verts;
  std::vector<double> w;
  for (int i = 0; i < weights.size(); ++i) {
    if (weights[i] > tol) {
      verts.push_back(t[i]);
      w.push_back(weights[i]);
    }
  }
  Eigen::VectorXd wv = Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<int>(w.size()));
  wv /= wv.sum();
  return {verts, wv};
}

BaryPoint vertex_point(const MetricComplex& c, int v) {
  BaryPoint p;
  p.simplex = c.simplex_id({v});
  p.weights = Eigen::VectorXd::Ones(1);
  return p;
}

std::string ValidationReport::summary() const {
  std::ostringstream os;
  for (const auto& v : violations) os << v.message << "\n";
  return os.str();
}

Eigen::MatrixXd simplex_gram(const MetricComplex& c, const std::vector<int>& t) {
  const int k = static_cast<int>(t.size()) - 1;
  Eigen::MatrixXd g(k, k);
  for (int i = 1; i <= k; ++i) {
    const double d0i = c.edge_length(t[0], t[i]);
    for (int j = i; j <= k; ++j) {
      const double d0j = c.edge_length(t[0], t[j]);
      const double dij = (i == j) ? 0.0 : c.edge_length(t[i], t[j]);
      g(i - 1, j - 1) = g(j - 1, i - 1) = 0.5 * (d0i * d0i + d0j * d0j - dij * dij);
    }
  }
  return g;
}

Eigen::MatrixXd simplex_chart(const MetricComplex& c, const std::vector<int>& t) {
  const int k = static_cast<int>(t.size()) - 1;
  Eigen::MatrixXd pts = Eigen::MatrixXd::Zero(k + 1, k);
  if (k == 0) return pts;
  Eigen::MatrixXd g = simplex_gram(c, t);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g, Eigen::EigenvaluesOnly);
  const double lmax = es.eigenvalues().maxCoeff();
  const double lmin = es.eigenvalues().minCoeff();
  if (!(lmin > kDegeneracyTol * lmax))
    throw std::invalid_argument("degenerate simplex: edge lengths do not span a flat simplex");

  Eigen::LLT<Eigen::MatrixXd> llt(g);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("degenerate simplex: Gram factorization failed");
  Eigen::MatrixXd L = llt.matrixL();
  pts.bottomRows(k) = L;
  return pts;
}

Eigen::MatrixXd simplex_chart(const MetricComplex& c, int simplex) {
  return simplex_chart(c, c.tuple(simplex));
}

Eigen::VectorXd chart_position(const Eigen::MatrixXd& chart, const Eigen::VectorXd& weights) {
  return chart.transpose() * weights;
}

ValidationReport validate_complex(const MetricComplex& c) {
  ValidationReport rep;
  auto add = [&rep](Violation::Kind k, const std::string& m) {
    rep.violations.push_back({k, m});
  };

  int max_dim = -1;
  std::set<std::vector<int>> listed(c.simplices.begin(), c.simplices.end());
  for (const auto& t : c.simplices) {
    if (t.empty() || !is_sorted_unique(t) || t.front() < 0 || t.back() >= c.num_vertices) {
      add(Violation::kFaceClosure, "malformed simplex tuple");
      continue;
    }
    max_dim = std::max(max_dim, static_cast<int>(t.size()) - 1);
    for (const auto& f : facets(t))
      if (!listed.count(f)) {
        std::ostringstream os;
        os << "face closure violated: missing face of simplex with " << t.size() << " vertices";
        add(Violation::kFaceClosure, os.str());
      }
  }
  if (max_dim != c.dim) {
    std::ostringstream os;
    os << "dim field is " << c.dim << " but maximal simplex dimension is " << max_dim;
    add(Violation::kDimMismatch, os.str());
  }

  // Edge lengths: present for every pair sharing a simplex, positive, finite.
  for (const auto& t : c.simplices) {
    for (std::size_t i = 0; i < t.size(); ++i)
      for (std::size_t j = i + 1; j < t.size(); ++j) {
        auto it = c.edge_lengths.find(ordered(t[i], t[j]));
        if (it == c.edge_lengths.end()) {
          std::ostringstream os;
          os << "missing edge length for pair (" << t[i] << "," << t[j] << ")";
          add(Violation::kEdgeLength, os.str());
        } else if (!(it->second > 0.0) || !std::isfinite(it->second)) {
          std::ostringstream os;
          os << "edge length for pair (" << t[i] << "," << t[j] << ") must be positive and finite";
          add(Violation::kEdgeLength, os.str());
        }
      }
  }
  if (!rep.ok()) return rep;  // realizability needs complete, sane lengths

  // Metric realizability of every top simplex: the Gram form must be
  // positive definite; a near-zero bottom eigenvalue is a flat (degenerate)
  // simplex, a negative one breaks a triangle-type inequality.
  for (int tc : c.top_cells) {
    const auto& t = c.simplices[tc];
    if (t.size() < 2) continue;
    Eigen::MatrixXd g = simplex_gram(c, t);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g, Eigen::EigenvaluesOnly);
    const double lmax = es.eigenvalues().maxCoeff();
    const double lmin = es.eigenvalues().minCoeff();
    if (lmin < -kDegeneracyTol * lmax) {
      std::ostringstream os;
      os << "simplex " << tc << " not realizable: triangle-type inequality fails";
      add(Violation::kNotRealizable, os.str());
    } else if (lmin <= kDegeneracyTol * lmax) {
      std::ostringstream os;
      os << "simplex " << tc << " degenerate: edge lengths give a flat simplex";
      add(Violation::kDegenerate, os.str());
    }
  }

  // Coordinates, when present, must reproduce the edge lengths.
  if (c.coords) {
    const auto& X = *c.coords;
    if (X.rows() != c.num_vertices) {
      add(Violation::kCoordMismatch, "coords row count does not match vertex count");
    } else {
      for (const auto& [pair, len] : c.edge_lengths) {
        const double d = (X.row(pair.first) - X.row(pair.second)).norm();
        if (std::abs(d - len) > kCoordTol * std::max(1.0, len)) {
          std::ostringstream os;
          os << "coords distance " << d << " for pair (" << pair.first << "," << pair.second
             << ") disagrees with edge length " << len;
          add(Violation::kCoordMismatch, os.str());
        }
      }
    }
  }
  return rep;
}

void require_valid(const MetricComplex& c) {
  ValidationReport rep = validate_complex(c);
  if (!rep.ok()) throw std::invalid_argument("invalid complex:\n" + rep.summary());
}

MetricComplex from_top_simplices(int num_vertices, const std::vector<std::vector<int>>& tops,
                                 const std::map<VertexPair, double>& lengths,
                                 std::optional<Eigen::MatrixXd> coords) {
  std::set<std::vector<int>> closed;
  // Close under faces by enumerating all nonempty subsets of each top tuple.
  for (auto t : tops) {
    std::sort(t.begin(), t.end());
    const std::size_t n = t.size();
    for (std::size_t mask = 1; mask < (1u << n); ++mask) {
      std::vector<int> f;
      for (std::size_t i = 0; i < n; ++i)
        if (mask & (1u << i)) f.push_back(t[i]);
      closed.insert(std::move(f));
    }
  }
  MetricComplex c;
  c.num_vertices = num_vertices;
  c.simplices.assign(closed.begin(), closed.end());
  std::sort(c.simplices.begin(), c.simplices.end(),
            [](const std::vector<int>& a, const std::vector<int>& b) {
              if (a.size() != b.size()) return a.size() < b.size();
              return a < b;
            });
  c.edge_lengths = lengths;
  c.coords = std::move(coords);
  int d = 0;
  for (const auto& t : c.simplices) d = std::max<int>(d, static_cast<int>(t.size()) - 1);
  c.dim = d;
  c.finalize();
  return c;
}

MetricComplex make_interval(const std::vector<double>& bp) {
  if (bp.size() < 2) throw std::invalid_argument("interval needs at least two breakpoints");
  std::vector<std::vector<int>> tops;
  std::map<VertexPair, double> len;
  Eigen::MatrixXd coords(static_cast<int>(bp.size()), 1);
  for (std::size_t i = 0; i < bp.size(); ++i) coords(static_cast<int>(i), 0) = bp[i];
  for (std::size_t i = 0; i + 1 < bp.size(); ++i) {
    if (!(bp[i + 1] > bp[i])) throw std::invalid_argument("breakpoints must be increasing");
    tops.push_back({static_cast<int>(i), static_cast<int>(i + 1)});
    len[{static_cast<int>(i), static_cast<int>(i + 1)}] = bp[i + 1] - bp[i];
  }
  return from_top_simplices(static_cast<int>(bp.size()), tops, len, coords);
}

MetricComplex make_circle(int n_edges, double edge_len) {
  if (n_edges < 3) throw std::invalid_argument("circle needs at least three edges");
  std::vector<std::vector<int>> tops;
  std::map<VertexPair, double> len;
  for (int i = 0; i < n_edges; ++i) {
    int j = (i + 1) % n_edges;
    tops.push_back({std::min(i, j), std::max(i, j)});
    len[ordered(i, j)] = edge_len;
  }
  return from_top_simplices(n_edges, tops, len);
}

MetricComplex make_square() {
  Eigen::MatrixXd coords(4, 2);
  coords << 0, 0, 1, 0, 1, 1, 0, 1;
  std::map<VertexPair, double> len;
  const double s2 = std::sqrt(2.0);
  len[{0, 1}] = 1;
  len[{1, 2}] = 1;
  len[{2, 3}] = 1;
  len[{0, 3}] = 1;
  len[{0, 2}] = s2;
  return from_top_simplices(4, {{0, 1, 2}, {0, 2, 3}}, len, coords);
}

MetricComplex make_simplex(int k, const std::vector<double>& upper) {
  const int n = k + 1;
  if (static_cast<int>(upper.size()) != n * (n - 1) / 2)
    throw std::invalid_argument("wrong number of edge lengths");
  std::map<VertexPair, double> len;
  std::size_t idx = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) len[{i, j}] = upper[idx++];
  std::vector<int> top(n);
  for (int i = 0; i < n; ++i) top[i] = i;
  return from_top_simplices(n, {top}, len);
}

}  // namespace polyiso
