#include "polyiso/prolimit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "polyiso/rng.hpp"

namespace polyiso {

namespace {

constexpr double kSeparationThreshold = 1e-12;

void check_stage_index(const InverseSystem& s, int i) {
  if (i < 0 || i > s.truncation()) throw std::invalid_argument("stage index out of range");
}

BaryPoint random_point(const MetricComplex& c, Rng& rng) {
  const int tc = c.top_cells[rng.index(c.top_cells.size())];
  BaryPoint p;
  p.simplex = tc;
  p.weights = rng.barycentric(static_cast<int>(c.tuple(tc).size()));
  return p;
}

}  // namespace

Thread make_thread(const InverseSystem& s, const BaryPoint& deep) {
  const int M = s.truncation();
  check_point(*s.stages[M], deep);
  Thread t;
  t.deep = deep;
  t.coords.resize(M + 1);
  t.coords[M] = deep;
  for (int i = M - 1; i >= 0; --i) t.coords[i] = evaluate_point(s.bondings[i], t.coords[i + 1]);
  return t;
}

ValidationReport Schedule::validate() const {
  ValidationReport rep;
  auto add = [&rep](const std::string& m) {
    rep.violations.push_back({Violation::kInconsistentComposite, m});
  };
  for (const auto& [i, d] : deltas)
    if (!(d > 0.0)) add("delta must be positive at stage " + std::to_string(i));
  int prev = -1;
  for (const auto& [i, ip] : sep_stages) {
    if (ip <= prev) add("separation stages must be strictly increasing");
    prev = ip;
  }
  for (std::size_t i = 1; i < epsilons.size(); ++i) {
    double bound = 0.25 * epsilons[i - 1];
    auto it = deltas.find(static_cast<int>(i));
    if (it != deltas.end()) bound = std::min(bound, 0.25 * it->second);
    if (!(epsilons[i] < bound)) {
      std::ostringstream os;
      os << "epsilon_" << i << " = " << epsilons[i] << " is not below 1/4 min(delta, prev) = "
         << bound;
      add(os.str());
    }
  }
  return rep;
}

ValidationReport validate_system(const InverseSystem& s, int samples, std::uint64_t seed) {
  ValidationReport rep;
  auto add = [&rep](Violation::Kind k, const std::string& m) {
    rep.violations.push_back({k, m});
  };
  const int M = s.truncation();
  if (M < 0) {
    add(Violation::kDimMismatch, "system has no stages");
    return rep;
  }
  for (int i = 0; i <= M; ++i) {
    ValidationReport r = validate_complex(*s.stages[i]);
    for (const auto& v : r.violations)
      add(v.kind, "stage " + std::to_string(i) + ": " + v.message);
    if (s.stages[i]->dim > s.rank) {
      std::ostringstream os;
      os << "stage " << i << " has dimension " << s.stages[i]->dim << " above rank " << s.rank;
      add(Violation::kRankExceeded, os.str());
    }
  }
  if (static_cast<int>(s.bondings.size()) != M) {
    add(Violation::kInconsistentComposite, "bonding count does not match stage count");
    return rep;
  }
  for (int i = 0; i < M; ++i) {
    const PLMap& b = s.bondings[i];
    if (b.is_ambient() || !b.domain().structurally_equal(*s.stages[i + 1]) ||
        !b.codomain().structurally_equal(*s.stages[i])) {
      add(Violation::kInconsistentComposite,
          "bonding " + std::to_string(i + 1) + " does not map stage " + std::to_string(i + 1) +
              " into stage " + std::to_string(i));
      continue;
    }
    ShortnessCertificate cert = shortness_certificate(b);
    if (!cert.is_short()) {
      std::ostringstream os;
      os << "bonding " << i + 1 << " is not short: max stretch " << cert.max_stretch;
      add(Violation::kBondingNotShort, os.str());
    }
  }
  if (!rep.ok() || M == 0) return rep;

  // Composite consistency on sampled deep points: the full composite built
  // with compose() must agree with iterated evaluation.
  try {
    PLMap full = s.bondings[M - 1];
    for (int l = M - 2; l >= 0; --l) full = compose(s.bondings[l], full);
    Rng rng(seed ^ 0xc0117e);
    for (int trial = 0; trial < samples; ++trial) {
      BaryPoint deep = random_point(*s.stages[M], rng);
      Thread t = make_thread(s, deep);
      BaryPoint via_compose = evaluate_point(full, deep);
      const double d = intrinsic_distance(*s.stages[0], t.coords[0], via_compose, 0).value;
      if (!(d <= kWeightTol)) {
        std::ostringstream os;
        os << "composite bonding disagrees with iterated evaluation by " << d;
        add(Violation::kInconsistentComposite, os.str());
        break;
      }
    }
  } catch (const std::exception& e) {
    add(Violation::kInconsistentComposite, std::string("composite construction failed: ") + e.what());
  }
  return rep;
}

void require_valid(const InverseSystem& s) {
  ValidationReport rep = validate_system(s);
  if (!rep.ok()) throw std::invalid_argument("invalid inverse system:\n" + rep.summary());
}

LimitDistance limit_distance(const InverseSystem& s, const Thread& t, const Thread& u, int k) {
  const int M = s.truncation();
  LimitDistance out;
  out.stage_values.resize(M + 1);
  for (int i = 0; i <= M; ++i)
    out.stage_values[i] = intrinsic_distance(*s.stages[i], t.coords[i], u.coords[i], k).value;
  out.estimate.value = out.stage_values[M];
  out.estimate.level = k;
  out.estimate.upper_bound = true;
  for (int i = 0; i + 1 <= M; ++i)
    if (out.stage_values[i] > out.stage_values[i + 1] + 1e-9) out.monotone = false;
  return out;
}

std::vector<ThreadPair> separated_pairs(const InverseSystem& s, int i, int samples,
                                        std::uint64_t seed, int k) {
  if (i < 0) throw std::invalid_argument("O_i index must be nonnegative");
  const int M = s.truncation();
  const double threshold = std::pow(2.0, -i);
  GeodesicGraph g = geodesic_graph(*s.stages[M], k);
  Rng rng = Rng(seed).fork(0x05e7).fork(static_cast<std::uint64_t>(i));
  std::vector<ThreadPair> pairs;
  for (int trial = 0; trial < samples; ++trial) {
    BaryPoint a = random_point(*s.stages[M], rng);
    BaryPoint b = random_point(*s.stages[M], rng);
    if (point_distance(g, a, b).value < threshold) continue;
    pairs.emplace_back(make_thread(s, a), make_thread(s, b));
  }
  return pairs;
}

int separation_stage(const InverseSystem& s, const std::vector<ThreadPair>& pairs,
                     int min_stage, int k) {
  if (pairs.empty()) throw std::invalid_argument("separation_stage needs a nonempty pair list");
  const int M = s.truncation();
  for (int j = std::max(0, min_stage + 1); j <= M; ++j) {
    GeodesicGraph g = geodesic_graph(*s.stages[j], k);
    bool all = true;
    for (const auto& [t, u] : pairs) {
      if (point_distance(g, t.coords[j], u.coords[j]).value <= kSeparationThreshold) {
        all = false;
        break;
      }
    }
    if (all) return j;
  }
  throw std::runtime_error(
      "separation_stage: truncation exhausted before every pair separated; the finite "
      "system cannot certify what the limit's compactness argument guarantees");
}

double delta(const InverseSystem& s, const PLMap& h, int stage,
             const std::vector<ThreadPair>& pairs) {
  check_stage_index(s, stage);
  if (!h.is_ambient()) throw std::invalid_argument("delta needs an ambient stage map");
  if (!h.domain().structurally_equal(*s.stages[stage]))
    throw std::invalid_argument("stage map is not defined on the requested stage");
  double best = std::numeric_limits<double>::infinity();
  std::size_t worst = 0;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto& [t, u] = pairs[p];
    const double d =
        (evaluate_ambient(h, t.coords[stage]) - evaluate_ambient(h, u.coords[stage])).norm();
    if (d < best) {
      best = d;
      worst = p;
    }
  }
  if (!(best > 0.0)) {
    std::ostringstream os;
    os << "delta is nonpositive: pair " << worst << " collides under the stage-" << stage
       << " map";
    throw std::runtime_error(os.str());
  }
  return best;
}

double next_epsilon(double delta_i, double eps_prev) {
  if (!(delta_i > 0.0) || !(eps_prev > 0.0))
    throw std::invalid_argument("next_epsilon needs positive inputs");
  return 0.225 * std::min(delta_i, eps_prev);
}

ProlimitResult run_limit_embedding(const InverseSystem& s, const PLMap& f0, double eps0,
                                   const ProlimitConfig& cfg) {
  if (!(eps0 > 0.0)) throw std::invalid_argument("eps0 must be positive");
  require_valid(s);
  const int M = s.truncation();
  ProlimitResult res;
  res.schedule.epsilons.assign(M + 1, 0.0);
  res.schedule.epsilons[0] = eps0;

  auto fail = [&res](int stage, const std::string& why) -> ProlimitResult& {
    res.success = false;
    res.failed_stage = stage;
    res.failure = why;
    return res;
  };

  // Stage 0: corrugate the seed map.
  {
    StretchConfig sc = cfg.stretch;
    sc.epsilon = eps0;
    StageOutcome out;
    out.stage = 0;
    out.epsilon = eps0;
    out.embed = embed_polyhedron(*s.stages[0], f0, sc);
    res.stages.push_back(out);
    if (!out.embed.success) return fail(0, "stage 0 embedding failed: " + out.embed.failure_reason);
    res.maps.push_back(out.embed.map);
  }

  struct Pending {
    int i;
    int sep_stage;
  };
  std::vector<Pending> pending;
  double min_delta = std::numeric_limits<double>::infinity();
  int prev_sep = -1;

  auto resolve_deltas = [&](int built_stage) {
    for (auto& p : pending) {
      if (p.sep_stage != built_stage) continue;
      const double d =
          delta(s, res.maps[p.sep_stage], p.sep_stage, res.schedule.o_sets.at(p.i));
      res.schedule.deltas[p.i] = d;
      min_delta = std::min(min_delta, d);
    }
  };
  resolve_deltas(0);

  for (int i = 0; i < M; ++i) {
    std::vector<ThreadPair> oi =
        separated_pairs(s, i, cfg.o_samples, cfg.stretch.seed, cfg.graph_level);
    if (!oi.empty()) {
      int ip;
      try {
        ip = separation_stage(s, oi, prev_sep, cfg.graph_level);
      } catch (const std::exception& e) {
        return fail(i, e.what());
      }
      prev_sep = ip;
      res.schedule.sep_stages[i] = ip;
      res.schedule.o_sets[i] = std::move(oi);
      pending.push_back({i, ip});
      if (ip <= static_cast<int>(res.maps.size()) - 1) {
        try {
          resolve_deltas(ip);
        } catch (const std::exception& e) {
          return fail(i, e.what());
        }
      }
    }

    const double eps_prev = res.schedule.epsilons[i];
    const double constraint = std::isfinite(min_delta) ? min_delta : eps_prev;
    const double eps_next = next_epsilon(constraint, eps_prev);
    res.schedule.epsilons[i + 1] = eps_next;

    PLMap composite;
    try {
      composite = compose(res.maps[i], s.bondings[i]);
    } catch (const std::exception& e) {
      return fail(i + 1, std::string("composite construction failed: ") + e.what());
    }

    StretchConfig sc = cfg.stretch;
    sc.epsilon = eps_next;
    StageOutcome out;
    out.stage = i + 1;
    out.epsilon = eps_next;
    out.embed = embed_polyhedron(*s.stages[i + 1], composite, sc);
    if (!out.embed.success) {
      res.stages.push_back(out);
      return fail(i + 1, "stage embedding failed: " + out.embed.failure_reason);
    }
    out.step_displacement = sup_displacement(out.embed.map, composite);
    if (!(out.step_displacement < eps_next)) res.step_bounds_ok = false;
    res.stages.push_back(out);
    res.maps.push_back(out.embed.map);
    try {
      resolve_deltas(i + 1);
    } catch (const std::exception& e) {
      return fail(i + 1, e.what());
    }
  }

  // Retro-check the schedule law where delta_i is defined, then the tail
  // sums, the separation persistence and the limit-metric fidelity.
  for (int i = 1; i <= M; ++i) {
    double bound = 0.25 * res.schedule.epsilons[i - 1];
    auto it = res.schedule.deltas.find(i);
    if (it != res.schedule.deltas.end()) bound = std::min(bound, 0.25 * it->second);
    if (!(res.schedule.epsilons[i] < bound)) res.schedule_ok = false;
  }

  std::vector<double> tail(M + 2, 0.0);
  for (int i = M; i >= 0; --i) tail[i] = tail[i + 1] + res.schedule.epsilons[i];
  res.tail_ratio = 0.0;
  for (int i = 0; i < M; ++i)
    res.tail_ratio = std::max(res.tail_ratio, tail[i + 1] / res.schedule.epsilons[i + 1]);

  res.separation_margin = std::numeric_limits<double>::infinity();
  res.persistence_ratio = std::numeric_limits<double>::infinity();
  const PLMap& fM = res.maps[M];
  for (const auto& [i, pairs] : res.schedule.o_sets) {
    auto dit = res.schedule.deltas.find(i);
    if (dit == res.schedule.deltas.end()) continue;
    const int ip = res.schedule.sep_stages.at(i);
    const double t = tail[ip + 1];
    const double lower = dit->second - 2.0 * t;
    res.persistence_ratio = std::min(res.persistence_ratio, lower / dit->second);
    for (const auto& [a, b] : pairs) {
      const double sep =
          (evaluate_ambient(fM, a.coords[M]) - evaluate_ambient(fM, b.coords[M])).norm();
      res.separation_margin = std::min(res.separation_margin, sep - lower);
    }
  }

  {
    Rng rng = Rng(cfg.stretch.seed).fork(0xf1de);
    const int k = std::max(cfg.graph_level, fM.level());
    GeodesicGraph gi = geodesic_graph(fM.refinement().refined_to(k), k, fM.level());
    GeodesicGraph gm = with_image_weights(gi, fM);
    for (int p = 0; p < cfg.fidelity_pairs; ++p) {
      Thread a = make_thread(s, random_point(*s.stages[M], rng));
      Thread b = make_thread(s, random_point(*s.stages[M], rng));
      LimitDistance lim = limit_distance(s, a, b, cfg.graph_level);
      if (!lim.monotone) res.stage_monotone_ok = false;
      const double ind = point_distance(gm, a.coords[M], b.coords[M], &fM).value;
      res.fidelity_defect = std::max(res.fidelity_defect, std::abs(ind - lim.estimate.value));
    }
    for (const auto& [i, pairs] : res.schedule.o_sets)
      for (const auto& [a, b] : pairs)
        if (!limit_distance(s, a, b, cfg.graph_level).monotone) res.stage_monotone_ok = false;
  }

  res.success = res.schedule_ok && res.step_bounds_ok && res.tail_ratio <= 4.0 / 3.0 + 1e-12 &&
                res.persistence_ratio >= 1.0 / 3.0 - 1e-12 &&
                res.separation_margin >= -1e-9 && res.stage_monotone_ok;
  if (!res.success && res.failure.empty()) res.failure = "a schedule inequality failed";
  return res;
}

InverseSystem clamp_interval_system(int truncation) {
  if (truncation < 0) throw std::invalid_argument("truncation must be nonnegative");
  InverseSystem s;
  s.rank = 1;

  auto endpoint = [](int i) { return 2.0 - std::pow(2.0, -i); };
  auto breakpoints = [&endpoint](int i) {
    std::vector<double> b{0.0};
    for (int j = 0; j <= i; ++j) b.push_back(endpoint(j));
    return b;
  };
  for (int i = 0; i <= truncation; ++i)
    s.stages.push_back(std::make_shared<MetricComplex>(make_interval(breakpoints(i))));

  for (int i = 0; i < truncation; ++i) {
    const MetricComplex& dom = *s.stages[i + 1];
    const MetricComplex& cod = *s.stages[i];
    const double clamp = endpoint(i);
    std::vector<BaryPoint> images(dom.num_vertices);
    const auto bp = breakpoints(i + 1);
    for (int v = 0; v < dom.num_vertices; ++v) {
      const double x = std::min(bp[v], clamp);
      // find the codomain edge containing x
      const auto cp = breakpoints(i);
      int e = 0;
      while (e + 2 < static_cast<int>(cp.size()) && x > cp[e + 1]) ++e;
      BaryPoint p;
      p.simplex = cod.simplex_id({e, e + 1});
      const double t = (x - cp[e]) / (cp[e + 1] - cp[e]);
      p.weights = Eigen::Vector2d(1.0 - t, t);
      images[v] = p;
    }
    s.bondings.push_back(
        PLMap::into(Refinement::of(dom, 0), 0, s.stages[i], std::move(images)));
  }
  return s;
}

InverseSystem constant_circle_system(int truncation, int n_edges, double circumference) {
  if (truncation < 0) throw std::invalid_argument("truncation must be nonnegative");
  InverseSystem s;
  s.rank = 1;
  auto circle = std::make_shared<MetricComplex>(make_circle(n_edges, circumference / n_edges));
  for (int i = 0; i <= truncation; ++i) s.stages.push_back(circle);
  for (int i = 0; i < truncation; ++i) {
    std::vector<BaryPoint> images(circle->num_vertices);
    for (int v = 0; v < circle->num_vertices; ++v) images[v] = vertex_point(*circle, v);
    s.bondings.push_back(PLMap::into(Refinement::of(*circle, 0), 0, circle, std::move(images)));
  }
  return s;
}

}  // namespace polyiso
