#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "polyiso/metric.hpp"
#include "polyiso/pl_map.hpp"

namespace polyiso {

/// Length-deficit, displacement, shortness and injectivity diagnostics for a
/// candidate embedding. length_defect = 0 with max_stretch <= 1 + 1e-9
/// certifies an exact approximate intrinsic isometry on the measured pairs.
struct DefectReport {
  double length_defect = 0.0;
  double displacement = 0.0;
  double max_stretch = 0.0;
  double min_separation = 0.0;
  int pairs_measured = 0;
};

struct StretchConfig {
  double eta = 1e-2;        // target length-defect tolerance
  double epsilon = 0.1;     // total displacement budget
  double rho = 0.7;         // per-round defect contraction target
  int max_rounds = 12;
  std::uint64_t seed = 0;

  // Tuning knobs; defaults are sized for desk-scale runs.
  int iterations_per_round = 400;
  int random_pairs = 50;
  long cell_budget = 500000;  // top cells at the deepest level a round may build

  void validate() const;
};

/// Zigzag polyline from p to q with total length exactly `target_len` and
/// deviation at most `eps` from the chord. The chord length must not exceed
/// the target; teeth alternate +-a along `normal` at equal spacing.
std::vector<Eigen::VectorXd> sawtooth_1d(double target_len, const Eigen::VectorXd& p,
                                         const Eigen::VectorXd& q,
                                         const Eigen::VectorXd& normal, double eps);

/// Number of teeth the sawtooth uses (exposed for the frozen examples).
int sawtooth_teeth(double target_len, double chord_len, double eps);

/// One stretching round: subdivide the domain one level, then descend a
/// penalized least-squares objective over the new vertex images (edge
/// lengths toward their intrinsic targets, hinge penalty on per-cell
/// stretch) inside the per-vertex displacement ball of radius eps_round.
/// Shortness is re-certified exactly; if the descent ends long, the update
/// is shrunk toward its short starting point until the certificate passes.
PLMap stretch_round(const PLMap& f, const StretchConfig& cfg, double eps_round, int round_index);

/// Defect measurement over the deterministic pair sample: every subdivision
/// edge of the map's level plus `random_pairs` seeded vertex pairs, compared
/// through matching intrinsic/induced skeleton graphs.
DefectReport measure_defect(const PLMap& f, const PLMap& reference, const StretchConfig& cfg,
                            bool with_injectivity = false);

struct RoundInfo {
  int round = 0;
  double eps_round = 0.0;
  int level = 0;
  bool accepted = false;
  bool stalled = false;   // defect missed the rho contraction target
  double backtrack = 1.0; // fraction of the update kept by the shortness line search
  DefectReport report;
};

struct EmbedResult {
  PLMap map;
  DefectReport report;
  std::vector<RoundInfo> rounds;
  bool success = false;
  bool jittered = false;  // general-position jitter was needed for injectivity
  std::string failure_reason;
};

/// Approximate intrinsic isometric embedding near a strictly short map:
/// exact per-cell sawtooth corrugation for 1-complexes, iterated stretch
/// rounds with geometrically shrinking displacement budgets otherwise.
/// sup|result - f0| < cfg.epsilon always, including on failure.
EmbedResult embed_polyhedron(const MetricComplex& c, const PLMap& f0, const StretchConfig& cfg);

}  // namespace polyiso
