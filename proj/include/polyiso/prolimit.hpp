#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "polyiso/corrugation.hpp"
#include "polyiso/metric.hpp"
#include "polyiso/pl_map.hpp"

namespace polyiso {

/// Finite truncation of an inverse system of Euclidean polyhedra with short
/// bonding maps. bondings[i] maps stages[i+1] into stages[i].
struct InverseSystem {
  int rank = 0;
  std::vector<std::shared_ptr<const MetricComplex>> stages;
  std::vector<PLMap> bondings;

  int truncation() const { return static_cast<int>(stages.size()) - 1; }
};

/// A point of the truncated limit: a deep point of the last stage together
/// with its projections to every earlier stage.
struct Thread {
  BaryPoint deep;
  std::vector<BaryPoint> coords;  // coords[i] in stages[i], coords[M] = deep
};

Thread make_thread(const InverseSystem& s, const BaryPoint& deep);

using ThreadPair = std::pair<Thread, Thread>;

/// The chosen displacement budgets, infima and separation stages of a run.
struct Schedule {
  std::vector<double> epsilons;
  std::map<int, double> deltas;
  std::map<int, int> sep_stages;
  std::map<int, std::vector<ThreadPair>> o_sets;

  ValidationReport validate() const;
};

/// Bonding shortness, dimension bounds and sampled composite consistency.
ValidationReport validate_system(const InverseSystem& s, int samples = 8,
                                 std::uint64_t seed = 0);

void require_valid(const InverseSystem& s);

struct LimitDistance {
  DistanceEstimate estimate;         // stage-M value, the truncation's limit metric
  std::vector<double> stage_values;  // d_{P_i}(x_i, y_i), nondecreasing evidence
  bool monotone = true;
};

LimitDistance limit_distance(const InverseSystem& s, const Thread& t, const Thread& u, int k);

/// Seeded sample of thread pairs at limit distance >= 2^{-i}.
std::vector<ThreadPair> separated_pairs(const InverseSystem& s, int i, int samples,
                                        std::uint64_t seed, int k);

/// Smallest stage above min_stage whose projections separate every pair
/// (stage distance > 1e-12). Throws when the truncation is exhausted: the
/// finite system cannot certify separation the full limit would provide.
int separation_stage(const InverseSystem& s, const std::vector<ThreadPair>& pairs,
                     int min_stage, int k);

/// Minimum image separation of the projected pairs under the stage map h.
/// Throws (with the witness pair index) if the minimum is not positive.
double delta(const InverseSystem& s, const PLMap& h, int stage,
             const std::vector<ThreadPair>& pairs);

/// Next displacement budget: 0.225 * min(delta_i, eps_prev), strictly below
/// the 1/4 bound with a 10% margin.
double next_epsilon(double delta_i, double eps_prev);

struct ProlimitConfig {
  StretchConfig stretch;
  int o_samples = 48;
  int graph_level = 2;     // subdivision level for stage distance queries
  int fidelity_pairs = 16; // thread pairs for the final metric comparison
};

struct StageOutcome {
  int stage = 0;
  double epsilon = 0.0;
  double step_displacement = 0.0;  // sup |f_i - f_{i-1} o bonding|, stages >= 1
  EmbedResult embed;
};

struct ProlimitResult {
  bool success = false;
  std::string failure;
  int failed_stage = -1;

  std::vector<PLMap> maps;  // f_0..f_M
  Schedule schedule;
  std::vector<StageOutcome> stages;

  // Certified inequalities of the run, ready for assertion.
  bool schedule_ok = true;          // eps_i < 1/4 min(delta_i, eps_{i-1}) where defined
  bool step_bounds_ok = true;       // step displacement < eps_i at every stage
  double tail_ratio = 0.0;          // max_i sum_{j>i} eps_j / eps_{i+1}  (<= 4/3)
  double separation_margin = 0.0;   // min over O_i pairs of measured - (delta_i - 2 tail)
  double persistence_ratio = 0.0;   // min over i of (delta_i - 2 tail)/delta_i (>= 1/3)
  double fidelity_defect = 0.0;     // max |induced(h_M) - limit| over sampled pairs
  bool stage_monotone_ok = true;
};

/// The staged construction: corrugate f0 on P_0 with budget eps0, then per
/// stage compute O_i, i', delta_i, the next epsilon, and the next stage map
/// from the carried composite. All schedule inequalities are re-checked on
/// the way and reported.
ProlimitResult run_limit_embedding(const InverseSystem& s, const PLMap& f0, double eps0,
                                   const ProlimitConfig& cfg);

// Builders for the systems used by the docs and the test suites.

/// Growing intervals [0, 2 - 2^{-i}] with clamp bondings; the last cell of
/// every bonding collapses to the clamp value.
InverseSystem clamp_interval_system(int truncation);

/// Constant circle of the given circumference with identity bondings.
InverseSystem constant_circle_system(int truncation, int n_edges, double circumference);

}  // namespace polyiso
