#pragma once

#include "obs360/qoe.hpp"
#include "obs360/sim.hpp"
#include "obs360/types.hpp"

namespace obs360 {

// How per_segment_optimum searches the feasible set.
//   Exhaustive: every lattice point of ladder^K (discrete mode only).
//   PgRound:    projected supergradient ascent on the hull, then rounding
//               to ladder levels plus coordinate-wise local search.
//   Hull:       optimum over the hull itself; exact for linear utility
//               with few tiles, ascent-based otherwise.
//   Auto:       Hull in convex mode; otherwise Exhaustive when the
//               lattice is small enough, PgRound when it is not.
enum class OptimizeMethod { Auto, Exhaustive, PgRound, Hull };

struct OptimumResult {
  Eigen::VectorXd decision;
  double objective = 0.0;
};

// Best single-segment decision in hindsight for a realized context.
OptimumResult per_segment_optimum(const SegmentContext& ctx, const QoEParams& params,
                                  const BitrateLadder& ladder,
                                  OptimizeMethod method = OptimizeMethod::Auto);

struct OfflineResult {
  std::vector<Eigen::VectorXd> decisions;
  double qoe = 0.0;
};

// Best whole-session decision sequence by exhaustive enumeration, each
// candidate simulated through the download/playback model and scored with
// the session QoE. Refuses instances with more than `max_sequences`
// candidate sequences.
OfflineResult offline_optimal(const CapacityTrace& trace, const OverlapMap& overlaps,
                              const VideoConfig& video, const QoEParams& params,
                              const BitrateLadder& ladder,
                              double max_sequences = 1e7);

struct RegretReport {
  Eigen::VectorXd optimum_value;   // per-segment objective at the hindsight optimum
  Eigen::VectorXd actual_value;    // same objective at the decision taken
  Eigen::VectorXd prefix_regret;   // running sum of the gaps
  std::vector<Eigen::VectorXd> optimum_decisions;
  double total = 0.0;
  double per_segment = 0.0;
};

// Dynamic regret of a finished session: per segment, the gap between the
// objective of the hindsight optimum and of the decision actually taken,
// both evaluated under the realized context (previous viewing bitrate and
// buffer from the actual trajectory).
RegretReport dynamic_regret(const SessionLog& log, const QoEParams& params,
                            const BitrateLadder& ladder,
                            OptimizeMethod method = OptimizeMethod::Auto);

// Measured drift statistics of one session. j / j_dagger / h are indexed
// by decision window (entry w for window w+1) and hold 1-based segment
// indices, 0 where undefined: j[w] is the segment whose gradient drove
// that window's update (inherited through h for empty windows), j_dagger
// the one that drove segment j[w]'s own decision.
struct ConditionStats {
  int v_empty = 0;      // decision windows with no new realization
  double v_r = 0.0;     // drift sum: |set| * distance between optima of j and j_dagger
  std::vector<int> j;
  std::vector<int> j_dagger;
  std::vector<int> h;
  bool has_tail = false;  // some segment never surfaced in any window
};

ConditionStats condition_stats(const SessionLog& log, const RegretReport& report,
                               const QoEParams& params);

// Session-independent constants of the regret guarantee.
struct BoundConstants {
  double radius = 0.0;   // diameter of the feasible set, sqrt(K) * ladder span
  double q_bar = 0.0;    // upper bound on the supergradient norm
  double alpha = 0.0;    // step size used by the policy
  double tail_factor = 0.0;  // max segments that can still be unwatched at the end

  static BoundConstants compute(const QoEParams& params, const BitrateLadder& ladder,
                                int tiles, double d_min, double segment_length_s,
                                double max_sum_omega, double alpha);
};

// Worst-case dynamic-regret bound for the measured statistics.
double regret_bound(const ConditionStats& stats, const BoundConstants& consts,
                    int segment_count);

// Step size alpha0 * I^(-1/gamma); gamma > 1 makes the bound sublinear.
double horizon_step_size(double alpha0, double gamma, int segment_count);

}  // namespace obs360
