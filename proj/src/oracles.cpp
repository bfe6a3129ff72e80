#include "obs360/oracles.hpp"

#include "obs360/policy.hpp"

#include <algorithm>
#include <cmath>

namespace obs360 {

namespace {

constexpr double kExhaustiveLimit = 1e6;

double lattice_size(int levels, int dims) {
  return std::pow(static_cast<double>(levels), static_cast<double>(dims));
}

OptimumResult exhaustive_optimum(const SegmentContext& ctx, const QoEParams& params,
                                 const BitrateLadder& ladder) {
  const int K = static_cast<int>(ctx.omega.size());
  if (lattice_size(ladder.size(), K) > kExhaustiveLimit)
    throw InstanceTooLarge("per_segment_optimum: lattice larger than 1e6 points");

  std::vector<int> idx(K, 0);
  Eigen::VectorXd r = Eigen::VectorXd::Constant(K, ladder.level(0));
  OptimumResult best{r, per_segment_qoe(r, ctx, params)};
  while (true) {
    // odometer, last coordinate fastest: lexicographic enumeration
    int k = K - 1;
    while (k >= 0 && idx[k] == ladder.size() - 1) {
      idx[k] = 0;
      r(k) = ladder.level(0);
      --k;
    }
    if (k < 0) break;
    ++idx[k];
    r(k) = ladder.level(idx[k]);
    const double q = per_segment_qoe(r, ctx, params);
    if (q > best.objective) best = {r, q};  // strict: ties keep the first (lowest) point
  }
  return best;
}

// Supergradient ascent over the hull with diminishing steps, tracking the
// best iterate seen.
Eigen::VectorXd hull_ascent(const SegmentContext& ctx, const QoEParams& params,
                            const BitrateLadder& ladder, int iterations) {
  const int K = static_cast<int>(ctx.omega.size());
  const double lo = ladder.min();
  const double hi = ladder.max();

  const double sum_omega = std::max(ctx.omega.sum(), 1.0);
  const double per_coord = utility_slope(0.0, params) * sum_omega +
                           params.inter_degradation_unit_loss * sum_omega +
                           params.intra_degradation_unit_loss * K +
                           params.rebuffer_unit_loss * ctx.segment_length_s /
                               ctx.mean_capacity_mbps;
  const double q_bar = std::sqrt(static_cast<double>(K)) * per_coord;
  const double c = (hi - lo) / q_bar;

  Eigen::VectorXd r = Eigen::VectorXd::Constant(K, (lo + hi) / 2.0);
  Eigen::VectorXd best = r;
  double best_q = per_segment_qoe(r, ctx, params);
  for (int t = 1; t <= iterations; ++t) {
    const Eigen::VectorXd g = per_segment_subgradient(r, ctx, params);
    r = (r + (c / std::sqrt(static_cast<double>(t))) * g)
            .cwiseMax(lo)
            .cwiseMin(hi);
    const double q = per_segment_qoe(r, ctx, params);
    if (q > best_q) {
      best_q = q;
      best = r;
    }
  }
  return best;
}

OptimumResult pg_round_optimum(const SegmentContext& ctx, const QoEParams& params,
                               const BitrateLadder& ladder) {
  const int K = static_cast<int>(ctx.omega.size());
  const Eigen::VectorXd relaxed = hull_ascent(ctx, params, ladder, 500);

  Eigen::VectorXd r(K);
  for (int k = 0; k < K; ++k) r(k) = ladder.nearest(relaxed(k));
  double q = per_segment_qoe(r, ctx, params);

  // Coordinate-wise improvement over the full ladder until a fixed point.
  bool improved = true;
  while (improved) {
    improved = false;
    for (int k = 0; k < K; ++k) {
      const double keep = r(k);
      double best_level = keep;
      for (int l = 0; l < ladder.size(); ++l) {
        r(k) = ladder.level(l);
        const double cand = per_segment_qoe(r, ctx, params);
        if (cand > q) {
          q = cand;
          best_level = r(k);
          improved = true;
        }
      }
      r(k) = best_level;
    }
  }
  return {r, q};
}

// Exact hull optimum for linear utility and few tiles. The objective is
// piecewise linear and concave, so some vertex of the subdivision induced
// by the box faces and the below-mean kink planes attains the maximum;
// enumerate all K-plane intersections and score them.
OptimumResult hull_vertex_optimum(const SegmentContext& ctx, const QoEParams& params,
                                  const BitrateLadder& ladder) {
  const int K = static_cast<int>(ctx.omega.size());
  const double lo = ladder.min();
  const double hi = ladder.max();

  std::vector<Eigen::VectorXd> normals;
  std::vector<double> offsets;
  for (int k = 0; k < K; ++k) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(K);
    e(k) = 1.0;
    normals.push_back(e);
    offsets.push_back(lo);
    normals.push_back(e);
    offsets.push_back(hi);
  }
  const double total = ctx.omega.sum();
  if (total > 0) {
    const Eigen::VectorXd s = ctx.omega / total;
    for (int k = 0; k < K; ++k) {
      Eigen::VectorXd n = s;
      n(k) -= 1.0;
      normals.push_back(n);
      offsets.push_back(0.0);
    }
  }

  const int planes = static_cast<int>(normals.size());
  OptimumResult best;
  best.objective = -std::numeric_limits<double>::infinity();

  std::vector<int> pick(K);
  for (int k = 0; k < K; ++k) pick[k] = k;
  while (true) {
    Eigen::MatrixXd A(K, K);
    Eigen::VectorXd b(K);
    for (int row = 0; row < K; ++row) {
      A.row(row) = normals[pick[row]].transpose();
      b(row) = offsets[pick[row]];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    lu.setThreshold(1e-9);
    if (lu.rank() == K) {
      Eigen::VectorXd x = lu.solve(b);
      bool inside = true;
      for (int k = 0; k < K; ++k) {
        if (x(k) < lo - 1e-9 || x(k) > hi + 1e-9) {
          inside = false;
          break;
        }
        x(k) = std::min(std::max(x(k), lo), hi);
      }
      if (inside) {
        const double q = per_segment_qoe(x, ctx, params);
        if (q > best.objective) best = {x, q};
      }
    }
    // next K-combination of plane indices
    int pos = K - 1;
    while (pos >= 0 && pick[pos] == planes - K + pos) --pos;
    if (pos < 0) break;
    ++pick[pos];
    for (int j = pos + 1; j < K; ++j) pick[j] = pick[j - 1] + 1;
  }
  return best;
}

OptimumResult hull_optimum(const SegmentContext& ctx, const QoEParams& params,
                           const BitrateLadder& ladder) {
  const int K = static_cast<int>(ctx.omega.size());
  if (params.utility == UtilityKind::Linear && K <= 3)
    return hull_vertex_optimum(ctx, params, ladder);
  const Eigen::VectorXd r = hull_ascent(ctx, params, ladder, 2000);
  return {r, per_segment_qoe(r, ctx, params)};
}

}  // namespace

OptimumResult per_segment_optimum(const SegmentContext& ctx, const QoEParams& params,
                                  const BitrateLadder& ladder, OptimizeMethod method) {
  params.validate();
  if (ctx.omega.size() == 0) throw std::invalid_argument("per_segment_optimum: empty context");

  if (ladder.convex_mode) {
    if (method == OptimizeMethod::Exhaustive || method == OptimizeMethod::PgRound)
      throw std::invalid_argument("per_segment_optimum: lattice methods need a discrete ladder");
    return hull_optimum(ctx, params, ladder);
  }
  switch (method) {
    case OptimizeMethod::Exhaustive:
      return exhaustive_optimum(ctx, params, ladder);
    case OptimizeMethod::PgRound:
      return pg_round_optimum(ctx, params, ladder);
    case OptimizeMethod::Hull:
      return hull_optimum(ctx, params, ladder);
    case OptimizeMethod::Auto:
    default:
      if (lattice_size(ladder.size(), static_cast<int>(ctx.omega.size())) <= kExhaustiveLimit)
        return exhaustive_optimum(ctx, params, ladder);
      return pg_round_optimum(ctx, params, ladder);
  }
}

namespace {

struct OfflineSearch {
  const CapacityTrace* trace;
  const OverlapMap* overlaps;
  const QoEParams* params;
  double beta;
  int segments;
  std::vector<Eigen::VectorXd> combos;  // all ladder^K decisions, lexicographic

  std::vector<int> current;
  std::vector<int> best_combo;
  double best_qoe;

  void dfs(int depth, const DownloadState& state, double prev_play_end, double prev_mu,
           double partial) {
    if (depth == segments) {
      if (partial > best_qoe) {
        best_qoe = partial;
        best_combo = current;
      }
      return;
    }
    const Eigen::VectorXd omega_row = overlaps->omega.row(depth);
    for (size_t c = 0; c < combos.size(); ++c) {
      const Eigen::VectorXd& r = combos[c];
      DownloadState st = state;
      const double buffer_before = st.buffer_s;
      DownloadRecord rec = step_download(r, *trace, st, beta);
      const PlaybackUpdate play = playback_update(prev_play_end, rec.finish_s(rec.finish_s.size() - 1), beta);
      const double mu = omega_row.dot(r);

      double q = partial + utility(mu, *params);
      q -= params->rebuffer_unit_loss * std::max(0.0, rec.duration_s - buffer_before);
      q -= intra_degradation_loss(omega_row, r, *params);
      if (depth > 0) q -= params->inter_degradation_unit_loss * std::max(0.0, prev_mu - mu);

      current[depth] = static_cast<int>(c);
      dfs(depth + 1, st, play.play_end_s, mu, q);
    }
  }
};

}  // namespace

OfflineResult offline_optimal(const CapacityTrace& trace, const OverlapMap& overlaps,
                              const VideoConfig& video, const QoEParams& params,
                              const BitrateLadder& ladder, double max_sequences) {
  video.validate();
  params.validate();
  if (ladder.convex_mode)
    throw std::invalid_argument("offline_optimal: needs a discrete ladder");
  const int I = video.segment_count;
  const int K = overlaps.tiles();
  if (overlaps.segments() < I)
    throw ValidationError("offline_optimal: overlap map shorter than the session");
  if (lattice_size(ladder.size(), K * I) > max_sequences)
    throw InstanceTooLarge("offline_optimal: more than " + std::to_string(max_sequences) +
                           " candidate sequences");

  OfflineSearch search;
  search.trace = &trace;
  search.overlaps = &overlaps;
  search.params = &params;
  search.beta = video.segment_length_s;
  search.segments = I;
  search.best_qoe = -std::numeric_limits<double>::infinity();
  search.current.assign(I, 0);

  const int per_segment = static_cast<int>(lattice_size(ladder.size(), K));
  search.combos.reserve(per_segment);
  std::vector<int> idx(K, 0);
  while (true) {
    Eigen::VectorXd r(K);
    for (int k = 0; k < K; ++k) r(k) = ladder.level(idx[k]);
    search.combos.push_back(std::move(r));
    int k = K - 1;
    while (k >= 0 && idx[k] == ladder.size() - 1) idx[k--] = 0;
    if (k < 0) break;
    ++idx[k];
  }

  DownloadState state{0.0, video.initial_buffer_s};
  search.dfs(0, state, video.initial_buffer_s, 0.0, 0.0);

  OfflineResult result;
  result.qoe = search.best_qoe;
  result.decisions.reserve(I);
  for (int i = 0; i < I; ++i) result.decisions.push_back(search.combos[search.best_combo[i]]);
  return result;
}

RegretReport dynamic_regret(const SessionLog& log, const QoEParams& params,
                            const BitrateLadder& ladder, OptimizeMethod method) {
  const int I = log.segments();
  RegretReport report;
  report.optimum_value.resize(I);
  report.actual_value.resize(I);
  report.prefix_regret.resize(I);
  report.optimum_decisions.reserve(I);

  double running = 0.0;
  for (int i = 1; i <= I; ++i) {
    const SegmentContext ctx = log.context_of(i);
    OptimumResult opt = per_segment_optimum(ctx, params, ladder, method);
    const double actual = per_segment_qoe(log.decisions[i - 1], ctx, params);
    report.optimum_value(i - 1) = opt.objective;
    report.actual_value(i - 1) = actual;
    running += opt.objective - actual;
    report.prefix_regret(i - 1) = running;
    report.optimum_decisions.push_back(std::move(opt.decision));
  }
  report.total = running;
  report.per_segment = I > 0 ? running / I : 0.0;
  return report;
}

ConditionStats condition_stats(const SessionLog& log, const RegretReport& report,
                               const QoEParams& params) {
  const int I = log.segments();
  if (static_cast<int>(report.optimum_decisions.size()) != I)
    throw std::invalid_argument("condition_stats: report does not match the log");

  // Gradients at the decisions actually taken, for the revealed-set argmin.
  std::vector<Eigen::VectorXd> grads(I);
  for (int s = 1; s <= I; ++s)
    grads[s - 1] = per_segment_subgradient(log.decisions[s - 1], log.context_of(s), params);

  const int windows = static_cast<int>(log.revealed_sets.size());
  ConditionStats stats;
  stats.j.assign(windows, 0);
  stats.j_dagger.assign(windows, 0);
  stats.h.assign(windows, 0);

  int last_nonempty = 0;
  for (int w = 1; w <= windows; ++w) {
    const std::vector<int>& set = log.revealed_sets[w - 1];
    if (set.empty()) {
      ++stats.v_empty;
      stats.h[w - 1] = last_nonempty;
      if (last_nonempty != 0) stats.j[w - 1] = stats.j[last_nonempty - 1];
      continue;
    }
    std::vector<JCandidate> candidates;
    candidates.reserve(set.size());
    for (int s : set)
      candidates.push_back(
          {s, grads[s - 1], report.optimum_decisions[s - 1], log.decisions[s - 1]});
    const int J = compute_J(candidates);
    stats.j[w - 1] = J;
    // J refers to a segment decided in window J; the chain below it may
    // bottom out at the initial decision, which has no optimum to compare.
    const int dagger = J <= windows ? stats.j[J - 1] : 0;
    stats.j_dagger[w - 1] = dagger;
    if (dagger != 0) {
      stats.v_r += static_cast<double>(set.size()) *
                   (report.optimum_decisions[J - 1] - report.optimum_decisions[dagger - 1]).norm();
    }
    last_nonempty = w;
  }
  // Tail: some segment surfaced only after the final decision (or never),
  // so its loss could not influence any update.
  for (int s = 0; s < I; ++s)
    if (log.revealed_before[s] == 0 || log.revealed_before[s] > I) stats.has_tail = true;
  return stats;
}

BoundConstants BoundConstants::compute(const QoEParams& params, const BitrateLadder& ladder,
                                       int tiles, double d_min, double segment_length_s,
                                       double max_sum_omega, double alpha) {
  if (!(d_min > 0)) throw std::invalid_argument("BoundConstants: d_min must be > 0");
  if (!(alpha > 0)) throw std::invalid_argument("BoundConstants: alpha must be > 0");
  BoundConstants c;
  const double span = ladder.max() - ladder.min();
  c.radius = std::sqrt(static_cast<double>(tiles)) * span;
  const double per_coord = utility_slope(0.0, params) * max_sum_omega +
                           params.inter_degradation_unit_loss * max_sum_omega +
                           params.intra_degradation_unit_loss * tiles +
                           params.rebuffer_unit_loss * segment_length_s / d_min;
  c.q_bar = std::sqrt(static_cast<double>(tiles)) * per_coord;
  c.alpha = alpha;
  c.tail_factor = tiles * ladder.max() / d_min;
  return c;
}

double regret_bound(const ConditionStats& stats, const BoundConstants& consts,
                    int segment_count) {
  const double r2 = consts.radius * consts.radius;
  double bound = r2 * (1.0 + stats.v_empty) / (2.0 * consts.alpha);
  bound += consts.radius * stats.v_r / consts.alpha;
  bound += consts.alpha * consts.q_bar * consts.q_bar * segment_count / 2.0;
  if (stats.has_tail)
    bound += consts.tail_factor *
             (3.0 * r2 / (2.0 * consts.alpha) + consts.alpha * consts.q_bar * consts.q_bar / 2.0);
  return bound;
}

double horizon_step_size(double alpha0, double gamma, int segment_count) {
  if (!(alpha0 > 0)) throw std::invalid_argument("horizon_step_size: alpha0 must be > 0");
  if (!(gamma > 1)) throw std::invalid_argument("horizon_step_size: gamma must be > 1");
  if (segment_count < 1)
    throw std::invalid_argument("horizon_step_size: segment count must be >= 1");
  return alpha0 * std::pow(static_cast<double>(segment_count), -1.0 / gamma);
}

}  // namespace obs360
