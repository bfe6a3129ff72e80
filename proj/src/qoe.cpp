#include "obs360/qoe.hpp"

#include <cmath>

namespace obs360 {

void QoEParams::validate() const {
  if (rebuffer_unit_loss < 0 || inter_degradation_unit_loss < 0 ||
      intra_degradation_unit_loss < 0)
    throw std::invalid_argument("QoEParams: unit losses must be >= 0");
  if (utility == UtilityKind::Log && !(log_scale > 0))
    throw std::invalid_argument("QoEParams: log_scale must be > 0");
}

double viewing_bitrate(const Eigen::Ref<const Eigen::VectorXd>& omega,
                       const Eigen::Ref<const Eigen::VectorXd>& r) {
  if (omega.size() != r.size())
    throw std::invalid_argument("viewing_bitrate: omega and r lengths differ");
  return omega.dot(r);
}

double utility(double mu, const QoEParams& params) {
  if (params.utility == UtilityKind::Log) return params.log_scale * std::log1p(mu);
  return mu;
}

double utility_slope(double mu, const QoEParams& params) {
  if (params.utility == UtilityKind::Log) return params.log_scale / (1.0 + mu);
  return 1.0;
}

double rebuffer_loss(const Eigen::Ref<const Eigen::VectorXd>& download_duration_s,
                     const Eigen::Ref<const Eigen::VectorXd>& buffer_before_s,
                     const QoEParams& params) {
  if (download_duration_s.size() != buffer_before_s.size())
    throw std::invalid_argument("rebuffer_loss: length mismatch");
  double stall = 0.0;
  for (int i = 0; i < download_duration_s.size(); ++i)
    stall += std::max(0.0, download_duration_s(i) - buffer_before_s(i));
  return params.rebuffer_unit_loss * stall;
}

double inter_degradation_loss(const Eigen::Ref<const Eigen::VectorXd>& viewing_bitrates,
                              const QoEParams& params) {
  double drop = 0.0;
  for (int i = 1; i < viewing_bitrates.size(); ++i)
    drop += std::max(0.0, viewing_bitrates(i - 1) - viewing_bitrates(i));
  return params.inter_degradation_unit_loss * drop;
}

double intra_degradation_loss(const Eigen::Ref<const Eigen::VectorXd>& omega,
                              const Eigen::Ref<const Eigen::VectorXd>& r,
                              const QoEParams& params) {
  if (omega.size() != r.size())
    throw std::invalid_argument("intra_degradation_loss: omega and r lengths differ");
  const double total = omega.sum();
  if (total <= 0) return 0.0;
  const double mean = omega.dot(r) / total;
  double loss = 0.0;
  for (int k = 0; k < r.size(); ++k)
    loss += omega(k) * std::max(0.0, mean - r(k));
  return params.intra_degradation_unit_loss * loss;
}

double total_qoe(const SessionView& view, const QoEParams& params) {
  const int segments = view.segments();
  if (view.omega.rows() != segments || view.download_duration_s.size() != segments ||
      view.buffer_before_s.size() != segments)
    throw std::invalid_argument("total_qoe: inconsistent session view");

  Eigen::VectorXd mus(segments);
  double q = 0.0;
  for (int i = 0; i < segments; ++i) {
    mus(i) = viewing_bitrate(view.omega.row(i), view.decisions[i]);
    q += utility(mus(i), params);
    q -= intra_degradation_loss(view.omega.row(i), view.decisions[i], params);
  }
  q -= rebuffer_loss(view.download_duration_s, view.buffer_before_s, params);
  q -= inter_degradation_loss(mus, params);
  return q;
}

double per_segment_qoe(const Eigen::Ref<const Eigen::VectorXd>& r,
                       const SegmentContext& ctx, const QoEParams& params) {
  if (ctx.omega.size() != r.size())
    throw std::invalid_argument("per_segment_qoe: omega and r lengths differ");
  if (!(ctx.mean_capacity_mbps > 0))
    throw std::invalid_argument("per_segment_qoe: mean capacity must be > 0");

  const double mu = ctx.omega.dot(r);
  const double download_s = r.sum() * ctx.segment_length_s / ctx.mean_capacity_mbps;
  double q = utility(mu, params);
  q -= params.rebuffer_unit_loss * (download_s - ctx.buffer_before_s);
  q -= intra_degradation_loss(ctx.omega, r, params);
  q -= params.inter_degradation_unit_loss * (ctx.prev_viewing_bitrate - mu);
  return q;
}

Eigen::VectorXd per_segment_subgradient(const Eigen::Ref<const Eigen::VectorXd>& r,
                                        const SegmentContext& ctx,
                                        const QoEParams& params) {
  if (ctx.omega.size() != r.size())
    throw std::invalid_argument("per_segment_subgradient: omega and r lengths differ");
  if (!(ctx.mean_capacity_mbps > 0))
    throw std::invalid_argument("per_segment_subgradient: mean capacity must be > 0");

  const int K = static_cast<int>(r.size());
  const double mu = ctx.omega.dot(r);
  const double slope = utility_slope(mu, params);
  const double rb = params.rebuffer_unit_loss * ctx.segment_length_s / ctx.mean_capacity_mbps;
  const double total = ctx.omega.sum();

  // Weighted mass of the tiles strictly below the segment mean; the
  // boundary case (tile exactly at the mean) contributes nothing.
  double active = 0.0;
  if (total > 0) {
    const double mean = mu / total;
    for (int k = 0; k < K; ++k)
      if (mean - r(k) > 0) active += ctx.omega(k);
  }

  Eigen::VectorXd g(K);
  for (int k = 0; k < K; ++k) {
    double intra = 0.0;
    if (total > 0) {
      const double mean = mu / total;
      intra = (ctx.omega(k) / total) * active - ctx.omega(k) * (mean - r(k) > 0 ? 1.0 : 0.0);
    }
    g(k) = slope * ctx.omega(k) - rb + params.inter_degradation_unit_loss * ctx.omega(k) -
           params.intra_degradation_unit_loss * intra;
  }
  return g;
}

}  // namespace obs360
