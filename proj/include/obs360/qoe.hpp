#pragma once

#include "obs360/types.hpp"

namespace obs360 {

enum class UtilityKind { Linear, Log };

struct QoEParams {
  double rebuffer_unit_loss = 0.5;           // loss per second of stall
  double inter_degradation_unit_loss = 0.1;  // loss per Mbps of downward switch
  double intra_degradation_unit_loss = 0.1;  // loss per Mbps of below-average tile
  UtilityKind utility = UtilityKind::Linear;
  double log_scale = 1.0;  // utility = log_scale * ln(1 + mu) when Log

  void validate() const;
};

// Everything the per-segment objective needs besides the decision itself:
// realized tile overlaps, the previous segment's viewing bitrate under the
// decision actually taken, the buffer level before this download, and the
// mean capacity realized while downloading this segment.
struct SegmentContext {
  Eigen::VectorXd omega;
  double prev_viewing_bitrate = 0.0;  // Mbps; 0 for the first segment
  double buffer_before_s = 0.0;
  double mean_capacity_mbps = 0.0;
  double segment_length_s = 1.0;
};

// Per-segment quantities of one finished session, enough to evaluate the
// session QoE. Row i of omega and entry i of each vector refer to segment
// i+1; buffer_before_s(0) is the initial buffer.
struct SessionView {
  Eigen::MatrixXd omega;                       // segments x tiles
  std::vector<Eigen::VectorXd> decisions;      // Mbps per tile
  Eigen::VectorXd download_duration_s;
  Eigen::VectorXd buffer_before_s;
  double segment_length_s = 1.0;

  int segments() const { return static_cast<int>(decisions.size()); }
};

// omega-weighted bitrate actually watched during one segment.
double viewing_bitrate(const Eigen::Ref<const Eigen::VectorXd>& omega,
                       const Eigen::Ref<const Eigen::VectorXd>& r);

double utility(double mu, const QoEParams& params);
double utility_slope(double mu, const QoEParams& params);

// Stall-time loss: sum of [duration_i - buffer_before_i]^+ scaled by the
// unit loss.
double rebuffer_loss(const Eigen::Ref<const Eigen::VectorXd>& download_duration_s,
                     const Eigen::Ref<const Eigen::VectorXd>& buffer_before_s,
                     const QoEParams& params);

// Loss for viewing-bitrate drops between consecutive segments.
double inter_degradation_loss(const Eigen::Ref<const Eigen::VectorXd>& viewing_bitrates,
                              const QoEParams& params);

// Loss for tiles below the overlap-weighted average bitrate of their own
// segment. Zero by definition when the overlaps sum to zero.
double intra_degradation_loss(const Eigen::Ref<const Eigen::VectorXd>& omega,
                              const Eigen::Ref<const Eigen::VectorXd>& r,
                              const QoEParams& params);

// Session QoE: total utility minus rebuffering and degradation losses.
double total_qoe(const SessionView& view, const QoEParams& params);

// Surrogate objective for a single segment given its context. The stall
// and downward-switch terms are kept linear (not clamped at zero), which
// makes the function concave in r over the ladder hull.
double per_segment_qoe(const Eigen::Ref<const Eigen::VectorXd>& r,
                       const SegmentContext& ctx, const QoEParams& params);

// A supergradient of per_segment_qoe at r; kinks of the clamped intra
// term take the zero-slope branch.
Eigen::VectorXd per_segment_subgradient(const Eigen::Ref<const Eigen::VectorXd>& r,
                                        const SegmentContext& ctx,
                                        const QoEParams& params);

}  // namespace obs360
