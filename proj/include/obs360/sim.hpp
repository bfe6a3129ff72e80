#pragma once

#include "obs360/qoe.hpp"
#include "obs360/types.hpp"

#include <memory>
#include <vector>

namespace obs360 {

// When a segment's realized context becomes visible to the policy:
// normally when the user finishes watching it, optionally already when
// its download completes.
enum class RevealMode { AtPlaybackEnd, AtDownloadEnd };

struct DownloadRecord {
  Eigen::VectorXd start_s;   // per tile, back to back
  Eigen::VectorXd finish_s;
  double duration_s = 0.0;        // finish of last tile - start of first
  double mean_capacity_mbps = 0;  // delivered megabits / duration
};

// A segment whose realization just became visible, bundled with the
// context needed to evaluate its objective after the fact.
struct Revelation {
  int segment = 0;  // 1-based
  SegmentContext context;
};

class Policy {
 public:
  virtual ~Policy() = default;
  // Called once per segment in order, at that segment's decision instant,
  // with the realizations that surfaced since the previous decision.
  virtual Eigen::VectorXd decide(int segment, const std::vector<Revelation>& revealed) = 0;
  virtual std::string name() const = 0;
};

struct SessionLog {
  VideoConfig video;
  int tiles = 0;
  std::vector<Eigen::VectorXd> decisions;  // r per segment
  std::vector<DownloadRecord> downloads;
  Eigen::VectorXd buffer_s;           // b_i after segment i completes
  Eigen::VectorXd buffer_before_s;    // b_{i-1} seen by segment i
  Eigen::VectorXd decision_time_s;    // when segment i's decision was made
  Eigen::VectorXd play_start_s;
  Eigen::VectorXd play_end_s;
  Eigen::VectorXd rebuffer_s;
  Eigen::VectorXd viewing_bitrate_mbps;
  Eigen::MatrixXd omega;              // realized overlaps
  Eigen::VectorXd reveal_time_s;
  // revealed_sets[i-1] = segments revealed in the window ending at
  // decision i; the last entry (index I) collects everything after the
  // final decision.
  std::vector<std::vector<int>> revealed_sets;
  std::vector<int> revealed_before;   // per segment: the decision index it fed, 0 if none

  int segments() const { return static_cast<int>(decisions.size()); }
  SessionView view() const;
  // Context for re-evaluating segment i's (1-based) objective offline,
  // identical to what the policy saw at reveal time.
  SegmentContext context_of(int segment) const;
};

// Earliest time t such that the trace delivers `megabits` over [t0, t].
double integrate_capacity(const CapacityTrace& trace, double t0_s, double megabits);

struct DownloadState {
  double clock_s = 0.0;   // finish time of the last downloaded tile
  double buffer_s = 0.0;  // playback seconds buffered
};

// Downloads one segment's tiles in index order starting at state.clock_s,
// then applies the buffer recurrence. Mutates state to the post-segment
// clock and buffer.
DownloadRecord step_download(const Eigen::Ref<const Eigen::VectorXd>& r,
                             const CapacityTrace& trace, DownloadState& state,
                             double segment_length_s);

struct PlaybackUpdate {
  double play_start_s = 0.0;
  double play_end_s = 0.0;
  double rebuffer_s = 0.0;
};

// Playback of one segment: starts when both the previous segment finished
// playing and this one finished downloading; the gap beyond the previous
// play end is stall time.
PlaybackUpdate playback_update(double prev_play_end_s, double download_finish_s,
                               double segment_length_s);

// Groups segments by the decision window in which their reveal time falls:
// result[i-1] lists segments revealed in (decision_times[i-2], decision_times[i-1]]
// (with -inf before the first decision), and result.back() those after the
// last decision. Sizes: result has decision_times.size() + 1 entries.
std::vector<std::vector<int>> auxiliary_sets(const std::vector<double>& decision_times,
                                             const std::vector<double>& reveal_times);

// Runs a full session: per segment, reveal pending realizations, ask the
// policy, validate the decision against the ladder (exact levels in
// discrete mode, hull bounds in convex mode), download, and play back.
SessionLog run_session(Policy& policy, const CapacityTrace& trace, const OverlapMap& overlaps,
                       const VideoConfig& video, const QoEParams& params,
                       const BitrateLadder& ladder,
                       RevealMode reveal = RevealMode::AtPlaybackEnd);

}  // namespace obs360
