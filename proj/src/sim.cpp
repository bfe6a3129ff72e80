#include "obs360/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace obs360 {

SessionView SessionLog::view() const {
  SessionView v;
  v.omega = omega;
  v.decisions = decisions;
  v.segment_length_s = video.segment_length_s;
  const int I = segments();
  v.download_duration_s.resize(I);
  v.buffer_before_s = buffer_before_s;
  for (int i = 0; i < I; ++i) v.download_duration_s(i) = downloads[i].duration_s;
  return v;
}

SegmentContext SessionLog::context_of(int segment) const {
  if (segment < 1 || segment > segments())
    throw std::invalid_argument("SessionLog: segment index out of range");
  SegmentContext ctx;
  ctx.omega = omega.row(segment - 1);
  ctx.prev_viewing_bitrate = segment >= 2 ? viewing_bitrate_mbps(segment - 2) : 0.0;
  ctx.buffer_before_s = buffer_before_s(segment - 1);
  ctx.mean_capacity_mbps = downloads[segment - 1].mean_capacity_mbps;
  ctx.segment_length_s = video.segment_length_s;
  return ctx;
}

double integrate_capacity(const CapacityTrace& trace, double t0_s, double megabits) {
  if (t0_s < 0) throw std::invalid_argument("integrate_capacity: negative start time");
  if (megabits < 0) throw std::invalid_argument("integrate_capacity: negative size");
  if (megabits == 0) return t0_s;

  const double period = trace.period_s();
  double t = t0_s;
  double remaining = megabits;
  while (true) {
    const double rate = trace.rate_at(t);  // throws HorizonExceeded when exhausted
    double interval_end;
    if (!std::isfinite(period)) {
      interval_end = std::numeric_limits<double>::infinity();
    } else {
      const double phase = t - std::floor(t / period) * period;
      const double* begin = trace.time_s.data();
      const double* end = begin + trace.samples();
      const double* it = std::upper_bound(begin, end, phase);
      const double next_phase = (it == end) ? period : *it;
      interval_end = t + (next_phase - phase);
    }
    const double capacity = rate * (interval_end - t);
    if (remaining <= capacity) return t + remaining / rate;
    remaining -= capacity;
    t = interval_end;
  }
}

DownloadRecord step_download(const Eigen::Ref<const Eigen::VectorXd>& r,
                             const CapacityTrace& trace, DownloadState& state,
                             double segment_length_s) {
  if (r.size() == 0) throw std::invalid_argument("step_download: empty decision");
  if (!(segment_length_s > 0))
    throw std::invalid_argument("step_download: segment length must be > 0");
  for (int k = 0; k < r.size(); ++k)
    if (!(r(k) > 0)) throw std::invalid_argument("step_download: bitrates must be > 0");

  const int K = static_cast<int>(r.size());
  DownloadRecord rec;
  rec.start_s.resize(K);
  rec.finish_s.resize(K);
  double t = state.clock_s;
  for (int k = 0; k < K; ++k) {
    rec.start_s(k) = t;
    t = integrate_capacity(trace, t, r(k) * segment_length_s);
    rec.finish_s(k) = t;
  }
  rec.duration_s = rec.finish_s(K - 1) - rec.start_s(0);
  rec.mean_capacity_mbps = r.sum() * segment_length_s / rec.duration_s;

  state.buffer_s = std::max(0.0, state.buffer_s - rec.duration_s) + segment_length_s;
  state.clock_s = t;
  return rec;
}

PlaybackUpdate playback_update(double prev_play_end_s, double download_finish_s,
                               double segment_length_s) {
  PlaybackUpdate u;
  u.play_start_s = std::max(prev_play_end_s, download_finish_s);
  u.play_end_s = u.play_start_s + segment_length_s;
  u.rebuffer_s = std::max(0.0, download_finish_s - prev_play_end_s);
  return u;
}

std::vector<std::vector<int>> auxiliary_sets(const std::vector<double>& decision_times,
                                             const std::vector<double>& reveal_times) {
  for (size_t i = 1; i < decision_times.size(); ++i)
    if (decision_times[i] < decision_times[i - 1])
      throw std::invalid_argument("auxiliary_sets: decision times must be nondecreasing");

  const int I = static_cast<int>(reveal_times.size());
  const int windows = static_cast<int>(decision_times.size()) + 1;
  std::vector<std::vector<int>> sets(windows);
  for (int s = 0; s < I; ++s) {
    const double t = reveal_times[s];
    // first window whose right edge is at or after the reveal time
    int w = static_cast<int>(std::lower_bound(decision_times.begin(), decision_times.end(), t) -
                             decision_times.begin());
    sets[w].push_back(s + 1);
  }
  for (auto& set : sets) std::sort(set.begin(), set.end());
  return sets;
}

namespace {

void validate_decision(const Eigen::VectorXd& r, const BitrateLadder& ladder, int K,
                       int segment) {
  if (static_cast<int>(r.size()) != K)
    throw InvalidDecision("segment " + std::to_string(segment) + ": decision has " +
                          std::to_string(r.size()) + " tiles, expected " + std::to_string(K));
  for (int k = 0; k < K; ++k) {
    if (ladder.convex_mode) {
      if (!(r(k) >= ladder.min() && r(k) <= ladder.max()))
        throw InvalidDecision("segment " + std::to_string(segment) +
                              ": bitrate outside the ladder hull");
    } else if (!ladder.contains(r(k))) {
      throw InvalidDecision("segment " + std::to_string(segment) +
                            ": bitrate is not a ladder level");
    }
  }
}

}  // namespace

SessionLog run_session(Policy& policy, const CapacityTrace& trace, const OverlapMap& overlaps,
                       const VideoConfig& video, const QoEParams& params,
                       const BitrateLadder& ladder, RevealMode reveal) {
  video.validate();
  params.validate();
  const int I = video.segment_count;
  const int K = overlaps.tiles();
  if (overlaps.segments() < I)
    throw ValidationError("run_session: overlap map shorter than the session");

  SessionLog log;
  log.video = video;
  log.tiles = K;
  log.decisions.reserve(I);
  log.downloads.reserve(I);
  log.buffer_s.resize(I);
  log.buffer_before_s.resize(I);
  log.decision_time_s.resize(I);
  log.play_start_s.resize(I);
  log.play_end_s.resize(I);
  log.rebuffer_s.resize(I);
  log.viewing_bitrate_mbps.resize(I);
  log.omega = overlaps.omega.topRows(I);
  log.reveal_time_s.resize(I);
  log.revealed_sets.assign(I + 1, {});
  log.revealed_before.assign(I, 0);

  const double beta = video.segment_length_s;
  DownloadState state{0.0, video.initial_buffer_s};
  double prev_play_end = video.initial_buffer_s;
  int next_reveal = 0;  // segments 1..next_reveal already delivered to the policy

  for (int i = 1; i <= I; ++i) {
    const double now = state.clock_s;
    log.decision_time_s(i - 1) = now;

    std::vector<Revelation> fresh;
    while (next_reveal < i - 1 && log.reveal_time_s(next_reveal) <= now) {
      fresh.push_back({next_reveal + 1, log.context_of(next_reveal + 1)});
      log.revealed_sets[i - 1].push_back(next_reveal + 1);
      log.revealed_before[next_reveal] = i;
      ++next_reveal;
    }

    Eigen::VectorXd r = policy.decide(i, fresh);
    validate_decision(r, ladder, K, i);

    log.buffer_before_s(i - 1) = state.buffer_s;
    DownloadRecord rec = step_download(r, trace, state, beta);
    PlaybackUpdate play = playback_update(prev_play_end, rec.finish_s(K - 1), beta);
    prev_play_end = play.play_end_s;

    log.decisions.push_back(std::move(r));
    log.buffer_s(i - 1) = state.buffer_s;
    log.play_start_s(i - 1) = play.play_start_s;
    log.play_end_s(i - 1) = play.play_end_s;
    log.rebuffer_s(i - 1) = play.rebuffer_s;
    log.viewing_bitrate_mbps(i - 1) =
        viewing_bitrate(log.omega.row(i - 1), log.decisions[i - 1]);
    log.reveal_time_s(i - 1) =
        reveal == RevealMode::AtPlaybackEnd ? play.play_end_s : rec.finish_s(K - 1);
    log.downloads.push_back(std::move(rec));
  }

  // Everything not yet revealed surfaces after the final decision.
  for (int s = next_reveal; s < I; ++s) {
    log.revealed_sets[I].push_back(s + 1);
    log.revealed_before[s] = I + 1;
  }
  return log;
}

}  // namespace obs360
