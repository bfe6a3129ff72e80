#include "obs360/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace obs360 {

BitrateLadder::BitrateLadder(const std::vector<double>& lv, bool convex)
    : levels(Eigen::Map<const Eigen::VectorXd>(lv.data(), static_cast<long>(lv.size()))),
      convex_mode(convex) {
  if (levels.size() < 2) throw std::invalid_argument("BitrateLadder: need at least 2 levels");
  for (int i = 0; i < levels.size(); ++i) {
    if (!(levels(i) > 0)) throw std::invalid_argument("BitrateLadder: levels must be > 0");
    if (i > 0 && !(levels(i) > levels(i - 1)))
      throw std::invalid_argument("BitrateLadder: levels must be strictly increasing");
  }
}

int BitrateLadder::level_index(double r) const {
  for (int i = 0; i < size(); ++i)
    if (levels(i) == r) return i;
  throw std::invalid_argument("BitrateLadder: value is not a ladder level");
}

bool BitrateLadder::contains(double r) const {
  for (int i = 0; i < size(); ++i)
    if (levels(i) == r) return true;
  return false;
}

double BitrateLadder::nearest(double x) const {
  double best = levels(0);
  for (int i = 1; i < size(); ++i)
    if (std::abs(x - levels(i)) < std::abs(x - best)) best = levels(i);
  return best;  // ascending scan with strict < keeps the lower level on ties
}

double BitrateLadder::clamp_hull(double x) const {
  return std::min(std::max(x, min()), max());
}

void ViewportTrace::validate() const {
  if (pitch_deg.size() != yaw_deg.size())
    throw ValidationError("viewport trace: pitch and yaw lengths differ");
  if (pitch_deg.size() == 0) throw ValidationError("viewport trace: empty");
  if (!(fov_vertical_deg > 0) || fov_vertical_deg > 180)
    throw ValidationError("viewport trace: vertical FoV extent must be in (0, 180]");
  if (!(fov_horizontal_deg > 0) || fov_horizontal_deg > 360)
    throw ValidationError("viewport trace: horizontal FoV extent must be in (0, 360]");
  for (int i = 0; i < pitch_deg.size(); ++i) {
    if (!(pitch_deg(i) >= -90 && pitch_deg(i) <= 90))
      throw ValidationError("viewport trace: pitch outside [-90, 90] at segment " +
                            std::to_string(i + 1));
    if (!(yaw_deg(i) >= -180 && yaw_deg(i) <= 180))
      throw ValidationError("viewport trace: yaw outside [-180, 180] at segment " +
                            std::to_string(i + 1));
  }
}

CapacityTrace::CapacityTrace(Eigen::VectorXd times, Eigen::VectorXd rates,
                             double dmin, double dmax, bool wrap_trace)
    : time_s(std::move(times)), mbps(std::move(rates)), d_min(dmin), d_max(dmax),
      wrap(wrap_trace) {
  if (time_s.size() != mbps.size())
    throw ValidationError("capacity trace: time and rate lengths differ");
  if (time_s.size() == 0) throw ValidationError("capacity trace: empty");
  if (d_min == 0.0 && d_max == 0.0) {
    d_min = mbps.minCoeff();
    d_max = mbps.maxCoeff();
  }
  validate();
}

double CapacityTrace::period_s() const {
  const int n = samples();
  if (n < 2) return std::numeric_limits<double>::infinity();
  return time_s(n - 1) + (time_s(n - 1) - time_s(n - 2));
}

double CapacityTrace::rate_at(double t) const {
  if (t < 0) throw std::invalid_argument("capacity trace: negative time");
  const double period = period_s();
  double phase = t;
  if (std::isfinite(period) && phase >= period) {
    if (!wrap) throw HorizonExceeded("capacity trace exhausted at t = " + std::to_string(t));
    phase = std::fmod(phase, period);
  }
  // last sample at or before phase
  const double* begin = time_s.data();
  const double* end = begin + samples();
  const double* it = std::upper_bound(begin, end, phase);
  const long j = std::max<long>(0, (it - begin) - 1);
  return mbps(j);
}

void CapacityTrace::validate() const {
  if (time_s.size() != mbps.size())
    throw ValidationError("capacity trace: time and rate lengths differ");
  if (time_s.size() == 0) throw ValidationError("capacity trace: empty");
  if (time_s(0) != 0.0) throw ValidationError("capacity trace: first sample must be at t = 0");
  for (int i = 1; i < time_s.size(); ++i)
    if (!(time_s(i) > time_s(i - 1)))
      throw ValidationError("capacity trace: times must be strictly increasing");
  if (!(d_min > 0)) throw ValidationError("capacity trace: d_min must be > 0");
  if (!(d_max >= d_min)) throw ValidationError("capacity trace: d_max must be >= d_min");
  for (int i = 0; i < mbps.size(); ++i)
    if (!(mbps(i) >= d_min && mbps(i) <= d_max))
      throw ValidationError("capacity trace: sample outside [d_min, d_max] at index " +
                            std::to_string(i));
}

void VideoConfig::validate() const {
  if (segment_count < 1) throw std::invalid_argument("VideoConfig: segment_count must be >= 1");
  if (!(segment_length_s > 0))
    throw std::invalid_argument("VideoConfig: segment_length_s must be > 0");
  if (initial_buffer_s < 0)
    throw std::invalid_argument("VideoConfig: initial_buffer_s must be >= 0");
}

}  // namespace obs360
