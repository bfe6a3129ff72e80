#pragma once

#include <Eigen/Dense>

#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace obs360 {

// Thrown when a download runs past the end of a non-wrapping capacity trace.
struct HorizonExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input file; line is 1-based, 0 when not attributable to a line.
struct ParseError : std::runtime_error {
  ParseError(const std::string& what, int line_number)
      : std::runtime_error(what), line(line_number) {}
  int line;
};

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Exhaustive enumeration refused because the search space is too big.
struct InstanceTooLarge : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A policy emitted a bitrate vector outside the feasible set.
struct InvalidDecision : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Ordered discrete bitrate set; convex_mode widens the feasible set per
// tile from the levels themselves to the interval [min(), max()].
struct BitrateLadder {
  Eigen::VectorXd levels;  // strictly increasing, all > 0, size >= 2
  bool convex_mode = false;

  BitrateLadder() = default;
  BitrateLadder(std::initializer_list<double> lv, bool convex = false)
      : BitrateLadder(std::vector<double>(lv), convex) {}
  explicit BitrateLadder(const std::vector<double>& lv, bool convex = false);

  int size() const { return static_cast<int>(levels.size()); }
  double min() const { return levels(0); }
  double max() const { return levels(levels.size() - 1); }
  double level(int index0) const { return levels(index0); }

  // 0-based index of an exact member; invalid_argument otherwise.
  int level_index(double r) const;
  bool contains(double r) const;

  // Closest level to x, ties broken toward the lower level.
  double nearest(double x) const;
  double clamp_hull(double x) const;

  // 0-based index of the median level (lower median for even sizes).
  int median_index() const { return (size() - 1) / 2; }
};

struct TileGrid {
  int rows = 1;
  int cols = 1;

  TileGrid() = default;
  TileGrid(int m, int n) : rows(m), cols(n) {
    if (m < 1 || n < 1) throw std::invalid_argument("TileGrid: rows and cols must be >= 1");
  }
  int tiles() const { return rows * cols; }
  double tile_height_deg() const { return 180.0 / rows; }
  double tile_width_deg() const { return 360.0 / cols; }
};

// Per-segment viewport centers plus the angular extent of the FoV
// rectangle. Pitch in [-90, 90], yaw in [-180, 180].
struct ViewportTrace {
  Eigen::VectorXd pitch_deg;
  Eigen::VectorXd yaw_deg;
  double fov_vertical_deg = 0.0;
  double fov_horizontal_deg = 0.0;

  int segments() const { return static_cast<int>(pitch_deg.size()); }
  void validate() const;
};

// Row i = fraction of each tile covered by the user FoV while viewing
// segment i+1, indexed relative to that segment's reference FoV.
struct OverlapMap {
  Eigen::MatrixXd omega;  // segments x tiles, entries in [0, 1]

  int segments() const { return static_cast<int>(omega.rows()); }
  int tiles() const { return static_cast<int>(omega.cols()); }
};

// Piecewise-constant downloading capacity. Sample j holds on
// [time_s(j), time_s(j+1)); the last sample holds for one trailing
// interval of the same length as the previous one, after which the trace
// either wraps cyclically or (wrap = false) is considered exhausted.
struct CapacityTrace {
  Eigen::VectorXd time_s;  // strictly increasing, starts at 0
  Eigen::VectorXd mbps;    // within [d_min, d_max]
  double d_min = 0.0;
  double d_max = 0.0;
  bool wrap = true;

  CapacityTrace() = default;
  // bounds default to the observed min/max when not given explicitly
  CapacityTrace(Eigen::VectorXd times, Eigen::VectorXd rates,
                double dmin = 0.0, double dmax = 0.0, bool wrap_trace = true);

  int samples() const { return static_cast<int>(time_s.size()); }
  // Length of one pass over the samples; infinity for a single sample.
  double period_s() const;
  // Capacity at absolute time t (wrap-aware). HorizonExceeded when the
  // trace is exhausted and wrap is off.
  double rate_at(double t) const;
  void validate() const;
};

struct VideoConfig {
  int segment_count = 1;        // I
  double segment_length_s = 1;  // beta
  double initial_buffer_s = 0;  // playback seconds buffered before t = 0

  void validate() const;
};

}  // namespace obs360
