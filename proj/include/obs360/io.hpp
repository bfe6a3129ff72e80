#pragma once

#include "obs360/oracles.hpp"
#include "obs360/policy.hpp"
#include "obs360/sim.hpp"
#include "obs360/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace obs360 {

// Shortest decimal string that parses back to exactly the same double.
std::string format_double(double x);

// x rounded to the given number of significant decimal digits.
double round_sig(double x, int digits = 12);

// capacity CSV: header "time_s,mbps", times strictly increasing from 0.
CapacityTrace parse_capacity_csv(std::istream& in);
void write_capacity_csv(std::ostream& out, const CapacityTrace& trace);

// viewport CSV: header "segment,pitch_deg,yaw_deg", segments 1..N in order.
// FoV extents are not part of the file; the caller sets them.
ViewportTrace parse_viewport_csv(std::istream& in);
void write_viewport_csv(std::ostream& out, const ViewportTrace& trace);

// Replaces sub-second sampling with one sample per integer second.
CapacityTrace resample_1hz(const CapacityTrace& trace);

struct SyntheticTraceSpec {
  double capacity_base_mbps = 30.0;
  double capacity_step_mbps = 2.0;        // bounded random-walk increment
  double capacity_trend_mbps_per_s = 0.0; // deterministic drift per second
  double capacity_min_mbps = 5.0;
  double capacity_max_mbps = 60.0;
  int duration_s = 0;                     // 0 = one minute past the video length
  double viewport_offset_pitch_deg = 0.0; // user preference relative to reference
  double viewport_offset_yaw_deg = 45.0;
  double viewport_step_deg = 2.0;         // user random-walk step per segment
  double reference_step_deg = 0.0;        // reference random-walk step per segment
};

struct SyntheticTraces {
  CapacityTrace capacity;
  ViewportTrace user;
  ViewportTrace reference;
};

// Deterministic given (spec, seed): one capacity draw per second, then per
// segment two reference draws (pitch, yaw) and two user draws.
SyntheticTraces generate_synthetic(const SyntheticTraceSpec& spec, std::uint64_t seed,
                                   int segments, double segment_length_s,
                                   double fov_vertical_deg, double fov_horizontal_deg,
                                   bool wrap);

// Flat key = value file; '#' starts a comment. Unknown keys are errors.
struct RunConfig {
  std::string mode = "discrete";  // discrete | convex
  std::string out = "out";
  std::uint64_t seed = 0;
  bool seed_set = false;

  bool synthetic = true;
  std::string capacity_csv;
  std::string user_viewport_csv;
  std::string reference_viewport_csv;
  double capacity_dmin = 0.0;  // 0 = observed
  double capacity_dmax = 0.0;
  bool trace_wrap = true;
  std::string reveal = "at_view";  // at_view | at_download

  SyntheticTraceSpec synth;

  int grid_rows = 1;
  int grid_cols = 2;
  int segment_count = 60;
  double segment_length_s = 1.0;
  double initial_buffer_s = 2.0;
  double fov_vertical_deg = 0.0;  // 0 = derived from the grid
  double fov_horizontal_deg = 0.0;
  std::vector<double> ladder_mbps = {1, 2.5, 5, 8, 16, 40};

  double rebuffer_unit_loss = 0.5;
  double inter_degradation_unit_loss = 0.1;
  double intra_degradation_unit_loss = 0.1;
  std::string utility = "linear";  // linear | log
  double utility_log_scale = 1.0;

  std::string policy = "obs360";
  std::vector<std::string> policies;  // for `compare`
  double alpha = 1.0;
  std::string alpha_schedule = "fixed";  // fixed | horizon
  double alpha0 = 1.0;
  double gamma = 2.0;
  int r0_level = 0;
  std::string oracle = "auto";  // auto | exhaustive | pg-round | hull
  int threads = 0;

  static RunConfig from_stream(std::istream& in);
  static RunConfig from_file(const std::string& path);
};

// Everything a session run needs, resolved from a RunConfig: traces are
// generated or loaded and validated, and the overlap map is computed.
struct SessionInputs {
  CapacityTrace capacity;
  ViewportTrace user;
  ViewportTrace reference;
  TileGrid grid;
  OverlapMap overlaps;
  VideoConfig video;
  QoEParams params;
  BitrateLadder ladder;
  RevealMode reveal = RevealMode::AtPlaybackEnd;
  PolicyOptions policy_options;
  bool traces_generated = false;
};

SessionInputs assemble_inputs(const RunConfig& config);

void write_session_csv(std::ostream& out, const SessionLog& log);

// Exit codes: 0 ok, 2 config error, 3 validation error, 4 instance too large.
int run_cli(int argc, const char* const* argv);

}  // namespace obs360
