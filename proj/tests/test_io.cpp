#include <doctest.h>

#include "obs360/io.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace obs360;

namespace {

const std::filesystem::path kTmp = std::filesystem::temp_directory_path() / "obs360_io_test";

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  out << text;
}

CapacityTrace make_trace(std::initializer_list<double> times,
                         std::initializer_list<double> rates, bool wrap = true) {
  Eigen::VectorXd t(static_cast<long>(times.size())), d(static_cast<long>(rates.size()));
  int i = 0;
  for (double x : times) t(i++) = x;
  i = 0;
  for (double x : rates) d(i++) = x;
  return CapacityTrace(std::move(t), std::move(d), 0.0, 0.0, wrap);
}

RunConfig base_config() {
  RunConfig cfg;
  cfg.seed = 7;
  cfg.seed_set = true;
  cfg.segment_count = 5;
  return cfg;
}

}  // namespace

TEST_CASE("formatted doubles parse back to the identical value") {
  for (const double x : {0.1, 1.0 / 3.0, 1e-17, 9007199254740993.0, -2.5e300,
                         123456789.123456789, 0.0, -0.0, 42.0}) {
    const std::string s = format_double(x);
    CHECK(std::strtod(s.c_str(), nullptr) == x);
  }
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(0.1) == "0.1");
}

TEST_CASE("rounding to significant digits") {
  CHECK(round_sig(0.1 + 0.2) == 0.3);
  CHECK(round_sig(123456.789, 6) == 123457.0);
  CHECK(round_sig(0.0001234567, 3) == 0.000123);
  CHECK(round_sig(-123456.789, 6) == -123457.0);
  CHECK(round_sig(0.0, 3) == 0.0);
}

TEST_CASE("capacity CSV round-trips exactly") {
  const CapacityTrace trace = make_trace({0, 1.5, 3.7}, {10, 0.25, 1.0 / 3.0});
  std::stringstream buf;
  write_capacity_csv(buf, trace);
  std::string header;
  std::getline(buf, header);
  CHECK(header == "time_s,mbps");
  buf.seekg(0);
  const CapacityTrace back = parse_capacity_csv(buf);
  CHECK(back.time_s == trace.time_s);
  CHECK(back.mbps == trace.mbps);
  CHECK(back.d_min == 0.25);
  CHECK(back.d_max == 10.0);
}

TEST_CASE("viewport CSV round-trips exactly") {
  ViewportTrace trace;
  trace.pitch_deg.resize(3);
  trace.pitch_deg << 0, 10.5, -30;
  trace.yaw_deg.resize(3);
  trace.yaw_deg << -180, 45.25, 179.9;
  std::stringstream buf;
  write_viewport_csv(buf, trace);
  std::string header;
  std::getline(buf, header);
  CHECK(header == "segment,pitch_deg,yaw_deg");
  buf.seekg(0);
  const ViewportTrace back = parse_viewport_csv(buf);
  CHECK(back.pitch_deg == trace.pitch_deg);
  CHECK(back.yaw_deg == trace.yaw_deg);
  CHECK(back.fov_vertical_deg == 0.0);
}

TEST_CASE("CSV parse errors carry the offending line") {
  auto line_of = [](auto fn) {
    try {
      fn();
    } catch (const ParseError& e) {
      return e.line;
    }
    return -1;
  };
  SUBCASE("capacity") {
    std::stringstream bad_header("time,mbps\n0,10\n");
    CHECK(line_of([&] { parse_capacity_csv(bad_header); }) == 1);
    std::stringstream missing_field("time_s,mbps\n0,10\n1\n");
    CHECK(line_of([&] { parse_capacity_csv(missing_field); }) == 3);
    std::stringstream bad_number("time_s,mbps\n0,ten\n");
    CHECK(line_of([&] { parse_capacity_csv(bad_number); }) == 2);
    std::stringstream empty("");
    CHECK(line_of([&] { parse_capacity_csv(empty); }) == 1);
    // ordering problems surface through trace validation instead
    std::stringstream unordered("time_s,mbps\n0,10\n2,10\n1,10\n");
    CHECK_THROWS_AS(parse_capacity_csv(unordered), ValidationError);
    std::stringstream late_start("time_s,mbps\n1,10\n2,10\n");
    CHECK_THROWS_AS(parse_capacity_csv(late_start), ValidationError);
  }
  SUBCASE("viewport") {
    std::stringstream bad_header("segment,pitch,yaw\n1,0,0\n");
    CHECK(line_of([&] { parse_viewport_csv(bad_header); }) == 1);
    std::stringstream bad_pitch("segment,pitch_deg,yaw_deg\n1,95,0\n");
    CHECK(line_of([&] { parse_viewport_csv(bad_pitch); }) == 2);
    std::stringstream bad_yaw("segment,pitch_deg,yaw_deg\n1,0,0\n2,0,200\n");
    CHECK(line_of([&] { parse_viewport_csv(bad_yaw); }) == 3);
    std::stringstream gap("segment,pitch_deg,yaw_deg\n1,0,0\n3,0,0\n");
    CHECK(line_of([&] { parse_viewport_csv(gap); }) == 3);
    std::stringstream extra("segment,pitch_deg,yaw_deg\n1,0,0,9\n");
    CHECK(line_of([&] { parse_viewport_csv(extra); }) == 2);
  }
}

TEST_CASE("1 Hz resampling") {
  SUBCASE("already coarse traces pass through untouched") {
    const CapacityTrace trace = make_trace({0, 1, 2.5}, {10, 20, 30});
    const CapacityTrace out = resample_1hz(trace);
    CHECK(out.time_s == trace.time_s);
    CHECK(out.mbps == trace.mbps);
  }
  SUBCASE("sub-second sampling collapses to integer seconds") {
    const CapacityTrace trace = make_trace({0, 0.25, 0.5, 1.0, 1.6}, {10, 20, 30, 40, 50});
    const CapacityTrace out = resample_1hz(trace);  // period 2.2 -> 3 samples
    REQUIRE(out.samples() == 3);
    CHECK(out.time_s(0) == 0.0);
    CHECK(out.time_s(1) == 1.0);
    CHECK(out.time_s(2) == 2.0);
    CHECK(out.mbps(0) == 10.0);
    CHECK(out.mbps(1) == 40.0);
    CHECK(out.mbps(2) == 50.0);
  }
}

TEST_CASE("synthetic traces are deterministic in the seed") {
  SyntheticTraceSpec spec;
  const auto a = generate_synthetic(spec, 99, 20, 1.0, 180, 180, true);
  const auto b = generate_synthetic(spec, 99, 20, 1.0, 180, 180, true);
  CHECK(a.capacity.mbps == b.capacity.mbps);
  CHECK(a.user.pitch_deg == b.user.pitch_deg);
  CHECK(a.user.yaw_deg == b.user.yaw_deg);
  CHECK(a.reference.yaw_deg == b.reference.yaw_deg);
  const auto c = generate_synthetic(spec, 100, 20, 1.0, 180, 180, true);
  CHECK(a.capacity.mbps != c.capacity.mbps);

  // one minute of slack past the video end, one sample per second
  CHECK(a.capacity.samples() == 80);
  CHECK(a.capacity.time_s(79) == 79.0);
  CHECK(a.user.segments() == 20);
  CHECK(a.user.fov_vertical_deg == 180.0);
}

TEST_CASE("synthetic traces respect bounds and offsets") {
  SyntheticTraceSpec spec;
  spec.capacity_step_mbps = 20.0;
  spec.capacity_min_mbps = 8.0;
  spec.capacity_max_mbps = 33.0;
  spec.viewport_step_deg = 40.0;
  spec.reference_step_deg = 25.0;
  const auto traces = generate_synthetic(spec, 5, 120, 1.0, 90, 180, true);
  CHECK(traces.capacity.mbps.minCoeff() >= 8.0);
  CHECK(traces.capacity.mbps.maxCoeff() <= 33.0);
  CHECK(traces.user.pitch_deg.minCoeff() >= -90.0);
  CHECK(traces.user.pitch_deg.maxCoeff() <= 90.0);
  CHECK(traces.user.yaw_deg.minCoeff() >= -180.0);
  CHECK(traces.user.yaw_deg.maxCoeff() < 180.0);
  CHECK_NOTHROW(traces.user.validate());
  CHECK_NOTHROW(traces.reference.validate());

  SUBCASE("zero steps leave exactly the configured offset") {
    SyntheticTraceSpec still;
    still.viewport_step_deg = 0.0;
    still.reference_step_deg = 0.0;
    still.viewport_offset_pitch_deg = 10.0;
    still.viewport_offset_yaw_deg = -120.0;
    const auto t = generate_synthetic(still, 1, 4, 1.0, 90, 180, true);
    for (int i = 0; i < 4; ++i) {
      CHECK(t.reference.pitch_deg(i) == 0.0);
      CHECK(t.reference.yaw_deg(i) == 0.0);
      CHECK(t.user.pitch_deg(i) == 10.0);
      CHECK(t.user.yaw_deg(i) == -120.0);
    }
  }
  SUBCASE("a pure trend ramps until the cap") {
    SyntheticTraceSpec ramp;
    ramp.capacity_step_mbps = 0.0;
    ramp.capacity_trend_mbps_per_s = 1.0;
    ramp.duration_s = 40;
    const auto t = generate_synthetic(ramp, 1, 4, 1.0, 90, 180, true);
    REQUIRE(t.capacity.samples() == 40);
    CHECK(t.capacity.mbps(0) == 30.0);
    CHECK(t.capacity.mbps(10) == 40.0);
    CHECK(t.capacity.mbps(30) == 60.0);
    CHECK(t.capacity.mbps(39) == 60.0);
  }
  SUBCASE("bad bounds are rejected") {
    SyntheticTraceSpec bad;
    bad.capacity_min_mbps = 10.0;
    bad.capacity_max_mbps = 5.0;
    CHECK_THROWS_AS(generate_synthetic(bad, 1, 4, 1.0, 90, 180, true), std::invalid_argument);
  }
}

TEST_CASE("run configuration parsing") {
  std::stringstream text(
      "# demo\n"
      "mode = convex\n"
      "seed = 42\n"
      "\n"
      "grid_rows = 4\n"
      "grid_cols = 4\n"
      "segment_count = 12\n"
      "segment_length_s = 2\n"
      "initial_buffer_s = 4\n"
      "ladder_mbps = 1, 2.5, 5\n"
      "policies = obs360, constant:median\n"
      "alpha_schedule = horizon\n"
      "alpha0 = 8\n"
      "gamma = 2\n"
      "r0_level = 3\n"
      "oracle = pg-round\n"
      "reveal = at_download\n"
      "utility = log   # trailing comment\n"
      "utility_log_scale = 4\n"
      "syn_capacity_base_mbps = 25\n"
      "capacity_dmin = 3\n"
      "trace_wrap = false\n"
      "threads = 2\n");
  const RunConfig cfg = RunConfig::from_stream(text);
  CHECK(cfg.mode == "convex");
  CHECK(cfg.seed == 42);
  CHECK(cfg.seed_set);
  CHECK(cfg.grid_rows == 4);
  CHECK(cfg.grid_cols == 4);
  CHECK(cfg.segment_count == 12);
  CHECK(cfg.segment_length_s == 2.0);
  CHECK(cfg.initial_buffer_s == 4.0);
  CHECK(cfg.ladder_mbps == std::vector<double>{1, 2.5, 5});
  CHECK(cfg.policies == std::vector<std::string>{"obs360", "constant:median"});
  CHECK(cfg.alpha_schedule == "horizon");
  CHECK(cfg.alpha0 == 8.0);
  CHECK(cfg.r0_level == 3);
  CHECK(cfg.oracle == "pg-round");
  CHECK(cfg.reveal == "at_download");
  CHECK(cfg.utility == "log");
  CHECK(cfg.utility_log_scale == 4.0);
  CHECK(cfg.synth.capacity_base_mbps == 25.0);
  CHECK(cfg.capacity_dmin == 3.0);
  CHECK_FALSE(cfg.trace_wrap);
  CHECK(cfg.threads == 2);

  auto parse = [](const std::string& s) {
    std::stringstream in(s);
    return RunConfig::from_stream(in);
  };
  CHECK_THROWS_AS(parse("bogus_key = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("mode convex\n"), ConfigError);
  CHECK_THROWS_AS(parse("alpha = fast\n"), ConfigError);
  CHECK_THROWS_AS(parse("grid_rows = 2.5\n"), ConfigError);
  CHECK_THROWS_AS(parse("synthetic = maybe\n"), ConfigError);
  CHECK_THROWS_AS(parse("ladder_mbps =\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_file((kTmp / "missing.cfg").string()), ConfigError);
}

TEST_CASE("assembling session inputs from a synthetic config") {
  RunConfig cfg = base_config();
  const SessionInputs in = assemble_inputs(cfg);
  CHECK(in.grid.rows == 1);
  CHECK(in.grid.cols == 2);
  CHECK(in.user.fov_vertical_deg == 180.0);
  CHECK(in.user.fov_horizontal_deg == 180.0);
  CHECK(in.video.segment_count == 5);
  CHECK(in.video.initial_buffer_s == 2.0);
  CHECK(in.overlaps.omega.rows() == 5);
  CHECK(in.overlaps.omega.cols() == 2);
  CHECK(in.capacity.samples() == 65);
  CHECK(in.ladder.size() == 6);
  CHECK_FALSE(in.ladder.convex_mode);
  CHECK(in.reveal == RevealMode::AtPlaybackEnd);
  CHECK(in.traces_generated);

  SUBCASE("viewing rows are normalized tile shares") {
    for (int i = 0; i < 5; ++i) {
      CHECK(in.overlaps.omega.row(i).sum() <= 1.0 + 1e-12);
      CHECK(in.overlaps.omega.row(i).minCoeff() >= 0.0);
    }
  }
  SUBCASE("a 4x4 grid defaults to a quarter-sphere view") {
    cfg.grid_rows = cfg.grid_cols = 4;
    const SessionInputs wide = assemble_inputs(cfg);
    CHECK(wide.user.fov_vertical_deg == 90.0);
    CHECK(wide.user.fov_horizontal_deg == 180.0);
  }
  SUBCASE("other grids need explicit view extents") {
    cfg.grid_rows = 2;
    cfg.grid_cols = 3;
    CHECK_THROWS_AS(assemble_inputs(cfg), ConfigError);
    cfg.fov_vertical_deg = 60.0;
    cfg.fov_horizontal_deg = 100.0;
    const SessionInputs ok = assemble_inputs(cfg);
    CHECK(ok.user.fov_vertical_deg == 60.0);
    CHECK(ok.grid.rows == 2);
  }
  SUBCASE("convex mode and options map through") {
    cfg.mode = "convex";
    cfg.reveal = "at_download";
    cfg.utility = "log";
    cfg.utility_log_scale = 3.0;
    cfg.alpha_schedule = "horizon";
    cfg.alpha0 = 8.0;
    cfg.gamma = 2.0;
    cfg.oracle = "pg-round";
    cfg.r0_level = 2;
    const SessionInputs conv = assemble_inputs(cfg);
    CHECK(conv.ladder.convex_mode);
    CHECK(conv.reveal == RevealMode::AtDownloadEnd);
    CHECK(conv.params.utility == UtilityKind::Log);
    CHECK(conv.params.log_scale == 3.0);
    CHECK(conv.policy_options.horizon_schedule);
    CHECK(conv.policy_options.alpha0 == 8.0);
    CHECK(conv.policy_options.oracle == OptimizeMethod::PgRound);
    CHECK(conv.policy_options.r0_level == 2);
  }
  SUBCASE("bad enumerations are configuration errors") {
    using Mutator = void (*)(RunConfig&);
    for (Mutator poke : {
             static_cast<Mutator>([](RunConfig& c) { c.mode = "fuzzy"; }),
             static_cast<Mutator>([](RunConfig& c) { c.reveal = "never"; }),
             static_cast<Mutator>([](RunConfig& c) { c.utility = "cubic"; }),
             static_cast<Mutator>([](RunConfig& c) { c.alpha_schedule = "warp"; }),
             static_cast<Mutator>([](RunConfig& c) { c.oracle = "psychic"; }),
         }) {
      RunConfig broken = base_config();
      poke(broken);
      CHECK_THROWS_AS(assemble_inputs(broken), ConfigError);
    }
  }
  SUBCASE("synthetic runs need a seed") {
    cfg.seed_set = false;
    CHECK_THROWS_AS(assemble_inputs(cfg), ConfigError);
  }
}

TEST_CASE("assembling session inputs from trace files") {
  std::filesystem::create_directories(kTmp);
  std::string cap = "time_s,mbps\n";
  for (int s = 0; s < 10; ++s) cap += std::to_string(s) + ",20\n";
  write_file(kTmp / "cap.csv", cap);
  std::string vp = "segment,pitch_deg,yaw_deg\n";
  for (int i = 1; i <= 5; ++i) vp += std::to_string(i) + ",0,0\n";
  write_file(kTmp / "vp.csv", vp);

  RunConfig cfg = base_config();
  cfg.synthetic = false;
  cfg.capacity_csv = (kTmp / "cap.csv").string();
  cfg.user_viewport_csv = (kTmp / "vp.csv").string();
  cfg.reference_viewport_csv = (kTmp / "vp.csv").string();

  const SessionInputs in = assemble_inputs(cfg);
  CHECK_FALSE(in.traces_generated);
  CHECK(in.capacity.samples() == 10);
  CHECK(in.capacity.d_min == 20.0);
  CHECK(in.overlaps.omega.rows() == 5);
  // identical user and reference means the viewed share fills the FoV
  CHECK(in.overlaps.omega.row(0).sum() == doctest::Approx(1.0));

  SUBCASE("explicit capacity bounds override the observed ones") {
    cfg.capacity_dmin = 1.0;
    cfg.capacity_dmax = 100.0;
    const SessionInputs wide = assemble_inputs(cfg);
    CHECK(wide.capacity.d_min == 1.0);
    CHECK(wide.capacity.d_max == 100.0);
  }
  SUBCASE("viewport shorter than the video is rejected") {
    cfg.segment_count = 9;
    CHECK_THROWS_AS(assemble_inputs(cfg), ValidationError);
  }
  SUBCASE("missing file paths are configuration errors") {
    cfg.capacity_csv.clear();
    CHECK_THROWS_AS(assemble_inputs(cfg), ConfigError);
    cfg.capacity_csv = (kTmp / "nope.csv").string();
    CHECK_THROWS_AS(assemble_inputs(cfg), ConfigError);
  }
}

TEST_CASE("session CSV layout") {
  const CapacityTrace trace = make_trace({0}, {10});
  OverlapMap overlaps;
  overlaps.omega = Eigen::MatrixXd::Ones(2, 1);
  const VideoConfig video{2, 1.0, 2.0};
  const BitrateLadder ladder({5, 8});
  ConstantPolicy policy(ladder, 1, 0);
  const SessionLog log = run_session(policy, trace, overlaps, video, QoEParams{}, ladder);

  std::stringstream buf;
  write_session_csv(buf, log);
  std::string line;
  std::getline(buf, line);
  CHECK(line ==
        "i,r1,mu_mbps,buffer_s,rebuffer_s,decision_time_s,download_end_s,dbar_mbps,"
        "revealed_before_decision");
  std::getline(buf, line);
  CHECK(line == "1,5,5,2.5,0,0,0.5,10,3");
  std::getline(buf, line);
  CHECK(line == "2,5,5,3,0,0.5,1,10,3");
  CHECK_FALSE(std::getline(buf, line));
}
