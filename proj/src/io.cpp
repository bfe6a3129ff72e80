#include "obs360/io.hpp"

#include "obs360/overlap.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

namespace obs360 {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  (void)ec;
  return std::string(buf, ptr);
}

double round_sig(double x, int digits) {
  if (x == 0.0 || !std::isfinite(x)) return x;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, x);
  return std::strtod(buf, nullptr);
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double parse_number(const std::string& field, int line) {
  const std::string t = trim(field);
  if (t.empty()) throw ParseError("empty numeric field", line);
  const char* begin = t.data();
  const char* end = begin + t.size();
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end)
    throw ParseError("bad number '" + t + "'", line);
  return value;
}

std::string normalize_header(const std::string& line) {
  std::string out;
  for (char ch : line)
    if (ch != ' ' && ch != '\t' && ch != '\r') out.push_back(ch);
  return out;
}

}  // namespace

CapacityTrace parse_capacity_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("capacity CSV: empty file", 1);
  if (normalize_header(line) != "time_s,mbps")
    throw ParseError("capacity CSV: expected header 'time_s,mbps'", 1);

  std::vector<double> times, rates;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != 2) throw ParseError("capacity CSV: expected 2 fields", lineno);
    times.push_back(parse_number(fields[0], lineno));
    rates.push_back(parse_number(fields[1], lineno));
  }
  if (times.empty()) throw ParseError("capacity CSV: no samples", lineno);
  Eigen::VectorXd t = Eigen::Map<Eigen::VectorXd>(times.data(), static_cast<long>(times.size()));
  Eigen::VectorXd d = Eigen::Map<Eigen::VectorXd>(rates.data(), static_cast<long>(rates.size()));
  return CapacityTrace(std::move(t), std::move(d));
}

void write_capacity_csv(std::ostream& out, const CapacityTrace& trace) {
  out << "time_s,mbps\n";
  for (int i = 0; i < trace.samples(); ++i)
    out << format_double(trace.time_s(i)) << ',' << format_double(trace.mbps(i)) << '\n';
}

ViewportTrace parse_viewport_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("viewport CSV: empty file", 1);
  if (normalize_header(line) != "segment,pitch_deg,yaw_deg")
    throw ParseError("viewport CSV: expected header 'segment,pitch_deg,yaw_deg'", 1);

  std::vector<double> pitch, yaw;
  int lineno = 1;
  int expected = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != 3) throw ParseError("viewport CSV: expected 3 fields", lineno);
    const double seg = parse_number(fields[0], lineno);
    if (seg != expected)
      throw ParseError("viewport CSV: segments must run 1..N without gaps", lineno);
    ++expected;
    const double p = parse_number(fields[1], lineno);
    const double y = parse_number(fields[2], lineno);
    if (p < -90 || p > 90) throw ParseError("viewport CSV: pitch outside [-90, 90]", lineno);
    if (y < -180 || y > 180) throw ParseError("viewport CSV: yaw outside [-180, 180]", lineno);
    pitch.push_back(p);
    yaw.push_back(y);
  }
  if (pitch.empty()) throw ParseError("viewport CSV: no rows", lineno);
  ViewportTrace trace;
  trace.pitch_deg = Eigen::Map<Eigen::VectorXd>(pitch.data(), static_cast<long>(pitch.size()));
  trace.yaw_deg = Eigen::Map<Eigen::VectorXd>(yaw.data(), static_cast<long>(yaw.size()));
  return trace;
}

void write_viewport_csv(std::ostream& out, const ViewportTrace& trace) {
  out << "segment,pitch_deg,yaw_deg\n";
  for (int i = 0; i < trace.segments(); ++i)
    out << (i + 1) << ',' << format_double(trace.pitch_deg(i)) << ','
        << format_double(trace.yaw_deg(i)) << '\n';
}

CapacityTrace resample_1hz(const CapacityTrace& trace) {
  bool dense = false;
  for (int i = 1; i < trace.samples(); ++i)
    if (trace.time_s(i) - trace.time_s(i - 1) < 1.0 - 1e-12) dense = true;
  if (!dense) return trace;

  const double period = trace.period_s();
  const int seconds = std::max(1, static_cast<int>(std::ceil(period)));
  Eigen::VectorXd t(seconds), d(seconds);
  for (int s = 0; s < seconds; ++s) {
    t(s) = s;
    d(s) = trace.rate_at(static_cast<double>(s));
  }
  return CapacityTrace(std::move(t), std::move(d), 0.0, 0.0, trace.wrap);
}

namespace {

double uniform_pm1(std::mt19937_64& gen) {
  // top 53 bits -> [0, 1), then affine to [-1, 1); bit-stable everywhere
  const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
  return 2.0 * u - 1.0;
}

double clamp(double x, double lo, double hi) { return std::min(std::max(x, lo), hi); }

}  // namespace

SyntheticTraces generate_synthetic(const SyntheticTraceSpec& spec, std::uint64_t seed,
                                   int segments, double segment_length_s,
                                   double fov_vertical_deg, double fov_horizontal_deg,
                                   bool wrap) {
  if (segments < 1) throw std::invalid_argument("generate_synthetic: segments must be >= 1");
  if (!(spec.capacity_min_mbps > 0) || spec.capacity_max_mbps < spec.capacity_min_mbps)
    throw std::invalid_argument("generate_synthetic: bad capacity bounds");

  std::mt19937_64 gen(seed);
  const int duration = spec.duration_s > 0
                           ? spec.duration_s
                           : static_cast<int>(std::ceil(segments * segment_length_s)) + 60;

  Eigen::VectorXd t(duration), d(duration);
  double level = clamp(spec.capacity_base_mbps, spec.capacity_min_mbps, spec.capacity_max_mbps);
  for (int s = 0; s < duration; ++s) {
    t(s) = s;
    d(s) = level;
    level = clamp(level + spec.capacity_step_mbps * uniform_pm1(gen) +
                      spec.capacity_trend_mbps_per_s,
                  spec.capacity_min_mbps, spec.capacity_max_mbps);
  }

  ViewportTrace ref, user;
  ref.fov_vertical_deg = user.fov_vertical_deg = fov_vertical_deg;
  ref.fov_horizontal_deg = user.fov_horizontal_deg = fov_horizontal_deg;
  ref.pitch_deg.resize(segments);
  ref.yaw_deg.resize(segments);
  user.pitch_deg.resize(segments);
  user.yaw_deg.resize(segments);

  double ref_pitch = 0.0, ref_yaw = 0.0;
  double walk_pitch = 0.0, walk_yaw = 0.0;
  for (int i = 0; i < segments; ++i) {
    ref_pitch = clamp(ref_pitch + spec.reference_step_deg * uniform_pm1(gen), -90.0, 90.0);
    ref_yaw = wrap_yaw(ref_yaw + spec.reference_step_deg * uniform_pm1(gen));
    walk_pitch += spec.viewport_step_deg * uniform_pm1(gen);
    walk_yaw += spec.viewport_step_deg * uniform_pm1(gen);
    ref.pitch_deg(i) = ref_pitch;
    ref.yaw_deg(i) = ref_yaw;
    user.pitch_deg(i) =
        clamp(ref_pitch + spec.viewport_offset_pitch_deg + walk_pitch, -90.0, 90.0);
    user.yaw_deg(i) = wrap_yaw(ref_yaw + spec.viewport_offset_yaw_deg + walk_yaw);
  }

  SyntheticTraces traces;
  traces.capacity = CapacityTrace(std::move(t), std::move(d), 0.0, 0.0, wrap);
  traces.user = std::move(user);
  traces.reference = std::move(ref);
  return traces;
}

namespace {

bool parse_bool(const std::string& value, const std::string& key) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("config: key '" + key + "' expects a boolean, got '" + value + "'");
}

double parse_config_number(const std::string& value, const std::string& key) {
  try {
    size_t pos = 0;
    const double x = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects a number, got '" + value + "'");
  }
}

int parse_config_int(const std::string& value, const std::string& key) {
  const double x = parse_config_number(value, key);
  if (x != std::floor(x)) throw ConfigError("config: key '" + key + "' expects an integer");
  return static_cast<int>(x);
}

std::vector<double> parse_number_list(const std::string& value, const std::string& key) {
  std::vector<double> out;
  for (const std::string& field : split(value, ',')) {
    const std::string t = trim(field);
    if (t.empty()) continue;
    out.push_back(parse_config_number(t, key));
  }
  if (out.empty()) throw ConfigError("config: key '" + key + "' expects a list of numbers");
  return out;
}

std::vector<std::string> parse_string_list(const std::string& value) {
  std::vector<std::string> out;
  for (const std::string& field : split(value, ','))
    if (!trim(field).empty()) out.push_back(trim(field));
  return out;
}

}  // namespace

RunConfig RunConfig::from_stream(std::istream& in) {
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    if (key == "mode") cfg.mode = value;
    else if (key == "out") cfg.out = value;
    else if (key == "seed") { cfg.seed = static_cast<std::uint64_t>(parse_config_number(value, key)); cfg.seed_set = true; }
    else if (key == "synthetic") cfg.synthetic = parse_bool(value, key);
    else if (key == "capacity_csv") cfg.capacity_csv = value;
    else if (key == "user_viewport_csv") cfg.user_viewport_csv = value;
    else if (key == "reference_viewport_csv") cfg.reference_viewport_csv = value;
    else if (key == "capacity_dmin") cfg.capacity_dmin = parse_config_number(value, key);
    else if (key == "capacity_dmax") cfg.capacity_dmax = parse_config_number(value, key);
    else if (key == "trace_wrap") cfg.trace_wrap = parse_bool(value, key);
    else if (key == "reveal") cfg.reveal = value;
    else if (key == "syn_capacity_base_mbps") cfg.synth.capacity_base_mbps = parse_config_number(value, key);
    else if (key == "syn_capacity_step_mbps") cfg.synth.capacity_step_mbps = parse_config_number(value, key);
    else if (key == "syn_capacity_trend_mbps_per_s") cfg.synth.capacity_trend_mbps_per_s = parse_config_number(value, key);
    else if (key == "syn_capacity_min_mbps") cfg.synth.capacity_min_mbps = parse_config_number(value, key);
    else if (key == "syn_capacity_max_mbps") cfg.synth.capacity_max_mbps = parse_config_number(value, key);
    else if (key == "syn_duration_s") cfg.synth.duration_s = parse_config_int(value, key);
    else if (key == "syn_viewport_offset_pitch_deg") cfg.synth.viewport_offset_pitch_deg = parse_config_number(value, key);
    else if (key == "syn_viewport_offset_yaw_deg") cfg.synth.viewport_offset_yaw_deg = parse_config_number(value, key);
    else if (key == "syn_viewport_step_deg") cfg.synth.viewport_step_deg = parse_config_number(value, key);
    else if (key == "syn_reference_step_deg") cfg.synth.reference_step_deg = parse_config_number(value, key);
    else if (key == "grid_rows") cfg.grid_rows = parse_config_int(value, key);
    else if (key == "grid_cols") cfg.grid_cols = parse_config_int(value, key);
    else if (key == "segment_count") cfg.segment_count = parse_config_int(value, key);
    else if (key == "segment_length_s") cfg.segment_length_s = parse_config_number(value, key);
    else if (key == "initial_buffer_s") cfg.initial_buffer_s = parse_config_number(value, key);
    else if (key == "fov_vertical_deg") cfg.fov_vertical_deg = parse_config_number(value, key);
    else if (key == "fov_horizontal_deg") cfg.fov_horizontal_deg = parse_config_number(value, key);
    else if (key == "ladder_mbps") cfg.ladder_mbps = parse_number_list(value, key);
    else if (key == "rebuffer_unit_loss") cfg.rebuffer_unit_loss = parse_config_number(value, key);
    else if (key == "inter_degradation_unit_loss") cfg.inter_degradation_unit_loss = parse_config_number(value, key);
    else if (key == "intra_degradation_unit_loss") cfg.intra_degradation_unit_loss = parse_config_number(value, key);
    else if (key == "utility") cfg.utility = value;
    else if (key == "utility_log_scale") cfg.utility_log_scale = parse_config_number(value, key);
    else if (key == "policy") cfg.policy = value;
    else if (key == "policies") cfg.policies = parse_string_list(value);
    else if (key == "alpha") cfg.alpha = parse_config_number(value, key);
    else if (key == "alpha_schedule") cfg.alpha_schedule = value;
    else if (key == "alpha0") cfg.alpha0 = parse_config_number(value, key);
    else if (key == "gamma") cfg.gamma = parse_config_number(value, key);
    else if (key == "r0_level") cfg.r0_level = parse_config_int(value, key);
    else if (key == "oracle") cfg.oracle = value;
    else if (key == "threads") cfg.threads = parse_config_int(value, key);
    else throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  return from_stream(in);
}

namespace {

OptimizeMethod parse_oracle(const std::string& name) {
  if (name == "auto") return OptimizeMethod::Auto;
  if (name == "exhaustive") return OptimizeMethod::Exhaustive;
  if (name == "pg-round") return OptimizeMethod::PgRound;
  if (name == "hull") return OptimizeMethod::Hull;
  throw ConfigError("config: unknown oracle '" + name + "'");
}

std::pair<double, double> fov_for_grid(const RunConfig& cfg) {
  if (cfg.fov_vertical_deg > 0 && cfg.fov_horizontal_deg > 0)
    return {cfg.fov_vertical_deg, cfg.fov_horizontal_deg};
  if (cfg.fov_vertical_deg == 0 && cfg.fov_horizontal_deg == 0) {
    if (cfg.grid_rows == 1 && cfg.grid_cols == 2) return {180.0, 180.0};  // half view
    if (cfg.grid_rows == 4 && cfg.grid_cols == 4) return {90.0, 180.0};   // quarter view
    throw ConfigError("config: fov_vertical_deg/fov_horizontal_deg must be set for a " +
                      std::to_string(cfg.grid_rows) + "x" + std::to_string(cfg.grid_cols) +
                      " grid");
  }
  throw ConfigError("config: set both fov_vertical_deg and fov_horizontal_deg or neither");
}

ViewportTrace load_viewport(const std::string& path, double fov_v, double fov_h) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open viewport CSV '" + path + "'");
  ViewportTrace trace = parse_viewport_csv(in);
  trace.fov_vertical_deg = fov_v;
  trace.fov_horizontal_deg = fov_h;
  trace.validate();
  return trace;
}

}  // namespace

SessionInputs assemble_inputs(const RunConfig& cfg) {
  SessionInputs in;
  if (cfg.mode != "discrete" && cfg.mode != "convex")
    throw ConfigError("config: mode must be 'discrete' or 'convex'");
  in.ladder = BitrateLadder(cfg.ladder_mbps, cfg.mode == "convex");
  in.grid = TileGrid(cfg.grid_rows, cfg.grid_cols);

  in.video.segment_count = cfg.segment_count;
  in.video.segment_length_s = cfg.segment_length_s;
  in.video.initial_buffer_s = cfg.initial_buffer_s;
  in.video.validate();

  in.params.rebuffer_unit_loss = cfg.rebuffer_unit_loss;
  in.params.inter_degradation_unit_loss = cfg.inter_degradation_unit_loss;
  in.params.intra_degradation_unit_loss = cfg.intra_degradation_unit_loss;
  if (cfg.utility == "linear") in.params.utility = UtilityKind::Linear;
  else if (cfg.utility == "log") in.params.utility = UtilityKind::Log;
  else throw ConfigError("config: utility must be 'linear' or 'log'");
  in.params.log_scale = cfg.utility_log_scale;
  in.params.validate();

  if (cfg.reveal == "at_view") in.reveal = RevealMode::AtPlaybackEnd;
  else if (cfg.reveal == "at_download") in.reveal = RevealMode::AtDownloadEnd;
  else throw ConfigError("config: reveal must be 'at_view' or 'at_download'");

  const auto [fov_v, fov_h] = fov_for_grid(cfg);

  if (cfg.synthetic) {
    if (!cfg.seed_set) throw ConfigError("config: synthetic traces need an explicit seed");
    SyntheticTraces traces = generate_synthetic(cfg.synth, cfg.seed, cfg.segment_count,
                                                cfg.segment_length_s, fov_v, fov_h,
                                                cfg.trace_wrap);
    in.capacity = std::move(traces.capacity);
    in.user = std::move(traces.user);
    in.reference = std::move(traces.reference);
    in.traces_generated = true;
  } else {
    if (cfg.capacity_csv.empty() || cfg.user_viewport_csv.empty() ||
        cfg.reference_viewport_csv.empty())
      throw ConfigError("config: synthetic = false needs capacity_csv, user_viewport_csv "
                        "and reference_viewport_csv");
    std::ifstream capf(cfg.capacity_csv);
    if (!capf) throw ConfigError("config: cannot open capacity CSV '" + cfg.capacity_csv + "'");
    CapacityTrace cap = parse_capacity_csv(capf);
    cap.wrap = cfg.trace_wrap;
    if (cfg.capacity_dmin > 0 || cfg.capacity_dmax > 0) {
      cap = CapacityTrace(cap.time_s, cap.mbps, cfg.capacity_dmin, cfg.capacity_dmax,
                          cfg.trace_wrap);
    }
    in.capacity = resample_1hz(cap);
    in.user = load_viewport(cfg.user_viewport_csv, fov_v, fov_h);
    in.reference = load_viewport(cfg.reference_viewport_csv, fov_v, fov_h);
  }

  if (in.user.segments() < cfg.segment_count || in.reference.segments() < cfg.segment_count)
    throw ValidationError("viewport traces shorter than segment_count");
  in.overlaps = overlap_fractions(in.user, in.reference, in.grid);

  in.policy_options.alpha = cfg.alpha;
  if (cfg.alpha_schedule == "horizon") in.policy_options.horizon_schedule = true;
  else if (cfg.alpha_schedule != "fixed")
    throw ConfigError("config: alpha_schedule must be 'fixed' or 'horizon'");
  in.policy_options.alpha0 = cfg.alpha0;
  in.policy_options.gamma = cfg.gamma;
  in.policy_options.r0_level = cfg.r0_level;
  in.policy_options.oracle = parse_oracle(cfg.oracle);
  return in;
}

void write_session_csv(std::ostream& out, const SessionLog& log) {
  const int K = log.tiles;
  out << "i";
  for (int k = 1; k <= K; ++k) out << ",r" << k;
  out << ",mu_mbps,buffer_s,rebuffer_s,decision_time_s,download_end_s,dbar_mbps,"
         "revealed_before_decision\n";
  for (int i = 0; i < log.segments(); ++i) {
    out << (i + 1);
    for (int k = 0; k < K; ++k) out << ',' << format_double(log.decisions[i](k));
    out << ',' << format_double(log.viewing_bitrate_mbps(i))
        << ',' << format_double(log.buffer_s(i))
        << ',' << format_double(log.rebuffer_s(i))
        << ',' << format_double(log.decision_time_s(i))
        << ',' << format_double(log.downloads[i].finish_s(K - 1))
        << ',' << format_double(log.downloads[i].mean_capacity_mbps)
        << ',' << log.revealed_before[i] << '\n';
  }
}

namespace {

ordered_json qoe_block(const SessionLog& log, const QoEParams& params) {
  const SessionView view = log.view();
  const int I = log.segments();
  double utility_total = 0.0, intra_total = 0.0;
  for (int i = 0; i < I; ++i) {
    utility_total += utility(log.viewing_bitrate_mbps(i), params);
    intra_total += intra_degradation_loss(log.omega.row(i), log.decisions[i], params);
  }
  const double rebuf_loss =
      rebuffer_loss(view.download_duration_s, view.buffer_before_s, params);
  const double inter_total = inter_degradation_loss(log.viewing_bitrate_mbps, params);

  ordered_json j;
  j["total"] = round_sig(total_qoe(view, params));
  j["utility"] = round_sig(utility_total);
  j["rebuffer_loss"] = round_sig(rebuf_loss);
  j["inter_degradation_loss"] = round_sig(inter_total);
  j["intra_degradation_loss"] = round_sig(intra_total);
  j["mean_viewing_bitrate_mbps"] = round_sig(log.viewing_bitrate_mbps.mean());
  j["total_rebuffer_s"] = round_sig(log.rebuffer_s.sum());
  j["mean_rebuffer_per_segment_s"] = round_sig(log.rebuffer_s.mean());
  return j;
}

struct CliContext {
  RunConfig config;
  SessionInputs inputs;
};

SessionLog run_one_policy(const std::string& policy_name, const SessionInputs& in) {
  auto policy = make_policy(policy_name, in.ladder, in.params, in.grid.tiles(),
                            in.video.segment_count, in.policy_options);
  return run_session(*policy, in.capacity, in.overlaps, in.video, in.params, in.ladder,
                     in.reveal);
}

void write_text_file(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << contents;
}

void dump_traces(const fs::path& dir, const SessionInputs& in) {
  std::ostringstream cap, user, ref;
  write_capacity_csv(cap, in.capacity);
  write_viewport_csv(user, in.user);
  write_viewport_csv(ref, in.reference);
  write_text_file(dir / "capacity.csv", cap.str());
  write_text_file(dir / "user_viewport.csv", user.str());
  write_text_file(dir / "reference_viewport.csv", ref.str());
}

ordered_json config_block(const RunConfig& cfg, const SessionInputs& in,
                          const std::string& command) {
  ordered_json j;
  j["command"] = command;
  j["mode"] = cfg.mode;
  j["seed"] = cfg.seed;
  j["segments"] = cfg.segment_count;
  j["tiles"] = in.grid.tiles();
  j["grid"] = std::to_string(cfg.grid_rows) + "x" + std::to_string(cfg.grid_cols);
  ordered_json ladder = ordered_json::array();
  for (int l = 0; l < in.ladder.size(); ++l) ladder.push_back(round_sig(in.ladder.level(l)));
  j["ladder_mbps"] = ladder;
  j["reveal"] = cfg.reveal;
  return j;
}

int command_simulate(const CliContext& ctx) {
  const fs::path dir(ctx.config.out);
  fs::create_directories(dir);
  SessionLog log = run_one_policy(ctx.config.policy, ctx.inputs);

  std::ostringstream csv;
  write_session_csv(csv, log);
  write_text_file(dir / "session.csv", csv.str());
  if (ctx.inputs.traces_generated) dump_traces(dir, ctx.inputs);

  ordered_json summary = config_block(ctx.config, ctx.inputs, "simulate");
  summary["policy"] = ctx.config.policy;
  summary["qoe"] = qoe_block(log, ctx.inputs.params);
  write_text_file(dir / "summary.json", summary.dump(2) + "\n");
  return 0;
}

int command_regret(const CliContext& ctx) {
  const fs::path dir(ctx.config.out);
  fs::create_directories(dir);
  const SessionInputs& in = ctx.inputs;
  SessionLog log = run_one_policy(ctx.config.policy, in);

  const RegretReport report = dynamic_regret(log, in.params, in.ladder,
                                             in.policy_options.oracle);
  const ConditionStats stats = condition_stats(log, report, in.params);
  const double alpha = in.policy_options.effective_alpha(in.video.segment_count);
  const double max_sum_omega = log.omega.rowwise().sum().maxCoeff();
  const BoundConstants consts =
      BoundConstants::compute(in.params, in.ladder, in.grid.tiles(), in.capacity.d_min,
                              in.video.segment_length_s, max_sum_omega, alpha);
  const double bound = regret_bound(stats, consts, log.segments());

  std::ostringstream csv;
  write_session_csv(csv, log);
  write_text_file(dir / "session.csv", csv.str());
  if (in.traces_generated) dump_traces(dir, in);

  ordered_json summary = config_block(ctx.config, in, "regret");
  summary["policy"] = ctx.config.policy;
  summary["qoe"] = qoe_block(log, in.params);
  ordered_json reg;
  reg["total"] = round_sig(report.total);
  reg["per_segment"] = round_sig(report.per_segment);
  reg["v_empty"] = stats.v_empty;
  reg["v_r"] = round_sig(stats.v_r);
  reg["has_tail"] = stats.has_tail;
  reg["alpha"] = round_sig(alpha);
  reg["q_bar"] = round_sig(consts.q_bar);
  reg["radius"] = round_sig(consts.radius);
  reg["bound"] = round_sig(bound);
  reg["bound_holds"] = report.total <= bound;
  summary["regret"] = reg;
  write_text_file(dir / "summary.json", summary.dump(2) + "\n");
  return 0;
}

int command_compare(const CliContext& ctx) {
  const fs::path dir(ctx.config.out);
  fs::create_directories(dir);
  const SessionInputs& in = ctx.inputs;

  std::vector<std::string> names = ctx.config.policies;
  if (names.empty()) names.push_back(ctx.config.policy);

  const int hw = static_cast<int>(std::thread::hardware_concurrency());
  const int requested = ctx.config.threads > 0 ? ctx.config.threads : std::max(hw, 1);
  const int workers = std::max(1, std::min<int>(requested, static_cast<int>(names.size())));

  std::vector<SessionLog> logs(names.size());
  std::atomic<size_t> cursor{0};
  std::vector<std::future<void>> tasks;
  for (int w = 0; w < workers; ++w) {
    tasks.push_back(std::async(std::launch::async, [&]() {
      while (true) {
        const size_t idx = cursor.fetch_add(1);
        if (idx >= names.size()) break;
        logs[idx] = run_one_policy(names[idx], in);
      }
    }));
  }
  for (auto& task : tasks) task.get();

  ordered_json summary = config_block(ctx.config, in, "compare");
  ordered_json block;
  for (size_t p = 0; p < names.size(); ++p) block[names[p]] = qoe_block(logs[p], in.params);
  summary["policies"] = block;
  if (in.traces_generated) dump_traces(dir, in);
  write_text_file(dir / "summary.json", summary.dump(2) + "\n");
  return 0;
}

// Plays back a fixed decision sequence; used to re-run the offline optimum
// through the simulator.
class ScriptedPolicy : public Policy {
 public:
  explicit ScriptedPolicy(std::vector<Eigen::VectorXd> script) : script_(std::move(script)) {}
  Eigen::VectorXd decide(int segment, const std::vector<Revelation>&) override {
    return script_.at(segment - 1);
  }
  std::string name() const override { return "scripted"; }

 private:
  std::vector<Eigen::VectorXd> script_;
};

int command_offline_opt(const CliContext& ctx) {
  const fs::path dir(ctx.config.out);
  fs::create_directories(dir);
  const SessionInputs& in = ctx.inputs;

  const OfflineResult best =
      offline_optimal(in.capacity, in.overlaps, in.video, in.params, in.ladder);
  ScriptedPolicy replay(best.decisions);
  SessionLog log = run_session(replay, in.capacity, in.overlaps, in.video, in.params,
                               in.ladder, in.reveal);

  std::ostringstream csv;
  write_session_csv(csv, log);
  write_text_file(dir / "session.csv", csv.str());
  if (in.traces_generated) dump_traces(dir, in);

  ordered_json summary = config_block(ctx.config, in, "offline-opt");
  summary["qoe"] = qoe_block(log, in.params);
  ordered_json off;
  off["qoe"] = round_sig(best.qoe);
  ordered_json decisions = ordered_json::array();
  for (const Eigen::VectorXd& r : best.decisions) {
    ordered_json row = ordered_json::array();
    for (int k = 0; k < r.size(); ++k) row.push_back(round_sig(r(k)));
    decisions.push_back(row);
  }
  off["decisions"] = decisions;
  summary["offline"] = off;
  write_text_file(dir / "summary.json", summary.dump(2) + "\n");
  return 0;
}

int command_validate(const std::string& capacity, const std::string& user,
                     const std::string& reference) {
  if (capacity.empty() && user.empty() && reference.empty())
    throw ConfigError("validate: pass --capacity and/or --user/--reference files");
  int viewport_rows = -1;
  if (!capacity.empty()) {
    std::ifstream in(capacity);
    if (!in) throw ConfigError("validate: cannot open '" + capacity + "'");
    parse_capacity_csv(in).validate();
    std::cout << "capacity CSV ok: " << capacity << "\n";
  }
  for (const auto& [label, path] : {std::pair<std::string, std::string>{"user", user},
                                    {"reference", reference}}) {
    if (path.empty()) continue;
    std::ifstream in(path);
    if (!in) throw ConfigError("validate: cannot open '" + path + "'");
    const ViewportTrace trace = parse_viewport_csv(in);
    if (viewport_rows >= 0 && trace.segments() != viewport_rows)
      throw ValidationError("validate: viewport traces have different lengths");
    viewport_rows = trace.segments();
    std::cout << label << " viewport CSV ok: " << path << " (" << trace.segments()
              << " segments)\n";
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"trace-driven simulator for tiled 360-degree adaptive streaming"};
  app.require_subcommand(1);

  std::string config_path, out_override, mode_override, policy_override;
  std::uint64_t seed_override = 0;
  bool seed_given = false;
  int threads_override = -1;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("CONFIG", config_path, "run configuration file")->required(false);
    cmd->add_option("--config", config_path, "run configuration file");
    cmd->add_option("--seed", seed_override, "override the config seed")
        ->each([&](const std::string&) { seed_given = true; });
    cmd->add_option("--out", out_override, "override the output directory");
    cmd->add_option("--mode", mode_override, "discrete | convex");
    cmd->add_option("--policy", policy_override, "override the policy");
    cmd->add_option("--threads", threads_override, "worker threads for compare");
  };

  CLI::App* simulate = app.add_subcommand("simulate", "run one session and write logs");
  CLI::App* regret = app.add_subcommand("regret", "run one session and report dynamic regret");
  CLI::App* compare = app.add_subcommand("compare", "run several policies on the same traces");
  CLI::App* offline = app.add_subcommand("offline-opt", "exhaustive offline optimum");
  add_common(simulate);
  add_common(regret);
  add_common(compare);
  add_common(offline);

  std::string v_capacity, v_user, v_reference;
  CLI::App* validate = app.add_subcommand("validate", "check trace files");
  validate->add_option("--capacity", v_capacity, "capacity CSV");
  validate->add_option("--user", v_user, "user viewport CSV");
  validate->add_option("--reference", v_reference, "reference viewport CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (validate->parsed()) return command_validate(v_capacity, v_user, v_reference);

    if (config_path.empty()) throw ConfigError("missing config file (positional or --config)");
    CliContext ctx;
    ctx.config = RunConfig::from_file(config_path);
    if (seed_given) {
      ctx.config.seed = seed_override;
      ctx.config.seed_set = true;
    }
    if (!out_override.empty()) ctx.config.out = out_override;
    if (!mode_override.empty()) ctx.config.mode = mode_override;
    if (!policy_override.empty()) ctx.config.policy = policy_override;
    if (threads_override >= 0) ctx.config.threads = threads_override;
    ctx.inputs = assemble_inputs(ctx.config);

    if (simulate->parsed()) return command_simulate(ctx);
    if (regret->parsed()) return command_regret(ctx);
    if (compare->parsed()) return command_compare(ctx);
    if (offline->parsed()) return command_offline_opt(ctx);
    throw ConfigError("no subcommand");
  } catch (const InstanceTooLarge& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const ParseError& e) {
    std::cerr << "error (line " << e.line << "): " << e.what() << "\n";
    return 3;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const HorizonExceeded& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace obs360
