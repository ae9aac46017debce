#include "flivver/run_config.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "flivver/replay_io.hpp"

namespace flivver {

namespace {

double parse_double(const std::string& key, const std::string& s) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
    throw std::invalid_argument("config: " + key + " expects a number, got '" + s + "'");
  }
  return v;
}

long parse_int(const std::string& key, const std::string& s) {
  errno = 0;
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
    throw std::invalid_argument("config: " + key + " expects an integer, got '" + s + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw std::invalid_argument("config: " + key + " expects a boolean, got '" + s + "'");
}

std::string segments_to_string(const std::vector<TrajectorySegment>& segs) {
  std::string out;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    if (i) out += ';';
    out += format_double(segs[i].duration_s) + ":" + format_double(segs[i].value);
  }
  return out;
}

std::vector<TrajectorySegment> parse_segments(const std::string& key, const std::string& s) {
  std::vector<TrajectorySegment> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (item.empty()) continue;
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      throw std::invalid_argument("config: " + key + " expects duration:value pairs separated by ';'");
    }
    out.push_back({parse_double(key, item.substr(0, colon)), parse_double(key, item.substr(colon + 1))});
  }
  return out;
}

struct Entry {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <class Ptr>
Entry real(const char* key, Ptr ptr) {
  return {key, [ptr](const RunConfig& c) { return format_double(ptr(const_cast<RunConfig&>(c))); },
          [ptr, key](RunConfig& c, const std::string& v) { ptr(c) = parse_double(key, v); }};
}

template <class Ptr>
Entry integer(const char* key, Ptr ptr) {
  return {key, [ptr](const RunConfig& c) { return std::to_string(ptr(const_cast<RunConfig&>(c))); },
          [ptr, key](RunConfig& c, const std::string& v) {
            ptr(c) = static_cast<std::remove_reference_t<decltype(ptr(c))>>(parse_int(key, v));
          }};
}

template <class Ptr>
Entry boolean(const char* key, Ptr ptr) {
  return {key, [ptr](const RunConfig& c) { return std::string(ptr(const_cast<RunConfig&>(c)) ? "true" : "false"); },
          [ptr, key](RunConfig& c, const std::string& v) { ptr(c) = parse_bool(key, v); }};
}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = [] {
    std::vector<Entry> t;
    t.push_back(integer("camera.width_px", [](RunConfig& c) -> int& { return c.intrinsics.width_px; }));
    t.push_back(integer("camera.height_px", [](RunConfig& c) -> int& { return c.intrinsics.height_px; }));
    t.push_back(real("camera.hfov_rad", [](RunConfig& c) -> double& { return c.intrinsics.hfov_rad; }));
    t.push_back(real("camera.vfov_rad", [](RunConfig& c) -> double& { return c.intrinsics.vfov_rad; }));
    t.push_back(real("fps", [](RunConfig& c) -> double& { return c.fps; }));

    t.push_back(real("sim.duration_s", [](RunConfig& c) -> double& { return c.sim.duration_s; }));
    t.push_back(real("sim.v0_mps", [](RunConfig& c) -> double& { return c.sim.v0_mps; }));
    t.push_back({"sim.trajectory", [](const RunConfig& c) { return c.sim.trajectory; },
                 [](RunConfig& c, const std::string& v) {
                   if (v != "standard" && v != "segments") {
                     throw std::invalid_argument("config: sim.trajectory must be 'standard' or 'segments'");
                   }
                   c.sim.trajectory = v;
                 }});
    t.push_back({"sim.accel_segments", [](const RunConfig& c) { return segments_to_string(c.sim.accel_segments); },
                 [](RunConfig& c, const std::string& v) { c.sim.accel_segments = parse_segments("sim.accel_segments", v); }});
    t.push_back({"sim.yaw_segments", [](const RunConfig& c) { return segments_to_string(c.sim.yaw_segments); },
                 [](RunConfig& c, const std::string& v) { c.sim.yaw_segments = parse_segments("sim.yaw_segments", v); }});
    t.push_back(real("sim.depth_tile_deg", [](RunConfig& c) -> double& { return c.sim.depth_tile_deg; }));
    t.push_back(real("sim.depth_min_m", [](RunConfig& c) -> double& { return c.sim.depth_min_m; }));
    t.push_back(real("sim.depth_max_m", [](RunConfig& c) -> double& { return c.sim.depth_max_m; }));
    t.push_back(integer("sim.truth_depth_stride", [](RunConfig& c) -> int& { return c.sim.truth_depth_stride; }));

    t.push_back(real("noise.flow_sigma", [](RunConfig& c) -> double& { return c.noise.flow_noise_sigma; }));
    t.push_back(real("noise.flow_jitter_rad", [](RunConfig& c) -> double& { return c.noise.flow_direction_jitter; }));
    t.push_back(real("noise.accel_sigma", [](RunConfig& c) -> double& { return c.noise.accel_noise_sigma; }));
    t.push_back(real("noise.accel_bias", [](RunConfig& c) -> double& { return c.noise.accel_bias; }));
    t.push_back(real("noise.gyro_sigma", [](RunConfig& c) -> double& { return c.noise.gyro_noise_sigma; }));
    t.push_back({"seed", [](const RunConfig& c) { return std::to_string(c.noise.rng_seed); },
                 [](RunConfig& c, const std::string& v) {
                   const long s = parse_int("seed", v);
                   if (s < 0) throw std::invalid_argument("config: seed must be >= 0");
                   c.noise.rng_seed = static_cast<std::uint64_t>(s);
                 }});

    t.push_back(integer("stagger.flow_frames", [](RunConfig& c) -> int& { return c.pipeline.stagger.flow_stagger_frames; }));
    t.push_back(integer("bank.n_fields", [](RunConfig& c) -> int& { return c.pipeline.bank.n_fields; }));
    t.push_back(real("bank.field_deg", [](RunConfig& c) -> double& { return c.pipeline.bank.field_deg; }));
    t.push_back(real("frontend.center_mask_deg", [](RunConfig& c) -> double& { return c.pipeline.bank.center_mask_deg; }));

    t.push_back(integer("derivative.frames",
                        [](RunConfig& c) -> int& { return c.pipeline.estimator.derivative.derivative_stagger_frames; }));
    t.push_back(boolean("prefilter.enabled",
                        [](RunConfig& c) -> bool& { return c.pipeline.estimator.derivative.prefilter_enabled; }));
    t.push_back(integer("prefilter.order",
                        [](RunConfig& c) -> int& { return c.pipeline.estimator.derivative.prefilter.order; }));
    t.push_back(real("prefilter.cutoff", [](RunConfig& c) -> double& {
      return c.pipeline.estimator.derivative.prefilter.cutoff_fraction_of_nyquist;
    }));
    t.push_back(boolean("output_filter.enabled",
                        [](RunConfig& c) -> bool& { return c.pipeline.estimator.output_filter_enabled; }));
    t.push_back(integer("output_filter.order", [](RunConfig& c) -> int& { return c.pipeline.estimator.output_filter.order; }));
    t.push_back(real("output_filter.cutoff", [](RunConfig& c) -> double& {
      return c.pipeline.estimator.output_filter.cutoff_fraction_of_nyquist;
    }));
    t.push_back(real("estimator.eps_denom", [](RunConfig& c) -> double& { return c.pipeline.estimator.guard.eps_denom; }));
    t.push_back(real("estimator.accel_spread_gate",
                     [](RunConfig& c) -> double& { return c.pipeline.estimator.guard.accel_spread_gate; }));
    t.push_back({"estimator.second_moment",
                 [](const RunConfig& c) {
                   return std::string(c.pipeline.estimator.second_moment == SecondMoment::pooled ? "pooled"
                                                                                               : "squared_mean");
                 },
                 [](RunConfig& c, const std::string& v) {
                   if (v == "pooled") c.pipeline.estimator.second_moment = SecondMoment::pooled;
                   else if (v == "squared_mean") c.pipeline.estimator.second_moment = SecondMoment::squared_mean;
                   else throw std::invalid_argument("config: estimator.second_moment must be pooled or squared_mean");
                 }});
    t.push_back({"estimator.hold",
                 [](const RunConfig& c) {
                   switch (c.pipeline.estimator.hold) {
                     case HoldPolicy::freeze: return std::string("freeze");
                     case HoldPolicy::feed_last_median: return std::string("feed_last_median");
                     case HoldPolicy::propagate: return std::string("propagate");
                   }
                   return std::string("freeze");
                 },
                 [](RunConfig& c, const std::string& v) {
                   if (v == "freeze") c.pipeline.estimator.hold = HoldPolicy::freeze;
                   else if (v == "feed_last_median") c.pipeline.estimator.hold = HoldPolicy::feed_last_median;
                   else if (v == "propagate") c.pipeline.estimator.hold = HoldPolicy::propagate;
                   else throw std::invalid_argument("config: estimator.hold must be freeze, feed_last_median or propagate");
                 }});

    t.push_back(boolean("depth.enabled", [](RunConfig& c) -> bool& { return c.pipeline.depth.enabled; }));
    t.push_back(integer("depth.stride", [](RunConfig& c) -> int& { return c.pipeline.depth.stride_frames; }));
    t.push_back(boolean("depth.tv_enabled", [](RunConfig& c) -> bool& { return c.pipeline.depth.tv_enabled; }));
    t.push_back(real("depth.v_min", [](RunConfig& c) -> double& { return c.pipeline.depth.direct.v_min; }));
    t.push_back(real("depth.r_min", [](RunConfig& c) -> double& { return c.pipeline.depth.direct.r_min; }));
    t.push_back(real("tv.gamma", [](RunConfig& c) -> double& { return c.pipeline.depth.tv.gamma; }));
    t.push_back(real("tv.beta_hat", [](RunConfig& c) -> double& { return c.pipeline.depth.tv.beta_hat; }));
    t.push_back(integer("tv.max_iterations", [](RunConfig& c) -> int& { return c.pipeline.depth.tv.max_iterations; }));
    t.push_back(real("tv.tol", [](RunConfig& c) -> double& { return c.pipeline.depth.tv.convergence_tol; }));

    t.push_back(real("eval.convergence_fraction",
                     [](RunConfig& c) -> double& { return c.eval.eval.convergence_fraction; }));
    t.push_back(real("eval.convergence_hold_s", [](RunConfig& c) -> double& { return c.eval.eval.convergence_hold_s; }));
    t.push_back(real("eval.drift_extra_bias_mps2", [](RunConfig& c) -> double& { return c.eval.drift_extra_bias_mps2; }));
    t.push_back(real("eval.kalman_q", [](RunConfig& c) -> double& { return c.eval.kalman.process_noise; }));
    t.push_back(real("eval.kalman_r", [](RunConfig& c) -> double& { return c.eval.kalman.measurement_noise; }));
    t.push_back(real("eval.kalman_p0", [](RunConfig& c) -> double& { return c.eval.kalman.initial_variance; }));
    t.push_back(real("eval.max_rmse_mps", [](RunConfig& c) -> double& { return c.eval.max_rmse_mps; }));
    t.push_back({"output_dir", [](const RunConfig& c) { return c.output_dir; },
                 [](RunConfig& c, const std::string& v) { c.output_dir = v; }});
    return t;
  }();
  return table;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void RunConfig::sync() {
  pipeline.intrinsics = intrinsics;
  pipeline.stagger.fps = fps;
  pipeline.estimator.fps = fps;
}

void RunConfig::validate() const {
  intrinsics.validate();
  noise.validate();
  pipeline.validate();
  if (pipeline.intrinsics != intrinsics || pipeline.stagger.fps != fps || pipeline.estimator.fps != fps) {
    throw std::invalid_argument("run config: sub-configs out of sync with intrinsics/fps");
  }
  if (!(sim.duration_s > 0.0)) throw std::invalid_argument("run config: sim.duration_s must be positive");
  if (sim.truth_depth_stride < 1) throw std::invalid_argument("run config: sim.truth_depth_stride must be >= 1");
  if (!(sim.depth_tile_deg > 0.0) || !(sim.depth_min_m > 0.0) || !(sim.depth_max_m >= sim.depth_min_m)) {
    throw std::invalid_argument("run config: invalid depth tiling");
  }
  eval.kalman.validate();
  if (!(eval.max_rmse_mps >= 0.0)) throw std::invalid_argument("run config: eval.max_rmse_mps must be >= 0");
}

RunConfig default_run_config() {
  RunConfig c;
  c.sync();
  return c;
}

std::vector<std::pair<std::string, std::string>> to_key_values(const RunConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : entries()) out.emplace_back(e.key, e.get(cfg));
  return out;
}

void set_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& e : entries()) {
    if (e.key == key) {
      e.set(cfg, value);
      cfg.sync();
      return;
    }
  }
  throw std::invalid_argument("config: unknown key '" + key + "'");
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& e : entries()) keys.push_back(e.key);
  return keys;
}

std::string serialize_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : to_key_values(cfg)) out += k + "=" + v + "\n";
  return out;
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key=value");
    }
    set_key(base, trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
  base.sync();
  return base;
}

RunConfig load_config(const std::string& path, RunConfig base) {
  return parse_config(read_text_file(path), std::move(base));
}

void save_config(const RunConfig& cfg, const std::string& path) { atomic_write_file(path, serialize_config(cfg)); }

ScenePlan scene_plan(const RunConfig& cfg) {
  ScenePlan plan;
  plan.intrinsics = cfg.intrinsics;
  plan.fps = cfg.fps;
  plan.duration_s = cfg.sim.duration_s;
  plan.noise = cfg.noise;
  if (cfg.sim.trajectory == "standard") {
    plan.trajectory = standard_trajectory(cfg.sim.duration_s);
  } else {
    plan.trajectory.accel_segments = cfg.sim.accel_segments;
  }
  plan.trajectory.v0_mps = cfg.sim.v0_mps;
  plan.trajectory.yaw_segments = cfg.sim.yaw_segments;
  const AngleGrid grid(cfg.intrinsics);
  plan.depth_map0 = tiled_depth_map(grid, cfg.sim.depth_tile_deg, cfg.sim.depth_min_m, cfg.sim.depth_max_m);
  return plan;
}

}  // namespace flivver
