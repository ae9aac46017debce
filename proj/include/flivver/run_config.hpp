#pragma once

#include <map>
#include <string>
#include <vector>

#include "flivver/camera_geometry.hpp"
#include "flivver/eval_harness.hpp"
#include "flivver/pipeline.hpp"
#include "flivver/scene_simulator.hpp"

namespace flivver {

struct SimulationParams {
  double duration_s = 30.0;
  double v0_mps = 1.0;
  /// "standard" derives the segments from duration_s; "segments" uses
  /// accel_segments as given.
  std::string trajectory = "standard";
  std::vector<TrajectorySegment> accel_segments;
  std::vector<TrajectorySegment> yaw_segments;
  double depth_tile_deg = 7.5;
  double depth_min_m = 2.0;
  double depth_max_m = 10.0;
  int truth_depth_stride = 30;
};

struct EvalParams {
  EvalConfig eval;
  double drift_extra_bias_mps2 = 0.0;  // added to the measured accel for the drift baseline
  KalmanParams kalman;
  double max_rmse_mps = 0.0;  // 0 disables the bound
};

/// Everything a run depends on. fps is shared by the simulator, the
/// staggering and the estimator.
struct RunConfig {
  CameraIntrinsics intrinsics;
  double fps = 30.0;
  SimulationParams sim;
  NoiseSpec noise;
  PipelineConfig pipeline;
  EvalParams eval;
  std::string output_dir = "out";

  /// Pushes shared values (intrinsics, fps) into the sub-configs.
  void sync();
  void validate() const;
};

RunConfig default_run_config();

/// Ordered key=value map; values print so that parsing them back is exact.
std::vector<std::pair<std::string, std::string>> to_key_values(const RunConfig& cfg);
void set_key(RunConfig& cfg, const std::string& key, const std::string& value);
std::vector<std::string> config_keys();

std::string serialize_config(const RunConfig& cfg);
/// Applies every key=value line of `text` on top of `base`. Blank lines and
/// lines starting with '#' are ignored; unknown keys are an error.
RunConfig parse_config(const std::string& text, RunConfig base = default_run_config());
RunConfig load_config(const std::string& path, RunConfig base = default_run_config());
void save_config(const RunConfig& cfg, const std::string& path);

/// Scene described by the simulation part of the config.
ScenePlan scene_plan(const RunConfig& cfg);

std::string format_double(double v);

}  // namespace flivver
