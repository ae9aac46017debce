#pragma once

#include <cstdint>
#include <vector>

#include "flivver/camera_geometry.hpp"
#include "flivver/flow_frontend.hpp"

namespace flivver {

struct TrajectorySegment {
  double duration_s = 0.0;
  double value = 0.0;  // acceleration (m/s^2) or yaw rate (rad/s)

  bool operator==(const TrajectorySegment&) const = default;
};

/// 1-D forward trajectory: piecewise-constant acceleration from v0, plus an
/// optional piecewise-constant yaw-rate profile. After the last segment the
/// acceleration (or yaw rate) is zero.
struct TrajectorySpec {
  double v0_mps = 0.0;
  std::vector<TrajectorySegment> accel_segments;
  std::vector<TrajectorySegment> yaw_segments;

  bool operator==(const TrajectorySpec&) const = default;
};

/// Closed-form kinematics of a TrajectorySpec.
class Trajectory {
 public:
  explicit Trajectory(TrajectorySpec spec);

  double acceleration(double t) const;
  double velocity(double t) const;
  /// Forward displacement since t = 0.
  double position(double t) const;
  double yaw_rate(double t) const;
  /// Largest forward displacement reached on [0, t_end].
  double max_position(double t_end) const;
  /// Start times of acceleration segments (and the end of the last one).
  std::vector<double> accel_breakpoints() const;

  const TrajectorySpec& spec() const { return spec_; }

 private:
  struct Knot {
    double t0;
    double v0;
    double x0;
    double a;
  };
  const Knot& knot_at(double t) const;

  TrajectorySpec spec_;
  std::vector<Knot> knots_;
};

struct NoiseSpec {
  double flow_noise_sigma = 0.0;       // rad/s, per pixel per component
  double flow_direction_jitter = 0.0;  // rad, stddev of a per-pixel rotation of the flow vector
  double accel_noise_sigma = 0.0;      // m/s^2
  double accel_bias = 0.0;             // m/s^2, constant per run
  double gyro_noise_sigma = 0.0;       // rad/s
  std::uint64_t rng_seed = 1;

  void validate() const;
  bool operator==(const NoiseSpec&) const = default;
};

struct ScenePlan {
  std::vector<double> depth_map0;  // per pixel forward range at t = 0, row-major
  TrajectorySpec trajectory;
  NoiseSpec noise;
  CameraIntrinsics intrinsics;
  double fps = 30.0;
  double duration_s = 1.0;

  int frame_count() const;
  /// Throws std::invalid_argument if the plan is inconsistent or the camera
  /// would reach a surface before the run ends.
  void validate() const;
};

struct SimFrame {
  double t = 0.0;
  FlowField flow;
  double accel_meas = 0.0;
  double gyro_meas = 0.0;
  double truth_v = 0.0;
  double truth_a = 0.0;
  double truth_x = 0.0;
  double truth_yaw_rate = 0.0;
  std::vector<double> truth_depth;
};

/**
 * Synthetic rigid scene. Each pixel observes a fronto-parallel surface patch
 * whose forward range evolves as d(t) = d0 - x(t); flow is synthesised
 * directly in rad/s from the forward model for that range, plus the yaw
 * field when the yaw profile is non-zero.
 *
 * Frames are a pure function of (plan, index): noise for frame k is drawn
 * from an engine seeded with (rng_seed, k), so frames can be produced in any
 * order.
 */
class Simulator {
 public:
  explicit Simulator(ScenePlan plan);

  int frame_count() const { return frame_count_; }
  SimFrame frame(int index, bool with_truth_depth = true) const;
  /// Noise-free instantaneous flow at an arbitrary time.
  FlowField truth_flow(double t) const;
  std::vector<double> truth_depth(double t) const;

  const AngleGrid& grid() const { return grid_; }
  const Trajectory& trajectory() const { return trajectory_; }
  const ScenePlan& plan() const { return plan_; }

 private:
  ScenePlan plan_;
  AngleGrid grid_;
  Trajectory trajectory_;
  int frame_count_;
};

std::vector<SimFrame> simulate(const ScenePlan& plan);

FlowField rotational_flow(double yaw_rate, const AngleGrid& grid);

/// Depth map of fronto-parallel tiles, tile_deg wide in angle and centred on
/// the optical axis; tile depths take n linearly spaced values in
/// [d_min, d_max] assigned by a fixed permutation of the tile index.
std::vector<double> tiled_depth_map(const AngleGrid& grid, double tile_deg, double d_min, double d_max);

/// Forward and backward oscillation from v0 = 1 m/s: -0.5 m/s^2 for 4 s,
/// +0.5 m/s^2 for 4 s, repeated. Velocity stays in [-1, 1] m/s and the
/// displacement in [-1, 1] m.
TrajectorySpec standard_trajectory(double duration_s);

/**
 * The reference scene used throughout the tests: 240x180 px, 60x45 deg,
 * 7.5 deg depth tiles in [2, 10] m, standard_trajectory, 30 fps, 30 s, no
 * noise.
 */
ScenePlan standard_scene();

/// Copy of `plan` with depths, v0 and accelerations multiplied by k.
ScenePlan scale_world(const ScenePlan& plan, double k);

}  // namespace flivver
