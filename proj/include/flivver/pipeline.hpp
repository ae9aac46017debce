#pragma once

#include <deque>
#include <optional>
#include <utility>
#include <vector>

#include "flivver/camera_geometry.hpp"
#include "flivver/depth_mapper.hpp"
#include "flivver/flow_frontend.hpp"
#include "flivver/receptive_fields.hpp"
#include "flivver/timing.hpp"
#include "flivver/velocity_estimator.hpp"

namespace flivver {

struct DepthOutputConfig {
  bool enabled = false;
  int stride_frames = 30;  // one depth solve every stride_frames estimates
  bool tv_enabled = true;
  DirectDepthConfig direct;
  TVRepairConfig tv;

  void validate() const;
};

struct PipelineConfig {
  CameraIntrinsics intrinsics;
  StaggerConfig stagger;
  BankConfig bank;  // its centre mask also applies to the ratio map
  EstimatorConfig estimator;
  DepthOutputConfig depth;

  /// Checks every part and that the estimator and stagger agree on fps.
  void validate() const;
};

/// Offsets to add to an estimate's timestamp to get the time it describes.
struct TimeOffsets {
  double median_s = 0.0;    // v_raw_median
  double smoothed_s = 0.0;  // v_smoothed / v_corrected
  double ratio_s = 0.0;     // ratio maps and depth
};

TimeOffsets time_offsets(const PipelineConfig& cfg);

struct FrameInput {
  double t = 0.0;
  FlowField flow;
  double accel = 0.0;
  double gyro = 0.0;
};

struct DepthOutput {
  double t_ref = 0.0;   // time the maps describe
  double v_used = 0.0;  // latency-compensated velocity at t_ref
  std::optional<DepthMap> direct;
  std::optional<DepthMap> tv_repaired;
  int tv_iterations = 0;
  bool tv_converged = false;
  double tv_objective = 0.0;  // final objective
  double tv_data_term = 0.0;  // its squared-residual part
  double t_closed_form = 0.0;
  std::vector<FieldDepth> closed_form;
};

struct PipelineOutput {
  VelocityEstimate estimate;
  int index = 0;  // input frame that opened the staggered window
  double yaw_delta = 0.0;
  double t_median_ref = 0.0;
  double t_smoothed_ref = 0.0;
  std::optional<DepthOutput> depth;
};

/**
 * Per-frame processing chain: staggering, derotation, fused matched filter
 * and ratio map, pooling, velocity estimation and optional depth maps.
 * Frames must arrive in order at the configured rate; one output per input
 * after warm-up.
 *
 * Depth maps use the velocity carried forward from the time the smoothed
 * estimate describes to the time of the ratio map by integrating the
 * measured acceleration over the gap.
 */
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig cfg);

  std::optional<PipelineOutput> push(const FrameInput& frame, TimingLog* timing = nullptr);

  const PipelineConfig& config() const { return cfg_; }
  const AngleGrid& grid() const { return grid_; }
  const FieldBank& bank() const { return bank_; }
  /// Pooled statistics of the most recent staggered frame.
  const std::vector<PooledStats>& last_stats() const { return last_stats_; }

 private:
  double integrate_accel(double t0, double t1) const;

  PipelineConfig cfg_;
  AngleGrid grid_;
  FieldBank bank_;
  FlowStagger flow_stagger_;
  ScalarStagger accel_stagger_;
  ScalarStagger gyro_stagger_;
  VelocityEstimator estimator_;
  TimeOffsets offsets_;
  std::deque<std::pair<double, double>> accel_log_;
  std::vector<PooledStats> last_stats_;
  RatioMap ratio_;  // reused across frames
  int staggered_index_ = 0;
  int estimate_count_ = 0;
};

/// Runs a whole sequence; convenience for tests and commands.
std::vector<PipelineOutput> run_pipeline(const PipelineConfig& cfg, const std::vector<FrameInput>& frames,
                                         TimingLog* timing = nullptr);

}  // namespace flivver
