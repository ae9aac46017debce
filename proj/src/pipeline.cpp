#include "flivver/pipeline.hpp"

#include <cmath>
#include <stdexcept>

namespace flivver {

void DepthOutputConfig::validate() const {
  if (stride_frames < 1) throw std::invalid_argument("depth config: stride_frames must be >= 1");
  direct.validate();
  tv.validate();
}

void PipelineConfig::validate() const {
  intrinsics.validate();
  stagger.validate();
  bank.validate();
  estimator.validate();
  depth.validate();
  if (estimator.fps != stagger.fps) throw std::invalid_argument("pipeline config: estimator and stagger fps differ");
}

TimeOffsets time_offsets(const PipelineConfig& cfg) {
  const VelocityEstimator probe(cfg.estimator, 0);
  TimeOffsets o;
  o.ratio_s = 0.5 * cfg.stagger.baseline_s();
  o.median_s = o.ratio_s - probe.median_delay_s();
  o.smoothed_s = o.ratio_s - probe.smoothed_delay_s();
  return o;
}

Pipeline::Pipeline(PipelineConfig cfg)
    : cfg_((cfg.validate(), std::move(cfg))),
      grid_(cfg_.intrinsics),
      bank_(build_bank(grid_, cfg_.bank)),
      flow_stagger_(cfg_.stagger),
      accel_stagger_(cfg_.stagger),
      gyro_stagger_(cfg_.stagger),
      estimator_(cfg_.estimator, bank_.size()),
      offsets_(time_offsets(cfg_)) {}

double Pipeline::integrate_accel(double t0, double t1) const {
  // Trapezoid over the piecewise-linear interpolant of the logged samples.
  if (accel_log_.empty() || t1 == t0) return 0.0;
  const double sign = t1 >= t0 ? 1.0 : -1.0;
  const double lo = std::min(t0, t1);
  const double hi = std::max(t0, t1);
  auto value_at = [&](std::size_t i, double t) {
    const auto& [ta, a] = accel_log_[i];
    const auto& [tb, b] = accel_log_[i + 1];
    return a + (b - a) * (t - ta) / (tb - ta);
  };
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < accel_log_.size(); ++i) {
    const double a0 = std::max(lo, accel_log_[i].first);
    const double a1 = std::min(hi, accel_log_[i + 1].first);
    if (a1 <= a0) continue;
    sum += 0.5 * (value_at(i, a0) + value_at(i, a1)) * (a1 - a0);
  }
  return sign * sum;
}

std::optional<PipelineOutput> Pipeline::push(const FrameInput& frame, TimingLog* timing) {
  if (frame.flow.width != grid_.width() || frame.flow.height != grid_.height()) {
    throw std::invalid_argument("Pipeline: frame size does not match the configured intrinsics");
  }
  accel_log_.emplace_back(frame.t, frame.accel);
  const double keep = 4.0 * cfg_.stagger.baseline_s() + 10.0;
  while (accel_log_.size() > 2 && accel_log_.front().first < frame.t - keep) accel_log_.pop_front();

  auto flow = flow_stagger_.push(frame.flow);
  const auto accel = accel_stagger_.push(frame.accel);
  const auto gyro = gyro_stagger_.push(frame.gyro);
  if (!flow) return std::nullopt;
  const int index = staggered_index_++;

  FlowField derotated;
  {
    ScopedTimer timer(timing, kStepImageAlignment);
    derotated = derotate(*flow, *gyro, grid_);
  }
  RatioMap& ratio = ratio_;
  {
    ScopedTimer timer(timing, kStepRatio);
    matched_ratio_map(derotated, grid_, cfg_.bank.center_mask_deg, ratio);
  }
  std::vector<PooledStats> stats;
  {
    ScopedTimer timer(timing, kStepPooling);
    stats = pool(ratio, bank_);
  }
  const double yaw_delta = *gyro * cfg_.stagger.baseline_s();
  auto est = estimator_.push(flow->t, stats, *accel, yaw_delta, timing);
  last_stats_ = std::move(stats);
  if (!est) return std::nullopt;

  PipelineOutput out;
  out.index = index;
  out.yaw_delta = yaw_delta;
  out.t_median_ref = est->t + offsets_.median_s;
  out.t_smoothed_ref = est->t + offsets_.smoothed_s;
  if (cfg_.depth.enabled && estimate_count_ % cfg_.depth.stride_frames == 0) {
    DepthOutput depth;
    depth.t_ref = est->t + offsets_.ratio_s;
    depth.v_used = est->v_corrected + integrate_accel(out.t_smoothed_ref, depth.t_ref);
    depth.direct = direct_depth(ratio, depth.v_used, cfg_.depth.direct);
    if (depth.direct) depth.direct->t = depth.t_ref;
    if (cfg_.depth.tv_enabled) {
      const FlowField matched = apply_full_matched_filter(derotated, grid_);
      const auto repaired = tv_repair(matched, grid_, cfg_.depth.tv);
      depth.tv_iterations = repaired.iterations;
      if (!repaired.objective_history.empty()) depth.tv_objective = repaired.objective_history.back();
      depth.tv_data_term = tv_objective(matched, grid_, repaired.flow, repaired.beta_h, repaired.beta_v, 0.0);
      depth.tv_converged = repaired.converged;
      depth.tv_repaired = repaired_depth(repaired.flow, grid_, depth.v_used, cfg_.depth.direct);
      if (depth.tv_repaired) depth.tv_repaired->t = depth.t_ref;
    }
    depth.t_closed_form = out.t_median_ref;
    depth.closed_form = closed_form_depths(est->terms, cfg_.estimator.guard);
    out.depth = std::move(depth);
  }
  ++estimate_count_;
  out.estimate = std::move(*est);
  return out;
}

std::vector<PipelineOutput> run_pipeline(const PipelineConfig& cfg, const std::vector<FrameInput>& frames,
                                         TimingLog* timing) {
  Pipeline p(cfg);
  std::vector<PipelineOutput> out;
  for (const auto& f : frames) {
    if (auto o = p.push(f, timing)) out.push_back(std::move(*o));
  }
  return out;
}

}  // namespace flivver
