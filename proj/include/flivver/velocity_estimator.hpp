#pragma once

#include <cstddef>
#include <deque>
#include <optional>
#include <utility>
#include <vector>

#include "flivver/butterworth.hpp"
#include "flivver/receptive_fields.hpp"
#include "flivver/timing.hpp"

namespace flivver {

struct DerivativeConfig {
  int derivative_stagger_frames = 5;
  ButterworthSpec prefilter;
  bool prefilter_enabled = true;

  void validate() const;
};

/// Which second moment goes into the denominator of the velocity formula.
enum class SecondMoment {
  pooled,        // mean of r^2 over the field
  squared_mean,  // (mean of r)^2, for ablation
};

/// Guards against the zero-acceleration manifold, where the denominator
/// r2 - r_dot vanishes together with the numerator.
struct DegeneracyGuard {
  double eps_denom = 1e-4;  // 1/s^2
  /// Frame-level guard: no field is evaluated when the (filtered) window
  /// acceleration spans more than gate * |window mean| across the
  /// derivative window. Near a sign change the mean goes to zero while the
  /// kernel mismatch between numerator and denominator does not, so the
  /// ratio carries no information there. Scale free.
  double accel_spread_gate = 0.5;

  void validate() const;
};

/// What the output filter sees on frames without any valid field.
enum class HoldPolicy {
  freeze,            // output and filter state both hold
  feed_last_median,  // filter keeps running on the last valid median
  propagate,         // as feed_last_median, advanced by the window acceleration
};

struct EstimatorConfig {
  double fps = 30.0;
  DerivativeConfig derivative;
  ButterworthSpec output_filter;
  bool output_filter_enabled = true;
  DegeneracyGuard guard;
  SecondMoment second_moment = SecondMoment::pooled;
  HoldPolicy hold = HoldPolicy::propagate;

  void validate() const;
};

/// Inputs of the velocity formula for one field after time alignment.
struct FieldTerms {
  int field_id = 0;
  double r_bar = 0.0;
  double r2_bar = 0.0;
  double r_dot = 0.0;
  double accel = 0.0;
  std::optional<double> v;
};

struct VelocityEstimate {
  std::vector<std::pair<int, double>> v_raw_per_field;
  std::optional<double> v_median;  // empty on degenerate frames
  double v_smoothed = 0.0;
  double v_corrected = 0.0;
  double t = 0.0;
  int n_valid_fields = 0;
  bool degenerate = false;
  double accel_aligned = 0.0;
  std::vector<FieldTerms> terms;
};

/// dr/dt(t_i) = (x_i - x_{i-s}) / (s / fs); the first s entries are empty.
std::vector<std::optional<double>> staggered_derivative(const std::vector<double>& series,
                                                        const DerivativeConfig& cfg, double fs);

/// v = accel * (-r_bar) / (r2 - r_dot). nullopt when the guard trips.
std::optional<double> per_field_velocity(const PooledStats& stats, double r_dot, double accel,
                                         const DegeneracyGuard& guard = {},
                                         SecondMoment moment = SecondMoment::pooled);

/**
 * First-order bound on |v_field - v(t_ref)| for noiseless input whose whole
 * window (flow stagger plus derivative span, window_s) lies inside one
 * constant-acceleration segment, prefilter off. Within a segment
 * r2 - dr/dt = -a / d, so the field estimate is the 1/d-weighted mean of v
 * over the window; with 1/d varying by at most a factor 1 + q,
 * q = v_max window_s / d_min, the weighted mean time is within
 * (window_s / 2) q / (2 + q) of the window centre. Sampling error of the
 * trapezoidal means, of order dt^2 (r^2)'' / 12, is not included; it only
 * matters at short time to contact.
 */
double staggered_velocity_error_bound(double accel, double window_s, double v_max, double d_min);

/// Exact median (mean of the middle two for even counts); nullopt if empty.
std::optional<double> aggregate(std::vector<double> v_fields);

struct FinalizedVelocity {
  double v_smoothed = 0.0;
  double v_corrected = 0.0;
  bool held = false;
};

/// Batch output stage: Butterworth smoothing of the median series (empty
/// entries hold the last smoothed value) and the cos(yaw_delta) correction.
std::vector<FinalizedVelocity> finalize(const std::vector<std::optional<double>>& v_median,
                                        const std::vector<double>& yaw_delta, const ButterworthSpec& spec);

/**
 * Streaming velocity estimator over the pooled statistics of a fixed field
 * bank.
 *
 * Per field, r_bar and r2_bar pass through the prefilter and the window
 * acceleration through an identical one, so all inputs of the formula carry
 * the same delay. r_dot is the staggered difference of the filtered r_bar;
 * r_bar, r2_bar and accel get the trapezoidal mean over the same difference
 * window, which is the kernel the difference applies to dr/dt. An estimate
 * built from inputs stamped t therefore describes t - median_delay_s()
 * (before the output filter) and t - smoothed_delay_s() (after it), to first
 * order.
 *
 * Frames without any valid field are flagged degenerate and handled by the
 * configured HoldPolicy. Nothing is emitted until the derivative window is
 * full and at least one field has produced a value.
 */
class VelocityEstimator {
 public:
  VelocityEstimator(EstimatorConfig cfg, std::size_t n_fields);

  /// stats may omit fields (fully masked this frame); their last input is held.
  std::optional<VelocityEstimate> push(double t, const std::vector<PooledStats>& stats, double accel,
                                       double yaw_delta = 0.0, TimingLog* timing = nullptr);

  bool warming_up() const { return !started_; }
  double median_delay_s() const;
  double smoothed_delay_s() const;
  const EstimatorConfig& config() const { return cfg_; }

 private:
  struct FieldState {
    std::optional<ButterworthFilter> pre_r;
    std::optional<ButterworthFilter> pre_r2;
    std::deque<double> r;   // filtered history, newest last
    std::deque<double> r2;
    bool seen = false;
    double last_r = 0.0;
    double last_r2 = 0.0;
  };

  EstimatorConfig cfg_;
  std::vector<FieldState> fields_;
  std::optional<ButterworthFilter> pre_a_;
  std::deque<double> accel_hist_;
  std::optional<ButterworthFilter> out_filter_;
  bool started_ = false;
  double last_smoothed_ = 0.0;
  double last_median_ = 0.0;
};

}  // namespace flivver
