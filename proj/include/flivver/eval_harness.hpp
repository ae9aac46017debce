#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "flivver/depth_mapper.hpp"
#include "flivver/pipeline.hpp"
#include "flivver/receptive_fields.hpp"
#include "flivver/timing.hpp"

namespace flivver {

/// Raised when estimates and truth cannot be put on a common time base.
class MisalignedSeries : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One row of the per-frame estimate table.
struct EstimateRow {
  double t = 0.0;
  std::optional<double> v_raw_median;
  double v_smoothed = 0.0;
  double v_corrected = 0.0;
  int n_valid_fields = 0;
  bool degenerate = false;
};

EstimateRow to_row(const PipelineOutput& out);

/// Frame-rate ground truth; queries between samples interpolate linearly.
struct TruthSeries {
  std::vector<double> t;
  std::vector<double> v;
  std::vector<double> a;
  std::vector<double> x;  // forward displacement, may be empty

  void validate() const;
  bool covers(double time) const;
  double velocity_at(double time) const;
  double position_at(double time) const;
};

struct DepthRecord {
  DepthMethod method = DepthMethod::direct;
  double t_ref = 0.0;
  std::vector<double> d;
  std::vector<std::uint8_t> mask;
};

struct FieldDepthRecord {
  double t_ref = 0.0;
  int field_id = 0;
  double d = 0.0;
};

struct EvalConfig {
  double convergence_fraction = 0.1;  // of peak truth speed
  double convergence_hold_s = 1.0;
  std::vector<double> speed_bucket_edges{0.25, 0.5, 0.75};  // m/s, |v| at the map time
};

struct TimingStat {
  double mean_s = 0.0;
  double p95_s = 0.0;
  std::size_t count = 0;
};

struct DepthErrorStat {
  double mean_fractional_error = 0.0;
  std::size_t samples = 0;
  std::map<std::string, std::pair<double, std::size_t>> by_speed;  // bucket -> (mean, samples)
};

struct RunReport {
  std::size_t frames_total = 0;
  std::size_t frames_evaluated = 0;
  std::size_t degenerate_frames = 0;
  double warmup_end_s = 0.0;
  std::optional<double> velocity_rmse;
  std::optional<double> median_rmse;
  std::optional<double> convergence_time_s;
  double convergence_threshold_mps = 0.0;
  std::map<std::string, TimingStat> per_step_timing;
  std::map<std::string, DepthErrorStat> depth_error_by_method;
  std::map<std::string, double> baseline_rmse;
  std::map<std::string, double> parameters;
};

struct EvalInput {
  std::vector<EstimateRow> estimates;
  TimeOffsets offsets;
  std::optional<TruthSeries> truth;  // absent: timing-only report
  std::vector<DepthRecord> depth_maps;
  std::vector<FieldDepthRecord> field_depths;
  /// Per-pixel truth depth at an arbitrary time; needed for depth errors.
  std::function<std::vector<double>(double)> truth_depth;
  const FieldBank* bank = nullptr;  // needed for closed-form depth errors
  const TimingLog* timing = nullptr;
};

RunReport evaluate(const EvalInput& input, const EvalConfig& cfg = {});

double rmse(const std::vector<double>& estimate, const std::vector<double>& truth);

/// Trapezoidal integration of the acceleration samples from v0_assumed.
std::vector<double> integrate_accel_baseline(const std::vector<double>& t, const std::vector<double>& accel,
                                             double v0_assumed = 0.0);

struct KalmanParams {
  double process_noise = 0.1;      // (m/s^2)^2 per second, random walk on velocity
  double measurement_noise = 0.01; // (m/s)^2
  double initial_variance = 1.0;   // (m/s)^2

  void validate() const;  // all strictly positive
};

/**
 * Linear filter over one velocity state with the acceleration as control
 * input: predict v += dt * (a_k + a_{k+1}) / 2, then update with the median
 * velocity when present. Starts at the first available measurement; entries
 * before it are empty.
 */
std::vector<std::optional<double>> kalman_smoother_baseline(const std::vector<std::optional<double>>& v_median,
                                                            const std::vector<double>& accel, double dt,
                                                            const KalmanParams& params);

struct KalmanTuning {
  KalmanParams params;
  double rmse = 0.0;
};

/// Grid search; `score` returns the RMSE of a candidate (lower is better).
KalmanTuning tune_kalman(const std::vector<double>& process_grid, const std::vector<double>& measurement_grid,
                         const std::function<double(const KalmanParams&)>& score);

/// Logarithmic grid lo, lo*r, ..., hi with n points.
std::vector<double> log_grid(double lo, double hi, int n);

void write_report_csv(const RunReport& report, const std::string& path);
std::string report_summary(const RunReport& report);

}  // namespace flivver
