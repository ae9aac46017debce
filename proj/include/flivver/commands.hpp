#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "flivver/eval_harness.hpp"
#include "flivver/pipeline.hpp"
#include "flivver/replay_io.hpp"
#include "flivver/run_config.hpp"
#include "flivver/scene_simulator.hpp"

namespace flivver {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitAcceptance = 3;

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Frames of a simulation as pipeline input, rounded through float32 so that
/// in-memory runs match runs on a written dataset.
std::vector<FrameInput> simulation_inputs(const Simulator& sim);
std::vector<FrameInput> dataset_inputs(const ReplayDataset& data);
TruthSeries simulation_truth(const Simulator& sim);

/// Measured per-frame acceleration used by the baselines.
struct BaselineInputs {
  std::vector<double> t;
  std::vector<double> accel;
};

struct SimulationRun {
  std::vector<PipelineOutput> outputs;
  BaselineInputs imu;
};

/// Streams a simulation through a pipeline one frame at a time, with the
/// same float32 rounding as simulation_inputs. `on_frame` runs after every
/// push.
SimulationRun run_simulation(const PipelineConfig& cfg, const Simulator& sim, TimingLog* timing = nullptr,
                             const std::function<void(const Pipeline&)>& on_frame = {});

/**
 * evaluate() plus the accel-integration and Kalman baselines and the run
 * parameters. Baselines use the frame-rate accelerometer readings: drift
 * starts from the true initial velocity with eval.drift_extra_bias added,
 * Kalman uses the median velocity at its reference time.
 */
RunReport evaluate_run(const RunConfig& cfg, const std::vector<EstimateRow>& rows, const TruthSeries* truth,
                       const BaselineInputs& imu, const DepthOutputs& depth,
                       std::function<std::vector<double>(double)> truth_depth, const TimingLog* timing);

/// Kalman error of one run for given noise parameters (for tuning).
double kalman_rmse(const RunConfig& cfg, const std::vector<EstimateRow>& rows, const TruthSeries& truth,
                   const BaselineInputs& imu, const KalmanParams& params);

/// Writes a replay dataset. Returns kExitOk.
int cmd_simulate(const RunConfig& cfg, const std::string& out_dir);
/// Streams a dataset through the pipeline into out_dir (estimates.csv,
/// config.txt, depth outputs when enabled, timing.csv when `timing`).
int cmd_estimate(const RunConfig& cfg, const std::string& dataset_dir, const std::string& out_dir, bool timing);
/// Writes report.csv and summary.txt; kExitAcceptance when eval.max_rmse_mps is exceeded.
int cmd_evaluate(const RunConfig& cfg, const std::string& estimates_dir, const std::string& dataset_dir,
                 const std::string& out_dir);
/// In-memory simulate + estimate + evaluate for each value of `key`; one CSV row per value.
int cmd_sweep(const RunConfig& cfg, const std::string& key, const std::vector<std::string>& values,
              const std::string& out_csv);
/// Grid search of the Kalman noise parameters on the configured scene with
/// seed `holdout_seed`; writes the grid and the best pair.
int cmd_tune_kalman(const RunConfig& cfg, std::uint64_t holdout_seed, const std::string& out_csv);

}  // namespace flivver
