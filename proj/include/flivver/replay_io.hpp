#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "flivver/camera_geometry.hpp"
#include "flivver/eval_harness.hpp"
#include "flivver/flow_frontend.hpp"
#include "flivver/pipeline.hpp"
#include "flivver/timing.hpp"

namespace flivver {

/// Malformed, missing or inconsistent files.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes to a sibling temporary file and renames it over `path`, creating
/// parent directories as needed.
void atomic_write_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

inline constexpr std::uint32_t kFlvrVersion = 1;
inline constexpr int kDatasetVersion = 1;

/// FLVR planar file: "FLVR", uint32 version, uint32 width, uint32 height,
/// then each plane as width*height float32, row-major, all little-endian.
/// The plane count follows from the file size.
struct FlvrImage {
  int width = 0;
  int height = 0;
  std::vector<std::vector<double>> planes;
};

std::string encode_flvr(int width, int height, const std::vector<const std::vector<double>*>& planes);
FlvrImage decode_flvr(const std::string& bytes, const std::string& what = "FLVR data");
void write_flvr(const std::string& path, int width, int height, const std::vector<const std::vector<double>*>& planes);
FlvrImage read_flvr(const std::string& path);

/// Two planes, u then w.
void write_flow_file(const std::string& path, const FlowField& flow);
FlowField read_flow_file(const std::string& path, double t = 0.0);

/// Rounds every component through float32, as the file format does.
FlowField quantize_f32(const FlowField& flow);

struct DatasetManifest {
  int version = kDatasetVersion;
  CameraIntrinsics intrinsics;
  double fps = 30.0;
  int frame_count = 0;
  double imu_rate_hz = 30.0;
  bool has_truth = false;
  int truth_depth_stride = 0;  // 0: no truth depth arrays

  bool operator==(const DatasetManifest&) const = default;
};

std::string manifest_to_text(const DatasetManifest& m);
DatasetManifest parse_manifest(const std::string& text);

struct ImuSample {
  double t = 0.0;
  double accel = 0.0;  // m/s^2, forward
  double gyro = 0.0;   // rad/s, yaw
};

std::string imu_to_csv(const std::vector<ImuSample>& samples);
std::vector<ImuSample> parse_imu_csv(const std::string& text);

std::string truth_to_csv(const TruthSeries& truth);
TruthSeries parse_truth_csv(const std::string& text);

struct ImuFrame {
  double accel = 0.0;
  double gyro = 0.0;
  int sample_count = 0;
  bool gap = false;  // no sample in the interval, or a hole wider than one frame interval
};

/**
 * Block mean of the IMU samples in [t_k - dt/2, t_k + dt/2) for each frame
 * time, dt = 1/fps. A frame without samples takes the most recent frame mean
 * (or the nearest sample before the first one) and is flagged.
 */
std::vector<ImuFrame> resample_imu(const std::vector<ImuSample>& samples, const std::vector<double>& frame_times,
                                   double fps);

/// Layout below a dataset root.
std::string frame_path(const std::string& root, int index);
std::string truth_depth_path(const std::string& root, int index);
std::string manifest_path(const std::string& root);
std::string imu_path(const std::string& root);
std::string truth_path(const std::string& root);

/// Read side of a replay dataset. Frames are read on demand.
class ReplayDataset {
 public:
  explicit ReplayDataset(std::string root);

  const DatasetManifest& manifest() const { return manifest_; }
  const std::string& root() const { return root_; }
  double frame_time(int index) const;
  FlowField flow(int index) const;
  /// IMU readings resampled to the frame clock.
  const std::vector<ImuFrame>& imu_frames() const { return imu_frames_; }
  const std::optional<TruthSeries>& truth() const { return truth_; }
  /// Truth depth at an arbitrary time, built from the nearest stored array
  /// shifted by the truth displacement. Empty if the dataset has none.
  std::vector<double> truth_depth(double t) const;
  bool has_truth_depth() const;

 private:
  std::string root_;
  DatasetManifest manifest_;
  std::vector<ImuFrame> imu_frames_;
  std::optional<TruthSeries> truth_;
};

std::string estimates_to_csv(const std::vector<EstimateRow>& rows);
std::vector<EstimateRow> parse_estimates_csv(const std::string& text);

/// Writes depth/index.csv, one FLVR per map and field_depth.csv below `dir`.
void write_depth_outputs(const std::string& dir, const std::vector<DepthOutput>& outputs);
struct DepthOutputs {
  std::vector<DepthRecord> maps;
  std::vector<FieldDepthRecord> fields;
};
/// Empty result if `dir` has no depth outputs.
DepthOutputs read_depth_outputs(const std::string& dir);

std::string timing_to_csv(const TimingLog& log);
TimingLog parse_timing_csv(const std::string& text);

}  // namespace flivver
