#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "flivver/camera_geometry.hpp"

namespace flivver {

/// Dense angular-velocity field, rad/s, row-major.
struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<double> u;  // horizontal component
  std::vector<double> w;  // vertical component
  double t = 0.0;

  FlowField() = default;
  FlowField(int width_px, int height_px, double timestamp = 0.0)
      : width(width_px),
        height(height_px),
        u(static_cast<std::size_t>(width_px) * static_cast<std::size_t>(height_px), 0.0),
        w(u.size(), 0.0),
        t(timestamp) {}

  std::size_t size() const { return u.size(); }
};

/// Per-pixel r = v/d estimate (1/s). Pixels with mask == 0 carry r = 0 and
/// must not be read downstream.
struct RatioMap {
  int width = 0;
  int height = 0;
  std::vector<double> r;
  std::vector<std::uint8_t> mask;
  double t = 0.0;

  std::size_t valid_count() const;
};

inline constexpr double kDefaultCenterMaskDeg = 3.0;

struct StaggerConfig {
  int flow_stagger_frames = 6;
  double fps = 30.0;

  void validate() const;
  /// Time between the two frames of one staggered flow pair.
  double baseline_s() const { return static_cast<double>(flow_stagger_frames) / fps; }
};

/**
 * Turns a stream of instantaneous flow samples into staggered flow.
 *
 * The output for frame i is the displacement accumulated between frames i and
 * i + stagger divided by stagger / fps seconds, i.e. the trapezoidal mean of
 * the stagger + 1 samples in that window. It is timestamped at frame i and
 * becomes available once frame i + stagger has been pushed, so one estimate
 * is emitted per input frame after warm-up.
 */
class FlowStagger {
 public:
  explicit FlowStagger(StaggerConfig cfg);

  /// Returns nullopt while warming up.
  std::optional<FlowField> push(FlowField sample);
  bool warming_up() const;
  const StaggerConfig& config() const { return cfg_; }

 private:
  StaggerConfig cfg_;
  std::deque<FlowField> buffer_;
};

/// Scalar counterpart of FlowStagger (used for accelerometer and gyro readings
/// so they cover exactly the same window as the flow).
class ScalarStagger {
 public:
  explicit ScalarStagger(StaggerConfig cfg);
  std::optional<double> push(double sample);

 private:
  StaggerConfig cfg_;
  std::deque<double> buffer_;
};

std::vector<FlowField> staggered_flow(const std::vector<FlowField>& frames, const StaggerConfig& cfg);

/// Removes the yaw-induced component (see yaw_flow_h / yaw_flow_v).
FlowField derotate(const FlowField& flow, double yaw_rate, const AngleGrid& grid);

/// Projects each flow vector onto the expected forward-expansion direction
/// (cs_h, cs_v) of its pixel; the orthogonal component is discarded.
FlowField apply_full_matched_filter(const FlowField& flow, const AngleGrid& grid);

/// r_h = -u / cs_h and r_v = -w / cs_v, averaged over whichever are valid.
/// r_h is invalid where |alpha_h| < center_mask_deg (likewise r_v); pixels
/// with neither are masked. A zero cos*sin gain always invalidates.
RatioMap ratio_map(const FlowField& flow, const AngleGrid& grid,
                   double center_mask_deg = kDefaultCenterMaskDeg);

/// Fused matched filter + ratio map. After projection r_h and r_v coincide,
/// so r = -(u cs_h + w cs_v) / (cs_h^2 + cs_v^2) with the same mask as
/// ratio_map. Equal to ratio_map(apply_full_matched_filter(flow)) up to
/// round-off.
RatioMap matched_ratio_map(const FlowField& flow, const AngleGrid& grid,
                           double center_mask_deg = kDefaultCenterMaskDeg);
/// As above, writing into `out` and reusing its storage.
void matched_ratio_map(const FlowField& flow, const AngleGrid& grid, double center_mask_deg, RatioMap& out);

}  // namespace flivver
