#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace flivver {

inline constexpr double kPi = 3.14159265358979323846;

inline constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

/// Pinhole field of view and resolution of the camera.
struct CameraIntrinsics {
  int width_px = 240;
  int height_px = 180;
  double hfov_rad = deg_to_rad(60.0);
  double vfov_rad = deg_to_rad(45.0);

  /// Throws std::invalid_argument on non-finite or out-of-range fields.
  void validate() const;

  bool operator==(const CameraIntrinsics&) const = default;
};

/**
 * Per-pixel view angles of a pinhole camera.
 *
 * The horizontal angle is the azimuth atan(X/Z) of the pixel ray and the
 * vertical angle is atan(Y/Z), so the grid is separable: alpha_h depends only
 * on the column and alpha_v only on the row. Pixel centres sit at half-integer
 * offsets; for even dimensions no pixel lies exactly on the optical axis.
 *
 * cs_h / cs_v cache cos(alpha)sin(alpha), the gain of the forward-translation
 * flow model. Immutable after construction.
 */
class AngleGrid {
 public:
  explicit AngleGrid(const CameraIntrinsics& intrinsics);

  int width() const { return intrinsics_.width_px; }
  int height() const { return intrinsics_.height_px; }
  std::size_t size() const {
    return static_cast<std::size_t>(width()) * static_cast<std::size_t>(height());
  }
  const CameraIntrinsics& intrinsics() const { return intrinsics_; }

  double alpha_h(int x) const { return alpha_h_[static_cast<std::size_t>(x)]; }
  double alpha_v(int y) const { return alpha_v_[static_cast<std::size_t>(y)]; }
  double cs_h(int x) const { return cs_h_[static_cast<std::size_t>(x)]; }
  double cs_v(int y) const { return cs_v_[static_cast<std::size_t>(y)]; }
  double tan_h(int x) const { return tan_h_[static_cast<std::size_t>(x)]; }

  std::span<const double> alpha_h() const { return alpha_h_; }
  std::span<const double> alpha_v() const { return alpha_v_; }
  std::span<const double> cs_h() const { return cs_h_; }
  std::span<const double> cs_v() const { return cs_v_; }

  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width()) +
           static_cast<std::size_t>(x);
  }

 private:
  CameraIntrinsics intrinsics_;
  std::vector<double> alpha_h_;
  std::vector<double> alpha_v_;
  std::vector<double> cs_h_;
  std::vector<double> cs_v_;
  std::vector<double> tan_h_;
};

AngleGrid build_angle_grid(const CameraIntrinsics& intrinsics);

/// View angle of pixel `index` along an axis with `count` pixels and field of
/// view `fov_rad`: atan((2(index+0.5)/count - 1) tan(fov/2)).
double pixel_angle(int index, int count, double fov_rad);

/// Flow of a feature at angle `alpha` and forward distance `d` under pure
/// forward translation at speed `v`: -(v/d) cos(alpha) sin(alpha).
/// Throws std::domain_error for d <= 0.
double forward_flow_model(double v, double d, double alpha);

// Yaw rotation model shared by the simulator and the derotation stage.
//
// Flow fields use the sign convention in which forward translation yields
// -(v/d) cos(a) sin(a). In that convention a yaw rate w adds -w to the
// horizontal component of every pixel (the horizontal angle is an azimuth, so
// this is exact, not a small-angle approximation) and
// -w tan(a_h) cos(a_v) sin(a_v) to the vertical component.
inline double yaw_flow_h(double yaw_rate) { return -yaw_rate; }
inline double yaw_flow_v(double yaw_rate, double tan_alpha_h, double cs_alpha_v) {
  return -yaw_rate * tan_alpha_h * cs_alpha_v;
}

}  // namespace flivver
