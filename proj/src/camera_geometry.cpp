#include "flivver/camera_geometry.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace flivver {

void CameraIntrinsics::validate() const {
  if (width_px < 2 || height_px < 2) {
    throw std::invalid_argument("camera intrinsics: width and height must be >= 2, got " +
                                std::to_string(width_px) + "x" + std::to_string(height_px));
  }
  auto check_fov = [](double fov, const char* name) {
    if (!std::isfinite(fov) || fov <= 0.0 || fov >= kPi) {
      throw std::invalid_argument(std::string("camera intrinsics: ") + name +
                                  " must lie strictly inside (0, pi)");
    }
  };
  check_fov(hfov_rad, "hfov_rad");
  check_fov(vfov_rad, "vfov_rad");
}

double pixel_angle(int index, int count, double fov_rad) {
  const double normalized = 2.0 * (static_cast<double>(index) + 0.5) / static_cast<double>(count) - 1.0;
  return std::atan(normalized * std::tan(0.5 * fov_rad));
}

AngleGrid::AngleGrid(const CameraIntrinsics& intrinsics) : intrinsics_(intrinsics) {
  intrinsics_.validate();
  const int w = intrinsics_.width_px;
  const int h = intrinsics_.height_px;
  alpha_h_.resize(static_cast<std::size_t>(w));
  cs_h_.resize(static_cast<std::size_t>(w));
  tan_h_.resize(static_cast<std::size_t>(w));
  alpha_v_.resize(static_cast<std::size_t>(h));
  cs_v_.resize(static_cast<std::size_t>(h));

  for (int x = 0; x < w; ++x) {
    // Mirror the negative half so the grid is exactly antisymmetric.
    const int mirror = w - 1 - x;
    const double a = x < mirror ? -pixel_angle(mirror, w, intrinsics_.hfov_rad)
                                : pixel_angle(x, w, intrinsics_.hfov_rad);
    alpha_h_[static_cast<std::size_t>(x)] = x == mirror ? 0.0 : a;
  }
  for (int y = 0; y < h; ++y) {
    const int mirror = h - 1 - y;
    const double a = y < mirror ? -pixel_angle(mirror, h, intrinsics_.vfov_rad)
                                : pixel_angle(y, h, intrinsics_.vfov_rad);
    alpha_v_[static_cast<std::size_t>(y)] = y == mirror ? 0.0 : a;
  }
  for (std::size_t i = 0; i < alpha_h_.size(); ++i) {
    cs_h_[i] = std::cos(alpha_h_[i]) * std::sin(alpha_h_[i]);
    tan_h_[i] = std::tan(alpha_h_[i]);
  }
  for (std::size_t i = 0; i < alpha_v_.size(); ++i) {
    cs_v_[i] = std::cos(alpha_v_[i]) * std::sin(alpha_v_[i]);
  }
}

AngleGrid build_angle_grid(const CameraIntrinsics& intrinsics) { return AngleGrid(intrinsics); }

double forward_flow_model(double v, double d, double alpha) {
  if (!(d > 0.0)) {
    throw std::domain_error("forward_flow_model: distance must be positive");
  }
  return -(v / d) * std::cos(alpha) * std::sin(alpha);
}

}  // namespace flivver
