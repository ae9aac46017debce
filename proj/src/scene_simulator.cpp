#include "flivver/scene_simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace flivver {

namespace {

std::mt19937_64 frame_engine(std::uint64_t seed, int index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), 0x464c5652u};
  return std::mt19937_64(seq);
}

double piecewise_value(const std::vector<TrajectorySegment>& segments, double t) {
  double t0 = 0.0;
  for (const auto& s : segments) {
    if (t < t0 + s.duration_s) return t >= t0 ? s.value : 0.0;
    t0 += s.duration_s;
  }
  return 0.0;
}

}  // namespace

Trajectory::Trajectory(TrajectorySpec spec) : spec_(std::move(spec)) {
  double t = 0.0;
  double v = spec_.v0_mps;
  double x = 0.0;
  for (const auto& s : spec_.accel_segments) {
    if (!(s.duration_s > 0.0) || !std::isfinite(s.duration_s) || !std::isfinite(s.value)) {
      throw std::invalid_argument("trajectory: segments need positive finite durations and finite values");
    }
    knots_.push_back({t, v, x, s.value});
    x += v * s.duration_s + 0.5 * s.value * s.duration_s * s.duration_s;
    v += s.value * s.duration_s;
    t += s.duration_s;
  }
  knots_.push_back({t, v, x, 0.0});
  for (const auto& s : spec_.yaw_segments) {
    if (!(s.duration_s > 0.0) || !std::isfinite(s.value)) {
      throw std::invalid_argument("trajectory: invalid yaw segment");
    }
  }
}

const Trajectory::Knot& Trajectory::knot_at(double t) const {
  // Last knot whose start is <= t; times before zero use the first piece.
  auto it = std::upper_bound(knots_.begin(), knots_.end(), t,
                             [](double value, const Knot& k) { return value < k.t0; });
  if (it == knots_.begin()) return knots_.front();
  return *(it - 1);
}

double Trajectory::acceleration(double t) const { return knot_at(t).a; }

double Trajectory::velocity(double t) const {
  const Knot& k = knot_at(t);
  return k.v0 + k.a * (t - k.t0);
}

double Trajectory::position(double t) const {
  const Knot& k = knot_at(t);
  const double dt = t - k.t0;
  return k.x0 + k.v0 * dt + 0.5 * k.a * dt * dt;
}

double Trajectory::yaw_rate(double t) const { return piecewise_value(spec_.yaw_segments, t); }

double Trajectory::max_position(double t_end) const {
  double best = std::max(position(0.0), position(t_end));
  for (std::size_t i = 0; i < knots_.size(); ++i) {
    const Knot& k = knots_[i];
    if (k.t0 > t_end) break;
    best = std::max(best, k.x0);
    if (k.a != 0.0) {
      const double t_stop = k.t0 - k.v0 / k.a;
      const double t_next = i + 1 < knots_.size() ? knots_[i + 1].t0 : t_end;
      if (t_stop > k.t0 && t_stop < std::min(t_next, t_end)) best = std::max(best, position(t_stop));
    }
  }
  return best;
}

std::vector<double> Trajectory::accel_breakpoints() const {
  std::vector<double> out;
  for (const auto& k : knots_) out.push_back(k.t0);
  return out;
}

void NoiseSpec::validate() const {
  const double sigmas[] = {flow_noise_sigma, flow_direction_jitter, accel_noise_sigma, gyro_noise_sigma};
  for (double s : sigmas) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw std::invalid_argument("noise spec: sigmas must be finite and >= 0");
  }
  if (!std::isfinite(accel_bias)) throw std::invalid_argument("noise spec: accel_bias must be finite");
}

int ScenePlan::frame_count() const { return static_cast<int>(std::llround(duration_s * fps)); }

void ScenePlan::validate() const {
  intrinsics.validate();
  noise.validate();
  if (!(fps > 0.0) || !std::isfinite(fps)) throw std::invalid_argument("scene plan: fps must be positive");
  if (!(duration_s > 0.0) || !std::isfinite(duration_s)) {
    throw std::invalid_argument("scene plan: duration must be positive");
  }
  const auto expected = static_cast<std::size_t>(intrinsics.width_px) * static_cast<std::size_t>(intrinsics.height_px);
  if (depth_map0.size() != expected) {
    throw std::invalid_argument("scene plan: depth map has " + std::to_string(depth_map0.size()) +
                                " entries, expected " + std::to_string(expected));
  }
  double d_min = std::numeric_limits<double>::infinity();
  for (double d : depth_map0) {
    if (!(d > 0.0) || !std::isfinite(d)) throw std::invalid_argument("scene plan: depths must be positive and finite");
    d_min = std::min(d_min, d);
  }
  const Trajectory traj(trajectory);
  const double reach = traj.max_position(duration_s);
  if (!(d_min - reach > 0.0)) {
    throw std::invalid_argument("scene plan: trajectory reaches the nearest surface (min depth " +
                                std::to_string(d_min) + " m, forward excursion " + std::to_string(reach) + " m)");
  }
}

Simulator::Simulator(ScenePlan plan)
    : plan_(std::move(plan)),
      grid_((plan_.validate(), plan_.intrinsics)),
      trajectory_(plan_.trajectory),
      frame_count_(plan_.frame_count()) {}

FlowField Simulator::truth_flow(double t) const {
  FlowField f(grid_.width(), grid_.height(), t);
  const double v = trajectory_.velocity(t);
  const double x = trajectory_.position(t);
  const double yaw = trajectory_.yaw_rate(t);
  const double du_rot = yaw_flow_h(yaw);
  for (int y = 0; y < grid_.height(); ++y) {
    const double csv = grid_.cs_v(y);
    for (int xi = 0; xi < grid_.width(); ++xi) {
      const std::size_t i = grid_.index(xi, y);
      const double ratio = v / (plan_.depth_map0[i] - x);
      f.u[i] = -ratio * grid_.cs_h(xi);
      f.w[i] = -ratio * csv;
      if (yaw != 0.0) {
        f.u[i] += du_rot;
        f.w[i] += yaw_flow_v(yaw, grid_.tan_h(xi), csv);
      }
    }
  }
  return f;
}

std::vector<double> Simulator::truth_depth(double t) const {
  const double x = trajectory_.position(t);
  std::vector<double> d(plan_.depth_map0.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = plan_.depth_map0[i] - x;
  return d;
}

SimFrame Simulator::frame(int index, bool with_truth_depth) const {
  if (index < 0 || index >= frame_count_) throw std::out_of_range("Simulator::frame: index out of range");
  SimFrame out;
  out.t = static_cast<double>(index) / plan_.fps;
  out.truth_v = trajectory_.velocity(out.t);
  out.truth_a = trajectory_.acceleration(out.t);
  out.truth_x = trajectory_.position(out.t);
  out.truth_yaw_rate = trajectory_.yaw_rate(out.t);
  out.flow = truth_flow(out.t);
  if (with_truth_depth) out.truth_depth = truth_depth(out.t);

  const NoiseSpec& n = plan_.noise;
  auto engine = frame_engine(n.rng_seed, index);
  std::normal_distribution<double> normal(0.0, 1.0);

  if (n.flow_direction_jitter > 0.0) {
    for (std::size_t i = 0; i < out.flow.size(); ++i) {
      const double theta = n.flow_direction_jitter * normal(engine);
      const double c = std::cos(theta);
      const double s = std::sin(theta);
      const double u = out.flow.u[i];
      const double w = out.flow.w[i];
      out.flow.u[i] = c * u - s * w;
      out.flow.w[i] = s * u + c * w;
    }
  }
  if (n.flow_noise_sigma > 0.0) {
    for (std::size_t i = 0; i < out.flow.size(); ++i) {
      out.flow.u[i] += n.flow_noise_sigma * normal(engine);
      out.flow.w[i] += n.flow_noise_sigma * normal(engine);
    }
  }
  out.accel_meas = out.truth_a + n.accel_bias;
  if (n.accel_noise_sigma > 0.0) out.accel_meas += n.accel_noise_sigma * normal(engine);
  out.gyro_meas = out.truth_yaw_rate;
  if (n.gyro_noise_sigma > 0.0) out.gyro_meas += n.gyro_noise_sigma * normal(engine);
  return out;
}

std::vector<SimFrame> simulate(const ScenePlan& plan) {
  const Simulator sim(plan);
  std::vector<SimFrame> frames;
  frames.reserve(static_cast<std::size_t>(sim.frame_count()));
  for (int k = 0; k < sim.frame_count(); ++k) frames.push_back(sim.frame(k));
  return frames;
}

FlowField rotational_flow(double yaw_rate, const AngleGrid& grid) {
  FlowField f(grid.width(), grid.height());
  for (int y = 0; y < grid.height(); ++y) {
    for (int x = 0; x < grid.width(); ++x) {
      const std::size_t i = grid.index(x, y);
      f.u[i] = yaw_flow_h(yaw_rate);
      f.w[i] = yaw_flow_v(yaw_rate, grid.tan_h(x), grid.cs_v(y));
    }
  }
  return f;
}

std::vector<double> tiled_depth_map(const AngleGrid& grid, double tile_deg, double d_min, double d_max) {
  if (!(tile_deg > 0.0) || !(d_min > 0.0) || !(d_max >= d_min)) {
    throw std::invalid_argument("tiled_depth_map: need tile_deg > 0 and 0 < d_min <= d_max");
  }
  const auto& in = grid.intrinsics();
  const int half_x = static_cast<int>(std::lround(0.5 * rad_to_deg(in.hfov_rad) / tile_deg));
  const int half_y = static_cast<int>(std::lround(0.5 * rad_to_deg(in.vfov_rad) / tile_deg));
  const int cols = 2 * half_x + 1;
  const int n = cols * (2 * half_y + 1);
  // Golden-ratio stride, bumped until coprime with n, gives a fixed scatter.
  int stride = std::max(1, static_cast<int>(0.618 * n));
  while (std::gcd(stride, n) != 1) ++stride;

  std::vector<double> depth(grid.size());
  for (int y = 0; y < grid.height(); ++y) {
    const int ty = std::clamp(static_cast<int>(std::lround(rad_to_deg(grid.alpha_v(y)) / tile_deg)), -half_y, half_y);
    for (int x = 0; x < grid.width(); ++x) {
      const int tx = std::clamp(static_cast<int>(std::lround(rad_to_deg(grid.alpha_h(x)) / tile_deg)), -half_x, half_x);
      const int k = (ty + half_y) * cols + (tx + half_x);
      const int p = static_cast<int>((static_cast<long long>(k) * stride) % n);
      const double frac = n > 1 ? static_cast<double>(p) / static_cast<double>(n - 1) : 0.0;
      depth[grid.index(x, y)] = d_min + (d_max - d_min) * frac;
    }
  }
  return depth;
}

TrajectorySpec standard_trajectory(double duration_s) {
  TrajectorySpec spec;
  spec.v0_mps = 1.0;
  double t = 0.0;
  double a = -0.5;
  while (t < duration_s) {
    spec.accel_segments.push_back({4.0, a});
    a = -a;
    t += 4.0;
  }
  return spec;
}

ScenePlan standard_scene() {
  ScenePlan plan;
  plan.intrinsics = CameraIntrinsics{240, 180, deg_to_rad(60.0), deg_to_rad(45.0)};
  plan.fps = 30.0;
  plan.duration_s = 30.0;
  plan.trajectory = standard_trajectory(plan.duration_s);
  const AngleGrid grid(plan.intrinsics);
  plan.depth_map0 = tiled_depth_map(grid, 7.5, 2.0, 10.0);
  return plan;
}

ScenePlan scale_world(const ScenePlan& plan, double k) {
  ScenePlan out = plan;
  for (double& d : out.depth_map0) d *= k;
  out.trajectory.v0_mps *= k;
  for (auto& s : out.trajectory.accel_segments) s.value *= k;
  out.noise.accel_noise_sigma *= k;
  out.noise.accel_bias *= k;
  return out;
}

}  // namespace flivver
