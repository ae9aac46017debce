#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "doctest.h"
#include "flivver/scene_simulator.hpp"
#include "test_support.hpp"

using namespace flivver;

TEST_CASE("standard trajectory kinematics") {
  const Trajectory tr(standard_trajectory(30.0));
  CHECK(tr.velocity(0.0) == 1.0);
  CHECK(tr.acceleration(0.0) == -0.5);
  CHECK(tr.velocity(2.0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(tr.velocity(4.0) == doctest::Approx(-1.0));
  CHECK(tr.acceleration(4.0) == 0.5);  // right-continuous at the switch
  CHECK(tr.velocity(8.0) == doctest::Approx(1.0));
  // x(2) = v0 t + a t^2 / 2 = 2 - 1
  CHECK(tr.position(2.0) == doctest::Approx(1.0));
  CHECK(tr.position(4.0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(tr.position(6.0) == doctest::Approx(-1.0));
  CHECK(tr.max_position(30.0) == doctest::Approx(1.0));
  for (double t = 0.0; t <= 30.0; t += 0.01) {
    CHECK(std::abs(tr.velocity(t)) <= 1.0 + 1e-12);
    CHECK(std::abs(tr.position(t)) <= 1.0 + 1e-12);
  }
}

TEST_CASE("acceleration is zero after the last segment") {
  TrajectorySpec spec;
  spec.v0_mps = 0.2;
  spec.accel_segments = {{1.0, 0.3}};
  const Trajectory tr(spec);
  CHECK(tr.acceleration(1.5) == 0.0);
  CHECK(tr.velocity(2.0) == doctest::Approx(0.5));
  CHECK(tr.position(2.0) == doctest::Approx(0.2 + 0.15 + 0.5));
}

TEST_CASE("position is the integral of velocity") {
  const Trajectory tr(standard_trajectory(16.0));
  double x = 0.0;
  const double h = 1e-4;
  for (double t = 0.0; t < 16.0 - h / 2; t += h) x += 0.5 * h * (tr.velocity(t) + tr.velocity(t + h));
  CHECK(x == doctest::Approx(tr.position(16.0)).epsilon(1e-6));
}

TEST_CASE("invalid segments are rejected") {
  TrajectorySpec spec;
  spec.accel_segments = {{-1.0, 0.3}};
  CHECK_THROWS_AS(Trajectory{spec}, std::invalid_argument);
  spec.accel_segments = {{1.0, std::nan("")}};
  CHECK_THROWS_AS(Trajectory{spec}, std::invalid_argument);
}

TEST_CASE("truth flow matches the forward model on every pixel") {
  const ScenePlan plan = standard_scene();
  const Simulator sim(plan);
  const double t = 1.3;
  const FlowField f = sim.truth_flow(t);
  const auto d = sim.truth_depth(t);
  const double v = sim.trajectory().velocity(t);
  const AngleGrid& g = sim.grid();
  for (int y = 0; y < g.height(); y += 7) {
    for (int x = 0; x < g.width(); x += 5) {
      const std::size_t i = g.index(x, y);
      CHECK(f.u[i] == doctest::Approx(forward_flow_model(v, d[i], g.alpha_h(x))).epsilon(1e-12));
      CHECK(f.w[i] == doctest::Approx(forward_flow_model(v, d[i], g.alpha_v(y))).epsilon(1e-12));
    }
  }
}

TEST_CASE("truth depth recedes with the displacement") {
  const Simulator sim(standard_scene());
  const auto d0 = sim.truth_depth(0.0);
  const auto d2 = sim.truth_depth(2.0);
  for (std::size_t i = 0; i < d0.size(); i += 101) CHECK(d0[i] - d2[i] == doctest::Approx(1.0));
}

TEST_CASE("frames are a pure function of plan and index") {
  ScenePlan plan = test::small_scene();
  plan.noise.flow_noise_sigma = 0.01;
  plan.noise.accel_noise_sigma = 0.05;
  plan.noise.rng_seed = 7;
  const Simulator sim(plan);
  const SimFrame late = sim.frame(20);
  const SimFrame early = sim.frame(3);
  const SimFrame late2 = sim.frame(20);
  CHECK(late.flow.u == late2.flow.u);
  CHECK(late.flow.w == late2.flow.w);
  CHECK(late.accel_meas == late2.accel_meas);
  CHECK(early.flow.u != late.flow.u);

  plan.noise.rng_seed = 8;
  const Simulator other(plan);
  CHECK(other.frame(20).flow.u != late.flow.u);
}

TEST_CASE("noise statistics match the NoiseSpec sigmas and bias") {
  ScenePlan plan = test::small_scene(4.0, 0.2);
  plan.noise.flow_noise_sigma = 0.02;
  plan.noise.accel_noise_sigma = 0.05;
  plan.noise.accel_bias = 0.01;
  plan.noise.gyro_noise_sigma = 0.003;
  const Simulator sim(plan);
  double s2 = 0.0;
  double mean_a = 0.0;
  double s2_a = 0.0;
  double s2_g = 0.0;
  std::size_t n = 0;
  for (int k = 0; k < sim.frame_count(); ++k) {
    const SimFrame f = sim.frame(k);
    const FlowField truth = sim.truth_flow(f.t);
    for (std::size_t i = 0; i < f.flow.size(); ++i) {
      s2 += std::pow(f.flow.u[i] - truth.u[i], 2) + std::pow(f.flow.w[i] - truth.w[i], 2);
      n += 2;
    }
    const double ea = f.accel_meas - f.truth_a;
    mean_a += ea;
    s2_a += ea * ea;
    s2_g += f.gyro_meas * f.gyro_meas;
  }
  const double frames = sim.frame_count();
  CHECK(std::sqrt(s2 / n) == doctest::Approx(0.02).epsilon(0.01));
  mean_a /= frames;
  CHECK(std::abs(mean_a - 0.01) < 4.0 * 0.05 / std::sqrt(frames));
  CHECK(std::sqrt(s2_a / frames - mean_a * mean_a) == doctest::Approx(0.05).epsilon(0.2));
  CHECK(std::sqrt(s2_g / frames) == doctest::Approx(0.003).epsilon(0.2));
}

TEST_CASE("direction jitter preserves flow magnitude") {
  ScenePlan plan = test::small_scene();
  plan.noise.flow_direction_jitter = 0.2;
  const Simulator sim(plan);
  const SimFrame f = sim.frame(10);
  const FlowField truth = sim.truth_flow(f.t);
  bool rotated = false;
  for (std::size_t i = 0; i < f.flow.size(); ++i) {
    CHECK(std::hypot(f.flow.u[i], f.flow.w[i]) == doctest::Approx(std::hypot(truth.u[i], truth.w[i])));
    rotated = rotated || f.flow.u[i] != truth.u[i];
  }
  CHECK(rotated);
}

TEST_CASE("plans that reach a surface are rejected") {
  ScenePlan plan = test::small_scene(3.0);
  plan.trajectory.v0_mps = 3.0;  // x(3) = 9 + 2.25 > 6
  CHECK_THROWS_AS(Simulator{plan}, std::invalid_argument);
  plan = test::small_scene();
  plan.depth_map0.pop_back();
  CHECK_THROWS_AS(Simulator{plan}, std::invalid_argument);
}

TEST_CASE("frame count follows duration and rate") {
  ScenePlan plan = test::small_scene(80.0, 0.0);
  CHECK(plan.frame_count() == 2400);
  plan.duration_s = 0.5;
  CHECK(plan.frame_count() == 15);
}

TEST_CASE("tiled depth map uses evenly spaced levels") {
  const AngleGrid g({240, 180, deg_to_rad(60.0), deg_to_rad(45.0)});
  const auto d = tiled_depth_map(g, 7.5, 2.0, 10.0);
  const std::set<double> levels(d.begin(), d.end());
  CHECK(*levels.begin() >= 2.0);
  CHECK(*levels.rbegin() <= 10.0);
  CHECK(levels.size() > 20);
  // Levels sit on the lattice 2 + 8 p / (n - 1).
  const double n = 9 * 7;  // tiles of 7.5 deg: 9 columns, 7 rows incl. partial edges
  for (double v : levels) {
    const double p = (v - 2.0) / 8.0 * (n - 1.0);
    CHECK(std::abs(p - std::round(p)) < 1e-9);
  }
  // Tiles are constant inside each angular cell.
  CHECK(d[g.index(120, 90)] == d[g.index(121, 91)]);
}

TEST_CASE("world scaling leaves the flow unchanged") {
  const ScenePlan base = standard_scene();
  const Simulator a(base);
  for (double k : {0.1, 10.0}) {
    const Simulator b(scale_world(base, k));
    for (double t : {0.0, 3.3, 7.9}) {
      const FlowField fa = a.truth_flow(t);
      const FlowField fb = b.truth_flow(t);
      for (std::size_t i = 0; i < fa.size(); i += 13) {
        CHECK(fb.u[i] == doctest::Approx(fa.u[i]).epsilon(1e-12));
        CHECK(fb.w[i] == doctest::Approx(fa.w[i]).epsilon(1e-12));
      }
      CHECK(b.trajectory().velocity(t) == doctest::Approx(k * a.trajectory().velocity(t)));
    }
  }
}

TEST_CASE("zero motion yields zero flow") {
  ScenePlan plan = test::small_scene(1.0, 0.0);
  plan.trajectory.v0_mps = 0.0;
  const Simulator sim(plan);
  const SimFrame f = sim.frame(5);
  CHECK(std::all_of(f.flow.u.begin(), f.flow.u.end(), [](double v) { return v == 0.0; }));
  CHECK(std::all_of(f.flow.w.begin(), f.flow.w.end(), [](double v) { return v == 0.0; }));
}

TEST_CASE("yaw profile adds the rotational field") {
  ScenePlan plan = test::small_scene();
  plan.trajectory.yaw_segments = {{3.0, 0.2}};
  const Simulator sim(plan);
  ScenePlan still = plan;
  still.trajectory.yaw_segments.clear();
  const Simulator ref(still);
  const FlowField f = sim.truth_flow(1.0);
  const FlowField g = ref.truth_flow(1.0);
  const FlowField rot = rotational_flow(0.2, sim.grid());
  for (std::size_t i = 0; i < f.size(); ++i) {
    CHECK(f.u[i] == doctest::Approx(g.u[i] + rot.u[i]).epsilon(1e-12));
    CHECK(f.w[i] == doctest::Approx(g.w[i] + rot.w[i]).epsilon(1e-12));
  }
  CHECK(sim.frame(30).gyro_meas == 0.2);
}
