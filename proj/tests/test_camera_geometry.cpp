#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "flivver/camera_geometry.hpp"
#include "flivver/flow_frontend.hpp"
#include "flivver/scene_simulator.hpp"
#include "test_support.hpp"

using namespace flivver;

TEST_CASE("forward flow model at 45 degrees is -v/(2d)") {
  // cos(45) sin(45) = 1/2
  CHECK(forward_flow_model(1.0, 2.0, kPi / 4) == doctest::Approx(-0.25).epsilon(1e-15));
  CHECK(forward_flow_model(3.0, 1.5, -kPi / 4) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(forward_flow_model(1.0, 2.0, 0.0) == 0.0);
}

TEST_CASE("forward flow model rejects non-positive distance") {
  CHECK_THROWS_AS(forward_flow_model(1.0, 0.0, 0.3), std::domain_error);
  CHECK_THROWS_AS(forward_flow_model(1.0, -1.0, 0.3), std::domain_error);
}

TEST_CASE("pixel angles follow the pinhole formula") {
  const CameraIntrinsics in{240, 180, deg_to_rad(60.0), deg_to_rad(45.0)};
  const AngleGrid g(in);
  CHECK(g.alpha_h(239) == doctest::Approx(std::atan((2.0 * 239.5 / 240.0 - 1.0) * std::tan(deg_to_rad(30.0)))));
  CHECK(g.alpha_v(0) == doctest::Approx(-std::atan((1.0 - 1.0 / 180.0) * std::tan(deg_to_rad(22.5)))));
  // Outermost pixel centres sit half a pixel inside the field of view.
  CHECK(g.alpha_h(239) < deg_to_rad(30.0));
  CHECK(g.alpha_h(239) > deg_to_rad(29.5));
}

TEST_CASE("angle grid is antisymmetric and monotone") {
  for (const auto& in : {CameraIntrinsics{240, 180, deg_to_rad(60.0), deg_to_rad(45.0)},
                         CameraIntrinsics{41, 17, deg_to_rad(90.0), deg_to_rad(30.0)}}) {
    const AngleGrid g(in);
    for (int x = 0; x < g.width(); ++x) {
      CHECK(g.alpha_h(x) == -g.alpha_h(g.width() - 1 - x));
      CHECK(g.cs_h(x) == doctest::Approx(std::cos(g.alpha_h(x)) * std::sin(g.alpha_h(x))));
      CHECK(g.tan_h(x) == doctest::Approx(std::tan(g.alpha_h(x))));
      if (x > 0) CHECK(g.alpha_h(x) > g.alpha_h(x - 1));
    }
    for (int y = 0; y < g.height(); ++y) CHECK(g.alpha_v(y) == -g.alpha_v(g.height() - 1 - y));
  }
}

TEST_CASE("odd grids put a pixel on the optical axis") {
  const AngleGrid g({41, 17, deg_to_rad(90.0), deg_to_rad(30.0)});
  CHECK(g.alpha_h(20) == 0.0);
  CHECK(g.alpha_v(8) == 0.0);
  CHECK(g.cs_h(20) == 0.0);
}

TEST_CASE("index is row-major") {
  const AngleGrid g({7, 5, 1.0, 1.0});
  CHECK(g.index(0, 0) == 0);
  CHECK(g.index(6, 0) == 6);
  CHECK(g.index(0, 1) == 7);
  CHECK(g.size() == 35);
}

TEST_CASE("invalid intrinsics are rejected") {
  CHECK_THROWS_AS(AngleGrid({1, 10, 1.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(AngleGrid({10, 10, 0.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(AngleGrid({10, 10, 1.0, kPi}), std::invalid_argument);
  CHECK_THROWS_AS(AngleGrid({10, 10, std::nan(""), 1.0}), std::invalid_argument);
}

TEST_CASE("forward flow points away from the optical axis") {
  const AngleGrid g({32, 24, deg_to_rad(60.0), deg_to_rad(45.0)});
  for (int x = 0; x < g.width(); ++x) {
    const double f = forward_flow_model(1.0, 3.0, g.alpha_h(x));
    // Sign convention: flow = -(v/d) cs, so it opposes the angle for v > 0.
    CHECK(f * g.alpha_h(x) < 0.0);
    CHECK(forward_flow_model(-1.0, 3.0, g.alpha_h(x)) == -f);
  }
}

TEST_CASE("derotation removes the yaw field") {
  const AngleGrid g({48, 36, deg_to_rad(60.0), deg_to_rad(45.0)});
  const std::vector<double> depth(g.size(), 4.0);
  const FlowField trans = test::forward_flow(g, depth, 0.8);
  const FlowField rot = rotational_flow(0.3, g);
  FlowField sum = trans;
  for (std::size_t i = 0; i < sum.size(); ++i) {
    sum.u[i] += rot.u[i];
    sum.w[i] += rot.w[i];
  }
  const FlowField back = derotate(sum, 0.3, g);
  for (std::size_t i = 0; i < sum.size(); ++i) {
    CHECK(back.u[i] == doctest::Approx(trans.u[i]).epsilon(1e-12));
    CHECK(back.w[i] == doctest::Approx(trans.w[i]).epsilon(1e-12));
  }
  // Yaw shifts every horizontal angle by the same amount.
  for (std::size_t i = 0; i < rot.size(); ++i) CHECK(rot.u[i] == -0.3);
}
