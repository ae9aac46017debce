#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "flivver/flow_frontend.hpp"
#include "flivver/scene_simulator.hpp"
#include "test_support.hpp"

using namespace flivver;

TEST_CASE("staggered flow is the trapezoid mean of the window") {
  const StaggerConfig cfg{6, 30.0};
  std::vector<FlowField> frames;
  for (int k = 0; k < 10; ++k) {
    FlowField f(2, 1, k / 30.0);
    f.u = {static_cast<double>(k), static_cast<double>(k * k)};
    f.w = {1.0, -2.0 * k};
    frames.push_back(f);
  }
  const auto out = staggered_flow(frames, cfg);
  REQUIRE(out.size() == 4);  // one per input after stagger frames of warm-up
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double k0 = static_cast<double>(i);
    CHECK(out[i].t == doctest::Approx(k0 / 30.0));
    // Linear samples: trapezoid mean equals the window midpoint value.
    CHECK(out[i].u[0] == doctest::Approx(k0 + 3.0));
    CHECK(out[i].w[0] == doctest::Approx(1.0));
    CHECK(out[i].w[1] == doctest::Approx(-2.0 * (k0 + 3.0)));
    // k^2: (k0^2 / 2 + sum_{j=1..5} (k0+j)^2 + (k0+6)^2 / 2) / 6
    double expect = 0.5 * (k0 * k0 + (k0 + 6) * (k0 + 6));
    for (int j = 1; j < 6; ++j) expect += (k0 + j) * (k0 + j);
    CHECK(out[i].u[1] == doctest::Approx(expect / 6.0));
  }
}

TEST_CASE("scalar stagger matches the flow stagger") {
  const StaggerConfig cfg{4, 30.0};
  FlowStagger fs(cfg);
  ScalarStagger ss(cfg);
  for (int k = 0; k < 12; ++k) {
    const double x = std::sin(0.7 * k) + 0.1 * k;
    FlowField f(1, 1);
    f.u[0] = x;
    const auto a = fs.push(f);
    const auto b = ss.push(x);
    REQUIRE(a.has_value() == b.has_value());
    if (a) CHECK(a->u[0] == doctest::Approx(*b).epsilon(1e-15));
  }
}

TEST_CASE("stagger of a stationary flow is identity") {
  const AngleGrid g({16, 12, 1.0, 0.8});
  const FlowField f = test::random_flow(16, 12, 3);
  FlowStagger s({6, 30.0});
  std::optional<FlowField> out;
  for (int k = 0; k < 7; ++k) {
    CHECK(s.warming_up());
    out = s.push(f);
  }
  REQUIRE(out);
  CHECK_FALSE(s.warming_up());
  for (std::size_t i = 0; i < f.size(); ++i) CHECK(out->u[i] == doctest::Approx(f.u[i]).epsilon(1e-14));
}

TEST_CASE("stagger rejects bad configs and size changes") {
  CHECK_THROWS_AS(FlowStagger({0, 30.0}), std::invalid_argument);
  CHECK_THROWS_AS(FlowStagger({6, 0.0}), std::invalid_argument);
  FlowStagger s({2, 30.0});
  s.push(FlowField(4, 4));
  CHECK_THROWS_AS(s.push(FlowField(4, 5)), std::invalid_argument);
}

TEST_CASE("ratio map recovers v/d on noiseless forward flow") {
  const AngleGrid g({120, 90, deg_to_rad(60.0), deg_to_rad(45.0)});
  const auto d = tiled_depth_map(g, 7.5, 2.0, 8.0);
  const FlowField f = test::forward_flow(g, d, 0.7);
  for (const RatioMap& r : {ratio_map(f, g), matched_ratio_map(f, g)}) {
    std::size_t valid = 0;
    for (int y = 0; y < g.height(); ++y) {
      for (int x = 0; x < g.width(); ++x) {
        const std::size_t i = g.index(x, y);
        const bool center =
            std::abs(g.alpha_h(x)) < deg_to_rad(3.0) && std::abs(g.alpha_v(y)) < deg_to_rad(3.0);
        CHECK(r.mask[i] == (center ? 0 : 1));
        if (r.mask[i]) {
          CHECK(r.r[i] == doctest::Approx(0.7 / d[i]).epsilon(1e-12));
          ++valid;
        } else {
          CHECK(r.r[i] == 0.0);
        }
      }
    }
    CHECK(valid == r.valid_count());
  }
}

TEST_CASE("ratio map uses the valid axis alone near an axis") {
  const AngleGrid g({60, 40, deg_to_rad(60.0), deg_to_rad(45.0)});
  FlowField f(60, 40);
  // Pixel on the horizontal centre row but far out horizontally.
  const int x = 2;
  const int y = 20;
  const std::size_t i = g.index(x, y);
  f.u[i] = -0.5 * g.cs_h(x);
  f.w[i] = 123.0;  // ignored: vertical angle is inside the mask
  const RatioMap r = ratio_map(f, g);
  CHECK(r.mask[i] == 1);
  CHECK(r.r[i] == doctest::Approx(0.5));
}

TEST_CASE("full matched filter projects onto the expansion direction") {
  const AngleGrid g({64, 48, deg_to_rad(60.0), deg_to_rad(45.0)});
  const FlowField f = test::random_flow(64, 48, 11);
  const FlowField p = apply_full_matched_filter(f, g);
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) {
      const std::size_t i = g.index(x, y);
      const double eh = g.cs_h(x);
      const double ev = g.cs_v(y);
      // Parallel to (eh, ev), and the residual is orthogonal to it.
      CHECK(p.u[i] * ev - p.w[i] * eh == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
      CHECK((f.u[i] - p.u[i]) * eh + (f.w[i] - p.w[i]) * ev == doctest::Approx(0.0).scale(1.0));
    }
  }
}

TEST_CASE("full matched filter is exactly idempotent") {
  const AngleGrid g({201, 151, deg_to_rad(69.0), deg_to_rad(42.0)});
  const FlowField once = apply_full_matched_filter(test::random_flow(201, 151, 5), g);
  const FlowField twice = apply_full_matched_filter(once, g);
  CHECK(once.u == twice.u);
  CHECK(once.w == twice.w);
}

TEST_CASE("full matched filter keeps forward flow intact") {
  const AngleGrid g({40, 30, deg_to_rad(60.0), deg_to_rad(45.0)});
  const std::vector<double> d(g.size(), 3.0);
  const FlowField f = test::forward_flow(g, d, 1.2);
  const FlowField p = apply_full_matched_filter(f, g);
  for (std::size_t i = 0; i < f.size(); ++i) {
    CHECK(p.u[i] == doctest::Approx(f.u[i]).epsilon(1e-14));
    CHECK(p.w[i] == doctest::Approx(f.w[i]).epsilon(1e-14));
  }
}

TEST_CASE("isotropic noise power is halved by the projection") {
  const AngleGrid g({400, 300, deg_to_rad(60.0), deg_to_rad(45.0)});
  const FlowField noise = test::random_flow(400, 300, 21, 0.3);
  const FlowField p = apply_full_matched_filter(noise, g);
  double in = 0.0;
  double out = 0.0;
  for (std::size_t i = 0; i < noise.size(); ++i) {
    in += noise.u[i] * noise.u[i] + noise.w[i] * noise.w[i];
    out += p.u[i] * p.u[i] + p.w[i] * p.w[i];
  }
  CHECK(out / in == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("fused matched ratio map equals filter then ratio map") {
  const AngleGrid g({90, 70, deg_to_rad(60.0), deg_to_rad(45.0)});
  const FlowField f = test::random_flow(90, 70, 9, 0.1);
  const RatioMap a = matched_ratio_map(f, g);
  const RatioMap b = ratio_map(apply_full_matched_filter(f, g), g);
  CHECK(a.mask == b.mask);
  for (std::size_t i = 0; i < f.size(); ++i) CHECK(a.r[i] == doctest::Approx(b.r[i]).epsilon(1e-9).scale(1e-12));
  RatioMap reused;
  matched_ratio_map(f, g, kDefaultCenterMaskDeg, reused);
  CHECK(reused.r == a.r);
}

TEST_CASE("derotation leaves the flow unchanged at zero yaw and rejects bad input") {
  const AngleGrid g({10, 8, 1.0, 0.8});
  const FlowField f = test::random_flow(10, 8, 2);
  CHECK(derotate(f, 0.0, g).u == f.u);
  CHECK_THROWS_AS(derotate(f, std::nan(""), g), std::invalid_argument);
  CHECK_THROWS_AS(derotate(FlowField(9, 8), 0.1, g), std::invalid_argument);
  CHECK_THROWS_AS(ratio_map(FlowField(9, 8), g), std::invalid_argument);
}
