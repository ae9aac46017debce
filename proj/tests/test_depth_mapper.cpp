#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

#include "doctest.h"
#include "flivver/depth_mapper.hpp"
#include "flivver/tv_solver.hpp"
#include "test_support.hpp"

using namespace flivver;
using flivver::test::forward_flow;

namespace {

const CameraIntrinsics kCam{96, 72, deg_to_rad(60.0), deg_to_rad(45.0)};

// Depth tiles of 2, 4 and 8 m.
std::vector<double> mixed_depths(const AngleGrid& grid) { return tiled_depth_map(grid, 7.5, 2.0, 8.0); }

RatioMap uniform_ratio(int w, int h, double r) {
  RatioMap m;
  m.width = w;
  m.height = h;
  m.r.assign(static_cast<std::size_t>(w * h), r);
  m.mask.assign(m.r.size(), 1);
  return m;
}

double mean_error(const DepthMap& m, const std::vector<double>& truth, const AngleGrid& grid, double min_deg,
                  double max_deg) {
  double sum = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < grid.height(); ++y) {
    for (int x = 0; x < grid.width(); ++x) {
      const double ecc = rad_to_deg(std::max(std::abs(grid.alpha_h(x)), std::abs(grid.alpha_v(y))));
      const std::size_t i = grid.index(x, y);
      if (!m.mask[i] || ecc < min_deg || ecc > max_deg) continue;
      sum += std::abs(m.d[i] - truth[i]) / truth[i];
      ++n;
    }
  }
  REQUIRE(n > 0);
  return sum / static_cast<double>(n);
}

}  // namespace

TEST_CASE("direct inversion of a uniform ratio") {
  const auto m = direct_depth(uniform_ratio(4, 3, 0.5), 1.0);
  REQUIRE(m);
  CHECK(m->valid_count() == 12);
  for (double d : m->d) CHECK(d == doctest::Approx(2.0));
  CHECK(m->method == DepthMethod::direct);
}

TEST_CASE("direct inversion masks zero, tiny and sign-inconsistent ratios") {
  auto r = uniform_ratio(4, 1, 0.5);
  r.r[1] = 0.0;
  r.r[2] = -0.5;
  r.mask[3] = 0;
  const auto m = direct_depth(r, 1.0);
  REQUIRE(m);
  CHECK(m->mask == std::vector<std::uint8_t>{1, 0, 0, 0});
  // Receding: only the negative ratio is consistent.
  const auto back = direct_depth(r, -1.0);
  REQUIRE(back);
  CHECK(back->mask == std::vector<std::uint8_t>{0, 0, 1, 0});
  CHECK(back->d[2] == doctest::Approx(2.0));
  CHECK_FALSE(direct_depth(r, 0.01).has_value());
  CHECK_FALSE(direct_depth(r, std::nan("")).has_value());
}

TEST_CASE("direct depth reproduces mixed depths away from the centre") {
  const AngleGrid grid(kCam);
  const auto depth = mixed_depths(grid);
  const auto ratio = matched_ratio_map(forward_flow(grid, depth, 1.2), grid);
  const auto m = direct_depth(ratio, 1.2);
  REQUIRE(m);
  std::set<double> levels(depth.begin(), depth.end());
  CHECK(levels.count(2.0) == 1);
  CHECK(levels.count(8.0) == 1);
  double worst = 0.0;
  for (std::size_t i = 0; i < depth.size(); ++i) {
    if (m->mask[i]) worst = std::max(worst, std::abs(m->d[i] - depth[i]) / depth[i]);
  }
  CHECK(worst < 0.01);
}

TEST_CASE("closed-form depth per field") {
  PooledStats s;
  s.r_bar = 0.5;
  s.r2_bar = 0.25;
  const auto d = closed_form_depth(s, 0.5, 0.5);
  REQUIRE(d);
  CHECK(*d == doctest::Approx(2.0));
  CHECK_FALSE(closed_form_depth(s, 0.5, 0.0).has_value());
  CHECK_FALSE(closed_form_depth(s, 0.25, 0.5).has_value());
  for (double k : {0.1, 3.0, 10.0}) {
    const auto dk = closed_form_depth(s, 0.5, 0.5 * k);
    REQUIRE(dk);
    CHECK(*dk == doctest::Approx(2.0 * k));
  }
}

TEST_CASE("closed-form depths follow the velocity gate") {
  FieldTerms ok{3, 0.5, 0.25, 0.5, 0.5, 1.0};
  FieldTerms gated{4, 0.5, 0.25, 0.5, 0.5, std::nullopt};
  const auto out = closed_form_depths({ok, gated});
  REQUIRE(out.size() == 1);
  CHECK(out[0].field_id == 3);
  CHECK(out[0].d == doctest::Approx(2.0));
}

TEST_CASE("gamma zero leaves the flow untouched") {
  const AngleGrid grid(kCam);
  const auto flow = test::random_flow(grid.width(), grid.height(), 3, 0.1);
  TVRepairConfig cfg;
  cfg.gamma = 0.0;
  cfg.beta_hat = 0.3;
  const auto res = tv_repair(flow, grid, cfg);
  CHECK(res.flow.u == flow.u);
  CHECK(res.flow.w == flow.w);
  CHECK(res.beta_h == 0.0);
  CHECK(res.beta_v == 0.0);
  CHECK(res.converged);
}

TEST_CASE("gamma zero repaired depth matches direct depth off centre") {
  const AngleGrid grid(kCam);
  const auto depth = mixed_depths(grid);
  const auto flow = forward_flow(grid, depth, 1.0);
  TVRepairConfig cfg;
  cfg.gamma = 0.0;
  const auto rep = repaired_depth(tv_repair(flow, grid, cfg).flow, grid, 1.0);
  const auto dir = direct_depth(ratio_map(flow, grid), 1.0);
  REQUIRE(rep);
  REQUIRE(dir);
  CHECK(rep->method == DepthMethod::tv_repaired);
  for (std::size_t i = 0; i < depth.size(); ++i) {
    if (dir->mask[i]) CHECK(rep->d[i] == doctest::Approx(dir->d[i]).epsilon(1e-12));
  }
}

TEST_CASE("injected constant offset is recovered") {
  const AngleGrid grid(kCam);
  const std::vector<double> depth(grid.size(), 4.0);
  auto flow = forward_flow(grid, depth, 1.0);
  const double eps = 0.002;
  for (auto& u : flow.u) u += eps;
  for (auto& w : flow.w) w += eps;
  TVRepairConfig cfg;
  cfg.gamma = 1e-3;
  cfg.max_iterations = 500;
  cfg.convergence_tol = 1e-14;
  const auto res = tv_repair(flow, grid, cfg);
  CHECK(res.beta_h == doctest::Approx(-eps).epsilon(0.02));
  CHECK(res.beta_v == doctest::Approx(-eps).epsilon(0.02));
  const auto ratio = ratio_map(res.flow, grid, 0.0);
  for (int x = 0; x < grid.width(); ++x) {
    const std::size_t i = grid.index(x, grid.height() / 3);
    CHECK(-ratio.r[i] == doctest::Approx(-0.25).epsilon(0.02));
  }
}

TEST_CASE("repair objective is non-increasing and beats the unrepaired flow") {
  const AngleGrid grid(kCam);
  auto flow = forward_flow(grid, mixed_depths(grid), 1.0);
  const auto noise = test::random_flow(grid.width(), grid.height(), 5, 0.01);
  for (std::size_t i = 0; i < flow.size(); ++i) {
    flow.u[i] += noise.u[i];
    flow.w[i] += noise.w[i];
  }
  TVRepairConfig cfg;
  cfg.gamma = 1e-3;
  const auto res = tv_repair(flow, grid, cfg);
  REQUIRE_FALSE(res.objective_history.empty());
  CHECK(res.objective_history.front() <= res.initial_objective);
  for (std::size_t k = 1; k < res.objective_history.size(); ++k) {
    CHECK(res.objective_history[k] <= res.objective_history[k - 1] * (1.0 + 1e-12));
  }
  CHECK(tv_objective(flow, grid, res.flow, res.beta_h, res.beta_v, cfg.gamma) ==
        doctest::Approx(res.objective_history.back()).epsilon(1e-9));
  cfg.max_iterations = 1;
  cfg.convergence_tol = 0.0;
  CHECK_FALSE(tv_repair(flow, grid, cfg).converged);
}

TEST_CASE("noiseless repaired depth covers the centre") {
  const AngleGrid grid(kCam);
  const auto depth = mixed_depths(grid);
  const auto flow = forward_flow(grid, depth, 1.0);
  const auto res = tv_repair(flow, grid, {});
  const auto m = repaired_depth(res.flow, grid, 1.0);
  REQUIRE(m);
  CHECK(m->valid_count() == depth.size());
  CHECK(mean_error(*m, depth, grid, 0.0, 90.0) < 0.05);
  CHECK(mean_error(*m, depth, grid, 0.0, 3.0) < 0.05);
}

TEST_CASE("off-centre epipole: repair beats direct inversion near the centre") {
  const AngleGrid grid(kCam);
  const auto depth = mixed_depths(grid);
  auto flow = forward_flow(grid, depth, 1.0);
  // Small lateral velocity: a near-uniform horizontal flow component.
  const double eps = 0.004;
  for (auto& u : flow.u) u += eps;
  const auto dir = direct_depth(ratio_map(flow, grid), 1.0);
  const auto rep = repaired_depth(tv_repair(flow, grid, {}).flow, grid, 1.0);
  REQUIRE(dir);
  REQUIRE(rep);
  const double e_dir = mean_error(*dir, depth, grid, 3.0, 10.0);
  const double e_rep = mean_error(*rep, depth, grid, 3.0, 10.0);
  MESSAGE("direct " << e_dir << " repaired " << e_rep);
  CHECK(e_rep < e_dir);
}

TEST_CASE("staircasing: distinct levels are non-increasing in gamma") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> noise(0.0, 0.003);
  const AngleGrid grid(kCam);
  const auto depth = mixed_depths(grid);
  const int y = grid.height() / 4;
  std::vector<double> u(static_cast<std::size_t>(grid.width()));
  auto cs = grid.cs_h();
  for (int x = 0; x < grid.width(); ++x) {
    u[static_cast<std::size_t>(x)] = -cs[static_cast<std::size_t>(x)] / depth[grid.index(x, y)] + noise(rng);
  }
  std::size_t prev = u.size() + 1;
  for (double gamma : {1e-5, 1e-4, 1e-3, 1e-2, 1e-1}) {
    const auto sol = tv_repair_line(u, cs, gamma, 2000, 1e-15);
    std::size_t levels = 1;
    for (std::size_t i = 1; i < sol.z.size(); ++i) levels += std::abs(sol.z[i] - sol.z[i - 1]) > 1e-9 ? 1 : 0;
    MESSAGE("gamma " << gamma << " levels " << levels);
    CHECK(levels <= prev);
    prev = levels;
  }
  CHECK(prev < 10);
}

TEST_CASE("closed form agrees with direct inversion on constant-acceleration data") {
  // Field at d = 3 m moving at v = 1 with a = 0.4: r = 1/3, r_dot = a/d + r^2.
  const double d = 3.0, v = 1.0, a = 0.4;
  PooledStats s;
  s.r_bar = v / d;
  s.r2_bar = s.r_bar * s.r_bar;
  const auto cf = closed_form_depth(s, a / d + s.r2_bar, a);
  REQUIRE(cf);
  CHECK(std::abs(*cf - v / s.r_bar) / d < 0.01);
}

TEST_CASE("depth scales with the world") {
  const AngleGrid grid(kCam);
  const auto depth = mixed_depths(grid);
  const auto base = direct_depth(ratio_map(forward_flow(grid, depth, 1.0), grid), 1.0);
  REQUIRE(base);
  std::vector<double> scaled(depth);
  for (auto& d : scaled) d *= 10.0;
  const auto big = direct_depth(ratio_map(forward_flow(grid, scaled, 10.0), grid), 10.0);
  REQUIRE(big);
  for (std::size_t i = 0; i < depth.size(); ++i) {
    if (base->mask[i]) CHECK(big->d[i] == doctest::Approx(10.0 * base->d[i]).epsilon(1e-12));
  }
}

TEST_CASE("config validation") {
  TVRepairConfig cfg;
  cfg.gamma = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.max_iterations = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  DirectDepthConfig dc;
  dc.v_min = -1.0;
  CHECK_THROWS_AS(dc.validate(), std::invalid_argument);
}
