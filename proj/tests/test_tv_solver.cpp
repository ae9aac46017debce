#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "flivver/tv_solver.hpp"

using namespace flivver;

namespace {

double primal(const std::vector<double>& y, const std::vector<double>& w, double lambda,
              const std::vector<double>& x) {
  double f = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) f += 0.5 * w[i] * (x[i] - y[i]) * (x[i] - y[i]);
  for (std::size_t i = 1; i < x.size(); ++i) f += lambda * std::abs(x[i] - x[i - 1]);
  return f;
}

// Independent reference: accelerated projected gradient on the dual,
// x = y - W^-1 D^T p with |p_i| <= lambda.
std::vector<double> dual_reference(const std::vector<double>& y, const std::vector<double>& w, double lambda,
                                   int iterations) {
  const std::size_t n = y.size();
  const double wmin = *std::min_element(w.begin(), w.end());
  const double step = wmin / 4.0;
  std::vector<double> p(n - 1, 0.0), q = p, prev = p, x(n);
  auto primal_of = [&](const std::vector<double>& dual) {
    for (std::size_t i = 0; i < n; ++i) {
      double dtp = 0.0;
      if (i > 0) dtp += dual[i - 1];
      if (i + 1 < n) dtp -= dual[i];
      x[i] = y[i] - dtp / w[i];
    }
  };
  double tk = 1.0;
  for (int it = 0; it < iterations; ++it) {
    primal_of(q);
    prev = p;
    for (std::size_t i = 0; i + 1 < n; ++i) p[i] = std::clamp(q[i] + step * (x[i + 1] - x[i]), -lambda, lambda);
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
    for (std::size_t i = 0; i + 1 < n; ++i) q[i] = p[i] + (tk - 1.0) / tn * (p[i] - prev[i]);
    tk = tn;
  }
  primal_of(p);
  return x;
}

std::vector<double> solve(const std::vector<double>& y, const std::vector<double>& w, double lambda) {
  std::vector<double> x(y.size());
  weighted_tv_denoise(y, w, lambda, x);
  return x;
}

}  // namespace

TEST_CASE("zero lambda is the identity") {
  const std::vector<double> y{1.0, -2.0, 3.5, 0.25};
  const std::vector<double> w{1.0, 2.0, 0.5, 3.0};
  CHECK(solve(y, w, 0.0) == y);
}

TEST_CASE("large lambda returns the weighted mean") {
  const std::vector<double> y{1.0, -2.0, 3.5, 0.25, 4.0};
  const std::vector<double> w{1.0, 2.0, 0.5, 3.0, 1.5};
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    num += w[i] * y[i];
    den += w[i];
  }
  for (double x : solve(y, w, 1e3)) CHECK(x == doctest::Approx(num / den).epsilon(1e-12));
}

TEST_CASE("two-point closed form") {
  const double y1 = 1.0, y2 = 3.0, w1 = 2.0, w2 = 0.5;
  const double merge = (y2 - y1) * w1 * w2 / (w1 + w2);  // smallest lambda that fuses the pair
  const double small = 0.5 * merge;
  const auto a = solve({y1, y2}, {w1, w2}, small);
  CHECK(a[0] == doctest::Approx(y1 + small / w1).epsilon(1e-14));
  CHECK(a[1] == doctest::Approx(y2 - small / w2).epsilon(1e-14));
  const auto b = solve({y1, y2}, {w1, w2}, 1.5 * merge);
  const double mean = (w1 * y1 + w2 * y2) / (w1 + w2);
  CHECK(b[0] == doctest::Approx(mean).epsilon(1e-14));
  CHECK(b[1] == doctest::Approx(mean).epsilon(1e-14));
}

TEST_CASE("matches an independent iterative reference on a 64 pixel row") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> noise(0.0, 0.2);
  std::uniform_real_distribution<double> weight(0.05, 1.0);
  std::vector<double> y(64), w(64);
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = (i < 20 ? 1.0 : i < 45 ? -0.5 : 2.0) + noise(rng);
    w[i] = weight(rng);
  }
  for (double lambda : {0.01, 0.1, 0.5}) {
    const auto x = solve(y, w, lambda);
    const auto ref = dual_reference(y, w, lambda, 200000);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(x[i] - ref[i]) < 1e-4);
    CHECK(primal(y, w, lambda, x) <= primal(y, w, lambda, ref) + 1e-12);
  }
}

TEST_CASE("solution is optimal against random perturbations") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> y(40), w(40, 1.0);
  for (auto& v : y) v = n(rng);
  const auto x = solve(y, w, 0.3);
  const double f0 = primal(y, w, 0.3, x);
  for (int trial = 0; trial < 200; ++trial) {
    auto p = x;
    for (auto& v : p) v += 1e-3 * n(rng);
    CHECK(primal(y, w, 0.3, p) >= f0 - 1e-12);
  }
}

TEST_CASE("invalid inputs are rejected") {
  std::vector<double> x(2);
  CHECK_THROWS_AS(weighted_tv_denoise(std::vector<double>{1.0, 2.0}, std::vector<double>{1.0}, 0.1, x),
                  std::invalid_argument);
  CHECK_THROWS_AS(weighted_tv_denoise(std::vector<double>{1.0, 2.0}, std::vector<double>{1.0, 0.0}, 0.1, x),
                  std::invalid_argument);
  CHECK_THROWS_AS(weighted_tv_denoise(std::vector<double>{1.0, 2.0}, std::vector<double>{1.0, 1.0}, -1.0, x),
                  std::invalid_argument);
}

TEST_CASE("line repair objective is non-increasing and recovers an offset") {
  const std::size_t n = 64;
  std::vector<double> cs(n), z_true(n), u(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double alpha = -0.5 + (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    cs[i] = std::cos(alpha) * std::sin(alpha);
    z_true[i] = i < 32 ? -0.25 : -0.5;
  }
  const double eps = 0.01;
  for (std::size_t i = 0; i < n; ++i) u[i] = cs[i] * z_true[i] + eps;
  const auto sol = tv_repair_line(u, cs, 1e-4, 2000, 1e-15);
  REQUIRE(sol.objective_history.size() >= 2);
  for (std::size_t k = 1; k < sol.objective_history.size(); ++k) {
    CHECK(sol.objective_history[k] <= sol.objective_history[k - 1] * (1.0 + 1e-12));
  }
  CHECK(sol.beta == doctest::Approx(-eps).epsilon(0.05));
  CHECK(tv_line_objective(u, cs, sol.z, sol.beta, 1e-4) <= tv_line_objective(u, cs, z_true, -eps, 1e-4) + 1e-12);
  CHECK_THROWS_AS(tv_repair_line(u, cs, -1.0), std::invalid_argument);
}

TEST_CASE("line repair matches a subgradient reference on a 64 pixel row") {
  const std::size_t n = 64;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> noise(0.0, 0.002);
  std::vector<double> cs(n), u(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double alpha = -0.5 + (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    cs[i] = std::cos(alpha) * std::sin(alpha);
    u[i] = -cs[i] * (i < 24 ? 0.5 : 0.2) + 0.003 + noise(rng);
  }
  const double gamma = 1e-3;
  const auto sol = tv_repair_line(u, cs, gamma, 5000, 1e-15);
  const double f_solver = tv_line_objective(u, cs, sol.z, sol.beta, gamma);

  // Plain subgradient descent on (z, beta) with diminishing steps from zero;
  // keeps the best iterate.
  std::vector<double> z(n, 0.0), g(n);
  double beta = 0.0;
  double best = tv_line_objective(u, cs, z, beta, gamma);
  for (int k = 0; k < 2000000; ++k) {
    double gb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = u[i] - cs[i] * z[i] + beta;
      g[i] = -2.0 * cs[i] * e;
      gb += 2.0 * e;
    }
    for (std::size_t i = 1; i < n; ++i) {
      const double s = z[i] > z[i - 1] ? 1.0 : (z[i] < z[i - 1] ? -1.0 : 0.0);
      g[i] += gamma * s;
      g[i - 1] -= gamma * s;
    }
    const double step = 0.5 / std::sqrt(1.0 + k);
    for (std::size_t i = 0; i < n; ++i) z[i] -= step * g[i];
    beta -= step * gb / static_cast<double>(n);
    best = std::min(best, tv_line_objective(u, cs, z, beta, gamma));
  }
  MESSAGE("solver " << f_solver << " subgradient " << best);
  CHECK(f_solver <= best + 1e-12);
  CHECK(best - f_solver <= 1e-4 * std::max(1.0, std::abs(f_solver)));
}
