#pragma once

#include <span>
#include <vector>

namespace flivver {

/**
 * Exact minimiser of 0.5 * sum w_i (x_i - y_i)^2 + lambda * sum |x_{i+1} - x_i|
 * for w_i > 0, by the linear-time dynamic program that carries the
 * piecewise-linear derivative of the forward message as a sorted knot list.
 */
void weighted_tv_denoise(std::span<const double> y, std::span<const double> w, double lambda,
                         std::span<double> x);

/// sum (u - cs z + beta)^2 + gamma * sum |z_{i+1} - z_i| for one line.
double tv_line_objective(std::span<const double> u, std::span<const double> cs, std::span<const double> z,
                         double beta, double gamma);

struct TvLineSolution {
  std::vector<double> z;  // repaired ratio profile with the flow sign, (flow + beta) / cs
  double beta = 0.0;
  std::vector<double> objective_history;  // one entry per completed iteration
  int iterations = 0;
  bool converged = false;
};

/// Joint minimisation over (z, beta) of tv_line_objective on a single line by
/// alternating an exact TV step in z with the closed-form beta step.
TvLineSolution tv_repair_line(std::span<const double> u, std::span<const double> cs, double gamma,
                              int max_iterations = 500, double tol = 1e-12);

}  // namespace flivver
