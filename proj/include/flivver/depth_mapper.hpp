#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flivver/camera_geometry.hpp"
#include "flivver/flow_frontend.hpp"
#include "flivver/receptive_fields.hpp"
#include "flivver/velocity_estimator.hpp"

namespace flivver {

enum class DepthMethod { direct, closed_form, tv_repaired };

const char* to_string(DepthMethod method);

struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<double> d;  // metres; 0 where masked
  std::vector<std::uint8_t> mask;
  DepthMethod method = DepthMethod::direct;
  double t = 0.0;

  std::size_t valid_count() const;
};

struct DirectDepthConfig {
  double v_min = 0.05;  // m/s
  double r_min = 1e-6;  // 1/s

  void validate() const;
};

/// d = v / r on valid pixels. Pixels with |r| < r_min or a ratio whose sign
/// disagrees with v are masked. nullopt when |v| <= v_min.
std::optional<DepthMap> direct_depth(const RatioMap& ratio, double v, const DirectDepthConfig& cfg = {});

/// -accel / (r2_bar - r_dot) for one field; nullopt when the guard trips.
std::optional<double> closed_form_depth(const PooledStats& stats, double r_dot, double accel,
                                        const DegeneracyGuard& guard = {});

struct FieldDepth {
  int field_id = 0;
  double d = 0.0;
};

/// closed_form_depth over the time-aligned terms of one estimate.
std::vector<FieldDepth> closed_form_depths(const std::vector<FieldTerms>& terms, const DegeneracyGuard& guard = {});

/// Picked from the gamma sweep (L-curve corner) on the noisy standard scene.
inline constexpr double kDefaultTvGamma = 1e-4;

struct TVRepairConfig {
  double gamma = kDefaultTvGamma;
  double beta_hat = 0.0;  // starting offset, rad/s
  int max_iterations = 100;
  double convergence_tol = 1e-9;

  void validate() const;
};

struct TVRepairResult {
  /// Repaired flow with the offset removed, cs * z, so that ratio_map on it
  /// returns -z (the repaired v/d).
  FlowField flow;
  double beta_h = 0.0;
  double beta_v = 0.0;
  std::vector<double> objective_history;
  double initial_objective = 0.0;  // objective at the unrepaired flow, beta = beta_hat
  int iterations = 0;
  bool converged = false;
};

/**
 * Convex TV repair of the flow near the epipole. Horizontal flow is
 * regularised along rows and vertical flow along columns, each direction with
 * its own scalar offset:
 *   sum (u - cs z + beta)^2 + gamma * sum |z_{i+1} - z_i|
 * minimised jointly over z and beta by alternating exact 1-D TV solves on
 * every line with the closed-form offset update. The objective is
 * non-increasing per iteration. gamma = 0 returns the input unchanged with
 * both offsets 0. Running out of iterations leaves converged = false.
 */
TVRepairResult tv_repair(const FlowField& flow, const AngleGrid& grid, const TVRepairConfig& cfg = {});

/// Total objective of both directions for a candidate repair.
double tv_objective(const FlowField& flow, const AngleGrid& grid, const FlowField& repaired, double beta_h,
                    double beta_v, double gamma);

/// ratio_map on the repaired flow with no centre mask, then direct_depth.
std::optional<DepthMap> repaired_depth(const FlowField& flow_repaired, const AngleGrid& grid, double v,
                                       const DirectDepthConfig& cfg = {});

}  // namespace flivver
