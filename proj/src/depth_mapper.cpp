#include "flivver/depth_mapper.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "flivver/tv_solver.hpp"

namespace flivver {

namespace {

std::vector<double> floored_weights(std::span<const double> cs) {
  double wmax = 0.0;
  for (double c : cs) wmax = std::max(wmax, c * c);
  if (wmax == 0.0) throw std::invalid_argument("tv_repair: all cos*sin gains are zero");
  std::vector<double> w(cs.size());
  for (std::size_t i = 0; i < cs.size(); ++i) w[i] = std::max(cs[i] * cs[i], 1e-12 * wmax);
  return w;
}

// One direction of the repair. `stride` walks along a line, `step` between lines.
struct Direction {
  const std::vector<double>* flow;
  std::span<const double> cs;  // gain along the line
  std::size_t lines;
  std::size_t length;
  std::size_t stride;
  std::size_t step;

  std::size_t at(std::size_t line, std::size_t i) const { return line * step + i * stride; }
};

double direction_objective(const Direction& d, const std::vector<double>& z, double beta, double gamma) {
  double fit = 0.0;
  double tv = 0.0;
  for (std::size_t l = 0; l < d.lines; ++l) {
    for (std::size_t i = 0; i < d.length; ++i) {
      const std::size_t k = d.at(l, i);
      const double e = (*d.flow)[k] - d.cs[i] * z[k] + beta;
      fit += e * e;
      if (i > 0) tv += std::abs(z[k] - z[d.at(l, i - 1)]);
    }
  }
  return fit + gamma * tv;
}

void solve_lines(const Direction& d, const std::vector<double>& w, double beta, double gamma, std::vector<double>& z) {
  std::vector<double> y(d.length), x(d.length);
  for (std::size_t l = 0; l < d.lines; ++l) {
    for (std::size_t i = 0; i < d.length; ++i) {
      y[i] = d.cs[i] != 0.0 ? ((*d.flow)[d.at(l, i)] + beta) / d.cs[i] : 0.0;
    }
    weighted_tv_denoise(y, w, 0.5 * gamma, x);
    for (std::size_t i = 0; i < d.length; ++i) z[d.at(l, i)] = x[i];
  }
}

double best_beta(const Direction& d, const std::vector<double>& z) {
  double acc = 0.0;
  for (std::size_t l = 0; l < d.lines; ++l) {
    for (std::size_t i = 0; i < d.length; ++i) {
      const std::size_t k = d.at(l, i);
      acc += d.cs[i] * z[k] - (*d.flow)[k];
    }
  }
  return acc / static_cast<double>(d.lines * d.length);
}

std::vector<double> ratio_profile(const std::vector<double>& flow, const Direction& d) {
  std::vector<double> z(flow.size(), 0.0);
  for (std::size_t l = 0; l < d.lines; ++l) {
    for (std::size_t i = 0; i < d.length; ++i) {
      const std::size_t k = d.at(l, i);
      z[k] = d.cs[i] != 0.0 ? flow[k] / d.cs[i] : 0.0;
    }
  }
  return z;
}

Direction rows_of(const AngleGrid& grid, const std::vector<double>& plane) {
  const auto w = static_cast<std::size_t>(grid.width());
  return {&plane, grid.cs_h(), static_cast<std::size_t>(grid.height()), w, 1, w};
}

Direction cols_of(const AngleGrid& grid, const std::vector<double>& plane) {
  const auto w = static_cast<std::size_t>(grid.width());
  return {&plane, grid.cs_v(), w, static_cast<std::size_t>(grid.height()), w, 1};
}

}  // namespace

const char* to_string(DepthMethod method) {
  switch (method) {
    case DepthMethod::direct:
      return "direct";
    case DepthMethod::closed_form:
      return "closed_form";
    case DepthMethod::tv_repaired:
      return "tv_repaired";
  }
  return "unknown";
}

std::size_t DepthMap::valid_count() const {
  std::size_t n = 0;
  for (auto m : mask) n += m;
  return n;
}

void DirectDepthConfig::validate() const {
  if (!(v_min >= 0.0) || !(r_min >= 0.0)) throw std::invalid_argument("direct depth: v_min and r_min must be >= 0");
}

std::optional<DepthMap> direct_depth(const RatioMap& ratio, double v, const DirectDepthConfig& cfg) {
  cfg.validate();
  if (!std::isfinite(v) || !(std::abs(v) > cfg.v_min)) return std::nullopt;
  DepthMap out;
  out.width = ratio.width;
  out.height = ratio.height;
  out.method = DepthMethod::direct;
  out.t = ratio.t;
  out.d.assign(ratio.r.size(), 0.0);
  out.mask.assign(ratio.r.size(), 0);
  for (std::size_t i = 0; i < ratio.r.size(); ++i) {
    const double r = ratio.r[i];
    if (!ratio.mask[i] || !(std::abs(r) >= cfg.r_min) || (r > 0.0) != (v > 0.0)) continue;
    out.d[i] = v / r;
    out.mask[i] = 1;
  }
  return out;
}

std::optional<double> closed_form_depth(const PooledStats& stats, double r_dot, double accel,
                                        const DegeneracyGuard& guard) {
  const double denom = stats.r2_bar - r_dot;
  if (!(std::abs(denom) >= guard.eps_denom) || denom == 0.0) return std::nullopt;
  const double d = -accel / denom;
  if (!std::isfinite(d) || !(d > 0.0)) return std::nullopt;
  return d;
}

std::vector<FieldDepth> closed_form_depths(const std::vector<FieldTerms>& terms, const DegeneracyGuard& guard) {
  std::vector<FieldDepth> out;
  for (const auto& t : terms) {
    if (!t.v) continue;  // gated out with the velocity
    PooledStats ps;
    ps.r_bar = t.r_bar;
    ps.r2_bar = t.r2_bar;
    if (auto d = closed_form_depth(ps, t.r_dot, t.accel, guard)) out.push_back({t.field_id, *d});
  }
  return out;
}

void TVRepairConfig::validate() const {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("tv repair: gamma must be >= 0");
  if (!std::isfinite(beta_hat)) throw std::invalid_argument("tv repair: beta_hat must be finite");
  if (max_iterations < 1) throw std::invalid_argument("tv repair: max_iterations must be >= 1");
  if (!(convergence_tol >= 0.0)) throw std::invalid_argument("tv repair: convergence_tol must be >= 0");
}

double tv_objective(const FlowField& flow, const AngleGrid& grid, const FlowField& repaired, double beta_h,
                    double beta_v, double gamma) {
  const Direction dh = rows_of(grid, flow.u);
  const Direction dv = cols_of(grid, flow.w);
  return direction_objective(dh, ratio_profile(repaired.u, dh), beta_h, gamma) +
         direction_objective(dv, ratio_profile(repaired.w, dv), beta_v, gamma);
}

TVRepairResult tv_repair(const FlowField& flow, const AngleGrid& grid, const TVRepairConfig& cfg) {
  cfg.validate();
  if (flow.width != grid.width() || flow.height != grid.height() || flow.u.size() != grid.size() ||
      flow.w.size() != grid.size()) {
    throw std::invalid_argument("tv_repair: flow dimensions do not match the angle grid");
  }
  TVRepairResult res;
  res.flow = flow;
  if (cfg.gamma == 0.0) {
    res.converged = true;
    return res;
  }
  const Direction dh = rows_of(grid, flow.u);
  const Direction dv = cols_of(grid, flow.w);
  const auto wh = floored_weights(grid.cs_h());
  const auto wv = floored_weights(grid.cs_v());
  res.beta_h = cfg.beta_hat;
  res.beta_v = cfg.beta_hat;
  res.initial_objective = direction_objective(dh, ratio_profile(flow.u, dh), res.beta_h, cfg.gamma) +
                          direction_objective(dv, ratio_profile(flow.w, dv), res.beta_v, cfg.gamma);

  std::vector<double> zh(flow.size()), zv(flow.size());
  double prev = res.initial_objective;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    solve_lines(dh, wh, res.beta_h, cfg.gamma, zh);
    res.beta_h = best_beta(dh, zh);
    solve_lines(dv, wv, res.beta_v, cfg.gamma, zv);
    res.beta_v = best_beta(dv, zv);
    const double f = direction_objective(dh, zh, res.beta_h, cfg.gamma) +
                     direction_objective(dv, zv, res.beta_v, cfg.gamma);
    res.objective_history.push_back(f);
    res.iterations = it + 1;
    const bool done = prev - f <= cfg.convergence_tol * std::max(f, 1e-300);
    prev = f;
    if (done) {
      res.converged = true;
      break;
    }
  }
  for (std::size_t l = 0; l < dh.lines; ++l) {
    for (std::size_t i = 0; i < dh.length; ++i) res.flow.u[dh.at(l, i)] = dh.cs[i] * zh[dh.at(l, i)];
  }
  for (std::size_t l = 0; l < dv.lines; ++l) {
    for (std::size_t i = 0; i < dv.length; ++i) res.flow.w[dv.at(l, i)] = dv.cs[i] * zv[dv.at(l, i)];
  }
  return res;
}

std::optional<DepthMap> repaired_depth(const FlowField& flow_repaired, const AngleGrid& grid, double v,
                                       const DirectDepthConfig& cfg) {
  auto out = direct_depth(ratio_map(flow_repaired, grid, 0.0), v, cfg);
  if (out) out->method = DepthMethod::tv_repaired;
  return out;
}

}  // namespace flivver
