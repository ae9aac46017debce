#include "flivver/flow_frontend.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace flivver {

namespace {

void require_same_shape(const FlowField& flow, const AngleGrid& grid, const char* who) {
  if (flow.width != grid.width() || flow.height != grid.height() || flow.u.size() != grid.size() ||
      flow.w.size() != grid.size()) {
    throw std::invalid_argument(std::string(who) + ": flow dimensions do not match the angle grid");
  }
}

// Per-axis validity of the cos*sin division.
std::vector<std::uint8_t> axis_validity(std::span<const double> alpha, std::span<const double> cs,
                                        double center_mask_deg) {
  const double limit = deg_to_rad(center_mask_deg);
  std::vector<std::uint8_t> valid(alpha.size());
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    valid[i] = (std::abs(alpha[i]) >= limit && cs[i] != 0.0) ? 1 : 0;
  }
  return valid;
}

double trapezoid_mean(const std::deque<double>& window, int stagger) {
  double sum = 0.5 * (window.front() + window.back());
  for (std::size_t k = 1; k + 1 < window.size(); ++k) sum += window[k];
  return sum / static_cast<double>(stagger);
}

}  // namespace

std::size_t RatioMap::valid_count() const {
  std::size_t n = 0;
  for (auto m : mask) n += m;
  return n;
}

void StaggerConfig::validate() const {
  if (flow_stagger_frames < 1) {
    throw std::invalid_argument("stagger config: flow_stagger_frames must be >= 1");
  }
  if (!(fps > 0.0) || !std::isfinite(fps)) {
    throw std::invalid_argument("stagger config: fps must be positive");
  }
}

FlowStagger::FlowStagger(StaggerConfig cfg) : cfg_(cfg) { cfg_.validate(); }

bool FlowStagger::warming_up() const {
  return buffer_.size() < static_cast<std::size_t>(cfg_.flow_stagger_frames) + 1;
}

std::optional<FlowField> FlowStagger::push(FlowField sample) {
  if (!buffer_.empty() &&
      (sample.width != buffer_.front().width || sample.height != buffer_.front().height)) {
    throw std::invalid_argument("FlowStagger: frame size changed mid-stream");
  }
  buffer_.push_back(std::move(sample));
  const auto window = static_cast<std::size_t>(cfg_.flow_stagger_frames) + 1;
  if (buffer_.size() > window) buffer_.pop_front();
  if (buffer_.size() < window) return std::nullopt;

  const FlowField& first = buffer_.front();
  const FlowField& last = buffer_.back();
  FlowField out(first.width, first.height, first.t);
  const double inv = 1.0 / static_cast<double>(cfg_.flow_stagger_frames);
  const std::size_t n = first.size();
  for (std::size_t i = 0; i < n; ++i) {
    out.u[i] = 0.5 * (first.u[i] + last.u[i]);
    out.w[i] = 0.5 * (first.w[i] + last.w[i]);
  }
  for (std::size_t k = 1; k + 1 < buffer_.size(); ++k) {
    const FlowField& f = buffer_[k];
    for (std::size_t i = 0; i < n; ++i) {
      out.u[i] += f.u[i];
      out.w[i] += f.w[i];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    out.u[i] *= inv;
    out.w[i] *= inv;
  }
  return out;
}

ScalarStagger::ScalarStagger(StaggerConfig cfg) : cfg_(cfg) { cfg_.validate(); }

std::optional<double> ScalarStagger::push(double sample) {
  buffer_.push_back(sample);
  const auto window = static_cast<std::size_t>(cfg_.flow_stagger_frames) + 1;
  if (buffer_.size() > window) buffer_.pop_front();
  if (buffer_.size() < window) return std::nullopt;
  return trapezoid_mean(buffer_, cfg_.flow_stagger_frames);
}

std::vector<FlowField> staggered_flow(const std::vector<FlowField>& frames, const StaggerConfig& cfg) {
  FlowStagger stagger(cfg);
  std::vector<FlowField> out;
  for (const auto& f : frames) {
    if (auto s = stagger.push(f)) out.push_back(std::move(*s));
  }
  return out;
}

FlowField derotate(const FlowField& flow, double yaw_rate, const AngleGrid& grid) {
  require_same_shape(flow, grid, "derotate");
  if (!std::isfinite(yaw_rate)) throw std::invalid_argument("derotate: non-finite gyro reading");
  FlowField out = flow;
  if (yaw_rate == 0.0) return out;
  const double du = yaw_flow_h(yaw_rate);
  for (int y = 0; y < grid.height(); ++y) {
    const double csv = grid.cs_v(y);
    for (int x = 0; x < grid.width(); ++x) {
      const std::size_t i = grid.index(x, y);
      out.u[i] -= du;
      out.w[i] -= yaw_flow_v(yaw_rate, grid.tan_h(x), csv);
    }
  }
  return out;
}

FlowField apply_full_matched_filter(const FlowField& flow, const AngleGrid& grid) {
  require_same_shape(flow, grid, "apply_full_matched_filter");
  FlowField out(flow.width, flow.height, flow.t);
  for (int y = 0; y < grid.height(); ++y) {
    const double ev = grid.cs_v(y);
    for (int x = 0; x < grid.width(); ++x) {
      const double eh = grid.cs_h(x);
      const double norm2 = eh * eh + ev * ev;
      const std::size_t i = grid.index(x, y);
      if (norm2 == 0.0) continue;  // optical axis: no expected direction
      const double a = flow.u[i] * ev;
      const double b = flow.w[i] * eh;
      // Already on the expected direction up to rounding: keep it, so that a
      // second pass is the identity.
      if (std::abs(a - b) <= 8.0 * std::numeric_limits<double>::epsilon() * (std::abs(a) + std::abs(b))) {
        out.u[i] = flow.u[i];
        out.w[i] = flow.w[i];
        continue;
      }
      const double k = (flow.u[i] * eh + flow.w[i] * ev) / norm2;
      out.u[i] = k * eh;
      out.w[i] = k * ev;
    }
  }
  return out;
}

RatioMap ratio_map(const FlowField& flow, const AngleGrid& grid, double center_mask_deg) {
  require_same_shape(flow, grid, "ratio_map");
  const auto valid_h = axis_validity(grid.alpha_h(), grid.cs_h(), center_mask_deg);
  const auto valid_v = axis_validity(grid.alpha_v(), grid.cs_v(), center_mask_deg);
  RatioMap out;
  out.width = flow.width;
  out.height = flow.height;
  out.t = flow.t;
  out.r.assign(grid.size(), 0.0);
  out.mask.assign(grid.size(), 0);
  for (int y = 0; y < grid.height(); ++y) {
    const bool vv = valid_v[static_cast<std::size_t>(y)] != 0;
    const double csv = grid.cs_v(y);
    for (int x = 0; x < grid.width(); ++x) {
      const bool vh = valid_h[static_cast<std::size_t>(x)] != 0;
      const std::size_t i = grid.index(x, y);
      if (vh && vv) {
        out.r[i] = 0.5 * (-flow.u[i] / grid.cs_h(x) - flow.w[i] / csv);
        out.mask[i] = 1;
      } else if (vh) {
        out.r[i] = -flow.u[i] / grid.cs_h(x);
        out.mask[i] = 1;
      } else if (vv) {
        out.r[i] = -flow.w[i] / csv;
        out.mask[i] = 1;
      }
    }
  }
  return out;
}

void matched_ratio_map(const FlowField& flow, const AngleGrid& grid, double center_mask_deg, RatioMap& out) {
  require_same_shape(flow, grid, "matched_ratio_map");
  const auto valid_h = axis_validity(grid.alpha_h(), grid.cs_h(), center_mask_deg);
  const auto valid_v = axis_validity(grid.alpha_v(), grid.cs_v(), center_mask_deg);
  const double* cs_h = grid.cs_h().data();
  const std::size_t width = static_cast<std::size_t>(grid.width());

  out.width = flow.width;
  out.height = flow.height;
  out.t = flow.t;
  out.r.resize(grid.size());
  out.mask.resize(grid.size());

  std::vector<double> csh2(width);
  for (std::size_t x = 0; x < width; ++x) csh2[x] = cs_h[x] * cs_h[x];

  for (int y = 0; y < grid.height(); ++y) {
    const double csv = grid.cs_v(y);
    const double csv2 = csv * csv;
    const std::size_t row = static_cast<std::size_t>(y) * width;
    const double* u = flow.u.data() + row;
    const double* w = flow.w.data() + row;
    double* r = out.r.data() + row;
    std::uint8_t* m = out.mask.data() + row;
    if (valid_v[static_cast<std::size_t>(y)]) {
      for (std::size_t x = 0; x < width; ++x) {
        r[x] = -(u[x] * cs_h[x] + w[x] * csv) / (csh2[x] + csv2);
        m[x] = 1;
      }
    } else {
      for (std::size_t x = 0; x < width; ++x) {
        const bool ok = valid_h[x] != 0;
        r[x] = ok ? -(u[x] * cs_h[x] + w[x] * csv) / (csh2[x] + csv2) : 0.0;
        m[x] = ok ? 1 : 0;
      }
    }
  }
}

RatioMap matched_ratio_map(const FlowField& flow, const AngleGrid& grid, double center_mask_deg) {
  RatioMap out;
  matched_ratio_map(flow, grid, center_mask_deg, out);
  return out;
}

}  // namespace flivver
