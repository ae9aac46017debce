#include "flivver/receptive_fields.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace flivver {

namespace {

struct Box {
  double h_lo, h_hi, v_lo, v_hi;
};

// Indices of pixel centres with lo <= alpha < hi, as [first, last).
std::pair<int, int> axis_range(std::span<const double> alpha, double lo, double hi) {
  const auto first = std::lower_bound(alpha.begin(), alpha.end(), lo);
  const auto last = std::lower_bound(alpha.begin(), alpha.end(), hi);
  return {static_cast<int>(first - alpha.begin()), static_cast<int>(last - alpha.begin())};
}

ReceptiveField make_field(const AngleGrid& grid, const Box& box, double mask_rad) {
  ReceptiveField f;
  f.center_h_rad = 0.5 * (box.h_lo + box.h_hi);
  f.center_v_rad = 0.5 * (box.v_lo + box.v_hi);
  f.half_width_rad = 0.5 * (box.h_hi - box.h_lo);
  const auto [x0, x1] = axis_range(grid.alpha_h(), box.h_lo, box.h_hi);
  const auto [y0, y1] = axis_range(grid.alpha_v(), box.v_lo, box.v_hi);
  if (x0 >= x1 || y0 >= y1) return f;

  // Columns with |alpha_h| < mask form one contiguous run [c0, c1).
  const auto ah = grid.alpha_h();
  const int c0 = static_cast<int>(std::upper_bound(ah.begin(), ah.end(), -mask_rad) - ah.begin());
  const int c1 = static_cast<int>(std::lower_bound(ah.begin(), ah.end(), mask_rad) - ah.begin());
  for (int y = y0; y < y1; ++y) {
    if (!(std::abs(grid.alpha_v(y)) < mask_rad) || c0 >= c1) {
      f.spans.push_back({y, x0, x1});
      continue;
    }
    if (x0 < std::min(x1, c0)) f.spans.push_back({y, x0, std::min(x1, c0)});
    if (std::max(x0, c1) < x1) f.spans.push_back({y, std::max(x0, c1), x1});
  }
  for (const auto& s : f.spans) f.pixel_count += static_cast<std::size_t>(s.x_end - s.x_begin);
  return f;
}

std::vector<ReceptiveField> layout(const AngleGrid& grid, int rows, int cols, double field_rad, double mask_rad) {
  const auto& in = grid.intrinsics();
  const double half = 0.5 * field_rad;
  std::vector<ReceptiveField> fields;
  for (int i = 0; i < rows; ++i) {
    const double cv = -0.5 * in.vfov_rad + (i + 0.5) * in.vfov_rad / rows;
    for (int j = 0; j < cols; ++j) {
      const double ch = -0.5 * in.hfov_rad + (j + 0.5) * in.hfov_rad / cols;
      ReceptiveField f = make_field(grid, {ch - half, ch + half, cv - half, cv + half}, mask_rad);
      if (f.pixel_count == 0) continue;
      f.id = static_cast<int>(fields.size());
      fields.push_back(std::move(f));
    }
  }
  return fields;
}

}  // namespace

bool ReceptiveField::contains(int x, int y) const {
  for (const auto& s : spans) {
    if (s.y == y && x >= s.x_begin && x < s.x_end) return true;
  }
  return false;
}

void BankConfig::validate() const {
  if (n_fields < 1) throw ConfigurationError("bank config: n_fields must be >= 1");
  if (!(field_deg > 0.0) || !std::isfinite(field_deg)) throw ConfigurationError("bank config: field_deg must be > 0");
  if (!(center_mask_deg >= 0.0) || !std::isfinite(center_mask_deg)) {
    throw ConfigurationError("bank config: center_mask_deg must be >= 0");
  }
}

FieldBank build_bank(const AngleGrid& grid, const BankConfig& cfg) {
  cfg.validate();
  const auto& in = grid.intrinsics();
  const double field_rad = deg_to_rad(cfg.field_deg);
  const double mask_rad = deg_to_rad(cfg.center_mask_deg);
  if (field_rad > in.hfov_rad + 1e-12 || field_rad > in.vfov_rad + 1e-12) {
    // A single field may cover the whole view; anything larger is clipped.
    if (cfg.n_fields != 1) {
      throw ConfigurationError("build_bank: a " + std::to_string(cfg.field_deg) +
                               " deg field does not fit the field of view");
    }
  }
  const double target = std::log(in.hfov_rad / in.vfov_rad);
  FieldBank best;
  double best_score = std::numeric_limits<double>::infinity();
  for (int rows = 1; rows <= cfg.n_fields; ++rows) {
    const int base = (cfg.n_fields + rows - 1) / rows;
    // Masked placements can only remove a handful of cells near the centre.
    for (int cols = base; cols <= base + 2; ++cols) {
      const double score = std::abs(std::log(static_cast<double>(cols) / rows) - target);
      if (score >= best_score) continue;
      auto fields = layout(grid, rows, cols, field_rad, mask_rad);
      if (static_cast<int>(fields.size()) != cfg.n_fields) continue;
      best_score = score;
      best.rows = rows;
      best.cols = cols;
      best.fields = std::move(fields);
    }
  }
  if (best.fields.empty()) {
    throw ConfigurationError("build_bank: cannot place " + std::to_string(cfg.n_fields) + " fields of " +
                             std::to_string(cfg.field_deg) + " deg on this grid");
  }
  best.width = grid.width();
  best.height = grid.height();
  return best;
}

std::optional<PooledStats> pool_field(const RatioMap& ratio, const ReceptiveField& field) {
  const auto width = static_cast<std::size_t>(ratio.width);
  const double* r = ratio.r.data();
  const std::uint8_t* m = ratio.mask.data();
  std::size_t n = 0;
  double sum = 0.0;
  for (const auto& s : field.spans) {
    const std::size_t row = static_cast<std::size_t>(s.y) * width;
    for (std::size_t i = row + static_cast<std::size_t>(s.x_begin); i < row + static_cast<std::size_t>(s.x_end); ++i) {
      if (m[i]) {
        sum += r[i];
        ++n;
      }
    }
  }
  if (n == 0) return std::nullopt;
  const double mean = sum / static_cast<double>(n);
  // Second pass on deviations: r2_bar = mean^2 + var keeps Jensen exact.
  double dev2 = 0.0;
  for (const auto& s : field.spans) {
    const std::size_t row = static_cast<std::size_t>(s.y) * width;
    for (std::size_t i = row + static_cast<std::size_t>(s.x_begin); i < row + static_cast<std::size_t>(s.x_end); ++i) {
      if (m[i]) {
        const double e = r[i] - mean;
        dev2 += e * e;
      }
    }
  }
  PooledStats st;
  st.r_bar = mean;
  st.r2_bar = mean * mean + dev2 / static_cast<double>(n);
  st.t = ratio.t;
  st.field_id = field.id;
  st.support_count = n;
  return st;
}

std::vector<PooledStats> pool(const RatioMap& ratio, const FieldBank& bank) {
  if (ratio.width != bank.width || ratio.height != bank.height ||
      ratio.r.size() != static_cast<std::size_t>(bank.width) * static_cast<std::size_t>(bank.height) ||
      ratio.mask.size() != ratio.r.size()) {
    throw std::invalid_argument("pool: ratio map dimensions do not match the field bank");
  }
  std::vector<PooledStats> out;
  out.reserve(bank.size());
  for (const auto& f : bank.fields) {
    if (auto st = pool_field(ratio, f)) out.push_back(*st);
  }
  return out;
}

}  // namespace flivver
