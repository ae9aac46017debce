#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

#include "flivver/camera_geometry.hpp"
#include "flivver/flow_frontend.hpp"

namespace flivver {

/// Raised when a bank layout cannot be realised on the given grid.
class ConfigurationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Half-open run of pixels [x_begin, x_end) on one image row.
struct PixelSpan {
  int y = 0;
  int x_begin = 0;
  int x_end = 0;
};

/**
 * One box-weighted receptive field. Membership uses pixel centres and is
 * half-open on the angular box: alpha in [lo, hi). Pixels of the centre mask
 * are never part of the support. Every pixel carries the same weight
 * 1 / pixel_count; pooling renormalises over pixels that are valid in the
 * current ratio map.
 */
struct ReceptiveField {
  int id = 0;
  double center_h_rad = 0.0;
  double center_v_rad = 0.0;
  double half_width_rad = 0.0;
  std::vector<PixelSpan> spans;
  std::size_t pixel_count = 0;

  double weight() const { return pixel_count ? 1.0 / static_cast<double>(pixel_count) : 0.0; }
  bool contains(int x, int y) const;
};

struct BankConfig {
  int n_fields = 90;
  double field_deg = 5.0;
  double center_mask_deg = kDefaultCenterMaskDeg;

  void validate() const;
};

/// Default lattice for 90 fields: 9 rows by 10 columns on the view-angle grid.
inline constexpr int kDefaultBankRows = 9;
inline constexpr int kDefaultBankCols = 10;

struct FieldBank {
  int width = 0;
  int height = 0;
  int rows = 0;  // lattice rows
  int cols = 0;  // lattice columns
  std::vector<ReceptiveField> fields;

  std::size_t size() const { return fields.size(); }
};

struct PooledStats {
  double r_bar = 0.0;
  double r2_bar = 0.0;
  double t = 0.0;
  int field_id = 0;
  std::size_t support_count = 0;
};

/**
 * Places fields on a rows x cols lattice of centres spread uniformly over the
 * field of view (cell centres at (j + 0.5) / cols of the angular extent).
 * Among lattices whose number of non-empty placements equals n_fields, the
 * one with cols / rows closest to hfov / vfov wins. Placements with no pixel
 * left after the centre mask are skipped.
 */
FieldBank build_bank(const AngleGrid& grid, const BankConfig& cfg = {});

/// Pools over every field; fields with no valid pixel this frame are left out.
std::vector<PooledStats> pool(const RatioMap& ratio, const FieldBank& bank);

/// Same statistics for a single field; nullopt when no valid pixel.
std::optional<PooledStats> pool_field(const RatioMap& ratio, const ReceptiveField& field);

}  // namespace flivver
