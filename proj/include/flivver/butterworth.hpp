#pragma once

#include <vector>

namespace flivver {

struct ButterworthSpec {
  int order = 1;
  double cutoff_fraction_of_nyquist = 0.04;

  void validate() const;
  bool operator==(const ButterworthSpec&) const = default;
};

enum class FilterInit {
  zero,          // internal state starts at rest
  steady_state,  // state primed so that the first input is a DC level
};

/**
 * Causal digital Butterworth low pass from the bilinear transform with the
 * cutoff pre-warped, so the -3 dB point lands exactly on
 * cutoff_fraction_of_nyquist * fs / 2. Odd orders use one first-order section;
 * the rest are second-order sections in transposed direct form II.
 */
class ButterworthFilter {
 public:
  explicit ButterworthFilter(const ButterworthSpec& spec, FilterInit init = FilterInit::steady_state);

  double step(double x);
  void reset();
  bool primed() const { return primed_; }

  /// Exact |H| at a frequency given as a fraction of Nyquist.
  double magnitude(double fraction_of_nyquist) const;
  double dc_gain() const;
  /// Group delay at DC, in samples.
  double dc_group_delay() const;

  const ButterworthSpec& spec() const { return spec_; }

  struct Section {
    double b0, b1, b2, a1, a2;
    double s1 = 0.0;
    double s2 = 0.0;
  };
  const std::vector<Section>& sections() const { return sections_; }

 private:
  ButterworthSpec spec_;
  FilterInit init_;
  bool primed_ = false;
  std::vector<Section> sections_;
};

/// Batch form of ButterworthFilter. fs only has to be positive: the cutoff is
/// specified relative to Nyquist.
std::vector<double> butterworth_filter(const std::vector<double>& x, const ButterworthSpec& spec, double fs,
                                       FilterInit init = FilterInit::steady_state);

}  // namespace flivver
