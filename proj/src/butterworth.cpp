#include "flivver/butterworth.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>

#include "flivver/camera_geometry.hpp"

namespace flivver {

void ButterworthSpec::validate() const {
  if (order < 1) throw std::invalid_argument("butterworth: order must be >= 1");
  if (!(cutoff_fraction_of_nyquist > 0.0 && cutoff_fraction_of_nyquist < 1.0)) {
    throw std::invalid_argument("butterworth: cutoff must lie strictly inside (0, 1) of Nyquist");
  }
}

ButterworthFilter::ButterworthFilter(const ButterworthSpec& spec, FilterInit init) : spec_(spec), init_(init) {
  spec_.validate();
  const double wc = std::tan(0.5 * kPi * spec_.cutoff_fraction_of_nyquist);
  const int n = spec_.order;
  if (n % 2 == 1) {
    const double g = 1.0 / (1.0 + wc);
    sections_.push_back({wc * g, wc * g, 0.0, (wc - 1.0) * g, 0.0});
  }
  for (int k = 0; k < n / 2; ++k) {
    // Analog pole pair s^2 + q wc s + wc^2 with q = 2 sin((2k+1) pi / 2n).
    const double q = 2.0 * std::sin((2.0 * k + 1.0) * kPi / (2.0 * n));
    const double w2 = wc * wc;
    const double a0 = 1.0 + q * wc + w2;
    sections_.push_back({w2 / a0, 2.0 * w2 / a0, w2 / a0, 2.0 * (w2 - 1.0) / a0, (1.0 - q * wc + w2) / a0});
  }
}

void ButterworthFilter::reset() {
  primed_ = false;
  for (auto& s : sections_) s.s1 = s.s2 = 0.0;
}

double ButterworthFilter::step(double x) {
  if (!primed_) {
    primed_ = true;
    if (init_ == FilterInit::steady_state) {
      // Every section has unit DC gain, so each one sees x at rest.
      for (auto& s : sections_) {
        s.s2 = (s.b2 - s.a2) * x;
        s.s1 = (s.b1 - s.a1) * x + s.s2;
      }
    }
  }
  double y = x;
  for (auto& s : sections_) {
    const double in = y;
    y = s.b0 * in + s.s1;
    s.s1 = s.b1 * in - s.a1 * y + s.s2;
    s.s2 = s.b2 * in - s.a2 * y;
  }
  return y;
}

double ButterworthFilter::magnitude(double fraction_of_nyquist) const {
  const std::complex<double> z1 = std::polar(1.0, -kPi * fraction_of_nyquist);
  const std::complex<double> z2 = z1 * z1;
  std::complex<double> h = 1.0;
  for (const auto& s : sections_) h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
  return std::abs(h);
}

double ButterworthFilter::dc_gain() const {
  double g = 1.0;
  for (const auto& s : sections_) g *= (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
  return g;
}

double ButterworthFilter::dc_group_delay() const {
  double d = 0.0;
  for (const auto& s : sections_) {
    d += (s.b1 + 2.0 * s.b2) / (s.b0 + s.b1 + s.b2) - (s.a1 + 2.0 * s.a2) / (1.0 + s.a1 + s.a2);
  }
  return d;
}

std::vector<double> butterworth_filter(const std::vector<double>& x, const ButterworthSpec& spec, double fs,
                                       FilterInit init) {
  if (!(fs > 0.0)) throw std::invalid_argument("butterworth_filter: fs must be positive");
  ButterworthFilter f(spec, init);
  std::vector<double> y;
  y.reserve(x.size());
  for (double v : x) y.push_back(f.step(v));
  return y;
}

}  // namespace flivver
