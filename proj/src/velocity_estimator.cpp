#include "flivver/velocity_estimator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace flivver {

namespace {

// Trapezoidal mean over the derivative window: the kernel that the staggered
// difference applies to the underlying rate.
double window_mean(const std::deque<double>& h) {
  double sum = 0.5 * (h.front() + h.back());
  for (std::size_t k = 1; k + 1 < h.size(); ++k) sum += h[k];
  return sum / static_cast<double>(h.size() - 1);
}

}  // namespace

void DerivativeConfig::validate() const {
  if (derivative_stagger_frames < 1) throw std::invalid_argument("derivative config: stagger must be >= 1");
  prefilter.validate();
}

void DegeneracyGuard::validate() const {
  if (!(eps_denom >= 0.0) || !std::isfinite(eps_denom)) throw std::invalid_argument("guard: eps_denom must be >= 0");
  if (!(accel_spread_gate >= 0.0) || !std::isfinite(accel_spread_gate)) {
    throw std::invalid_argument("guard: accel_spread_gate must be finite and >= 0");
  }
}

void EstimatorConfig::validate() const {
  if (!(fps > 0.0) || !std::isfinite(fps)) throw std::invalid_argument("estimator config: fps must be positive");
  derivative.validate();
  output_filter.validate();
  guard.validate();
}

std::vector<std::optional<double>> staggered_derivative(const std::vector<double>& series,
                                                        const DerivativeConfig& cfg, double fs) {
  cfg.validate();
  if (!(fs > 0.0)) throw std::invalid_argument("staggered_derivative: fs must be positive");
  const auto s = static_cast<std::size_t>(cfg.derivative_stagger_frames);
  const double span = static_cast<double>(s) / fs;
  std::vector<std::optional<double>> out(series.size());
  for (std::size_t i = s; i < series.size(); ++i) out[i] = (series[i] - series[i - s]) / span;
  return out;
}

std::optional<double> per_field_velocity(const PooledStats& stats, double r_dot, double accel,
                                         const DegeneracyGuard& guard, SecondMoment moment) {
  const double r2 = moment == SecondMoment::pooled ? stats.r2_bar : stats.r_bar * stats.r_bar;
  const double denom = r2 - r_dot;
  if (!(std::abs(denom) >= guard.eps_denom) || denom == 0.0) return std::nullopt;
  const double v = accel * (-stats.r_bar) / denom;
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

double staggered_velocity_error_bound(double accel, double window_s, double v_max, double d_min) {
  if (!(window_s >= 0.0) || !(v_max >= 0.0) || !(d_min > 0.0)) {
    throw std::invalid_argument("staggered_velocity_error_bound: need window_s, v_max >= 0 and d_min > 0");
  }
  const double q = v_max * window_s / d_min;
  return std::abs(accel) * 0.5 * window_s * q / (2.0 + q);
}

std::optional<double> aggregate(std::vector<double> v) {
  if (v.empty()) return std::nullopt;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

std::vector<FinalizedVelocity> finalize(const std::vector<std::optional<double>>& v_median,
                                        const std::vector<double>& yaw_delta, const ButterworthSpec& spec) {
  if (yaw_delta.size() != v_median.size()) throw std::invalid_argument("finalize: series lengths differ");
  ButterworthFilter filter(spec, FilterInit::steady_state);
  std::vector<FinalizedVelocity> out(v_median.size());
  double last = 0.0;
  for (std::size_t i = 0; i < v_median.size(); ++i) {
    if (v_median[i]) {
      last = filter.step(*v_median[i]);
    } else {
      out[i].held = true;
    }
    out[i].v_smoothed = last;
    out[i].v_corrected = last * std::cos(yaw_delta[i]);
  }
  return out;
}

VelocityEstimator::VelocityEstimator(EstimatorConfig cfg, std::size_t n_fields) : cfg_(cfg), fields_(n_fields) {
  cfg_.validate();
  if (cfg_.derivative.prefilter_enabled) {
    pre_a_.emplace(cfg_.derivative.prefilter);
    for (auto& f : fields_) {
      f.pre_r.emplace(cfg_.derivative.prefilter);
      f.pre_r2.emplace(cfg_.derivative.prefilter);
    }
  }
  if (cfg_.output_filter_enabled) out_filter_.emplace(cfg_.output_filter);
}

double VelocityEstimator::median_delay_s() const {
  double samples = 0.5 * cfg_.derivative.derivative_stagger_frames;
  if (pre_a_) samples += pre_a_->dc_group_delay();
  return samples / cfg_.fps;
}

double VelocityEstimator::smoothed_delay_s() const {
  return median_delay_s() + (out_filter_ ? out_filter_->dc_group_delay() / cfg_.fps : 0.0);
}

std::optional<VelocityEstimate> VelocityEstimator::push(double t, const std::vector<PooledStats>& stats, double accel,
                                                        double yaw_delta, TimingLog* timing) {
  const auto window = static_cast<std::size_t>(cfg_.derivative.derivative_stagger_frames) + 1;
  const double span = static_cast<double>(window - 1) / cfg_.fps;
  VelocityEstimate est;
  est.t = t;
  std::vector<double> values;
  {
    ScopedTimer timer(timing, kStepRawVelocity);
    for (const auto& st : stats) {
      if (st.field_id < 0 || static_cast<std::size_t>(st.field_id) >= fields_.size()) {
        throw std::out_of_range("VelocityEstimator: field id outside the bank");
      }
      auto& f = fields_[static_cast<std::size_t>(st.field_id)];
      f.seen = true;
      f.last_r = st.r_bar;
      f.last_r2 = st.r2_bar;
    }
    const double a = pre_a_ ? pre_a_->step(accel) : accel;
    accel_hist_.push_back(a);
    if (accel_hist_.size() > window) accel_hist_.pop_front();
    for (auto& f : fields_) {
      if (!f.seen) continue;
      f.r.push_back(f.pre_r ? f.pre_r->step(f.last_r) : f.last_r);
      f.r2.push_back(f.pre_r2 ? f.pre_r2->step(f.last_r2) : f.last_r2);
      if (f.r.size() > window) {
        f.r.pop_front();
        f.r2.pop_front();
      }
    }
    if (accel_hist_.size() < window) return std::nullopt;

    est.accel_aligned = window_mean(accel_hist_);
    const auto [a_lo, a_hi] = std::minmax_element(accel_hist_.begin(), accel_hist_.end());
    const bool accel_ok = cfg_.guard.accel_spread_gate == 0.0 ||
                          *a_hi - *a_lo <= cfg_.guard.accel_spread_gate * std::abs(est.accel_aligned);
    for (std::size_t k = 0; k < fields_.size(); ++k) {
      const auto& f = fields_[k];
      if (f.r.size() < window) continue;
      FieldTerms term;
      term.field_id = static_cast<int>(k);
      term.r_bar = window_mean(f.r);
      term.r2_bar = window_mean(f.r2);
      term.r_dot = (f.r.back() - f.r.front()) / span;
      term.accel = est.accel_aligned;
      PooledStats ps;
      ps.r_bar = term.r_bar;
      ps.r2_bar = term.r2_bar;
      if (accel_ok) term.v = per_field_velocity(ps, term.r_dot, term.accel, cfg_.guard, cfg_.second_moment);
      if (term.v) {
        est.v_raw_per_field.emplace_back(term.field_id, *term.v);
        values.push_back(*term.v);
      }
      est.terms.push_back(term);
    }
  }
  {
    ScopedTimer timer(timing, kStepMedian);
    est.n_valid_fields = static_cast<int>(values.size());
    est.v_median = aggregate(std::move(values));
  }
  if (!started_ && !est.v_median) return std::nullopt;
  {
    ScopedTimer timer(timing, kStepFilter);
    started_ = true;
    if (est.v_median) {
      last_median_ = *est.v_median;
    } else {
      est.degenerate = true;
      if (cfg_.hold == HoldPolicy::propagate) last_median_ += est.accel_aligned / cfg_.fps;
    }
    if (est.v_median || cfg_.hold != HoldPolicy::freeze) {
      last_smoothed_ = out_filter_ ? out_filter_->step(last_median_) : last_median_;
    }
    est.v_smoothed = last_smoothed_;
    est.v_corrected = last_smoothed_ * std::cos(yaw_delta);
  }
  return est;
}

}  // namespace flivver
