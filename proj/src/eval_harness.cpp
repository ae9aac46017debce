#include "flivver/eval_harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "flivver/replay_io.hpp"

namespace flivver {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

double interp(const std::vector<double>& t, const std::vector<double>& y, double time) {
  const auto it = std::upper_bound(t.begin(), t.end(), time);
  if (it == t.begin()) return y.front();
  if (it == t.end()) return y.back();
  const auto i = static_cast<std::size_t>(it - t.begin());
  const double w = (time - t[i - 1]) / (t[i] - t[i - 1]);
  return y[i - 1] + w * (y[i] - y[i - 1]);
}

std::string bucket_name(double speed, const std::vector<double>& edges) {
  double lo = 0.0;
  for (double e : edges) {
    if (speed < e) return "[" + fmt(lo) + "," + fmt(e) + ")";
    lo = e;
  }
  return "[" + fmt(lo) + ",inf)";
}

void check_on_truth_grid(const std::vector<EstimateRow>& rows, const TruthSeries& truth) {
  double prev = -std::numeric_limits<double>::infinity();
  for (const auto& r : rows) {
    if (!(r.t > prev)) throw MisalignedSeries("evaluate: estimate timestamps are not strictly increasing");
    prev = r.t;
    const auto it = std::lower_bound(truth.t.begin(), truth.t.end(), r.t - 1e-6);
    if (it == truth.t.end() || std::abs(*it - r.t) > 1e-6) {
      throw MisalignedSeries("evaluate: estimate at t=" + fmt(r.t) + " s has no matching truth sample");
    }
  }
}

TimingStat timing_stat(std::vector<double> s) {
  TimingStat st;
  st.count = s.size();
  if (s.empty()) return st;
  double sum = 0.0;
  for (double v : s) sum += v;
  st.mean_s = sum / static_cast<double>(s.size());
  std::sort(s.begin(), s.end());
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(s.size())));
  st.p95_s = s[std::max<std::size_t>(rank, 1) - 1];
  return st;
}

struct DepthAccumulator {
  double sum = 0.0;
  std::size_t n = 0;
  std::map<std::string, std::pair<double, std::size_t>> buckets;

  void add(double err, const std::string& bucket) {
    sum += err;
    ++n;
    auto& b = buckets[bucket];
    b.first += err;
    ++b.second;
  }
  DepthErrorStat finish() const {
    DepthErrorStat st;
    st.samples = n;
    st.mean_fractional_error = n ? sum / static_cast<double>(n) : 0.0;
    for (const auto& [k, v] : buckets) st.by_speed[k] = {v.first / static_cast<double>(v.second), v.second};
    return st;
  }
};

}  // namespace

EstimateRow to_row(const PipelineOutput& out) {
  EstimateRow r;
  r.t = out.estimate.t;
  r.v_raw_median = out.estimate.v_median;
  r.v_smoothed = out.estimate.v_smoothed;
  r.v_corrected = out.estimate.v_corrected;
  r.n_valid_fields = out.estimate.n_valid_fields;
  r.degenerate = out.estimate.degenerate;
  return r;
}

void TruthSeries::validate() const {
  if (t.empty() || v.size() != t.size() || a.size() != t.size() || (!x.empty() && x.size() != t.size())) {
    throw MisalignedSeries("truth series: columns have different lengths");
  }
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (!(t[i] > t[i - 1])) throw MisalignedSeries("truth series: timestamps must be strictly increasing");
  }
}

bool TruthSeries::covers(double time) const {
  return !t.empty() && time >= t.front() - 1e-9 && time <= t.back() + 1e-9;
}

double TruthSeries::velocity_at(double time) const { return interp(t, v, time); }

double TruthSeries::position_at(double time) const {
  if (x.empty()) throw std::logic_error("truth series: no displacement column");
  return interp(t, x, time);
}

double rmse(const std::vector<double>& estimate, const std::vector<double>& truth) {
  if (estimate.size() != truth.size()) throw MisalignedSeries("rmse: series lengths differ");
  if (estimate.empty()) throw std::invalid_argument("rmse: empty series");
  double s = 0.0;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    const double e = estimate[i] - truth[i];
    s += e * e;
  }
  return std::sqrt(s / static_cast<double>(estimate.size()));
}

RunReport evaluate(const EvalInput& in, const EvalConfig& cfg) {
  RunReport rep;
  rep.frames_total = in.estimates.size();
  for (const auto& r : in.estimates) rep.degenerate_frames += r.degenerate ? 1 : 0;
  if (in.timing) {
    for (const auto& [step, samples] : in.timing->samples()) rep.per_step_timing[step] = timing_stat(samples);
  }
  if (!in.truth) return rep;

  const TruthSeries& truth = *in.truth;
  truth.validate();
  check_on_truth_grid(in.estimates, truth);

  std::vector<double> t_ref, est, tru;
  std::vector<double> med_est, med_tru;
  for (const auto& r : in.estimates) {
    const double tr = r.t + in.offsets.smoothed_s;
    if (!truth.covers(tr)) continue;
    t_ref.push_back(tr);
    est.push_back(r.v_corrected);
    tru.push_back(truth.velocity_at(tr));
    const double tm = r.t + in.offsets.median_s;
    if (r.v_raw_median && truth.covers(tm)) {
      med_est.push_back(*r.v_raw_median);
      med_tru.push_back(truth.velocity_at(tm));
    }
  }
  rep.frames_evaluated = est.size();
  if (!est.empty()) {
    rep.warmup_end_s = t_ref.front();
    rep.velocity_rmse = rmse(est, tru);
  }
  if (!med_est.empty()) rep.median_rmse = rmse(med_est, med_tru);

  double peak = 0.0;
  for (double v : truth.v) peak = std::max(peak, std::abs(v));
  rep.convergence_threshold_mps = cfg.convergence_fraction * peak;
  for (std::size_t i = 0; i < est.size() && !rep.convergence_time_s; ++i) {
    if (t_ref.back() - t_ref[i] < cfg.convergence_hold_s - 1e-9) break;
    bool ok = true;
    for (std::size_t j = i; j < est.size() && t_ref[j] <= t_ref[i] + cfg.convergence_hold_s + 1e-9; ++j) {
      if (!(std::abs(est[j] - tru[j]) < rep.convergence_threshold_mps)) {
        ok = false;
        break;
      }
    }
    if (ok) rep.convergence_time_s = t_ref[i];
  }

  if (in.truth_depth) {
    std::map<DepthMethod, DepthAccumulator> acc;
    for (const auto& m : in.depth_maps) {
      if (!truth.covers(m.t_ref)) continue;
      const auto d_true = in.truth_depth(m.t_ref);
      if (d_true.size() != m.d.size() || m.mask.size() != m.d.size()) {
        throw MisalignedSeries("evaluate: depth map size does not match truth");
      }
      const std::string bucket = bucket_name(std::abs(truth.velocity_at(m.t_ref)), cfg.speed_bucket_edges);
      auto& a = acc[m.method];
      for (std::size_t i = 0; i < m.d.size(); ++i) {
        if (m.mask[i]) a.add(std::abs(m.d[i] - d_true[i]) / d_true[i], bucket);
      }
    }
    if (in.bank && !in.field_depths.empty()) {
      auto& a = acc[DepthMethod::closed_form];
      double cached_t = std::numeric_limits<double>::quiet_NaN();
      std::vector<double> d_true;
      for (const auto& f : in.field_depths) {
        if (!truth.covers(f.t_ref)) continue;
        if (f.field_id < 0 || static_cast<std::size_t>(f.field_id) >= in.bank->size()) {
          throw MisalignedSeries("evaluate: field id outside the bank");
        }
        if (!(f.t_ref == cached_t)) {
          d_true = in.truth_depth(f.t_ref);
          cached_t = f.t_ref;
        }
        // The closed form sees the mean of 1/d over the field.
        const auto& field = in.bank->fields[static_cast<std::size_t>(f.field_id)];
        double inv = 0.0;
        for (const auto& s : field.spans) {
          for (int x = s.x_begin; x < s.x_end; ++x) {
            inv += 1.0 / d_true[static_cast<std::size_t>(s.y) * static_cast<std::size_t>(in.bank->width) +
                                static_cast<std::size_t>(x)];
          }
        }
        const double harmonic = static_cast<double>(field.pixel_count) / inv;
        a.add(std::abs(f.d - harmonic) / harmonic,
              bucket_name(std::abs(truth.velocity_at(f.t_ref)), cfg.speed_bucket_edges));
      }
    }
    for (const auto& [method, a] : acc) rep.depth_error_by_method[to_string(method)] = a.finish();
  }
  return rep;
}

std::vector<double> integrate_accel_baseline(const std::vector<double>& t, const std::vector<double>& accel,
                                             double v0_assumed) {
  if (t.size() != accel.size()) throw MisalignedSeries("integrate_accel_baseline: series lengths differ");
  std::vector<double> v(t.size());
  if (t.empty()) return v;
  v[0] = v0_assumed;
  for (std::size_t k = 1; k < t.size(); ++k) v[k] = v[k - 1] + 0.5 * (accel[k - 1] + accel[k]) * (t[k] - t[k - 1]);
  return v;
}

void KalmanParams::validate() const {
  if (!(process_noise > 0.0) || !(measurement_noise > 0.0) || !(initial_variance > 0.0) ||
      !std::isfinite(process_noise) || !std::isfinite(measurement_noise) || !std::isfinite(initial_variance)) {
    throw std::invalid_argument("kalman params: noise parameters must be finite and strictly positive");
  }
}

std::vector<std::optional<double>> kalman_smoother_baseline(const std::vector<std::optional<double>>& v_median,
                                                            const std::vector<double>& accel, double dt,
                                                            const KalmanParams& p) {
  p.validate();
  if (accel.size() != v_median.size()) throw MisalignedSeries("kalman baseline: series lengths differ");
  if (!(dt > 0.0)) throw std::invalid_argument("kalman baseline: dt must be positive");
  std::vector<std::optional<double>> out(v_median.size());
  std::size_t k = 0;
  while (k < v_median.size() && !v_median[k]) ++k;
  if (k == v_median.size()) return out;
  double v = *v_median[k];
  double var = p.initial_variance;
  {
    const double gain = var / (var + p.measurement_noise);
    var *= 1.0 - gain;
  }
  out[k] = v;
  for (++k; k < v_median.size(); ++k) {
    v += dt * 0.5 * (accel[k - 1] + accel[k]);
    var += p.process_noise * dt;
    if (v_median[k]) {
      const double gain = var / (var + p.measurement_noise);
      v += gain * (*v_median[k] - v);
      var *= 1.0 - gain;
    }
    out[k] = v;
  }
  return out;
}

KalmanTuning tune_kalman(const std::vector<double>& process_grid, const std::vector<double>& measurement_grid,
                         const std::function<double(const KalmanParams&)>& score) {
  if (process_grid.empty() || measurement_grid.empty()) throw std::invalid_argument("tune_kalman: empty grid");
  KalmanTuning best;
  best.rmse = std::numeric_limits<double>::infinity();
  for (double q : process_grid) {
    for (double r : measurement_grid) {
      KalmanParams p;
      p.process_noise = q;
      p.measurement_noise = r;
      const double s = score(p);
      if (s < best.rmse) {
        best.rmse = s;
        best.params = p;
      }
    }
  }
  return best;
}

std::vector<double> log_grid(double lo, double hi, int n) {
  if (!(lo > 0.0) || !(hi >= lo) || n < 1) throw std::invalid_argument("log_grid: need 0 < lo <= hi and n >= 1");
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double f = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
    g[static_cast<std::size_t>(i)] = lo * std::pow(hi / lo, f);
  }
  return g;
}

void write_report_csv(const RunReport& r, const std::string& path) {
  std::ostringstream os;
  os << "section,name,key,value\n";
  os << "frames,total,count," << r.frames_total << "\n";
  os << "frames,evaluated,count," << r.frames_evaluated << "\n";
  os << "frames,degenerate,count," << r.degenerate_frames << "\n";
  if (r.velocity_rmse) {
    os << "velocity,v_corrected,rmse_mps," << fmt(*r.velocity_rmse) << "\n";
    os << "velocity,warmup_end,t_s," << fmt(r.warmup_end_s) << "\n";
  }
  if (r.median_rmse) os << "velocity,v_raw_median,rmse_mps," << fmt(*r.median_rmse) << "\n";
  if (r.velocity_rmse) {
    os << "velocity,convergence,threshold_mps," << fmt(r.convergence_threshold_mps) << "\n";
    os << "velocity,convergence,t_s," << (r.convergence_time_s ? fmt(*r.convergence_time_s) : "none") << "\n";
  }
  for (const auto& [step, st] : r.per_step_timing) {
    os << "timing," << step << ",mean_s," << fmt(st.mean_s) << "\n";
    os << "timing," << step << ",p95_s," << fmt(st.p95_s) << "\n";
    os << "timing," << step << ",count," << st.count << "\n";
  }
  for (const auto& [method, st] : r.depth_error_by_method) {
    os << "depth_error," << method << ",mean_fractional," << fmt(st.mean_fractional_error) << "\n";
    os << "depth_error," << method << ",samples," << st.samples << "\n";
    for (const auto& [bucket, b] : st.by_speed) {
      os << "depth_error," << method << ",\"speed " << bucket << "\"," << fmt(b.first) << "\n";
    }
  }
  for (const auto& [name, v] : r.baseline_rmse) os << "baseline," << name << ",rmse_mps," << fmt(v) << "\n";
  for (const auto& [name, v] : r.parameters) os << "parameter," << name << ",value," << fmt(v) << "\n";
  atomic_write_file(path, os.str());
}

std::string report_summary(const RunReport& r) {
  std::ostringstream os;
  os << "frames: " << r.frames_total << " emitted, " << r.frames_evaluated << " evaluated, " << r.degenerate_frames
     << " degenerate\n";
  if (r.velocity_rmse) {
    os << "velocity rmse (v_corrected): " << fmt(*r.velocity_rmse) << " m/s\n";
    if (r.median_rmse) os << "velocity rmse (v_raw_median): " << fmt(*r.median_rmse) << " m/s\n";
    os << "warm-up end: " << fmt(r.warmup_end_s) << " s\n";
    os << "convergence (|err| < " << fmt(r.convergence_threshold_mps) << " m/s for 1 s): "
       << (r.convergence_time_s ? fmt(*r.convergence_time_s) + " s" : std::string("not reached")) << "\n";
  } else {
    os << "no truth available: timing-only report\n";
  }
  for (const auto& [name, v] : r.baseline_rmse) os << "baseline " << name << " rmse: " << fmt(v) << " m/s\n";
  for (const auto& [method, st] : r.depth_error_by_method) {
    os << "depth " << method << ": mean fractional error " << fmt(st.mean_fractional_error) << " over "
       << st.samples << " samples\n";
  }
  for (const auto& [step, st] : r.per_step_timing) {
    os << "step " << step << ": mean " << fmt(st.mean_s * 1e3) << " ms, p95 " << fmt(st.p95_s * 1e3) << " ms\n";
  }
  return os.str();
}

}  // namespace flivver
