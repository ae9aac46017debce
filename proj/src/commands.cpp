#include "flivver/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

namespace flivver {

namespace fs = std::filesystem;

namespace {

double lerp_at(const std::vector<double>& t, const std::vector<double>& y, double time) {
  if (t.empty()) return 0.0;
  if (time <= t.front()) return y.front();
  if (time >= t.back()) return y.back();
  const auto it = std::upper_bound(t.begin(), t.end(), time);
  const std::size_t k = static_cast<std::size_t>(it - t.begin());
  const double f = (time - t[k - 1]) / (t[k] - t[k - 1]);
  return y[k - 1] + f * (y[k] - y[k - 1]);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string opt_fmt(const std::optional<double>& v) { return v ? fmt(*v) : "nan"; }

void require_match(const RunConfig& cfg, const DatasetManifest& m) {
  if (!(m.intrinsics == cfg.intrinsics)) {
    throw DataError("dataset intrinsics do not match the config (camera.* keys)");
  }
  if (m.fps != cfg.fps) throw DataError("dataset fps does not match the config");
  if (m.imu_rate_hz < m.fps) throw DataError("dataset IMU rate is below the frame rate");
}

FieldBank bank_for(const RunConfig& cfg) { return build_bank(AngleGrid(cfg.intrinsics), cfg.pipeline.bank); }

// Numeric config values, recorded with the report.
std::map<std::string, double> numeric_parameters(const RunConfig& cfg) {
  std::map<std::string, double> out;
  for (const auto& [k, v] : to_key_values(cfg)) {
    char* end = nullptr;
    const double d = std::strtod(v.c_str(), &end);
    if (!v.empty() && end == v.c_str() + v.size()) out[k] = d;
    else if (v == "true" || v == "false") out[k] = v == "true" ? 1.0 : 0.0;
  }
  return out;
}

DepthOutputs collect_depth(const std::vector<PipelineOutput>& outputs) {
  DepthOutputs d;
  for (const auto& o : outputs) {
    if (!o.depth) continue;
    for (const auto* map : {o.depth->direct ? &*o.depth->direct : nullptr,
                            o.depth->tv_repaired ? &*o.depth->tv_repaired : nullptr}) {
      if (!map) continue;
      DepthRecord rec;
      rec.method = map->method;
      rec.t_ref = o.depth->t_ref;
      rec.d = map->d;
      rec.mask = map->mask;
      d.maps.push_back(std::move(rec));
    }
    for (const auto& f : o.depth->closed_form) d.fields.push_back({o.depth->t_closed_form, f.field_id, f.d});
  }
  return d;
}

}  // namespace

std::vector<FrameInput> simulation_inputs(const Simulator& sim) {
  std::vector<FrameInput> frames;
  frames.reserve(static_cast<std::size_t>(sim.frame_count()));
  for (int k = 0; k < sim.frame_count(); ++k) {
    SimFrame f = sim.frame(k, false);
    frames.push_back({f.t, quantize_f32(f.flow), f.accel_meas, f.gyro_meas});
  }
  return frames;
}

std::vector<FrameInput> dataset_inputs(const ReplayDataset& data) {
  std::vector<FrameInput> frames;
  const int n = data.manifest().frame_count;
  frames.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const ImuFrame& imu = data.imu_frames()[static_cast<std::size_t>(k)];
    frames.push_back({data.frame_time(k), data.flow(k), imu.accel, imu.gyro});
  }
  return frames;
}

SimulationRun run_simulation(const PipelineConfig& cfg, const Simulator& sim, TimingLog* timing,
                             const std::function<void(const Pipeline&)>& on_frame) {
  SimulationRun run;
  Pipeline pipeline(cfg);
  for (int k = 0; k < sim.frame_count(); ++k) {
    SimFrame f = sim.frame(k, false);
    run.imu.t.push_back(f.t);
    run.imu.accel.push_back(f.accel_meas);
    if (auto out = pipeline.push({f.t, quantize_f32(f.flow), f.accel_meas, f.gyro_meas}, timing)) {
      run.outputs.push_back(std::move(*out));
    }
    if (on_frame) on_frame(pipeline);
  }
  return run;
}

TruthSeries simulation_truth(const Simulator& sim) {
  TruthSeries truth;
  for (int k = 0; k < sim.frame_count(); ++k) {
    const double t = static_cast<double>(k) / sim.plan().fps;
    truth.t.push_back(t);
    truth.v.push_back(sim.trajectory().velocity(t));
    truth.a.push_back(sim.trajectory().acceleration(t));
    truth.x.push_back(sim.trajectory().position(t));
  }
  return truth;
}

double kalman_rmse(const RunConfig& cfg, const std::vector<EstimateRow>& rows, const TruthSeries& truth,
                   const BaselineInputs& imu, const KalmanParams& params) {
  const TimeOffsets off = time_offsets(cfg.pipeline);
  std::vector<std::optional<double>> v_med;
  std::vector<double> accel;
  for (const auto& r : rows) {
    v_med.push_back(r.v_raw_median);
    accel.push_back(lerp_at(imu.t, imu.accel, r.t + off.median_s));
  }
  const auto v = kalman_smoother_baseline(v_med, accel, 1.0 / cfg.fps, params);
  if (rows.empty()) return std::nan("");
  const double t_first = rows.front().t + off.smoothed_s;
  std::vector<double> est;
  std::vector<double> ref;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double t_ref = rows[i].t + off.median_s;
    if (!v[i] || t_ref < t_first - 1e-9 || !truth.covers(t_ref)) continue;
    est.push_back(*v[i]);
    ref.push_back(truth.velocity_at(t_ref));
  }
  return est.empty() ? std::nan("") : rmse(est, ref);
}

RunReport evaluate_run(const RunConfig& cfg, const std::vector<EstimateRow>& rows, const TruthSeries* truth,
                       const BaselineInputs& imu, const DepthOutputs& depth,
                       std::function<std::vector<double>(double)> truth_depth, const TimingLog* timing) {
  const FieldBank bank = bank_for(cfg);
  EvalInput in;
  in.estimates = rows;
  in.offsets = time_offsets(cfg.pipeline);
  if (truth) in.truth = *truth;
  in.depth_maps = depth.maps;
  in.field_depths = depth.fields;
  in.truth_depth = std::move(truth_depth);
  in.bank = &bank;
  in.timing = timing;
  RunReport rep = evaluate(in, cfg.eval.eval);
  rep.parameters = numeric_parameters(cfg);
  if (truth && rep.velocity_rmse && !imu.t.empty()) {
    std::vector<double> biased = imu.accel;
    for (auto& a : biased) a += cfg.eval.drift_extra_bias_mps2;
    const auto drift = integrate_accel_baseline(imu.t, biased, truth->velocity_at(imu.t.front()));
    std::vector<double> est;
    std::vector<double> ref;
    for (std::size_t k = 0; k < imu.t.size(); ++k) {
      if (imu.t[k] < rep.warmup_end_s - 1e-9 || !truth->covers(imu.t[k])) continue;
      est.push_back(drift[k]);
      ref.push_back(truth->velocity_at(imu.t[k]));
    }
    if (!est.empty()) rep.baseline_rmse["accel_integration"] = rmse(est, ref);
    const double k = kalman_rmse(cfg, rows, *truth, imu, cfg.eval.kalman);
    if (!std::isnan(k)) rep.baseline_rmse["kalman"] = k;
  }
  return rep;
}

int cmd_simulate(const RunConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  const Simulator sim(scene_plan(cfg));
  DatasetManifest m;
  m.intrinsics = cfg.intrinsics;
  m.fps = cfg.fps;
  m.frame_count = sim.frame_count();
  m.imu_rate_hz = cfg.fps;
  m.has_truth = true;
  m.truth_depth_stride = cfg.sim.truth_depth_stride;

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) throw DataError("cannot create output directory " + out_dir);

  std::vector<ImuSample> imu;
  for (int k = 0; k < sim.frame_count(); ++k) {
    const bool with_depth = k % m.truth_depth_stride == 0;
    const SimFrame f = sim.frame(k, with_depth);
    write_flow_file(frame_path(out_dir, k), f.flow);
    if (with_depth) write_flvr(truth_depth_path(out_dir, k), f.flow.width, f.flow.height, {&f.truth_depth});
    imu.push_back({f.t, f.accel_meas, f.gyro_meas});
  }
  atomic_write_file(imu_path(out_dir), imu_to_csv(imu));
  atomic_write_file(truth_path(out_dir), truth_to_csv(simulation_truth(sim)));
  save_config(cfg, (fs::path(out_dir) / "config.txt").string());
  // Written last: a dataset with a manifest is complete.
  atomic_write_file(manifest_path(out_dir), manifest_to_text(m));
  return kExitOk;
}

int cmd_estimate(const RunConfig& cfg, const std::string& dataset_dir, const std::string& out_dir, bool timing) {
  cfg.validate();
  const ReplayDataset data(dataset_dir);
  require_match(cfg, data.manifest());
  Pipeline pipeline(cfg.pipeline);
  TimingLog log;
  std::vector<EstimateRow> rows;
  std::vector<DepthOutput> depth;
  const int n = data.manifest().frame_count;
  for (int k = 0; k < n; ++k) {
    const ImuFrame& imu = data.imu_frames()[static_cast<std::size_t>(k)];
    const FrameInput in{data.frame_time(k), data.flow(k), imu.accel, imu.gyro};
    if (auto out = pipeline.push(in, timing ? &log : nullptr)) {
      rows.push_back(to_row(*out));
      if (out->depth) depth.push_back(std::move(*out->depth));
    }
  }
  atomic_write_file((fs::path(out_dir) / "estimates.csv").string(), estimates_to_csv(rows));
  save_config(cfg, (fs::path(out_dir) / "config.txt").string());
  if (cfg.pipeline.depth.enabled) write_depth_outputs(out_dir, depth);
  if (timing) atomic_write_file((fs::path(out_dir) / "timing.csv").string(), timing_to_csv(log));
  return kExitOk;
}

int cmd_evaluate(const RunConfig& cfg, const std::string& estimates_dir, const std::string& dataset_dir,
                 const std::string& out_dir) {
  cfg.validate();
  const auto rows = parse_estimates_csv(read_text_file((fs::path(estimates_dir) / "estimates.csv").string()));
  std::optional<TimingLog> timing;
  const fs::path timing_file = fs::path(estimates_dir) / "timing.csv";
  if (fs::exists(timing_file)) timing = parse_timing_csv(read_text_file(timing_file.string()));

  RunReport rep;
  std::optional<ReplayDataset> data;
  if (!dataset_dir.empty()) data.emplace(dataset_dir);
  if (data && data->truth()) {
    require_match(cfg, data->manifest());
    BaselineInputs imu;
    for (int k = 0; k < data->manifest().frame_count; ++k) {
      imu.t.push_back(data->frame_time(k));
      imu.accel.push_back(data->imu_frames()[static_cast<std::size_t>(k)].accel);
    }
    std::function<std::vector<double>(double)> depth_fn;
    if (data->has_truth_depth()) depth_fn = [&](double t) { return data->truth_depth(t); };
    rep = evaluate_run(cfg, rows, &*data->truth(), imu, read_depth_outputs(estimates_dir), depth_fn,
                       timing ? &*timing : nullptr);
  } else {
    rep = evaluate_run(cfg, rows, nullptr, {}, {}, {}, timing ? &*timing : nullptr);
  }
  write_report_csv(rep, (fs::path(out_dir) / "report.csv").string());
  atomic_write_file((fs::path(out_dir) / "summary.txt").string(), report_summary(rep));
  if (cfg.eval.max_rmse_mps > 0.0 && rep.velocity_rmse && *rep.velocity_rmse >= cfg.eval.max_rmse_mps) {
    return kExitAcceptance;
  }
  return kExitOk;
}

int cmd_sweep(const RunConfig& cfg, const std::string& key, const std::vector<std::string>& values,
              const std::string& out_csv) {
  if (values.empty()) throw UsageError("sweep: no values given");
  std::string out =
      "key,value,velocity_rmse_mps,median_rmse_mps,convergence_time_s,degenerate_frames,"
      "depth_error_direct,depth_error_closed_form,depth_error_tv_repaired,tv_data_term,tv_variation,tv_iterations\n";
  for (const auto& value : values) {
    RunConfig c = cfg;
    set_key(c, key, value);
    c.validate();
    const Simulator sim(scene_plan(c));
    const SimulationRun run = run_simulation(c.pipeline, sim);
    const auto& outputs = run.outputs;
    std::vector<EstimateRow> rows;
    double data_term = 0.0;
    double variation = 0.0;
    double iterations = 0.0;
    int solves = 0;
    for (const auto& o : outputs) {
      rows.push_back(to_row(o));
      if (o.depth && o.depth->tv_repaired) {
        data_term += o.depth->tv_data_term;
        if (c.pipeline.depth.tv.gamma > 0.0) {
          variation += (o.depth->tv_objective - o.depth->tv_data_term) / c.pipeline.depth.tv.gamma;
        }
        iterations += o.depth->tv_iterations;
        ++solves;
      }
    }
    const TruthSeries truth = simulation_truth(sim);
    const RunReport rep = evaluate_run(c, rows, &truth, run.imu, collect_depth(outputs),
                                       [&](double t) { return sim.truth_depth(t); }, nullptr);
    auto depth_err = [&](const char* m) -> std::string {
      auto it = rep.depth_error_by_method.find(m);
      return it == rep.depth_error_by_method.end() || !it->second.samples ? "nan"
                                                                           : fmt(it->second.mean_fractional_error);
    };
    const double inv = solves ? 1.0 / solves : 0.0;
    out += key + "," + value + "," + opt_fmt(rep.velocity_rmse) + "," + opt_fmt(rep.median_rmse) + "," +
           opt_fmt(rep.convergence_time_s) + "," + std::to_string(rep.degenerate_frames) + "," + depth_err("direct") +
           "," + depth_err("closed_form") + "," + depth_err("tv_repaired") + "," +
           (solves ? fmt(data_term * inv) : "nan") + "," + (solves ? fmt(variation * inv) : "nan") + "," +
           (solves ? fmt(iterations * inv) : "nan") + "\n";
  }
  atomic_write_file(out_csv, out);
  return kExitOk;
}

int cmd_tune_kalman(const RunConfig& cfg, std::uint64_t holdout_seed, const std::string& out_csv) {
  RunConfig c = cfg;
  c.noise.rng_seed = holdout_seed;
  c.pipeline.depth.enabled = false;
  c.validate();
  const Simulator sim(scene_plan(c));
  const SimulationRun run = run_simulation(c.pipeline, sim);
  std::vector<EstimateRow> rows;
  for (const auto& o : run.outputs) rows.push_back(to_row(o));
  const TruthSeries truth = simulation_truth(sim);
  const BaselineInputs& imu = run.imu;
  std::string out = "process_noise,measurement_noise,rmse_mps\n";
  const auto best = tune_kalman(log_grid(1e-4, 10.0, 11), log_grid(1e-4, 1.0, 9), [&](const KalmanParams& p) {
    const double r = kalman_rmse(c, rows, truth, imu, p);
    out += fmt(p.process_noise) + "," + fmt(p.measurement_noise) + "," + fmt(r) + "\n";
    return std::isnan(r) ? std::numeric_limits<double>::infinity() : r;
  });
  atomic_write_file(out_csv, out);
  std::printf("eval.kalman_q=%s\neval.kalman_r=%s\nrmse_mps=%s\n", format_double(best.params.process_noise).c_str(),
              format_double(best.params.measurement_noise).c_str(), fmt(best.rmse).c_str());
  return kExitOk;
}

}  // namespace flivver
