#include "flivver/replay_io.hpp"

#include <algorithm>
#include <bit>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace flivver {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_double(const std::string& s, const std::string& what) {
  if (s == "nan") return std::nan("");
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
    throw DataError(what + ": bad number '" + s + "'");
  }
  return v;
}

long to_long(const std::string& s, const std::string& what) {
  errno = 0;
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
    throw DataError(what + ": bad integer '" + s + "'");
  }
  return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, sep)) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

// Rows of a CSV with a fixed header; throws on a header or width mismatch.
std::vector<std::vector<std::string>> parse_csv(const std::string& text, const std::vector<std::string>& header,
                                                const std::string& what) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw DataError(what + ": empty file");
  if (split(line, ',') != header) throw DataError(what + ": unexpected header '" + line + "'");
  std::vector<std::vector<std::string>> rows;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto cells = split(line, ',');
    if (cells.size() != header.size()) {
      throw DataError(what + ": line " + std::to_string(lineno) + " has " + std::to_string(cells.size()) +
                      " columns, expected " + std::to_string(header.size()));
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

std::string join(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += cells[i];
  }
  return out + "\n";
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(const std::string& in, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

std::string indexed(const std::string& root, const char* sub, int index, const char* ext) {
  char name[32];
  std::snprintf(name, sizeof name, "%06d%s", index, ext);
  return (fs::path(root) / sub / name).string();
}

const std::vector<std::string> kImuHeader{"t_s", "accel_mps2", "gyro_yaw_rps"};
const std::vector<std::string> kTruthHeader{"t_s", "v_mps", "a_mps2", "x_m"};
const std::vector<std::string> kEstimateHeader{"t_s",          "v_raw_median",  "v_smoothed",
                                               "v_corrected", "n_valid_fields", "degenerate_flag"};
const std::vector<std::string> kDepthIndexHeader{"t_ref_s", "method", "v_used_mps", "file"};
const std::vector<std::string> kFieldDepthHeader{"t_ref_s", "field_id", "depth_m"};
const std::vector<std::string> kTimingHeader{"step", "seconds"};

}  // namespace

void atomic_write_file(const std::string& path, const std::string& content) {
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open " + tmp.string() + " for writing");
    os.write(content.data(), static_cast<std::streamsize>(content.size()));
    os.flush();
    if (!os) throw DataError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw DataError("cannot rename " + tmp.string() + " to " + path + ": " + ec.message());
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string encode_flvr(int width, int height, const std::vector<const std::vector<double>*>& planes) {
  if (width < 1 || height < 1) throw DataError("FLVR: width and height must be positive");
  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  std::string out;
  out.reserve(16 + planes.size() * n * 4);
  out += "FLVR";
  put_u32(out, kFlvrVersion);
  put_u32(out, static_cast<std::uint32_t>(width));
  put_u32(out, static_cast<std::uint32_t>(height));
  for (const auto* p : planes) {
    if (p->size() != n) throw DataError("FLVR: plane size does not match width*height");
    for (double v : *p) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

FlvrImage decode_flvr(const std::string& bytes, const std::string& what) {
  if (bytes.size() < 16 || bytes.compare(0, 4, "FLVR") != 0) throw DataError(what + ": not an FLVR file");
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kFlvrVersion) throw DataError(what + ": unsupported FLVR version " + std::to_string(version));
  FlvrImage img;
  img.width = static_cast<int>(get_u32(bytes, 8));
  img.height = static_cast<int>(get_u32(bytes, 12));
  if (img.width < 1 || img.height < 1) throw DataError(what + ": empty image");
  const std::size_t n = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
  const std::size_t payload = bytes.size() - 16;
  if (payload == 0 || payload % (4 * n) != 0) throw DataError(what + ": truncated or oversized payload");
  const std::size_t count = payload / (4 * n);
  img.planes.assign(count, std::vector<double>(n));
  std::size_t pos = 16;
  for (auto& plane : img.planes) {
    for (auto& v : plane) {
      v = static_cast<double>(std::bit_cast<float>(get_u32(bytes, pos)));
      pos += 4;
    }
  }
  return img;
}

void write_flvr(const std::string& path, int width, int height, const std::vector<const std::vector<double>*>& planes) {
  atomic_write_file(path, encode_flvr(width, height, planes));
}

FlvrImage read_flvr(const std::string& path) { return decode_flvr(read_text_file(path), path); }

void write_flow_file(const std::string& path, const FlowField& flow) {
  write_flvr(path, flow.width, flow.height, {&flow.u, &flow.w});
}

FlowField read_flow_file(const std::string& path, double t) {
  FlvrImage img = read_flvr(path);
  if (img.planes.size() != 2) throw DataError(path + ": expected 2 flow planes");
  FlowField f;
  f.width = img.width;
  f.height = img.height;
  f.u = std::move(img.planes[0]);
  f.w = std::move(img.planes[1]);
  f.t = t;
  return f;
}

FlowField quantize_f32(const FlowField& flow) {
  FlowField out = flow;
  for (auto& v : out.u) v = static_cast<double>(static_cast<float>(v));
  for (auto& v : out.w) v = static_cast<double>(static_cast<float>(v));
  return out;
}

std::string manifest_to_text(const DatasetManifest& m) {
  std::string out;
  out += "format=flivver-replay\n";
  out += "version=" + std::to_string(m.version) + "\n";
  out += "width_px=" + std::to_string(m.intrinsics.width_px) + "\n";
  out += "height_px=" + std::to_string(m.intrinsics.height_px) + "\n";
  out += "hfov_rad=" + fmt(m.intrinsics.hfov_rad) + "\n";
  out += "vfov_rad=" + fmt(m.intrinsics.vfov_rad) + "\n";
  out += "fps=" + fmt(m.fps) + "\n";
  out += "frame_count=" + std::to_string(m.frame_count) + "\n";
  out += "imu_rate_hz=" + fmt(m.imu_rate_hz) + "\n";
  out += "flow_units=rad/s\n";
  out += "accel_units=m/s^2\n";
  out += "gyro_units=rad/s\n";
  out += std::string("truth=") + (m.has_truth ? "yes" : "no") + "\n";
  out += "truth_depth_stride=" + std::to_string(m.truth_depth_stride) + "\n";
  return out;
}

DatasetManifest parse_manifest(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("manifest: expected key=value, got '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw DataError("manifest: missing key '" + key + "'");
    return it->second;
  };
  if (get("format") != "flivver-replay") throw DataError("manifest: unknown format '" + get("format") + "'");
  DatasetManifest m;
  m.version = static_cast<int>(to_long(get("version"), "manifest version"));
  if (m.version != kDatasetVersion) throw DataError("manifest: unsupported version " + std::to_string(m.version));
  if (get("flow_units") != "rad/s" || get("accel_units") != "m/s^2" || get("gyro_units") != "rad/s") {
    throw DataError("manifest: unsupported units");
  }
  m.intrinsics.width_px = static_cast<int>(to_long(get("width_px"), "manifest width_px"));
  m.intrinsics.height_px = static_cast<int>(to_long(get("height_px"), "manifest height_px"));
  m.intrinsics.hfov_rad = to_double(get("hfov_rad"), "manifest hfov_rad");
  m.intrinsics.vfov_rad = to_double(get("vfov_rad"), "manifest vfov_rad");
  m.fps = to_double(get("fps"), "manifest fps");
  m.frame_count = static_cast<int>(to_long(get("frame_count"), "manifest frame_count"));
  m.imu_rate_hz = to_double(get("imu_rate_hz"), "manifest imu_rate_hz");
  const std::string& truth = get("truth");
  if (truth != "yes" && truth != "no") throw DataError("manifest: truth must be yes or no");
  m.has_truth = truth == "yes";
  m.truth_depth_stride = static_cast<int>(to_long(get("truth_depth_stride"), "manifest truth_depth_stride"));
  try {
    m.intrinsics.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("manifest: ") + e.what());
  }
  if (!(m.fps > 0.0) || m.frame_count < 0 || !(m.imu_rate_hz > 0.0) || m.truth_depth_stride < 0) {
    throw DataError("manifest: invalid fps, frame_count, imu_rate_hz or truth_depth_stride");
  }
  return m;
}

std::string imu_to_csv(const std::vector<ImuSample>& samples) {
  std::string out = join(kImuHeader);
  for (const auto& s : samples) out += join({fmt(s.t), fmt(s.accel), fmt(s.gyro)});
  return out;
}

std::vector<ImuSample> parse_imu_csv(const std::string& text) {
  std::vector<ImuSample> out;
  for (const auto& row : parse_csv(text, kImuHeader, "imu.csv")) {
    out.push_back({to_double(row[0], "imu.csv"), to_double(row[1], "imu.csv"), to_double(row[2], "imu.csv")});
  }
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (!(out[i].t > out[i - 1].t)) throw DataError("imu.csv: timestamps must be strictly increasing");
  }
  return out;
}

std::string truth_to_csv(const TruthSeries& truth) {
  std::string out = join(kTruthHeader);
  for (std::size_t i = 0; i < truth.t.size(); ++i) {
    out += join({fmt(truth.t[i]), fmt(truth.v[i]), fmt(truth.a[i]), fmt(truth.x.empty() ? 0.0 : truth.x[i])});
  }
  return out;
}

TruthSeries parse_truth_csv(const std::string& text) {
  TruthSeries truth;
  for (const auto& row : parse_csv(text, kTruthHeader, "truth.csv")) {
    truth.t.push_back(to_double(row[0], "truth.csv"));
    truth.v.push_back(to_double(row[1], "truth.csv"));
    truth.a.push_back(to_double(row[2], "truth.csv"));
    truth.x.push_back(to_double(row[3], "truth.csv"));
  }
  try {
    truth.validate();
  } catch (const std::exception& e) {
    throw DataError(std::string("truth.csv: ") + e.what());
  }
  return truth;
}

std::vector<ImuFrame> resample_imu(const std::vector<ImuSample>& samples, const std::vector<double>& frame_times,
                                   double fps) {
  if (!(fps > 0.0)) throw std::invalid_argument("resample_imu: fps must be positive");
  const double dt = 1.0 / fps;
  std::vector<ImuFrame> out(frame_times.size());
  std::size_t lo = 0;
  for (std::size_t k = 0; k < frame_times.size(); ++k) {
    const double a = frame_times[k] - 0.5 * dt;
    const double b = frame_times[k] + 0.5 * dt;
    while (lo < samples.size() && samples[lo].t < a) ++lo;
    std::size_t hi = lo;
    double sa = 0.0;
    double sg = 0.0;
    while (hi < samples.size() && samples[hi].t < b) {
      sa += samples[hi].accel;
      sg += samples[hi].gyro;
      ++hi;
    }
    ImuFrame& f = out[k];
    f.sample_count = static_cast<int>(hi - lo);
    if (f.sample_count > 0) {
      f.accel = sa / f.sample_count;
      f.gyro = sg / f.sample_count;
      // A hole wider than one frame interval next to or inside this block.
      const double prev = lo > 0 ? samples[lo - 1].t : a;
      const double next = hi < samples.size() ? samples[hi].t : b;
      f.gap = samples[lo].t - prev > dt + 1e-9 || next - samples[hi - 1].t > dt + 1e-9;
      for (std::size_t i = lo + 1; i < hi && !f.gap; ++i) f.gap = samples[i].t - samples[i - 1].t > dt + 1e-9;
    } else {
      f.gap = true;
      if (k > 0) {
        f.accel = out[k - 1].accel;
        f.gyro = out[k - 1].gyro;
      } else if (lo > 0) {
        f.accel = samples[lo - 1].accel;
        f.gyro = samples[lo - 1].gyro;
      } else if (!samples.empty()) {
        f.accel = samples.front().accel;
        f.gyro = samples.front().gyro;
      }
    }
    lo = hi;
  }
  return out;
}

std::string frame_path(const std::string& root, int index) { return indexed(root, "frames", index, ".flvr"); }
std::string truth_depth_path(const std::string& root, int index) {
  return indexed(root, "truth_depth", index, ".flvr");
}
std::string manifest_path(const std::string& root) { return (fs::path(root) / "manifest.txt").string(); }
std::string imu_path(const std::string& root) { return (fs::path(root) / "imu.csv").string(); }
std::string truth_path(const std::string& root) { return (fs::path(root) / "truth.csv").string(); }

ReplayDataset::ReplayDataset(std::string root) : root_(std::move(root)) {
  if (!fs::is_directory(root_)) throw DataError("dataset directory not found: " + root_);
  manifest_ = parse_manifest(read_text_file(manifest_path(root_)));
  std::vector<double> times(static_cast<std::size_t>(manifest_.frame_count));
  for (int k = 0; k < manifest_.frame_count; ++k) times[static_cast<std::size_t>(k)] = frame_time(k);
  imu_frames_ = resample_imu(parse_imu_csv(read_text_file(imu_path(root_))), times, manifest_.fps);
  if (manifest_.has_truth) {
    truth_ = parse_truth_csv(read_text_file(truth_path(root_)));
    if (truth_->t.size() != static_cast<std::size_t>(manifest_.frame_count)) {
      throw DataError("truth.csv: row count does not match frame_count");
    }
  }
}

double ReplayDataset::frame_time(int index) const { return static_cast<double>(index) / manifest_.fps; }

FlowField ReplayDataset::flow(int index) const {
  if (index < 0 || index >= manifest_.frame_count) throw DataError("frame index out of range");
  FlowField f = read_flow_file(frame_path(root_, index), frame_time(index));
  if (f.width != manifest_.intrinsics.width_px || f.height != manifest_.intrinsics.height_px) {
    throw DataError(frame_path(root_, index) + ": size does not match the manifest");
  }
  return f;
}

bool ReplayDataset::has_truth_depth() const { return truth_ && manifest_.truth_depth_stride > 0; }

std::vector<double> ReplayDataset::truth_depth(double t) const {
  if (!has_truth_depth()) return {};
  const int stride = manifest_.truth_depth_stride;
  const int last = (manifest_.frame_count - 1) / stride * stride;
  int k = static_cast<int>(std::lround(t * manifest_.fps / stride)) * stride;
  k = std::clamp(k, 0, last);
  FlvrImage img = read_flvr(truth_depth_path(root_, k));
  if (img.planes.size() != 1) throw DataError("truth depth: expected one plane");
  const double shift = truth_->position_at(t) - truth_->position_at(frame_time(k));
  for (auto& d : img.planes[0]) d -= shift;
  return std::move(img.planes[0]);
}

std::string estimates_to_csv(const std::vector<EstimateRow>& rows) {
  std::string out = join(kEstimateHeader);
  for (const auto& r : rows) {
    out += join({fmt(r.t), r.v_raw_median ? fmt(*r.v_raw_median) : "nan", fmt(r.v_smoothed), fmt(r.v_corrected),
                 std::to_string(r.n_valid_fields), r.degenerate ? "1" : "0"});
  }
  return out;
}

std::vector<EstimateRow> parse_estimates_csv(const std::string& text) {
  std::vector<EstimateRow> out;
  for (const auto& row : parse_csv(text, kEstimateHeader, "estimates.csv")) {
    EstimateRow r;
    r.t = to_double(row[0], "estimates.csv");
    const double med = to_double(row[1], "estimates.csv");
    if (!std::isnan(med)) r.v_raw_median = med;
    r.v_smoothed = to_double(row[2], "estimates.csv");
    r.v_corrected = to_double(row[3], "estimates.csv");
    r.n_valid_fields = static_cast<int>(to_long(row[4], "estimates.csv"));
    if (row[5] != "0" && row[5] != "1") throw DataError("estimates.csv: degenerate_flag must be 0 or 1");
    r.degenerate = row[5] == "1";
    out.push_back(r);
  }
  return out;
}

void write_depth_outputs(const std::string& dir, const std::vector<DepthOutput>& outputs) {
  std::string index = join(kDepthIndexHeader);
  std::string fields = join(kFieldDepthHeader);
  int n = 0;
  for (const auto& o : outputs) {
    for (const auto* map : {o.direct ? &*o.direct : nullptr, o.tv_repaired ? &*o.tv_repaired : nullptr}) {
      if (!map) continue;
      char name[64];
      std::snprintf(name, sizeof name, "%s_%06d.flvr", to_string(map->method), n);
      std::vector<double> plane(map->d.size());
      for (std::size_t i = 0; i < plane.size(); ++i) plane[i] = map->mask[i] ? map->d[i] : std::nan("");
      write_flvr((fs::path(dir) / "depth" / name).string(), map->width, map->height, {&plane});
      index += join({fmt(o.t_ref), to_string(map->method), fmt(o.v_used), std::string("depth/") + name});
    }
    for (const auto& f : o.closed_form) fields += join({fmt(o.t_closed_form), std::to_string(f.field_id), fmt(f.d)});
    ++n;
  }
  atomic_write_file((fs::path(dir) / "depth" / "index.csv").string(), index);
  atomic_write_file((fs::path(dir) / "field_depth.csv").string(), fields);
}

DepthOutputs read_depth_outputs(const std::string& dir) {
  DepthOutputs out;
  const fs::path index = fs::path(dir) / "depth" / "index.csv";
  if (fs::exists(index)) {
    for (const auto& row : parse_csv(read_text_file(index.string()), kDepthIndexHeader, "depth/index.csv")) {
      DepthRecord rec;
      rec.t_ref = to_double(row[0], "depth/index.csv");
      if (row[1] == to_string(DepthMethod::direct)) rec.method = DepthMethod::direct;
      else if (row[1] == to_string(DepthMethod::tv_repaired)) rec.method = DepthMethod::tv_repaired;
      else throw DataError("depth/index.csv: unknown method '" + row[1] + "'");
      FlvrImage img = read_flvr((fs::path(dir) / row[3]).string());
      if (img.planes.size() != 1) throw DataError(row[3] + ": expected one plane");
      rec.d = std::move(img.planes[0]);
      rec.mask.resize(rec.d.size());
      for (std::size_t i = 0; i < rec.d.size(); ++i) {
        rec.mask[i] = std::isnan(rec.d[i]) ? 0 : 1;
        if (!rec.mask[i]) rec.d[i] = 0.0;
      }
      out.maps.push_back(std::move(rec));
    }
  }
  const fs::path fields = fs::path(dir) / "field_depth.csv";
  if (fs::exists(fields)) {
    for (const auto& row : parse_csv(read_text_file(fields.string()), kFieldDepthHeader, "field_depth.csv")) {
      out.fields.push_back({to_double(row[0], "field_depth.csv"),
                            static_cast<int>(to_long(row[1], "field_depth.csv")), to_double(row[2], "field_depth.csv")});
    }
  }
  return out;
}

std::string timing_to_csv(const TimingLog& log) {
  std::string out = join(kTimingHeader);
  for (const auto& [step, samples] : log.samples()) {
    for (double s : samples) out += join({step, fmt(s)});
  }
  return out;
}

TimingLog parse_timing_csv(const std::string& text) {
  TimingLog log;
  for (const auto& row : parse_csv(text, kTimingHeader, "timing.csv")) log.add(row[0], to_double(row[1], "timing.csv"));
  return log;
}

}  // namespace flivver
