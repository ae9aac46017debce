#pragma once

#include <chrono>
#include <map>
#include <string>
#include <vector>

namespace flivver {

/// Wall-clock samples per named step, in seconds.
class TimingLog {
 public:
  void add(const std::string& step, double seconds) { samples_[step].push_back(seconds); }
  const std::map<std::string, std::vector<double>>& samples() const { return samples_; }
  bool empty() const { return samples_.empty(); }

 private:
  std::map<std::string, std::vector<double>> samples_;
};

class ScopedTimer {
 public:
  ScopedTimer(TimingLog* log, const char* step) : log_(log), step_(step) {
    if (log_) start_ = std::chrono::steady_clock::now();
  }
  ~ScopedTimer() {
    if (log_) {
      const auto end = std::chrono::steady_clock::now();
      log_->add(step_, std::chrono::duration<double>(end - start_).count());
    }
  }
  ScopedTimer(const ScopedTimer&) = delete;
  ScopedTimer& operator=(const ScopedTimer&) = delete;

 private:
  TimingLog* log_;
  const char* step_;
  std::chrono::steady_clock::time_point start_{};
};

// Step names of the per-frame pipeline, in processing order.
inline constexpr const char* kStepImageAlignment = "1A_image_alignment";
inline constexpr const char* kStepRatio = "2_time_to_contact_inverse";
inline constexpr const char* kStepPooling = "3_receptive_field_stats";
inline constexpr const char* kStepRawVelocity = "4_raw_velocity";
inline constexpr const char* kStepMedian = "5_median_velocity";
inline constexpr const char* kStepFilter = "6_filtered_velocity";

}  // namespace flivver
