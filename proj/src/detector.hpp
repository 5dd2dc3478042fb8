#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "lstm.hpp"
#include "streams.hpp"

namespace gnss_sentry::detector {

// Threshold components. The alarm threshold is their exact sum.
struct DetectionConfig {
  double gnss_position_error_m = 1.5;
  double prediction_error_m = 0.0;
  double threshold_gamma_m = 1.5;

  static DetectionConfig make(double gnss_position_error_m, double prediction_error_m);
};

// What gets compared against the threshold.
//   diff: |observed - predicted|
//   raw:  the observed step distance itself
enum class ResidualMode { diff, raw };

struct DetectionVerdict {
  double t = 0.0;
  std::size_t step_index = 0;  // index of the step's starting fix
  double predicted_m = 0.0;
  double observed_m = 0.0;
  double residual_m = 0.0;
  double threshold_m = 0.0;
  bool alarm = false;
  double latency_us = 0.0;  // compute time for this step
};

struct DetectionSummary {
  std::size_t verdict_count = 0;
  std::size_t alarm_count = 0;
  std::optional<std::size_t> first_alarm_step;
  std::optional<std::size_t> truth_onset;
  std::optional<long long> detection_delay_steps;
  std::size_t false_alarm_count = 0;
  double false_alarm_rate = 0.0;
  double mean_latency_us = 0.0;
  double max_latency_us = 0.0;
  bool budget_ok = true;  // mean step latency under 100 ms
};

struct DetectionRun {
  std::vector<DetectionVerdict> verdicts;
  DetectionSummary summary;
};

// prediction_error_m = max |prediction - label| over attack-free frames;
// gamma = gnss error + prediction error.
DetectionConfig calibrate_threshold(const lstm::LstmModel& model,
                                    std::span<const streams::SyncedFrame> clean_frames,
                                    double gnss_position_error_m);

// One step: observed distance from consecutive fixes, residual against
// the prediction, strict-inequality alarm. Latency covers the computation
// in this call.
DetectionVerdict detect_step(double predicted_m, const streams::GnssFix& fix_t,
                             const streams::GnssFix& fix_next, const DetectionConfig& config,
                             ResidualMode mode = ResidualMode::diff,
                             const geodesy::EarthModel& earth = {});

// Runs the full pipeline over a GNSS stream under test: synchronize with
// CAN/IMU (trusted), predict each step, compare. truth_onset, when known,
// enables delay and false-alarm accounting.
DetectionRun detect_stream(const lstm::LstmModel& model,
                           std::span<const streams::GnssFix> gnss_under_test,
                           std::span<const streams::CanSample> can,
                           std::span<const streams::ImuSample> imu,
                           const DetectionConfig& config, ResidualMode mode = ResidualMode::diff,
                           std::optional<std::size_t> truth_onset = {},
                           const geodesy::EarthModel& earth = {});

// Summarizes verdicts: first alarm, detection delay past the onset,
// pre-onset false-alarm rate, latency statistics.
DetectionSummary detection_report(std::span<const DetectionVerdict> verdicts,
                                  std::optional<std::size_t> truth_onset = {});

}  // namespace gnss_sentry::detector
