#include "detector.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "error.hpp"

namespace gnss_sentry::detector {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_us(Clock::time_point start) {
  return std::chrono::duration<double, std::micro>(Clock::now() - start).count();
}

}  // namespace

DetectionConfig DetectionConfig::make(double gnss_position_error_m, double prediction_error_m) {
  if (!(gnss_position_error_m >= 0.0) || !(prediction_error_m >= 0.0)) {
    throw_invalid("detection config: error components must be non-negative");
  }
  DetectionConfig config;
  config.gnss_position_error_m = gnss_position_error_m;
  config.prediction_error_m = prediction_error_m;
  config.threshold_gamma_m = gnss_position_error_m + prediction_error_m;
  return config;
}

DetectionConfig calibrate_threshold(const lstm::LstmModel& model,
                                    std::span<const streams::SyncedFrame> clean_frames,
                                    double gnss_position_error_m) {
  if (clean_frames.empty()) throw_invalid("calibrate_threshold: empty calibration set");
  const lstm::EvalResult eval = lstm::evaluate(model, clean_frames);
  return DetectionConfig::make(gnss_position_error_m, eval.max_abs_err_m);
}

DetectionVerdict detect_step(double predicted_m, const streams::GnssFix& fix_t,
                             const streams::GnssFix& fix_next, const DetectionConfig& config,
                             ResidualMode mode, const geodesy::EarthModel& earth) {
  if (!(fix_next.t > fix_t.t)) {
    throw_invalid("detect_step: fix timestamps must be strictly increasing");
  }
  const auto start = Clock::now();
  DetectionVerdict verdict;
  verdict.t = fix_t.t;
  verdict.predicted_m = predicted_m;
  verdict.observed_m = geodesy::haversine_distance(fix_t.pos, fix_next.pos, earth);
  verdict.residual_m = mode == ResidualMode::raw ? verdict.observed_m
                                                 : std::abs(verdict.observed_m - predicted_m);
  verdict.threshold_m = config.threshold_gamma_m;
  verdict.alarm = verdict.residual_m > verdict.threshold_m;
  verdict.latency_us = elapsed_us(start);
  return verdict;
}

DetectionRun detect_stream(const lstm::LstmModel& model,
                           std::span<const streams::GnssFix> gnss_under_test,
                           std::span<const streams::CanSample> can,
                           std::span<const streams::ImuSample> imu,
                           const DetectionConfig& config, ResidualMode mode,
                           std::optional<std::size_t> truth_onset,
                           const geodesy::EarthModel& earth) {
  const auto selection = streams::FeatureSelection::from_names(model.feature_names);
  if (!selection) throw_invalid("detect_stream: model has an unknown feature set");

  const auto frames = streams::synchronize(gnss_under_test, can, imu, *selection, earth);
  const int window_len = model.config.window_len;
  if (frames.size() < static_cast<std::size_t>(window_len)) {
    throw_invalid("detect_stream: insufficient frames (" + std::to_string(frames.size()) +
                  ") for window length " + std::to_string(window_len));
  }

  // Normalization of the incoming features is part of ingest; the timed
  // region is prediction + observed distance + compare.
  const auto normalized = streams::apply_norm(frames, model.norm);
  const Eigen::Index n_features = static_cast<Eigen::Index>(model.feature_names.size());

  DetectionRun run;
  run.verdicts.reserve(frames.size() - window_len + 1);

  Eigen::MatrixXd window(window_len, n_features);
  lstm::ForwardCache cache;
  for (std::size_t step = window_len - 1; step < frames.size(); ++step) {
    const auto start = Clock::now();
    for (int t = 0; t < window_len; ++t) {
      const auto& frame = normalized[step + 1 - window_len + t];
      for (Eigen::Index f = 0; f < n_features; ++f) window(t, f) = frame.features[f];
    }
    const double predicted_norm = lstm::forward(model.params, window, &cache);
    const double predicted_m = model.norm.denormalize_label(predicted_norm);

    DetectionVerdict verdict =
        detect_step(predicted_m, gnss_under_test[step], gnss_under_test[step + 1], config, mode,
                    earth);
    verdict.step_index = step;
    verdict.latency_us = elapsed_us(start);
    run.verdicts.push_back(verdict);
  }

  run.summary = detection_report(run.verdicts, truth_onset);
  return run;
}

DetectionSummary detection_report(std::span<const DetectionVerdict> verdicts,
                                  std::optional<std::size_t> truth_onset) {
  if (verdicts.empty()) throw_invalid("detection_report: no verdicts");

  DetectionSummary summary;
  summary.verdict_count = verdicts.size();
  summary.truth_onset = truth_onset;

  double latency_sum = 0.0;
  std::size_t pre_onset_steps = 0;
  for (const auto& v : verdicts) {
    latency_sum += v.latency_us;
    summary.max_latency_us = std::max(summary.max_latency_us, v.latency_us);
    const bool pre_onset = truth_onset && v.step_index < *truth_onset;
    if (pre_onset) ++pre_onset_steps;
    if (v.alarm) {
      ++summary.alarm_count;
      if (!summary.first_alarm_step) summary.first_alarm_step = v.step_index;
      if (pre_onset || !truth_onset) ++summary.false_alarm_count;
    }
  }
  summary.mean_latency_us = latency_sum / static_cast<double>(verdicts.size());
  summary.budget_ok = summary.mean_latency_us < 100'000.0;

  if (truth_onset) {
    summary.false_alarm_rate =
        pre_onset_steps == 0
            ? 0.0
            : static_cast<double>(summary.false_alarm_count) / static_cast<double>(pre_onset_steps);
    if (summary.first_alarm_step) {
      summary.detection_delay_steps = static_cast<long long>(*summary.first_alarm_step) -
                                      static_cast<long long>(*truth_onset);
    }
  } else {
    summary.false_alarm_rate =
        static_cast<double>(summary.false_alarm_count) / static_cast<double>(verdicts.size());
  }
  return summary;
}

}  // namespace gnss_sentry::detector
