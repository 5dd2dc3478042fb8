#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "geodesy.hpp"

namespace gnss_sentry::streams {

// One GNSS fix (10 Hz stream). t is GNSS time in seconds.
struct GnssFix {
  double t = 0.0;
  geodesy::GeoPoint pos;
  double speed_mps = 0.0;
};

// One CAN bus sample (50 Hz stream).
struct CanSample {
  double t = 0.0;
  double speed_mps = 0.0;
  double steering_deg = 0.0;
};

// One IMU sample (100 Hz stream), body-frame accelerations.
struct ImuSample {
  double t = 0.0;
  double accel_fwd = 0.0;
  double accel_right = 0.0;
  double accel_down = 0.0;
};

// One GNSS-timestamped row of fused features. label_distance_m is the
// distance traveled from this fix to the next one.
struct SyncedFrame {
  double t = 0.0;
  std::vector<double> features;
  double label_distance_m = 0.0;
};

// Which inputs feed the predictor. CAN speed, steering angle and forward
// acceleration are always on; the two extras are opt-in.
struct FeatureSelection {
  bool gnss_speed = false;
  bool prev_distance = false;

  std::vector<std::string> names() const;
  std::size_t count() const { return 3 + (gnss_speed ? 1 : 0) + (prev_distance ? 1 : 0); }

  // Parses a comma-separated list of extra feature names ("gnss_speed",
  // "prev_dist"); empty input selects the default set.
  static FeatureSelection from_extras(const std::string& extras);
  static std::optional<FeatureSelection> from_names(const std::vector<std::string>& names);
};

// Min/max scaling statistics, fit on training rows only.
struct NormStats {
  std::vector<double> feature_min;
  std::vector<double> feature_max;
  double label_min = 0.0;
  double label_max = 1.0;

  double normalize_feature(std::size_t i, double x) const;
  double normalize_label(double x) const;
  double denormalize_label(double y) const;
};

// CSV loaders; rows come back sorted by t, duplicate timestamps are a
// format error. Headers must match the documented schemas exactly.
std::vector<GnssFix> load_gnss_csv(const std::string& path);
std::vector<CanSample> load_can_csv(const std::string& path);
std::vector<ImuSample> load_imu_csv(const std::string& path);

void write_gnss_csv(std::span<const GnssFix> fixes, const std::string& path);

// Linear interpolation of a scalar series sampled at strictly increasing
// times. Exact at sample times; clamps to the nearest endpoint outside
// the sampled span.
double interpolate_at(std::span<const double> times, std::span<const double> values,
                      double t_query);

// Fuses the three streams onto GNSS timestamps: one frame per fix except
// the last, features interpolated from CAN/IMU at the fix time, label
// from consecutive fix positions.
std::vector<SyncedFrame> synchronize(std::span<const GnssFix> gnss,
                                     std::span<const CanSample> can,
                                     std::span<const ImuSample> imu,
                                     const FeatureSelection& selection = {},
                                     const geodesy::EarthModel& earth = {});

// Min/max over the first train_count frames. A constant feature (or
// constant labels) cannot be scaled and is reported as an error.
NormStats fit_norm(std::span<const SyncedFrame> frames, std::size_t train_count);

// (x - min) / (max - min) per feature and label. Rows outside the fitted
// range map outside [0, 1]; nothing is clipped.
std::vector<SyncedFrame> apply_norm(std::span<const SyncedFrame> frames, const NormStats& stats);

double invert_norm(double normalized, double min_value, double max_value);

// Chronological split. Defaults: 4500 train rows when the input has at
// least 5987 frames, otherwise three quarters; validation takes the rest.
std::pair<std::vector<SyncedFrame>, std::vector<SyncedFrame>> split(
    std::span<const SyncedFrame> frames, std::optional<std::size_t> train_count = {},
    std::optional<std::size_t> val_count = {});

// frames.csv: t, one column per feature, label_distance. SI units,
// pre-normalization.
void write_frames_csv(std::span<const SyncedFrame> frames,
                      const std::vector<std::string>& feature_names, const std::string& path);
std::pair<std::vector<std::string>, std::vector<SyncedFrame>> load_frames_csv(
    const std::string& path);

}  // namespace gnss_sentry::streams
