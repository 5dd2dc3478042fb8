#include "streams.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "error.hpp"
#include "textio.hpp"

namespace gnss_sentry::streams {

namespace {

using textio::format_double;
using textio::parse_finite_double;

struct CsvTable {
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line per row
};

// Reads a numeric CSV with an exact header. Blank lines are skipped.
CsvTable read_numeric_csv(const std::string& path, const std::vector<std::string>& header) {
  const std::string text = textio::read_file(path);
  const auto lines = textio::split_lines(text);
  if (lines.empty() || textio::trim(lines[0]).empty()) {
    throw_format(path + ": missing header row");
  }

  const auto head_fields = textio::split(lines[0], ',');
  if (head_fields.size() != header.size()) {
    throw_format(path + ": expected " + std::to_string(header.size()) +
                 " columns in header, got " + std::to_string(head_fields.size()));
  }
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (textio::trim(head_fields[i]) != header[i]) {
      throw_format(path + ": missing column '" + header[i] + "' (header field " +
                   std::to_string(i + 1) + " is '" + std::string(textio::trim(head_fields[i])) +
                   "')");
    }
  }

  CsvTable table;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (textio::trim(lines[li]).empty()) continue;
    const auto fields = textio::split(lines[li], ',');
    if (fields.size() != header.size()) {
      throw_format(path + ":" + std::to_string(li + 1) + ": expected " +
                   std::to_string(header.size()) + " fields, got " +
                   std::to_string(fields.size()));
    }
    std::vector<double> row(fields.size());
    for (std::size_t fi = 0; fi < fields.size(); ++fi) {
      const auto value = parse_finite_double(fields[fi]);
      if (!value) {
        throw_format(path + ":" + std::to_string(li + 1) + ": column '" + header[fi] +
                     "': not a finite number: '" + std::string(textio::trim(fields[fi])) + "'");
      }
      row[fi] = *value;
    }
    table.rows.push_back(std::move(row));
    table.line_numbers.push_back(li + 1);
  }
  return table;
}

// Sorts rows by the time column and rejects duplicate timestamps.
void sort_by_time(CsvTable& table, const std::string& path) {
  std::vector<std::size_t> order(table.rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return table.rows[a][0] < table.rows[b][0];
  });

  CsvTable sorted;
  sorted.rows.reserve(table.rows.size());
  sorted.line_numbers.reserve(table.rows.size());
  for (std::size_t idx : order) {
    sorted.rows.push_back(std::move(table.rows[idx]));
    sorted.line_numbers.push_back(table.line_numbers[idx]);
  }
  for (std::size_t i = 1; i < sorted.rows.size(); ++i) {
    if (sorted.rows[i][0] == sorted.rows[i - 1][0]) {
      throw_format(path + ":" + std::to_string(sorted.line_numbers[i]) +
                   ": duplicate timestamp " + format_double(sorted.rows[i][0]));
    }
  }
  table = std::move(sorted);
}

void require_sorted_nonempty(std::span<const double> times, const char* stream) {
  if (times.empty()) throw_invalid(std::string("synchronize: empty ") + stream + " stream");
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) {
      throw_invalid(std::string("synchronize: ") + stream + " timestamps not strictly increasing");
    }
  }
}

// Bracketing index and weight for linear interpolation with endpoint
// clamping. value = v[i] * (1 - w) + v[i+1] * w.
struct InterpPos {
  std::size_t index;
  double weight;
};

InterpPos interp_pos(std::span<const double> times, double t_query) {
  const auto it = std::lower_bound(times.begin(), times.end(), t_query);
  if (it == times.begin()) return {0, 0.0};
  if (it == times.end()) return {times.size() - 1, 0.0};
  const std::size_t hi = static_cast<std::size_t>(it - times.begin());
  if (times[hi] == t_query) return {hi, 0.0};
  const std::size_t lo = hi - 1;
  return {lo, (t_query - times[lo]) / (times[hi] - times[lo])};
}

double lerp_at(const InterpPos& pos, std::span<const double> values) {
  if (pos.weight == 0.0) return values[pos.index];
  return values[pos.index] * (1.0 - pos.weight) + values[pos.index + 1] * pos.weight;
}

}  // namespace

std::vector<std::string> FeatureSelection::names() const {
  std::vector<std::string> out{"can_speed", "steering", "accel_fwd"};
  if (gnss_speed) out.push_back("gnss_speed");
  if (prev_distance) out.push_back("prev_dist");
  return out;
}

FeatureSelection FeatureSelection::from_extras(const std::string& extras) {
  FeatureSelection sel;
  for (auto token : textio::split(extras, ',')) {
    token = textio::trim(token);
    if (token.empty()) continue;
    if (token == "gnss_speed") {
      sel.gnss_speed = true;
    } else if (token == "prev_dist") {
      sel.prev_distance = true;
    } else {
      throw_invalid("unknown feature '" + std::string(token) +
                    "' (available extras: gnss_speed, prev_dist)");
    }
  }
  return sel;
}

std::optional<FeatureSelection> FeatureSelection::from_names(
    const std::vector<std::string>& names) {
  for (bool prev : {false, true}) {
    for (bool gspeed : {false, true}) {
      FeatureSelection sel{gspeed, prev};
      if (sel.names() == names) return sel;
    }
  }
  return std::nullopt;
}

double NormStats::normalize_feature(std::size_t i, double x) const {
  return (x - feature_min[i]) / (feature_max[i] - feature_min[i]);
}

double NormStats::normalize_label(double x) const {
  return (x - label_min) / (label_max - label_min);
}

double NormStats::denormalize_label(double y) const {
  return invert_norm(y, label_min, label_max);
}

std::vector<GnssFix> load_gnss_csv(const std::string& path) {
  CsvTable table = read_numeric_csv(path, {"t", "lat_deg", "lon_deg", "speed_mps"});
  sort_by_time(table, path);
  std::vector<GnssFix> fixes;
  fixes.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    if (row[1] < -90.0 || row[1] > 90.0 || row[2] < -180.0 || row[2] > 180.0) {
      throw_format(path + ":" + std::to_string(table.line_numbers[i]) +
                   ": latitude/longitude out of range");
    }
    if (row[3] < 0.0) {
      throw_format(path + ":" + std::to_string(table.line_numbers[i]) + ": negative speed");
    }
    fixes.push_back({row[0], {row[1], row[2]}, row[3]});
  }
  return fixes;
}

std::vector<CanSample> load_can_csv(const std::string& path) {
  CsvTable table = read_numeric_csv(path, {"t", "speed_mps", "steering_deg"});
  sort_by_time(table, path);
  std::vector<CanSample> samples;
  samples.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    if (row[1] < 0.0) {
      throw_format(path + ":" + std::to_string(table.line_numbers[i]) + ": negative speed");
    }
    samples.push_back({row[0], row[1], row[2]});
  }
  return samples;
}

std::vector<ImuSample> load_imu_csv(const std::string& path) {
  CsvTable table = read_numeric_csv(path, {"t", "ax_fwd", "ax_right", "ax_down"});
  sort_by_time(table, path);
  std::vector<ImuSample> samples;
  samples.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    samples.push_back({row[0], row[1], row[2], row[3]});
  }
  return samples;
}

void write_gnss_csv(std::span<const GnssFix> fixes, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_io("cannot write file: " + path);
  out << "t,lat_deg,lon_deg,speed_mps\n";
  for (const auto& fix : fixes) {
    out << format_double(fix.t) << ',' << format_double(fix.pos.lat_deg) << ','
        << format_double(fix.pos.lon_deg) << ',' << format_double(fix.speed_mps) << '\n';
  }
  if (!out) throw_io("write failed: " + path);
}

double interpolate_at(std::span<const double> times, std::span<const double> values,
                      double t_query) {
  if (times.empty()) throw_invalid("interpolate_at: empty sample sequence");
  if (times.size() != values.size()) {
    throw_invalid("interpolate_at: times/values length mismatch");
  }
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) {
      throw_invalid("interpolate_at: sample times not strictly increasing");
    }
  }
  if (!std::isfinite(t_query)) throw_invalid("interpolate_at: non-finite query time");
  return lerp_at(interp_pos(times, t_query), values);
}

std::vector<SyncedFrame> synchronize(std::span<const GnssFix> gnss,
                                     std::span<const CanSample> can,
                                     std::span<const ImuSample> imu,
                                     const FeatureSelection& selection,
                                     const geodesy::EarthModel& earth) {
  std::vector<double> gnss_t(gnss.size());
  for (std::size_t i = 0; i < gnss.size(); ++i) gnss_t[i] = gnss[i].t;
  std::vector<double> can_t(can.size()), can_speed(can.size()), can_steer(can.size());
  for (std::size_t i = 0; i < can.size(); ++i) {
    can_t[i] = can[i].t;
    can_speed[i] = can[i].speed_mps;
    can_steer[i] = can[i].steering_deg;
  }
  std::vector<double> imu_t(imu.size()), imu_fwd(imu.size());
  for (std::size_t i = 0; i < imu.size(); ++i) {
    imu_t[i] = imu[i].t;
    imu_fwd[i] = imu[i].accel_fwd;
  }

  require_sorted_nonempty(gnss_t, "GNSS");
  require_sorted_nonempty(can_t, "CAN");
  require_sorted_nonempty(imu_t, "IMU");

  std::vector<SyncedFrame> frames;
  if (gnss.size() < 2) return frames;  // no successor to label
  frames.reserve(gnss.size() - 1);

  double prev_step_m = 0.0;
  for (std::size_t i = 0; i + 1 < gnss.size(); ++i) {
    SyncedFrame frame;
    frame.t = gnss[i].t;

    const InterpPos cp = interp_pos(can_t, frame.t);
    const InterpPos ip = interp_pos(imu_t, frame.t);
    frame.features.reserve(selection.count());
    frame.features.push_back(lerp_at(cp, can_speed));
    frame.features.push_back(lerp_at(cp, can_steer));
    frame.features.push_back(lerp_at(ip, imu_fwd));
    if (selection.gnss_speed) frame.features.push_back(gnss[i].speed_mps);
    if (selection.prev_distance) frame.features.push_back(prev_step_m);

    frame.label_distance_m = geodesy::haversine_distance(gnss[i].pos, gnss[i + 1].pos, earth);
    prev_step_m = frame.label_distance_m;
    frames.push_back(std::move(frame));
  }
  return frames;
}

NormStats fit_norm(std::span<const SyncedFrame> frames, std::size_t train_count) {
  if (train_count < 2) throw_invalid("fit_norm: need at least 2 training rows");
  if (train_count > frames.size()) {
    throw_invalid("fit_norm: train_count exceeds frame count");
  }
  const std::size_t n_features = frames[0].features.size();

  NormStats stats;
  stats.feature_min.assign(n_features, std::numeric_limits<double>::infinity());
  stats.feature_max.assign(n_features, -std::numeric_limits<double>::infinity());
  stats.label_min = std::numeric_limits<double>::infinity();
  stats.label_max = -std::numeric_limits<double>::infinity();

  for (std::size_t i = 0; i < train_count; ++i) {
    const auto& frame = frames[i];
    if (frame.features.size() != n_features) {
      throw_invalid("fit_norm: inconsistent feature count across frames");
    }
    for (std::size_t f = 0; f < n_features; ++f) {
      stats.feature_min[f] = std::min(stats.feature_min[f], frame.features[f]);
      stats.feature_max[f] = std::max(stats.feature_max[f], frame.features[f]);
    }
    stats.label_min = std::min(stats.label_min, frame.label_distance_m);
    stats.label_max = std::max(stats.label_max, frame.label_distance_m);
  }

  for (std::size_t f = 0; f < n_features; ++f) {
    if (!(stats.feature_max[f] > stats.feature_min[f])) {
      throw Error(ErrorCode::degenerate_feature,
                  "fit_norm: feature " + std::to_string(f) + " is constant (" +
                      textio::format_double(stats.feature_min[f]) + ") over the training rows");
    }
  }
  if (!(stats.label_max > stats.label_min)) {
    throw Error(ErrorCode::degenerate_feature,
                "fit_norm: label is constant over the training rows");
  }
  return stats;
}

std::vector<SyncedFrame> apply_norm(std::span<const SyncedFrame> frames, const NormStats& stats) {
  std::vector<SyncedFrame> out;
  out.reserve(frames.size());
  for (const auto& frame : frames) {
    if (frame.features.size() != stats.feature_min.size()) {
      throw_invalid("apply_norm: frame feature count does not match stats");
    }
    SyncedFrame norm;
    norm.t = frame.t;
    norm.features.resize(frame.features.size());
    for (std::size_t f = 0; f < frame.features.size(); ++f) {
      norm.features[f] = stats.normalize_feature(f, frame.features[f]);
    }
    norm.label_distance_m = stats.normalize_label(frame.label_distance_m);
    out.push_back(std::move(norm));
  }
  return out;
}

double invert_norm(double normalized, double min_value, double max_value) {
  return normalized * (max_value - min_value) + min_value;
}

std::pair<std::vector<SyncedFrame>, std::vector<SyncedFrame>> split(
    std::span<const SyncedFrame> frames, std::optional<std::size_t> train_count,
    std::optional<std::size_t> val_count) {
  const std::size_t n = frames.size();
  std::size_t n_train = train_count.value_or(n >= 5987 ? 4500 : (n * 3) / 4);
  if (n_train == 0 || n_train >= n) {
    throw_invalid("split: need " + std::to_string(n_train + 1) + " frames for a " +
                  std::to_string(n_train) + "-row training set, have " + std::to_string(n));
  }
  std::size_t n_val = val_count.value_or(n - n_train);
  if (n_val == 0 || n_train + n_val > n) {
    throw_invalid("split: requested sizes " + std::to_string(n_train) + "+" +
                  std::to_string(n_val) + " exceed " + std::to_string(n) + " frames");
  }
  std::vector<SyncedFrame> train(frames.begin(), frames.begin() + n_train);
  std::vector<SyncedFrame> val(frames.begin() + n_train, frames.begin() + n_train + n_val);
  return {std::move(train), std::move(val)};
}

void write_frames_csv(std::span<const SyncedFrame> frames,
                      const std::vector<std::string>& feature_names, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_io("cannot write file: " + path);
  out << 't';
  for (const auto& name : feature_names) out << ',' << name;
  out << ",label_distance\n";
  for (const auto& frame : frames) {
    if (frame.features.size() != feature_names.size()) {
      throw_invalid("write_frames_csv: frame feature count does not match names");
    }
    out << format_double(frame.t);
    for (double f : frame.features) out << ',' << format_double(f);
    out << ',' << format_double(frame.label_distance_m) << '\n';
  }
  if (!out) throw_io("write failed: " + path);
}

std::pair<std::vector<std::string>, std::vector<SyncedFrame>> load_frames_csv(
    const std::string& path) {
  const std::string text = textio::read_file(path);
  const auto lines = textio::split_lines(text);
  if (lines.empty() || textio::trim(lines[0]).empty()) {
    throw_format(path + ": missing header row");
  }
  const auto head = textio::split(lines[0], ',');
  if (head.size() < 3 || textio::trim(head.front()) != "t" ||
      textio::trim(head.back()) != "label_distance") {
    throw_format(path + ": expected header 't,<features...>,label_distance'");
  }
  std::vector<std::string> feature_names;
  for (std::size_t i = 1; i + 1 < head.size(); ++i) {
    feature_names.emplace_back(textio::trim(head[i]));
  }

  std::vector<SyncedFrame> frames;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (textio::trim(lines[li]).empty()) continue;
    const auto fields = textio::split(lines[li], ',');
    if (fields.size() != head.size()) {
      throw_format(path + ":" + std::to_string(li + 1) + ": expected " +
                   std::to_string(head.size()) + " fields, got " + std::to_string(fields.size()));
    }
    SyncedFrame frame;
    std::vector<double> row(fields.size());
    for (std::size_t fi = 0; fi < fields.size(); ++fi) {
      const auto value = parse_finite_double(fields[fi]);
      if (!value) {
        throw_format(path + ":" + std::to_string(li + 1) + ": not a finite number: '" +
                     std::string(textio::trim(fields[fi])) + "'");
      }
      row[fi] = *value;
    }
    frame.t = row.front();
    frame.features.assign(row.begin() + 1, row.end() - 1);
    frame.label_distance_m = row.back();
    if (frame.label_distance_m < 0.0) {
      throw_format(path + ":" + std::to_string(li + 1) + ": negative label distance");
    }
    frames.push_back(std::move(frame));
  }
  return {std::move(feature_names), std::move(frames)};
}

}  // namespace gnss_sentry::streams
