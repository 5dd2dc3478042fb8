// Acceptance suite: one pass/fail line per criterion, nonzero exit if
// any criterion fails. Heavier than the unit suites; runs the full
// pipeline at its production configuration.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "detector.hpp"
#include "error.hpp"
#include "geodesy.hpp"
#include "lstm.hpp"
#include "rng.hpp"
#include "spoofsim.hpp"
#include "streams.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace gnss_sentry;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int criterion, const std::string& name, bool ok, const std::string& detail) {
  std::printf("%s  criterion %2d: %s (%s)\n", ok ? "PASS" : "FAIL", criterion, name.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string format(double value) {
  std::ostringstream ss;
  ss << value;
  return ss.str();
}

// --- criterion 1: haversine vs spherical law of cosines ---------------

void criterion_1() {
  Rng rng(910);
  const geodesy::EarthModel earth;
  const auto start = Clock::now();
  int compared = 0;
  int range_only = 0;
  double worst_rel = 0.0;
  bool ok = true;
  for (int i = 0; i < 10'000; ++i) {
    const double lat1 = std::asin(rng.uniform(-1.0, 1.0)) * 180.0 / geodesy::kPi;
    const double lon1 = rng.uniform(-180.0, 180.0);
    const double lat2 = std::asin(rng.uniform(-1.0, 1.0)) * 180.0 / geodesy::kPi;
    const double lon2 = rng.uniform(-180.0, 180.0);
    const double hv = geodesy::haversine_distance({lat1, lon1}, {lat2, lon2}, earth);
    if (hv < 0.0 || hv > geodesy::kPi * earth.radius_m * (1.0 + 1e-15)) ok = false;
    if (hv > (geodesy::kPi - 1e-3) * earth.radius_m) {
      ++range_only;
      continue;
    }
    const double loc =
        oracles::law_of_cosines_distance(lat1, lon1, lat2, lon2, earth.radius_m);
    const double rel = std::abs(hv - loc) / std::max({loc, hv, 1e-9});
    worst_rel = std::max(worst_rel, rel);
    if (rel >= 1e-6) ok = false;
    ++compared;
  }
  const double elapsed = seconds_since(start);
  if (elapsed >= 1.0 || compared < 9'000) ok = false;
  report(1, "geodesy oracle equivalence", ok,
         format(compared) + " pairs, worst rel " + format(worst_rel) + ", " +
             format(range_only) + " near-antipodal range-checked, " + format(elapsed) + " s");
}

// --- criterion 2: gradient check ---------------------------------------

void criterion_2() {
  const auto start = Clock::now();
  Rng rng(42);
  const lstm::LstmParams params = lstm::init_params(8, 3, 42);
  Eigen::MatrixXd window(5, 3);
  for (int t = 0; t < 5; ++t) {
    for (int f = 0; f < 3; ++f) window(t, f) = rng.uniform(-1.0, 1.0);
  }
  const double truth = 0.3;

  lstm::ForwardCache cache;
  lstm::forward(params, window, &cache);
  const lstm::LstmParams analytic = lstm::backward(params, window, truth, cache);
  const lstm::LstmParams numeric = oracles::fd_gradients(params, window, truth, 1e-5);

  bool ok = true;
  double worst_rel = 0.0, worst_abs = 0.0;
  auto a = analytic.tensors();
  auto n = numeric.tensors();
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (Eigen::Index r = 0; r < a[i]->rows(); ++r) {
      for (Eigen::Index c = 0; c < a[i]->cols(); ++c) {
        const double grad = (*a[i])(r, c);
        const double fd = (*n[i])(r, c);
        if (std::abs(grad) >= 1e-3) {
          const double rel = std::abs(grad - fd) / std::abs(grad);
          worst_rel = std::max(worst_rel, rel);
          if (rel >= 1e-4) ok = false;
        } else {
          const double abs_err = std::abs(grad - fd);
          worst_abs = std::max(worst_abs, abs_err);
          if (abs_err >= 1e-7) ok = false;
        }
      }
    }
  }
  const double elapsed = seconds_since(start);
  if (elapsed >= 10.0) ok = false;
  report(2, "BPTT gradients vs central finite differences", ok,
         "worst rel " + format(worst_rel) + ", worst abs " + format(worst_abs) + ", " +
             format(elapsed) + " s");
}

// --- criteria 3-7 share the synthetic drive and trained model ----------

struct DriveState {
  testsupport::SyntheticDrive drive;
  std::vector<streams::SyncedFrame> frames;
  std::vector<streams::SyncedFrame> train_frames;
  std::vector<streams::SyncedFrame> val_frames;
  lstm::TrainResult trained;
  detector::DetectionConfig detection;
  bool trained_ok = false;
};

DriveState g_state;

void criterion_3() {
  const auto start = Clock::now();
  g_state.drive = testsupport::make_drive(6001, 4242);
  g_state.frames = streams::synchronize(g_state.drive.gnss, g_state.drive.can, g_state.drive.imu);
  auto [train_frames, val_frames] = streams::split(g_state.frames);
  g_state.train_frames = std::move(train_frames);
  g_state.val_frames = std::move(val_frames);

  const lstm::TrainConfig config;  // 50 neurons, 100 epochs, batch 50, lr 0.01
  g_state.trained = lstm::train(g_state.train_frames, g_state.val_frames, config,
                                streams::FeatureSelection{}.names());
  const auto eval = lstm::evaluate(g_state.trained.model, g_state.val_frames);
  const double elapsed = seconds_since(start);

  g_state.detection = detector::calibrate_threshold(g_state.trained.model, g_state.val_frames,
                                                    1.5);
  const bool learned = eval.rmse_m <= 0.02;
  const bool improved =
      g_state.trained.history.back().train_mae < g_state.trained.history.front().train_mae;
  const bool in_time = elapsed < 120.0;
  g_state.trained_ok = learned && improved && in_time;
  report(3, "learnability on the 6000-frame synthetic drive", g_state.trained_ok,
         "val rmse " + format(eval.rmse_m) + " m (<= 0.02), train MAE " +
             format(g_state.trained.history.front().train_mae) + " -> " +
             format(g_state.trained.history.back().train_mae) + ", " + format(elapsed) + " s");
}

void criterion_4() {
  lstm::LstmModel stub;
  stub.params = lstm::LstmParams::zeros(4, 3);
  stub.norm.feature_min = {0.0, 0.0, 0.0};
  stub.norm.feature_max = {1.0, 1.0, 1.0};
  stub.norm.label_min = 0.0;
  stub.norm.label_max = 1.0;
  stub.feature_names = {"can_speed", "steering", "accel_fwd"};
  stub.config.window_len = 1;

  std::vector<streams::SyncedFrame> frames;
  frames.push_back({0.0, {0.1, 0.2, 0.3}, 0.0});
  frames.push_back({0.1, {0.1, 0.2, 0.3}, 0.0650});

  const auto config = detector::calibrate_threshold(stub, frames, 1.5);
  const bool exact_sum = config.threshold_gamma_m == 1.5 + 0.0650;
  const bool exact_literal = config.threshold_gamma_m == 1.5650;
  const bool additive = (config.threshold_gamma_m - config.gnss_position_error_m -
                         config.prediction_error_m) == 0.0;
  report(4, "threshold arithmetic gamma = 1.5650 m", exact_sum && exact_literal && additive,
         "gamma " + format(config.threshold_gamma_m) + ", prediction error " +
             format(config.prediction_error_m));
}

std::optional<detector::DetectionRun> g_spoof_run;

void criterion_5() {
  if (!g_state.trained_ok) {
    report(5, "detection efficacy vs brute-force replay", false, "skipped: training failed");
    return;
  }
  const std::size_t onset = 3000;
  const auto spoofed = spoofsim::synth_deviation(g_state.drive.gnss, onset, 3.0);
  g_spoof_run = detector::detect_stream(g_state.trained.model, spoofed, g_state.drive.can,
                                        g_state.drive.imu, g_state.detection,
                                        detector::ResidualMode::diff, onset);

  const auto spoofed_frames = streams::synchronize(spoofed, g_state.drive.can,
                                                   g_state.drive.imu);
  const auto expected = oracles::replay_first_alarm(
      g_state.trained.model, spoofed_frames, spoofed, g_state.detection.threshold_gamma_m,
      geodesy::kMeanEarthRadiusM);

  const auto& summary = g_spoof_run->summary;
  const bool fired = summary.first_alarm_step.has_value() && expected.has_value();
  const bool agrees = fired && *summary.first_alarm_step == *expected;
  const bool clean_before = summary.false_alarm_count == 0;
  const bool after_onset = fired && *summary.first_alarm_step >= onset;
  report(5, "detection efficacy vs brute-force replay", agrees && clean_before && after_onset,
         fired ? ("first alarm step " + format(*summary.first_alarm_step) + ", replay " +
                  format(*expected) + ", pre-onset false alarms " +
                  format(summary.false_alarm_count))
               : "no alarm fired");
}

void criterion_6() {
  bool ok = true;
  std::string detail;

  // The production-scale model on its own calibration slice.
  if (g_state.trained_ok) {
    const std::size_t begin = g_state.train_frames.size();
    const std::vector<streams::GnssFix> val_gnss(
        g_state.drive.gnss.begin() + begin,
        g_state.drive.gnss.begin() + begin + g_state.val_frames.size() + 1);
    const auto run = detector::detect_stream(g_state.trained.model, val_gnss, g_state.drive.can,
                                             g_state.drive.imu, g_state.detection);
    ok = run.summary.alarm_count == 0;
    detail = "seed 42: " + format(run.summary.alarm_count) + " alarms";
  } else {
    ok = false;
    detail = "skipped production model";
  }

  // Property holds for other seeds at reduced scale.
  for (const std::uint64_t seed : {std::uint64_t{1}, std::uint64_t{9}}) {
    const auto drive = testsupport::make_drive(900, 5000 + seed);
    const auto frames = streams::synchronize(drive.gnss, drive.can, drive.imu);
    const auto [train_frames, val_frames] = streams::split(frames, 650);
    lstm::TrainConfig config;
    config.hidden_size = 8;
    config.window_len = 5;
    config.batch_size = 25;
    config.epochs = 10;
    config.seed = seed;
    const auto trained = lstm::train(train_frames, val_frames, config,
                                     streams::FeatureSelection{}.names());
    const auto detection = detector::calibrate_threshold(trained.model, val_frames, 1.5);
    const std::vector<streams::GnssFix> val_gnss(drive.gnss.begin() + 650,
                                                 drive.gnss.begin() + 650 + val_frames.size() + 1);
    const auto run = detector::detect_stream(trained.model, val_gnss, drive.can, drive.imu,
                                             detection);
    if (run.summary.alarm_count != 0) ok = false;
    detail += ", seed " + format(static_cast<double>(seed)) + ": " +
              format(run.summary.alarm_count) + " alarms";
  }
  report(6, "calibration soundness: zero alarms on the calibration set", ok, detail);
}

void criterion_7() {
  if (!g_spoof_run) {
    report(7, "latency budget", false, "skipped: no detection run");
    return;
  }
  const auto& summary = g_spoof_run->summary;
  const bool ok = summary.mean_latency_us < 100'000.0 && summary.budget_ok;
  report(7, "latency budget (mean step < 100 ms)", ok,
         "mean " + format(summary.mean_latency_us) + " us, max " +
             format(summary.max_latency_us) + " us, 5 ms target " +
             (summary.mean_latency_us <= 5'000.0 ? "met" : "missed"));
}

void criterion_8() {
  const std::vector<double> predicted{0.0, 0.0};
  const std::vector<double> truth{3.0, 4.0};
  const double mae = lstm::mae(predicted, truth);
  const double rmse = lstm::rmse(predicted, truth);
  const double literal = lstm::rmse(predicted, truth, lstm::RmseMode::paper_literal);
  const bool ok = mae == 3.5 && rmse == std::sqrt(12.5) && literal == 2.5;
  report(8, "metric unit values", ok,
         "mae " + format(mae) + ", rmse " + format(rmse) + ", literal " + format(literal));
}

void criterion_9() {
  const std::string fixture =
      "<kml><Placemark><LineString><coordinates>"
      "-122.414,37.63443,0 -122.415,37.635,0"
      "</coordinates></LineString></Placemark></kml>";

  bool round_trip = false;
  try {
    const auto route = spoofsim::parse_kml_route(fixture);
    round_trip = route.points.size() == 2 && route.points[0].lat_deg == 37.63443 &&
                 route.points[0].lon_deg == -122.414 && route.points[1].lat_deg == 37.635 &&
                 route.points[1].lon_deg == -122.415;
  } catch (const Error&) {
  }

  Rng rng(31337);
  bool total = true;
  long survived = 0;
  for (int i = 0; i < 100'000; ++i) {
    std::string doc;
    const int kind = i % 4;
    if (kind == 0) {
      const std::size_t len = rng.below(160);
      doc.reserve(len);
      for (std::size_t k = 0; k < len; ++k) doc.push_back(static_cast<char>(rng.below(256)));
    } else if (kind == 1) {
      const std::size_t len = rng.below(160);
      doc.reserve(len);
      for (std::size_t k = 0; k < len; ++k) {
        doc.push_back(static_cast<char>(32 + rng.below(95)));
      }
    } else {
      doc = fixture;
      const std::size_t edits = 1 + rng.below(8);
      for (std::size_t k = 0; k < edits; ++k) {
        doc[rng.below(doc.size())] = static_cast<char>(rng.below(256));
      }
      if (kind == 3) doc.resize(rng.below(doc.size() + 1));
    }
    try {
      const auto route = spoofsim::parse_kml_route(doc);
      if (route.points.size() < 2) total = false;
      ++survived;
    } catch (const Error&) {
      // structured error: acceptable
    } catch (...) {
      total = false;
    }
  }
  report(9, "KML parser robustness over 1e5 fuzz cases", total && round_trip,
         "fixture round-trip " + std::string(round_trip ? "exact" : "BROKEN") + ", " +
             format(static_cast<double>(survived)) + " mutants still parsed");
}

void criterion_10() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "gnss_sentry_acceptance";
  fs::create_directories(dir);
  const std::string frames_csv = (dir / "frames.csv").string();
  streams::write_frames_csv(g_state.frames, streams::FeatureSelection{}.names(), frames_csv);

  const std::string common = std::string(CLI_BIN) + " train --frames " + frames_csv +
                             " --seed 42 --hidden-size 12 --epochs 8 --window-len 10"
                             " --batch-size 50 --force --out-model ";
  const std::string model_a = (dir / "a.gsm").string();
  const std::string model_b = (dir / "b.gsm").string();
  const int rc_a = std::system((common + model_a + " >/dev/null 2>&1").c_str());
  const int rc_b = std::system((common + model_b + " >/dev/null 2>&1").c_str());

  auto read_bytes = [](const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const std::string bytes_a = read_bytes(model_a);
  const std::string bytes_b = read_bytes(model_b);
  const bool ok = rc_a == 0 && rc_b == 0 && !bytes_a.empty() && bytes_a == bytes_b;
  report(10, "CLI train determinism (bitwise-identical model files)", ok,
         format(static_cast<double>(bytes_a.size())) + " bytes each" +
             (ok ? ", identical" : ", MISMATCH"));
  fs::remove_all(dir);
}

}  // namespace

int main() {
  std::printf("gnss-sentry acceptance suite\n");
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  criterion_10();
  if (failures == 0) {
    std::printf("all criteria passed\n");
    return 0;
  }
  std::printf("%d criteria FAILED\n", failures);
  return 1;
}
