// Exercises the shared-library surface the way an external consumer
// would: only gnss_sentry.h, handles and status codes.

#include "gnss_sentry.h"

#include <cmath>
#include <cstring>
#include <doctest.h>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

namespace {

namespace fs = std::filesystem;

struct Scratch {
  fs::path dir;
  Scratch() {
    std::random_device rd;
    dir = fs::temp_directory_path() / ("gnss_sentry_capi_" + std::to_string(rd()));
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  std::string file(const char* name) const { return (dir / name).string(); }
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return text;
}

// Straight-line drive long enough to train a toy model on.
void write_drive(const Scratch& scratch, std::size_t n_fixes) {
  std::string gnss = "t,lat_deg,lon_deg,speed_mps\n";
  std::string can = "t,speed_mps,steering_deg\n";
  std::string imu = "t,ax_fwd,ax_right,ax_down\n";
  const double step_deg = 4.3e-6;
  for (std::size_t i = 0; i < n_fixes; ++i) {
    const double t = 100.0 + 0.1 * static_cast<double>(i);
    const double speed = 24.0 + 3.0 * std::sin(0.05 * static_cast<double>(i));
    gnss += std::to_string(t) + "," + "37.5," +
            std::to_string(-122.0 + step_deg * static_cast<double>(i) * speed) + "," +
            std::to_string(speed) + "\n";
  }
  for (std::size_t i = 0; i < n_fixes * 5; ++i) {
    const double t = 99.9 + 0.02 * static_cast<double>(i);
    can += std::to_string(t) + "," + std::to_string(24.0 + 3.0 * std::sin(0.01 * i)) + "," +
           std::to_string(1.5 + 0.4 * std::cos(0.02 * i)) + "\n";
  }
  for (std::size_t i = 0; i < n_fixes * 10; ++i) {
    const double t = 99.9 + 0.01 * static_cast<double>(i);
    imu += std::to_string(t) + "," + std::to_string(0.2 * std::cos(0.01 * i)) + ",0.0,-9.8\n";
  }
  write_text(scratch.file("gnss.csv"), gnss);
  write_text(scratch.file("can.csv"), can);
  write_text(scratch.file("imu.csv"), imu);
}

}  // namespace

TEST_CASE("status names and version") {
  CHECK(std::strcmp(gs_status_name(GS_OK), "ok") == 0);
  CHECK(std::strcmp(gs_status_name(GS_ERR_FORMAT), "format error") == 0);
  CHECK(gs_version() != nullptr);
}

TEST_CASE("haversine through the C surface") {
  double d = 0.0;
  REQUIRE(gs_haversine_m(0.0, 0.0, 0.0, 5.729577951e-4, 6371000.0, &d) == GS_OK);
  CHECK(std::abs(d - 63.71) < 1e-4);

  REQUIRE(gs_haversine_m(0.0, 0.0, 0.0, 1.0, 0.0, &d) == GS_OK);  // default radius
  CHECK(d > 100000.0);

  const double nan = std::nan("");
  CHECK(gs_haversine_m(nan, 0.0, 0.0, 1.0, 0.0, &d) == GS_ERR_INVALID_INPUT);
  CHECK(std::strlen(gs_last_error()) > 0);
  CHECK(gs_haversine_m(0.0, 0.0, 0.0, 1.0, 0.0, nullptr) == GS_ERR_INVALID_INPUT);
}

TEST_CASE("stream loading and synchronization") {
  Scratch scratch;
  write_drive(scratch, 60);

  gs_gnss* gnss = nullptr;
  gs_can* can = nullptr;
  gs_imu* imu = nullptr;
  REQUIRE(gs_gnss_load_csv(scratch.file("gnss.csv").c_str(), &gnss) == GS_OK);
  REQUIRE(gs_can_load_csv(scratch.file("can.csv").c_str(), &can) == GS_OK);
  REQUIRE(gs_imu_load_csv(scratch.file("imu.csv").c_str(), &imu) == GS_OK);
  CHECK(gs_gnss_count(gnss) == 60);

  double t = 0.0, lat = 0.0, lon = 0.0, speed = 0.0;
  REQUIRE(gs_gnss_fix(gnss, 0, &t, &lat, &lon, &speed) == GS_OK);
  CHECK(t == 100.0);
  CHECK(lat == 37.5);
  CHECK(gs_gnss_fix(gnss, 999, &t, &lat, &lon, &speed) == GS_ERR_INVALID_INPUT);

  gs_frames* frames = nullptr;
  REQUIRE(gs_synchronize(gnss, can, imu, nullptr, 0.0, &frames) == GS_OK);
  CHECK(gs_frames_count(frames) == 59);
  CHECK(gs_frames_feature_count(frames) == 3);

  REQUIRE(gs_frames_write_csv(frames, scratch.file("frames.csv").c_str()) == GS_OK);
  gs_frames* reloaded = nullptr;
  REQUIRE(gs_frames_load_csv(scratch.file("frames.csv").c_str(), &reloaded) == GS_OK);
  CHECK(gs_frames_count(reloaded) == 59);

  CHECK(gs_gnss_load_csv(scratch.file("missing.csv").c_str(), &gnss) == GS_ERR_IO);
  CHECK(gs_synchronize(nullptr, can, imu, nullptr, 0.0, &frames) == GS_ERR_INVALID_INPUT);
  CHECK(gs_synchronize(gnss, can, imu, "bogus", 0.0, &frames) == GS_ERR_INVALID_INPUT);

  gs_frames_free(frames);
  gs_frames_free(reloaded);
  gs_gnss_free(gnss);
  gs_can_free(can);
  gs_imu_free(imu);
}

TEST_CASE("train, save, evaluate, detect through the C surface") {
  Scratch scratch;
  write_drive(scratch, 120);

  gs_gnss* gnss = nullptr;
  gs_can* can = nullptr;
  gs_imu* imu = nullptr;
  REQUIRE(gs_gnss_load_csv(scratch.file("gnss.csv").c_str(), &gnss) == GS_OK);
  REQUIRE(gs_can_load_csv(scratch.file("can.csv").c_str(), &can) == GS_OK);
  REQUIRE(gs_imu_load_csv(scratch.file("imu.csv").c_str(), &imu) == GS_OK);
  gs_frames* frames = nullptr;
  REQUIRE(gs_synchronize(gnss, can, imu, nullptr, 0.0, &frames) == GS_OK);

  gs_train_config config;
  gs_train_config_defaults(&config);
  CHECK(config.hidden_size == 50);
  CHECK(config.epochs == 100);
  CHECK(config.batch_size == 50);
  CHECK(config.learning_rate == 0.01);
  config.hidden_size = 5;
  config.epochs = 3;
  config.batch_size = 8;
  config.window_len = 3;
  config.train_count = 90;

  gs_model* model = nullptr;
  gs_history* history = nullptr;
  REQUIRE(gs_train(frames, &config, &model, &history) == GS_OK);
  CHECK(gs_history_count(history) == 3);
  double train_mae = 0.0, val_mae = 0.0;
  REQUIRE(gs_history_entry(history, 2, &train_mae, &val_mae) == GS_OK);
  CHECK(train_mae >= 0.0);
  REQUIRE(gs_history_write_csv(history, scratch.file("history.csv").c_str()) == GS_OK);
  CHECK(read_text(scratch.file("history.csv")).rfind("epoch,train_mae,val_mae\n", 0) == 0);

  REQUIRE(gs_model_save(model, scratch.file("model.gsm").c_str()) == GS_OK);
  gs_model* loaded = nullptr;
  REQUIRE(gs_model_load(scratch.file("model.gsm").c_str(), &loaded) == GS_OK);
  CHECK(gs_model_window_len(loaded) == 3);

  gs_eval* eval = nullptr;
  REQUIRE(gs_evaluate(loaded, frames, 0, 0.0, &eval) == GS_OK);
  double rmse = 0.0, mae = 0.0, max_err = 0.0, min_err = 0.0;
  REQUIRE(gs_eval_metrics(eval, &rmse, &mae, &max_err, &min_err) == GS_OK);
  CHECK(rmse >= mae * 0.5);
  CHECK(max_err >= min_err);
  CHECK(gs_eval_prediction_count(eval) == gs_frames_count(frames) - 2);
  REQUIRE(gs_eval_write_metrics_json(eval, scratch.file("metrics.json").c_str()) == GS_OK);
  REQUIRE(gs_eval_write_predictions_csv(eval, scratch.file("pred.csv").c_str()) == GS_OK);
  REQUIRE(gs_eval_write_histogram_csv(eval, scratch.file("hist.csv").c_str()) == GS_OK);
  CHECK(read_text(scratch.file("metrics.json")).find("\"rmse_m\"") != std::string::npos);

  gs_detection_config detection{};
  REQUIRE(gs_calibrate_threshold(loaded, frames, 1.5, &detection) == GS_OK);
  CHECK(detection.threshold_gamma_m ==
        detection.gnss_position_error_m + detection.prediction_error_m);

  gs_gnss* spoofed = nullptr;
  REQUIRE(gs_synth_deviation(gnss, 60, 5.0, 0.0, &spoofed) == GS_OK);
  gs_detect_run* run = nullptr;
  REQUIRE(gs_detect(loaded, spoofed, can, imu, &detection, 0, 60, 0.0, &run) == GS_OK);
  CHECK(gs_detect_run_verdict_count(run) > 0);

  gs_verdict verdict{};
  REQUIRE(gs_detect_run_verdict(run, 0, &verdict) == GS_OK);
  CHECK(verdict.alarm == (verdict.residual_m > verdict.threshold_m ? 1 : 0));
  CHECK(verdict.threshold_m == detection.threshold_gamma_m);

  gs_detection_summary summary{};
  REQUIRE(gs_detect_run_summary(run, &summary) == GS_OK);
  CHECK(summary.verdict_count == static_cast<long long>(gs_detect_run_verdict_count(run)));
  CHECK(summary.truth_onset == 60);
  CHECK(summary.budget_ok == 1);
  REQUIRE(gs_detect_run_write_verdicts_csv(run, scratch.file("verdicts.csv").c_str()) == GS_OK);
  REQUIRE(gs_detect_run_write_summary_json(run, scratch.file("summary.json").c_str()) == GS_OK);
  CHECK(read_text(scratch.file("summary.json")).find("\"first_alarm_index\"") !=
        std::string::npos);

  gs_detect_run_free(run);
  gs_gnss_free(spoofed);
  gs_eval_free(eval);
  gs_model_free(loaded);
  gs_model_free(model);
  gs_history_free(history);
  gs_frames_free(frames);
  gs_gnss_free(gnss);
  gs_can_free(can);
  gs_imu_free(imu);
}

TEST_CASE("routes and spoof injection through the C surface") {
  Scratch scratch;
  const std::string kml =
      "<kml><Placemark><LineString><coordinates>"
      "-122.414,37.63443,0 -122.415,37.635,0"
      "</coordinates></LineString></Placemark></kml>";

  gs_route* route = nullptr;
  REQUIRE(gs_route_parse_kml(kml.data(), kml.size(), &route) == GS_OK);
  CHECK(gs_route_point_count(route) == 2);
  double lat = 0.0, lon = 0.0;
  REQUIRE(gs_route_point(route, 0, &lat, &lon) == GS_OK);
  CHECK(lat == 37.63443);
  CHECK(lon == -122.414);
  gs_route_free(route);

  CHECK(gs_route_parse_kml("garbage", 7, &route) == GS_ERR_FORMAT);
  CHECK(std::strlen(gs_last_error()) > 0);

  write_text(scratch.file("route.csv"), "lat_deg,lon_deg\n37.5001,-122.0\n37.5005,-122.0\n");
  REQUIRE(gs_route_load(scratch.file("route.csv").c_str(), &route) == GS_OK);

  write_drive(scratch, 40);
  gs_gnss* gnss = nullptr;
  REQUIRE(gs_gnss_load_csv(scratch.file("gnss.csv").c_str(), &gnss) == GS_OK);
  gs_gnss* spoofed = nullptr;
  REQUIRE(gs_inject_spoof(gnss, route, 20, 0.0, &spoofed) == GS_OK);
  CHECK(gs_gnss_count(spoofed) == 40);
  REQUIRE(gs_gnss_write_csv(spoofed, scratch.file("spoofed.csv").c_str()) == GS_OK);

  CHECK(gs_inject_spoof(gnss, route, 40, 0.0, &spoofed) == GS_ERR_INVALID_INPUT);
  CHECK(gs_synth_deviation(gnss, 0, 3.0, 0.0, &spoofed) == GS_ERR_INVALID_INPUT);

  gs_gnss_free(spoofed);
  gs_gnss_free(gnss);
  gs_route_free(route);
}

TEST_CASE("model file version errors cross the C boundary") {
  Scratch scratch;
  write_text(scratch.file("future.gsm"), "gnss-sentry model v9\n");
  gs_model* model = nullptr;
  CHECK(gs_model_load(scratch.file("future.gsm").c_str(), &model) == GS_ERR_VERSION_MISMATCH);
  CHECK(std::string(gs_last_error()).find("v9") != std::string::npos);

  write_text(scratch.file("junk.gsm"), "??\n");
  CHECK(gs_model_load(scratch.file("junk.gsm").c_str(), &model) == GS_ERR_FORMAT);
}
