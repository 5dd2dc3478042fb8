// gnss-sentry command line: sync / train / eval / attack / detect / report.
// Talks to the library exclusively through the C API.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <string>

#include "gnss_sentry.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check(gs_status status, const std::string& context = {}) {
  if (status == GS_OK) return;
  std::string message = gs_last_error();
  if (message.empty()) message = gs_status_name(status);
  throw CliError(context.empty() ? message : context + ": " + message);
}

template <auto FreeFn>
struct FreeDeleter {
  template <typename T>
  void operator()(T* p) const {
    FreeFn(p);
  }
};
using GnssPtr = std::unique_ptr<gs_gnss, FreeDeleter<&gs_gnss_free>>;
using CanPtr = std::unique_ptr<gs_can, FreeDeleter<&gs_can_free>>;
using ImuPtr = std::unique_ptr<gs_imu, FreeDeleter<&gs_imu_free>>;
using FramesPtr = std::unique_ptr<gs_frames, FreeDeleter<&gs_frames_free>>;
using ModelPtr = std::unique_ptr<gs_model, FreeDeleter<&gs_model_free>>;
using HistoryPtr = std::unique_ptr<gs_history, FreeDeleter<&gs_history_free>>;
using EvalPtr = std::unique_ptr<gs_eval, FreeDeleter<&gs_eval_free>>;
using RoutePtr = std::unique_ptr<gs_route, FreeDeleter<&gs_route_free>>;
using RunPtr = std::unique_ptr<gs_detect_run, FreeDeleter<&gs_detect_run_free>>;

GnssPtr load_gnss(const std::string& path) {
  gs_gnss* p = nullptr;
  check(gs_gnss_load_csv(path.c_str(), &p));
  return GnssPtr(p);
}

CanPtr load_can(const std::string& path) {
  gs_can* p = nullptr;
  check(gs_can_load_csv(path.c_str(), &p));
  return CanPtr(p);
}

ImuPtr load_imu(const std::string& path) {
  gs_imu* p = nullptr;
  check(gs_imu_load_csv(path.c_str(), &p));
  return ImuPtr(p);
}

FramesPtr load_frames(const std::string& path) {
  gs_frames* p = nullptr;
  check(gs_frames_load_csv(path.c_str(), &p));
  return FramesPtr(p);
}

ModelPtr load_model(const std::string& path) {
  gs_model* p = nullptr;
  check(gs_model_load(path.c_str(), &p));
  return ModelPtr(p);
}

// Flat key=value config file; '#' starts a comment. Unknown keys are
// rejected so typos surface instead of silently using defaults.
const std::map<std::string, int>& known_config_keys() {
  static const std::map<std::string, int> keys = {
      {"earth_radius_m", 0},  {"features", 0},   {"hidden_size", 0},
      {"epochs", 0},          {"batch_size", 0}, {"learning_rate", 0},
      {"window_len", 0},      {"seed", 0},       {"adam_beta1", 0},
      {"adam_beta2", 0},      {"adam_eps", 0},   {"train_count", 0},
      {"val_count", 0},       {"gnss_error_m", 0}, {"prediction_error_m", 0},
      {"residual_mode", 0},   {"hist_bin_width_m", 0}};
  return keys;
}

std::map<std::string, std::string> load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CliError("cannot open config file: " + path);
  std::map<std::string, std::string> values;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto strip = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t");
      return s.substr(b, e - b + 1);
    };
    const std::string stripped = strip(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw CliError(path + ":" + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = strip(stripped.substr(0, eq));
    const std::string value = strip(stripped.substr(eq + 1));
    if (!known_config_keys().count(key)) {
      throw CliError(path + ":" + std::to_string(line_no) + ": unknown config key '" + key + "'");
    }
    values[key] = value;
  }
  return values;
}

template <typename T>
T parse_value(const std::string& text, const std::string& key) {
  std::istringstream ss(text);
  T value{};
  ss >> value;
  if (ss.fail() || !ss.eof()) throw CliError("config key '" + key + "': bad value '" + text + "'");
  return value;
}

template <typename T>
void config_override(const std::map<std::string, std::string>& config, const std::string& key,
                     T& target) {
  const auto it = config.find(key);
  if (it != config.end()) target = parse_value<T>(it->second, key);
}

std::optional<uint64_t> seed_from_env() {
  const char* env = std::getenv("GNSS_SENTRY_SEED");
  if (!env || !*env) return std::nullopt;
  return parse_value<uint64_t>(env, "GNSS_SENTRY_SEED");
}

void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw CliError("cannot create output directory '" + dir + "': " + ec.message());
}

std::string join_path(const std::string& dir, const char* name) {
  return (fs::path(dir) / name).string();
}

// ----- subcommand state ------------------------------------------------

struct SyncArgs {
  std::string gnss, can, imu, out, config, features;
  double earth_radius_m = 0.0;
};

struct TrainArgs {
  std::string frames, config, out_model, out_history;
  std::optional<uint64_t> seed;
  bool force = false;
  std::optional<int> hidden_size, epochs, batch_size, window_len;
  std::optional<double> learning_rate;
  std::optional<long long> train_count, val_count;
};

struct EvalArgs {
  std::string model, frames, out_dir, config;
  bool paper_literal_rmse = false;
  double hist_bin_width_m = 0.0;
};

struct AttackArgs {
  std::string gnss, route, out, config;
  std::size_t onset = 0;
  std::optional<double> synthetic_rate;
  double earth_radius_m = 0.0;
};

struct DetectArgs {
  std::string model, gnss, can, imu, out_dir, config, calibrate_frames;
  std::string residual_mode = "diff";
  std::optional<double> gnss_error_m;
  std::optional<double> prediction_error_m;
  long long truth_onset = -1;
  double earth_radius_m = 0.0;
};

struct ReportArgs {
  std::string in_dir;
};

void run_sync(const SyncArgs& args) {
  auto config = args.config.empty() ? std::map<std::string, std::string>{}
                                    : load_config_file(args.config);
  std::string features = args.features;
  if (features.empty()) config_override(config, "features", features);
  double earth_radius = args.earth_radius_m;
  if (earth_radius <= 0.0) config_override(config, "earth_radius_m", earth_radius);

  const auto gnss = load_gnss(args.gnss);
  const auto can = load_can(args.can);
  const auto imu = load_imu(args.imu);

  gs_frames* frames = nullptr;
  check(gs_synchronize(gnss.get(), can.get(), imu.get(),
                       features.empty() ? nullptr : features.c_str(), earth_radius, &frames));
  FramesPtr frames_ptr(frames);
  check(gs_frames_write_csv(frames, args.out.c_str()));
  std::cout << "wrote " << args.out << " (" << gs_frames_count(frames) << " frames, "
            << gs_frames_feature_count(frames) << " features)\n";
}

void run_train(const TrainArgs& args) {
  auto config = args.config.empty() ? std::map<std::string, std::string>{}
                                    : load_config_file(args.config);
  gs_train_config tc;
  gs_train_config_defaults(&tc);
  config_override(config, "hidden_size", tc.hidden_size);
  config_override(config, "epochs", tc.epochs);
  config_override(config, "batch_size", tc.batch_size);
  config_override(config, "learning_rate", tc.learning_rate);
  config_override(config, "window_len", tc.window_len);
  config_override(config, "seed", tc.seed);
  config_override(config, "adam_beta1", tc.adam_beta1);
  config_override(config, "adam_beta2", tc.adam_beta2);
  config_override(config, "adam_eps", tc.adam_eps);
  config_override(config, "train_count", tc.train_count);
  config_override(config, "val_count", tc.val_count);

  if (const auto env_seed = seed_from_env()) tc.seed = *env_seed;
  if (args.seed) tc.seed = *args.seed;
  if (args.hidden_size) tc.hidden_size = *args.hidden_size;
  if (args.epochs) tc.epochs = *args.epochs;
  if (args.batch_size) tc.batch_size = *args.batch_size;
  if (args.window_len) tc.window_len = *args.window_len;
  if (args.learning_rate) tc.learning_rate = *args.learning_rate;
  if (args.train_count) tc.train_count = *args.train_count;
  if (args.val_count) tc.val_count = *args.val_count;

  if (!args.force && fs::exists(args.out_model)) {
    throw CliError("refusing to overwrite model file '" + args.out_model +
                   "' without --force");
  }

  const auto frames = load_frames(args.frames);
  gs_model* model = nullptr;
  gs_history* history = nullptr;
  check(gs_train(frames.get(), &tc, &model, &history));
  ModelPtr model_ptr(model);
  HistoryPtr history_ptr(history);

  check(gs_model_save(model, args.out_model.c_str()));
  if (!args.out_history.empty()) {
    check(gs_history_write_csv(history, args.out_history.c_str()));
  }

  const std::size_t epochs = gs_history_count(history);
  double train_mae = 0.0, val_mae = 0.0;
  if (epochs > 0) check(gs_history_entry(history, epochs - 1, &train_mae, &val_mae));
  std::cout << "wrote " << args.out_model << " (" << epochs << " epochs";
  if (epochs > 0) std::cout << ", final train/val MAE " << train_mae << "/" << val_mae;
  std::cout << ")\n";
}

void run_eval(const EvalArgs& args) {
  auto config = args.config.empty() ? std::map<std::string, std::string>{}
                                    : load_config_file(args.config);
  double bin_width = args.hist_bin_width_m;
  if (bin_width <= 0.0) config_override(config, "hist_bin_width_m", bin_width);

  const auto model = load_model(args.model);
  const auto frames = load_frames(args.frames);
  gs_eval* eval = nullptr;
  check(gs_evaluate(model.get(), frames.get(), args.paper_literal_rmse ? 1 : 0, bin_width, &eval));
  EvalPtr eval_ptr(eval);

  ensure_out_dir(args.out_dir);
  check(gs_eval_write_metrics_json(eval, join_path(args.out_dir, "metrics.json").c_str()));
  check(gs_eval_write_predictions_csv(eval, join_path(args.out_dir, "predictions.csv").c_str()));
  check(gs_eval_write_histogram_csv(eval,
                                    join_path(args.out_dir, "error_histogram.csv").c_str()));

  double rmse = 0.0, mae = 0.0, max_err = 0.0, min_err = 0.0;
  check(gs_eval_metrics(eval, &rmse, &mae, &max_err, &min_err));
  std::cout << "rmse " << rmse << " m, mae " << mae << " m, max " << max_err << " m, min "
            << min_err << " m over " << gs_eval_prediction_count(eval) << " predictions\n";
}

void run_attack(const AttackArgs& args) {
  auto config = args.config.empty() ? std::map<std::string, std::string>{}
                                    : load_config_file(args.config);
  double earth_radius = args.earth_radius_m;
  if (earth_radius <= 0.0) config_override(config, "earth_radius_m", earth_radius);

  const auto gnss = load_gnss(args.gnss);
  gs_gnss* spoofed = nullptr;
  if (args.synthetic_rate) {
    check(gs_synth_deviation(gnss.get(), args.onset, *args.synthetic_rate, earth_radius,
                             &spoofed));
  } else {
    gs_route* route = nullptr;
    check(gs_route_load(args.route.c_str(), &route));
    RoutePtr route_ptr(route);
    check(gs_inject_spoof(gnss.get(), route, args.onset, earth_radius, &spoofed));
  }
  GnssPtr spoofed_ptr(spoofed);
  check(gs_gnss_write_csv(spoofed, args.out.c_str()));
  std::cout << "wrote " << args.out << " (" << gs_gnss_count(spoofed)
            << " fixes, onset " << args.onset << ")\n";
}

void run_detect(const DetectArgs& args) {
  auto config = args.config.empty() ? std::map<std::string, std::string>{}
                                    : load_config_file(args.config);
  double gnss_error = args.gnss_error_m.value_or(1.5);
  if (!args.gnss_error_m) config_override(config, "gnss_error_m", gnss_error);
  std::string residual_mode = args.residual_mode;
  if (residual_mode.empty()) residual_mode = "diff";
  if (residual_mode != "diff" && residual_mode != "raw") {
    throw CliError("--residual-mode must be 'diff' or 'raw'");
  }
  double earth_radius = args.earth_radius_m;
  if (earth_radius <= 0.0) config_override(config, "earth_radius_m", earth_radius);

  const auto model = load_model(args.model);

  gs_detection_config detection{};
  if (!args.calibrate_frames.empty()) {
    const auto clean = load_frames(args.calibrate_frames);
    check(gs_calibrate_threshold(model.get(), clean.get(), gnss_error, &detection));
  } else {
    std::optional<double> prediction_error = args.prediction_error_m;
    if (!prediction_error) {
      double from_config = -1.0;
      config_override(config, "prediction_error_m", from_config);
      if (from_config >= 0.0) prediction_error = from_config;
    }
    if (!prediction_error) {
      throw CliError(
          "threshold needs --calibrate-frames <frames.csv> or --prediction-error-m <meters>");
    }
    detection.gnss_position_error_m = gnss_error;
    detection.prediction_error_m = *prediction_error;
    detection.threshold_gamma_m = gnss_error + *prediction_error;
  }

  const auto gnss = load_gnss(args.gnss);
  const auto can = load_can(args.can);
  const auto imu = load_imu(args.imu);

  gs_detect_run* run = nullptr;
  check(gs_detect(model.get(), gnss.get(), can.get(), imu.get(), &detection,
                  residual_mode == "raw" ? 1 : 0, args.truth_onset, earth_radius, &run));
  RunPtr run_ptr(run);

  ensure_out_dir(args.out_dir);
  check(gs_detect_run_write_verdicts_csv(run, join_path(args.out_dir, "verdicts.csv").c_str()));
  check(gs_detect_run_write_summary_json(run, join_path(args.out_dir, "summary.json").c_str()));

  gs_detection_summary summary{};
  check(gs_detect_run_summary(run, &summary));
  std::cout << "threshold " << detection.threshold_gamma_m << " m, " << summary.alarm_count
            << " alarms over " << summary.verdict_count << " steps";
  if (summary.first_alarm_step >= 0) std::cout << ", first alarm at step "
                                               << summary.first_alarm_step;
  std::cout << ", mean latency " << summary.mean_latency_us << " us\n";
}

void run_report(const ReportArgs& args) {
  bool found = false;
  std::ostringstream report;
  report << "gnss-sentry report: " << args.in_dir << "\n";

  const std::string metrics_path = join_path(args.in_dir, "metrics.json");
  if (fs::exists(metrics_path)) {
    found = true;
    std::ifstream in(metrics_path);
    json j;
    in >> j;
    report << "\nprediction quality (" << j.value("prediction_count", 0) << " predictions, "
           << j.value("rmse_mode", "standard") << " rmse)\n";
    report << "  rmse        " << j.value("rmse_m", 0.0) << " m\n";
    report << "  mae         " << j.value("mae_m", 0.0) << " m\n";
    report << "  max abs err " << j.value("max_abs_err_m", 0.0) << " m\n";
    report << "  min abs err " << j.value("min_abs_err_m", 0.0) << " m\n";
  }

  const std::string history_path = join_path(args.in_dir, "history.csv");
  if (fs::exists(history_path)) {
    found = true;
    std::ifstream in(history_path);
    std::string line, last;
    std::getline(in, line);  // header
    std::size_t epochs = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      ++epochs;
      last = line;
    }
    report << "\ntraining (" << epochs << " epochs)\n";
    if (!last.empty()) report << "  final epoch,train_mae,val_mae: " << last << "\n";
  }

  const std::string summary_path = join_path(args.in_dir, "summary.json");
  if (fs::exists(summary_path)) {
    found = true;
    std::ifstream in(summary_path);
    json j;
    in >> j;
    report << "\ndetection (" << j.value("verdict_count", 0) << " steps)\n";
    report << "  alarms          " << j.value("alarm_count", 0) << "\n";
    if (j.contains("first_alarm_index") && !j["first_alarm_index"].is_null()) {
      report << "  first alarm     step " << j["first_alarm_index"].get<long long>() << "\n";
    } else {
      report << "  first alarm     none\n";
    }
    if (j.contains("detection_delay_steps") && !j["detection_delay_steps"].is_null()) {
      report << "  detection delay " << j["detection_delay_steps"].get<long long>()
             << " steps\n";
    }
    report << "  false alarms    " << j.value("false_alarm_count", 0) << " (rate "
           << j.value("false_alarm_rate", 0.0) << ")\n";
    report << "  mean latency    " << j.value("mean_latency_us", 0.0) << " us\n";
    report << "  max latency     " << j.value("max_latency_us", 0.0) << " us\n";
    report << "  budget ok       " << (j.value("budget_ok", false) ? "yes" : "no") << "\n";
  }

  if (!found) {
    throw CliError("no metrics.json, history.csv or summary.json under '" + args.in_dir + "'");
  }
  std::cout << report.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prediction-based GNSS spoofing detection"};
  app.require_subcommand(1);
  app.failure_message([](const CLI::App*, const CLI::Error& e) {
    return std::string("gnss-sentry: ") + e.what() + "\n";
  });

  SyncArgs sync_args;
  auto* sync = app.add_subcommand("sync", "fuse GNSS/CAN/IMU streams into labeled frames");
  sync->add_option("--gnss", sync_args.gnss, "GNSS fixes CSV")->required();
  sync->add_option("--can", sync_args.can, "CAN samples CSV")->required();
  sync->add_option("--imu", sync_args.imu, "IMU samples CSV")->required();
  sync->add_option("--out", sync_args.out, "output frames CSV")->required();
  sync->add_option("--features", sync_args.features,
                   "extra features (comma list of gnss_speed,prev_dist)");
  sync->add_option("--earth-radius-m", sync_args.earth_radius_m, "sphere radius override");
  sync->add_option("--config", sync_args.config, "key=value config file");

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "train the distance predictor");
  train->add_option("--frames", train_args.frames, "frames CSV from sync")->required();
  train->add_option("--config", train_args.config, "key=value config file");
  train->add_option("--out-model", train_args.out_model, "model file to write")->required();
  train->add_option("--out-history", train_args.out_history, "per-epoch loss CSV");
  train->add_option("--seed", train_args.seed, "RNG seed");
  train->add_flag("--force", train_args.force, "allow overwriting the model file");
  train->add_option("--hidden-size", train_args.hidden_size, "hidden neurons");
  train->add_option("--epochs", train_args.epochs, "training epochs");
  train->add_option("--batch-size", train_args.batch_size, "mini-batch size");
  train->add_option("--learning-rate", train_args.learning_rate, "Adam learning rate");
  train->add_option("--window-len", train_args.window_len, "input window length");
  train->add_option("--train-count", train_args.train_count, "training rows");
  train->add_option("--val-count", train_args.val_count, "validation rows");

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "evaluate a model on labeled frames");
  eval->add_option("--model", eval_args.model, "model file")->required();
  eval->add_option("--frames", eval_args.frames, "frames CSV")->required();
  eval->add_option("--out-dir", eval_args.out_dir, "output directory")->required();
  eval->add_flag("--paper-literal-rmse", eval_args.paper_literal_rmse,
                 "compute rmse as sqrt(sum(err^2))/N");
  eval->add_option("--hist-bin-width-m", eval_args.hist_bin_width_m,
                   "error histogram bin width (default 0.005)");
  eval->add_option("--config", eval_args.config, "key=value config file");

  AttackArgs attack_args;
  auto* attack = app.add_subcommand("attack", "write a spoofed GNSS trajectory");
  attack->add_option("--gnss", attack_args.gnss, "ground-truth GNSS CSV")->required();
  auto* route_opt = attack->add_option("--route", attack_args.route, "spoof route (.kml or CSV)");
  auto* rate_opt = attack->add_option("--synthetic-rate", attack_args.synthetic_rate,
                                      "cross-track drift per step (m)");
  attack->add_option("--onset", attack_args.onset, "fix index where the attack starts")
      ->required();
  attack->add_option("--out", attack_args.out, "output GNSS CSV")->required();
  attack->add_option("--earth-radius-m", attack_args.earth_radius_m, "sphere radius override");
  attack->add_option("--config", attack_args.config, "key=value config file");
  route_opt->excludes(rate_opt);
  rate_opt->excludes(route_opt);

  DetectArgs detect_args;
  auto* detect = app.add_subcommand("detect", "run spoofing detection over a GNSS stream");
  detect->add_option("--model", detect_args.model, "model file")->required();
  detect->add_option("--gnss", detect_args.gnss, "GNSS CSV under test")->required();
  detect->add_option("--can", detect_args.can, "CAN samples CSV")->required();
  detect->add_option("--imu", detect_args.imu, "IMU samples CSV")->required();
  detect->add_option("--gnss-error-m", detect_args.gnss_error_m,
                     "GNSS positioning error (default 1.5)");
  detect->add_option("--residual-mode", detect_args.residual_mode,
                     "diff (|observed-predicted|) or raw (observed)");
  detect->add_option("--calibrate-frames", detect_args.calibrate_frames,
                     "attack-free frames CSV for threshold calibration");
  detect->add_option("--prediction-error-m", detect_args.prediction_error_m,
                     "pre-calibrated max absolute prediction error");
  detect->add_option("--truth-onset", detect_args.truth_onset,
                     "known attack onset fix index (for reporting)");
  detect->add_option("--out-dir", detect_args.out_dir, "output directory")->required();
  detect->add_option("--earth-radius-m", detect_args.earth_radius_m, "sphere radius override");
  detect->add_option("--config", detect_args.config, "key=value config file");

  ReportArgs report_args;
  auto* report = app.add_subcommand("report", "summarize outputs from eval/train/detect");
  report->add_option("--in-dir", report_args.in_dir, "directory with output files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (sync->parsed()) run_sync(sync_args);
    if (train->parsed()) run_train(train_args);
    if (eval->parsed()) run_eval(eval_args);
    if (attack->parsed()) {
      if (attack_args.route.empty() && !attack_args.synthetic_rate) {
        throw CliError("attack needs --route or --synthetic-rate");
      }
      run_attack(attack_args);
    }
    if (detect->parsed()) run_detect(detect_args);
    if (report->parsed()) run_report(report_args);
  } catch (const CliError& e) {
    std::cerr << "gnss-sentry: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "gnss-sentry: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
