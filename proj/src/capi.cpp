#include "gnss_sentry.h"

#include <fstream>
#include <nlohmann/json.hpp>
#include <string>
#include <utility>

#include "detector.hpp"
#include "error.hpp"
#include "lstm.hpp"
#include "spoofsim.hpp"
#include "streams.hpp"
#include "textio.hpp"

using namespace gnss_sentry;

struct gs_gnss {
  std::vector<streams::GnssFix> fixes;
};
struct gs_can {
  std::vector<streams::CanSample> samples;
};
struct gs_imu {
  std::vector<streams::ImuSample> samples;
};
struct gs_frames {
  std::vector<std::string> feature_names;
  std::vector<streams::SyncedFrame> frames;
};
struct gs_model {
  lstm::LstmModel model;
};
struct gs_history {
  std::vector<lstm::EpochStats> entries;
};
struct gs_eval {
  lstm::EvalResult result;
  lstm::RmseMode mode;
};
struct gs_route {
  spoofsim::Route route;
};
struct gs_detect_run {
  detector::DetectionRun run;
};

namespace {

thread_local std::string t_last_error;

gs_status map_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_input: return GS_ERR_INVALID_INPUT;
    case ErrorCode::io: return GS_ERR_IO;
    case ErrorCode::format: return GS_ERR_FORMAT;
    case ErrorCode::degenerate_feature: return GS_ERR_DEGENERATE_FEATURE;
    case ErrorCode::version_mismatch: return GS_ERR_VERSION_MISMATCH;
  }
  return GS_ERR_INTERNAL;
}

template <typename Fn>
gs_status guarded(Fn&& fn) noexcept {
  try {
    fn();
    return GS_OK;
  } catch (const Error& e) {
    t_last_error = e.what();
    return map_code(e.code());
  } catch (const std::exception& e) {
    t_last_error = e.what();
    return GS_ERR_INTERNAL;
  } catch (...) {
    t_last_error = "unknown error";
    return GS_ERR_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw_invalid(what);
}

geodesy::EarthModel earth_from(double radius_m) {
  if (radius_m > 0.0) return {radius_m};
  return {};
}

nlohmann::ordered_json summary_to_json(const detector::DetectionSummary& s) {
  nlohmann::ordered_json j;
  j["verdict_count"] = s.verdict_count;
  j["alarm_count"] = s.alarm_count;
  if (s.first_alarm_step) {
    j["first_alarm_index"] = *s.first_alarm_step;
  } else {
    j["first_alarm_index"] = nullptr;
  }
  if (s.truth_onset) {
    j["truth_onset"] = *s.truth_onset;
  } else {
    j["truth_onset"] = nullptr;
  }
  if (s.detection_delay_steps) {
    j["detection_delay_steps"] = *s.detection_delay_steps;
  } else {
    j["detection_delay_steps"] = nullptr;
  }
  j["false_alarm_count"] = s.false_alarm_count;
  j["false_alarm_rate"] = s.false_alarm_rate;
  j["mean_latency_us"] = s.mean_latency_us;
  j["max_latency_us"] = s.max_latency_us;
  j["budget_ok"] = s.budget_ok;
  return j;
}

void write_json_file(const nlohmann::ordered_json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_io("cannot write file: " + path);
  out << j.dump(2) << '\n';
  if (!out) throw_io("write failed: " + path);
}

}  // namespace

extern "C" {

const char* gs_status_name(gs_status status) {
  switch (status) {
    case GS_OK: return "ok";
    case GS_ERR_INVALID_INPUT: return "invalid input";
    case GS_ERR_IO: return "io error";
    case GS_ERR_FORMAT: return "format error";
    case GS_ERR_DEGENERATE_FEATURE: return "degenerate feature";
    case GS_ERR_VERSION_MISMATCH: return "version mismatch";
    case GS_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* gs_last_error(void) { return t_last_error.c_str(); }

const char* gs_version(void) { return "1.0.0"; }

gs_status gs_haversine_m(double lat1_deg, double lon1_deg, double lat2_deg, double lon2_deg,
                         double earth_radius_m, double* out_distance_m) {
  return guarded([&] {
    require(out_distance_m != nullptr, "gs_haversine_m: null output");
    *out_distance_m = geodesy::haversine_distance({lat1_deg, lon1_deg}, {lat2_deg, lon2_deg},
                                                  earth_from(earth_radius_m));
  });
}

gs_status gs_gnss_load_csv(const char* path, gs_gnss** out) {
  return guarded([&] {
    require(path && out, "gs_gnss_load_csv: null argument");
    *out = new gs_gnss{streams::load_gnss_csv(path)};
  });
}

gs_status gs_can_load_csv(const char* path, gs_can** out) {
  return guarded([&] {
    require(path && out, "gs_can_load_csv: null argument");
    *out = new gs_can{streams::load_can_csv(path)};
  });
}

gs_status gs_imu_load_csv(const char* path, gs_imu** out) {
  return guarded([&] {
    require(path && out, "gs_imu_load_csv: null argument");
    *out = new gs_imu{streams::load_imu_csv(path)};
  });
}

size_t gs_gnss_count(const gs_gnss* gnss) { return gnss ? gnss->fixes.size() : 0; }

gs_status gs_gnss_fix(const gs_gnss* gnss, size_t index, double* out_t, double* out_lat_deg,
                      double* out_lon_deg, double* out_speed_mps) {
  return guarded([&] {
    require(gnss != nullptr, "gs_gnss_fix: null handle");
    require(index < gnss->fixes.size(), "gs_gnss_fix: index out of range");
    const auto& fix = gnss->fixes[index];
    if (out_t) *out_t = fix.t;
    if (out_lat_deg) *out_lat_deg = fix.pos.lat_deg;
    if (out_lon_deg) *out_lon_deg = fix.pos.lon_deg;
    if (out_speed_mps) *out_speed_mps = fix.speed_mps;
  });
}

gs_status gs_gnss_write_csv(const gs_gnss* gnss, const char* path) {
  return guarded([&] {
    require(gnss && path, "gs_gnss_write_csv: null argument");
    streams::write_gnss_csv(gnss->fixes, path);
  });
}

void gs_gnss_free(gs_gnss* gnss) { delete gnss; }
void gs_can_free(gs_can* can) { delete can; }
void gs_imu_free(gs_imu* imu) { delete imu; }

gs_status gs_synchronize(const gs_gnss* gnss, const gs_can* can, const gs_imu* imu,
                         const char* extra_features, double earth_radius_m, gs_frames** out) {
  return guarded([&] {
    require(gnss && can && imu && out, "gs_synchronize: null argument");
    const auto selection =
        streams::FeatureSelection::from_extras(extra_features ? extra_features : "");
    auto frames = streams::synchronize(gnss->fixes, can->samples, imu->samples, selection,
                                       earth_from(earth_radius_m));
    *out = new gs_frames{selection.names(), std::move(frames)};
  });
}

gs_status gs_frames_load_csv(const char* path, gs_frames** out) {
  return guarded([&] {
    require(path && out, "gs_frames_load_csv: null argument");
    auto [names, frames] = streams::load_frames_csv(path);
    *out = new gs_frames{std::move(names), std::move(frames)};
  });
}

gs_status gs_frames_write_csv(const gs_frames* frames, const char* path) {
  return guarded([&] {
    require(frames && path, "gs_frames_write_csv: null argument");
    streams::write_frames_csv(frames->frames, frames->feature_names, path);
  });
}

size_t gs_frames_count(const gs_frames* frames) { return frames ? frames->frames.size() : 0; }

size_t gs_frames_feature_count(const gs_frames* frames) {
  return frames ? frames->feature_names.size() : 0;
}

void gs_frames_free(gs_frames* frames) { delete frames; }

void gs_train_config_defaults(gs_train_config* config) {
  if (!config) return;
  const lstm::TrainConfig defaults;
  config->hidden_size = defaults.hidden_size;
  config->epochs = defaults.epochs;
  config->batch_size = defaults.batch_size;
  config->learning_rate = defaults.learning_rate;
  config->window_len = defaults.window_len;
  config->seed = defaults.seed;
  config->adam_beta1 = defaults.adam_beta1;
  config->adam_beta2 = defaults.adam_beta2;
  config->adam_eps = defaults.adam_eps;
  config->train_count = 0;
  config->val_count = 0;
}

gs_status gs_train(const gs_frames* frames, const gs_train_config* config, gs_model** out_model,
                   gs_history** out_history) {
  return guarded([&] {
    require(frames && out_model, "gs_train: null argument");
    gs_train_config local;
    gs_train_config_defaults(&local);
    if (config) local = *config;

    lstm::TrainConfig train_config;
    train_config.hidden_size = local.hidden_size;
    train_config.epochs = local.epochs;
    train_config.batch_size = local.batch_size;
    train_config.learning_rate = local.learning_rate;
    train_config.window_len = local.window_len;
    train_config.seed = local.seed;
    train_config.adam_beta1 = local.adam_beta1;
    train_config.adam_beta2 = local.adam_beta2;
    train_config.adam_eps = local.adam_eps;

    std::optional<std::size_t> train_count, val_count;
    if (local.train_count > 0) train_count = static_cast<std::size_t>(local.train_count);
    if (local.val_count > 0) val_count = static_cast<std::size_t>(local.val_count);
    const auto [train_frames, val_frames] = streams::split(frames->frames, train_count, val_count);

    auto result = lstm::train(train_frames, val_frames, train_config, frames->feature_names);
    *out_model = new gs_model{std::move(result.model)};
    if (out_history) *out_history = new gs_history{std::move(result.history)};
  });
}

size_t gs_history_count(const gs_history* history) {
  return history ? history->entries.size() : 0;
}

gs_status gs_history_entry(const gs_history* history, size_t epoch_index, double* out_train_mae,
                           double* out_val_mae) {
  return guarded([&] {
    require(history != nullptr, "gs_history_entry: null handle");
    require(epoch_index < history->entries.size(), "gs_history_entry: index out of range");
    if (out_train_mae) *out_train_mae = history->entries[epoch_index].train_mae;
    if (out_val_mae) *out_val_mae = history->entries[epoch_index].val_mae;
  });
}

gs_status gs_history_write_csv(const gs_history* history, const char* path) {
  return guarded([&] {
    require(history && path, "gs_history_write_csv: null argument");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw_io(std::string("cannot write file: ") + path);
    out << "epoch,train_mae,val_mae\n";
    for (std::size_t i = 0; i < history->entries.size(); ++i) {
      out << (i + 1) << ',' << textio::format_double(history->entries[i].train_mae) << ','
          << textio::format_double(history->entries[i].val_mae) << '\n';
    }
    if (!out) throw_io(std::string("write failed: ") + path);
  });
}

void gs_history_free(gs_history* history) { delete history; }

gs_status gs_model_save(const gs_model* model, const char* path) {
  return guarded([&] {
    require(model && path, "gs_model_save: null argument");
    lstm::save_model(model->model, path);
  });
}

gs_status gs_model_load(const char* path, gs_model** out) {
  return guarded([&] {
    require(path && out, "gs_model_load: null argument");
    *out = new gs_model{lstm::load_model(path)};
  });
}

int gs_model_window_len(const gs_model* model) {
  return model ? model->model.config.window_len : 0;
}

void gs_model_free(gs_model* model) { delete model; }

gs_status gs_evaluate(const gs_model* model, const gs_frames* frames, int rmse_mode,
                      double hist_bin_width_m, gs_eval** out) {
  return guarded([&] {
    require(model && frames && out, "gs_evaluate: null argument");
    require(rmse_mode == 0 || rmse_mode == 1, "gs_evaluate: rmse_mode must be 0 or 1");
    const auto mode = rmse_mode == 1 ? lstm::RmseMode::paper_literal : lstm::RmseMode::standard;
    const double bin = hist_bin_width_m > 0.0 ? hist_bin_width_m : 0.005;
    *out = new gs_eval{lstm::evaluate(model->model, frames->frames, mode, bin), mode};
  });
}

gs_status gs_eval_metrics(const gs_eval* eval, double* out_rmse_m, double* out_mae_m,
                          double* out_max_abs_err_m, double* out_min_abs_err_m) {
  return guarded([&] {
    require(eval != nullptr, "gs_eval_metrics: null handle");
    if (out_rmse_m) *out_rmse_m = eval->result.rmse_m;
    if (out_mae_m) *out_mae_m = eval->result.mae_m;
    if (out_max_abs_err_m) *out_max_abs_err_m = eval->result.max_abs_err_m;
    if (out_min_abs_err_m) *out_min_abs_err_m = eval->result.min_abs_err_m;
  });
}

size_t gs_eval_prediction_count(const gs_eval* eval) {
  return eval ? eval->result.predictions_m.size() : 0;
}

gs_status gs_eval_write_metrics_json(const gs_eval* eval, const char* path) {
  return guarded([&] {
    require(eval && path, "gs_eval_write_metrics_json: null argument");
    nlohmann::ordered_json j;
    j["rmse_m"] = eval->result.rmse_m;
    j["mae_m"] = eval->result.mae_m;
    j["max_abs_err_m"] = eval->result.max_abs_err_m;
    j["min_abs_err_m"] = eval->result.min_abs_err_m;
    j["prediction_count"] = eval->result.predictions_m.size();
    j["rmse_mode"] = eval->mode == lstm::RmseMode::paper_literal ? "paper-literal" : "standard";
    j["histogram_bin_width_m"] = eval->result.hist_bin_width_m;
    write_json_file(j, path);
  });
}

gs_status gs_eval_write_predictions_csv(const gs_eval* eval, const char* path) {
  return guarded([&] {
    require(eval && path, "gs_eval_write_predictions_csv: null argument");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw_io(std::string("cannot write file: ") + path);
    out << "t,predicted_m,label_m,abs_err_m\n";
    const auto& r = eval->result;
    for (std::size_t i = 0; i < r.predictions_m.size(); ++i) {
      out << textio::format_double(r.t[i]) << ',' << textio::format_double(r.predictions_m[i])
          << ',' << textio::format_double(r.labels_m[i]) << ','
          << textio::format_double(std::abs(r.predictions_m[i] - r.labels_m[i])) << '\n';
    }
    if (!out) throw_io(std::string("write failed: ") + path);
  });
}

gs_status gs_eval_write_histogram_csv(const gs_eval* eval, const char* path) {
  return guarded([&] {
    require(eval && path, "gs_eval_write_histogram_csv: null argument");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw_io(std::string("cannot write file: ") + path);
    out << "bin_lo_m,bin_hi_m,count\n";
    const auto& r = eval->result;
    for (std::size_t i = 0; i < r.hist_counts.size(); ++i) {
      out << textio::format_double(static_cast<double>(i) * r.hist_bin_width_m) << ','
          << textio::format_double(static_cast<double>(i + 1) * r.hist_bin_width_m) << ','
          << r.hist_counts[i] << '\n';
    }
    if (!out) throw_io(std::string("write failed: ") + path);
  });
}

void gs_eval_free(gs_eval* eval) { delete eval; }

gs_status gs_route_parse_kml(const char* text, size_t length, gs_route** out) {
  return guarded([&] {
    require(text && out, "gs_route_parse_kml: null argument");
    *out = new gs_route{spoofsim::parse_kml_route(std::string_view(text, length))};
  });
}

gs_status gs_route_load(const char* path, gs_route** out) {
  return guarded([&] {
    require(path && out, "gs_route_load: null argument");
    *out = new gs_route{spoofsim::load_route(path)};
  });
}

size_t gs_route_point_count(const gs_route* route) {
  return route ? route->route.points.size() : 0;
}

gs_status gs_route_point(const gs_route* route, size_t index, double* out_lat_deg,
                         double* out_lon_deg) {
  return guarded([&] {
    require(route != nullptr, "gs_route_point: null handle");
    require(index < route->route.points.size(), "gs_route_point: index out of range");
    if (out_lat_deg) *out_lat_deg = route->route.points[index].lat_deg;
    if (out_lon_deg) *out_lon_deg = route->route.points[index].lon_deg;
  });
}

void gs_route_free(gs_route* route) { delete route; }

gs_status gs_inject_spoof(const gs_gnss* truth, const gs_route* route, size_t onset_index,
                          double earth_radius_m, gs_gnss** out) {
  return guarded([&] {
    require(truth && route && out, "gs_inject_spoof: null argument");
    spoofsim::SpoofScenario scenario{truth->fixes, route->route, onset_index};
    *out = new gs_gnss{spoofsim::inject_spoof(scenario, earth_from(earth_radius_m))};
  });
}

gs_status gs_synth_deviation(const gs_gnss* truth, size_t onset_index,
                             double cross_track_rate_m_per_step, double earth_radius_m,
                             gs_gnss** out) {
  return guarded([&] {
    require(truth && out, "gs_synth_deviation: null argument");
    *out = new gs_gnss{spoofsim::synth_deviation(truth->fixes, onset_index,
                                                 cross_track_rate_m_per_step,
                                                 earth_from(earth_radius_m))};
  });
}

gs_status gs_calibrate_threshold(const gs_model* model, const gs_frames* clean_frames,
                                 double gnss_position_error_m, gs_detection_config* out) {
  return guarded([&] {
    require(model && clean_frames && out, "gs_calibrate_threshold: null argument");
    const auto config =
        detector::calibrate_threshold(model->model, clean_frames->frames, gnss_position_error_m);
    out->gnss_position_error_m = config.gnss_position_error_m;
    out->prediction_error_m = config.prediction_error_m;
    out->threshold_gamma_m = config.threshold_gamma_m;
  });
}

gs_status gs_detect(const gs_model* model, const gs_gnss* gnss_under_test, const gs_can* can,
                    const gs_imu* imu, const gs_detection_config* config, int residual_mode,
                    long long truth_onset, double earth_radius_m, gs_detect_run** out) {
  return guarded([&] {
    require(model && gnss_under_test && can && imu && config && out, "gs_detect: null argument");
    require(residual_mode == 0 || residual_mode == 1, "gs_detect: residual_mode must be 0 or 1");
    const auto detector_config =
        detector::DetectionConfig::make(config->gnss_position_error_m, config->prediction_error_m);
    std::optional<std::size_t> onset;
    if (truth_onset >= 0) onset = static_cast<std::size_t>(truth_onset);
    const auto mode =
        residual_mode == 1 ? detector::ResidualMode::raw : detector::ResidualMode::diff;
    *out = new gs_detect_run{detector::detect_stream(model->model, gnss_under_test->fixes,
                                                     can->samples, imu->samples, detector_config,
                                                     mode, onset, earth_from(earth_radius_m))};
  });
}

size_t gs_detect_run_verdict_count(const gs_detect_run* run) {
  return run ? run->run.verdicts.size() : 0;
}

gs_status gs_detect_run_verdict(const gs_detect_run* run, size_t index, gs_verdict* out) {
  return guarded([&] {
    require(run && out, "gs_detect_run_verdict: null argument");
    require(index < run->run.verdicts.size(), "gs_detect_run_verdict: index out of range");
    const auto& v = run->run.verdicts[index];
    out->t = v.t;
    out->step_index = static_cast<long long>(v.step_index);
    out->predicted_m = v.predicted_m;
    out->observed_m = v.observed_m;
    out->residual_m = v.residual_m;
    out->threshold_m = v.threshold_m;
    out->alarm = v.alarm ? 1 : 0;
    out->latency_us = v.latency_us;
  });
}

gs_status gs_detect_run_summary(const gs_detect_run* run, gs_detection_summary* out) {
  return guarded([&] {
    require(run && out, "gs_detect_run_summary: null argument");
    const auto& s = run->run.summary;
    out->verdict_count = static_cast<long long>(s.verdict_count);
    out->alarm_count = static_cast<long long>(s.alarm_count);
    out->first_alarm_step = s.first_alarm_step ? static_cast<long long>(*s.first_alarm_step) : -1;
    out->truth_onset = s.truth_onset ? static_cast<long long>(*s.truth_onset) : -1;
    out->detection_delay_steps = s.detection_delay_steps ? *s.detection_delay_steps : -1;
    out->false_alarm_count = static_cast<long long>(s.false_alarm_count);
    out->false_alarm_rate = s.false_alarm_rate;
    out->mean_latency_us = s.mean_latency_us;
    out->max_latency_us = s.max_latency_us;
    out->budget_ok = s.budget_ok ? 1 : 0;
  });
}

gs_status gs_detect_run_write_verdicts_csv(const gs_detect_run* run, const char* path) {
  return guarded([&] {
    require(run && path, "gs_detect_run_write_verdicts_csv: null argument");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw_io(std::string("cannot write file: ") + path);
    out << "t,predicted_m,observed_m,residual_m,threshold_m,alarm,latency_us\n";
    for (const auto& v : run->run.verdicts) {
      out << textio::format_double(v.t) << ',' << textio::format_double(v.predicted_m) << ','
          << textio::format_double(v.observed_m) << ',' << textio::format_double(v.residual_m)
          << ',' << textio::format_double(v.threshold_m) << ',' << (v.alarm ? 1 : 0) << ','
          << textio::format_double(v.latency_us) << '\n';
    }
    if (!out) throw_io(std::string("write failed: ") + path);
  });
}

gs_status gs_detect_run_write_summary_json(const gs_detect_run* run, const char* path) {
  return guarded([&] {
    require(run && path, "gs_detect_run_write_summary_json: null argument");
    write_json_file(summary_to_json(run->run.summary), path);
  });
}

void gs_detect_run_free(gs_detect_run* run) { delete run; }

}  // extern "C"
