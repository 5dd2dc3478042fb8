/*
 * gnss-sentry — prediction-based GNSS spoofing detection for vehicles.
 *
 * C interface to the detection pipeline: ingest GNSS/CAN/IMU streams,
 * synchronize them into labeled feature frames, train the distance
 * predictor, generate spoofed trajectories, and run per-step detection.
 *
 * Conventions:
 *   - Every fallible call returns gs_status; GS_OK is 0. On failure the
 *     thread-local message from gs_last_error() describes the cause.
 *   - Out-parameters are written only on GS_OK.
 *   - Objects returned through gs_*_create/load/... own their memory and
 *     are released with the matching gs_*_free (NULL is a no-op).
 *   - Passing earth_radius_m <= 0 selects the built-in mean Earth radius
 *     (6 371 000 m).
 */

#ifndef GNSS_SENTRY_H
#define GNSS_SENTRY_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gs_status {
  GS_OK = 0,
  GS_ERR_INVALID_INPUT = 1,
  GS_ERR_IO = 2,
  GS_ERR_FORMAT = 3,
  GS_ERR_DEGENERATE_FEATURE = 4,
  GS_ERR_VERSION_MISMATCH = 5,
  GS_ERR_INTERNAL = 6
} gs_status;

const char* gs_status_name(gs_status status);

/* Message for the most recent failing call on this thread. */
const char* gs_last_error(void);

const char* gs_version(void);

/* ------------------------------------------------------------------ */
/* Geodesy                                                            */
/* ------------------------------------------------------------------ */

/* Great-circle distance in meters between two lat/lon pairs (degrees). */
gs_status gs_haversine_m(double lat1_deg, double lon1_deg, double lat2_deg, double lon2_deg,
                         double earth_radius_m, double* out_distance_m);

/* ------------------------------------------------------------------ */
/* Sensor streams                                                     */
/* ------------------------------------------------------------------ */

typedef struct gs_gnss gs_gnss; /* GNSS fixes, sorted by time */
typedef struct gs_can gs_can;   /* CAN samples */
typedef struct gs_imu gs_imu;   /* IMU samples */

/* CSV schemas: gnss "t,lat_deg,lon_deg,speed_mps";
 * can "t,speed_mps,steering_deg"; imu "t,ax_fwd,ax_right,ax_down". */
gs_status gs_gnss_load_csv(const char* path, gs_gnss** out);
gs_status gs_can_load_csv(const char* path, gs_can** out);
gs_status gs_imu_load_csv(const char* path, gs_imu** out);

size_t gs_gnss_count(const gs_gnss* gnss);
gs_status gs_gnss_fix(const gs_gnss* gnss, size_t index, double* out_t, double* out_lat_deg,
                      double* out_lon_deg, double* out_speed_mps);
gs_status gs_gnss_write_csv(const gs_gnss* gnss, const char* path);

void gs_gnss_free(gs_gnss* gnss);
void gs_can_free(gs_can* can);
void gs_imu_free(gs_imu* imu);

/* ------------------------------------------------------------------ */
/* Synchronized frames                                                */
/* ------------------------------------------------------------------ */

typedef struct gs_frames gs_frames;

/* Fuses the three streams onto GNSS timestamps. extra_features is a
 * comma-separated subset of "gnss_speed,prev_dist" or NULL for the
 * default feature set (CAN speed, steering angle, forward accel). */
gs_status gs_synchronize(const gs_gnss* gnss, const gs_can* can, const gs_imu* imu,
                         const char* extra_features, double earth_radius_m, gs_frames** out);

gs_status gs_frames_load_csv(const char* path, gs_frames** out);
gs_status gs_frames_write_csv(const gs_frames* frames, const char* path);
size_t gs_frames_count(const gs_frames* frames);
size_t gs_frames_feature_count(const gs_frames* frames);
void gs_frames_free(gs_frames* frames);

/* ------------------------------------------------------------------ */
/* Distance predictor                                                 */
/* ------------------------------------------------------------------ */

typedef struct gs_model gs_model;
typedef struct gs_history gs_history; /* per-epoch loss curve */

typedef struct gs_train_config {
  int hidden_size;      /* default 50 */
  int epochs;           /* default 100 */
  int batch_size;       /* default 50 */
  double learning_rate; /* default 0.01 */
  int window_len;       /* default 10 */
  uint64_t seed;        /* default 42 */
  double adam_beta1;    /* default 0.9 */
  double adam_beta2;    /* default 0.999 */
  double adam_eps;      /* default 1e-8 */
  /* Chronological split sizes; <= 0 selects the defaults (4500 train
   * rows when at least 5987 frames are available, else 3/4). */
  long long train_count;
  long long val_count;
} gs_train_config;

void gs_train_config_defaults(gs_train_config* config);

/* Splits the frames chronologically and trains the predictor. out_history
 * may be NULL when the loss curve is not needed. */
gs_status gs_train(const gs_frames* frames, const gs_train_config* config, gs_model** out_model,
                   gs_history** out_history);

size_t gs_history_count(const gs_history* history);
gs_status gs_history_entry(const gs_history* history, size_t epoch_index, double* out_train_mae,
                           double* out_val_mae);
/* CSV: "epoch,train_mae,val_mae" (normalized units). */
gs_status gs_history_write_csv(const gs_history* history, const char* path);
void gs_history_free(gs_history* history);

gs_status gs_model_save(const gs_model* model, const char* path);
gs_status gs_model_load(const char* path, gs_model** out);
int gs_model_window_len(const gs_model* model);
void gs_model_free(gs_model* model);

/* ------------------------------------------------------------------ */
/* Evaluation                                                         */
/* ------------------------------------------------------------------ */

typedef struct gs_eval gs_eval;

/* rmse_mode 0: sqrt(mean(err^2)); 1: sqrt(sum(err^2))/N.
 * hist_bin_width_m <= 0 selects the default 0.005 m. */
gs_status gs_evaluate(const gs_model* model, const gs_frames* frames, int rmse_mode,
                      double hist_bin_width_m, gs_eval** out);

gs_status gs_eval_metrics(const gs_eval* eval, double* out_rmse_m, double* out_mae_m,
                          double* out_max_abs_err_m, double* out_min_abs_err_m);
size_t gs_eval_prediction_count(const gs_eval* eval);
gs_status gs_eval_write_metrics_json(const gs_eval* eval, const char* path);
/* CSV: "t,predicted_m,label_m,abs_err_m". */
gs_status gs_eval_write_predictions_csv(const gs_eval* eval, const char* path);
/* CSV: "bin_lo_m,bin_hi_m,count" over |error|. */
gs_status gs_eval_write_histogram_csv(const gs_eval* eval, const char* path);
void gs_eval_free(gs_eval* eval);

/* ------------------------------------------------------------------ */
/* Spoofed trajectory generation                                      */
/* ------------------------------------------------------------------ */

typedef struct gs_route gs_route;

/* Parses the first LineString <coordinates> block of a KML document. */
gs_status gs_route_parse_kml(const char* text, size_t length, gs_route** out);
/* Loads a route file: .kml via the KML subset, otherwise CSV with
 * header "lat_deg,lon_deg". */
gs_status gs_route_load(const char* path, gs_route** out);
size_t gs_route_point_count(const gs_route* route);
gs_status gs_route_point(const gs_route* route, size_t index, double* out_lat_deg,
                         double* out_lon_deg);
void gs_route_free(gs_route* route);

/* Splices the route into the truth at onset_index, resampling it by arc
 * length so each post-onset step keeps the ground truth's spacing. */
gs_status gs_inject_spoof(const gs_gnss* truth, const gs_route* route, size_t onset_index,
                          double earth_radius_m, gs_gnss** out);

/* Parametric attack: fix k steps past onset drifts k * rate meters
 * perpendicular to the local heading. */
gs_status gs_synth_deviation(const gs_gnss* truth, size_t onset_index,
                             double cross_track_rate_m_per_step, double earth_radius_m,
                             gs_gnss** out);

/* ------------------------------------------------------------------ */
/* Detection                                                          */
/* ------------------------------------------------------------------ */

typedef struct gs_detection_config {
  double gnss_position_error_m;
  double prediction_error_m;
  double threshold_gamma_m; /* always the exact sum of the two above */
} gs_detection_config;

typedef struct gs_verdict {
  double t;
  long long step_index; /* index of the step's starting fix */
  double predicted_m;
  double observed_m;
  double residual_m;
  double threshold_m;
  int alarm;
  double latency_us;
} gs_verdict;

typedef struct gs_detection_summary {
  long long verdict_count;
  long long alarm_count;
  long long first_alarm_step;     /* -1 when no alarm */
  long long truth_onset;          /* -1 when not supplied */
  long long detection_delay_steps; /* -1 when undefined */
  long long false_alarm_count;
  double false_alarm_rate;
  double mean_latency_us;
  double max_latency_us;
  int budget_ok; /* mean step latency under 100 ms */
} gs_detection_summary;

typedef struct gs_detect_run gs_detect_run;

/* gamma = gnss positioning error + max absolute prediction error over
 * the attack-free calibration frames. */
gs_status gs_calibrate_threshold(const gs_model* model, const gs_frames* clean_frames,
                                 double gnss_position_error_m, gs_detection_config* out);

/* residual_mode 0: |observed - predicted| ("diff"); 1: observed ("raw").
 * truth_onset < 0 means unknown. */
gs_status gs_detect(const gs_model* model, const gs_gnss* gnss_under_test, const gs_can* can,
                    const gs_imu* imu, const gs_detection_config* config, int residual_mode,
                    long long truth_onset, double earth_radius_m, gs_detect_run** out);

size_t gs_detect_run_verdict_count(const gs_detect_run* run);
gs_status gs_detect_run_verdict(const gs_detect_run* run, size_t index, gs_verdict* out);
gs_status gs_detect_run_summary(const gs_detect_run* run, gs_detection_summary* out);
/* CSV: "t,predicted_m,observed_m,residual_m,threshold_m,alarm,latency_us". */
gs_status gs_detect_run_write_verdicts_csv(const gs_detect_run* run, const char* path);
gs_status gs_detect_run_write_summary_json(const gs_detect_run* run, const char* path);
void gs_detect_run_free(gs_detect_run* run);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* GNSS_SENTRY_H */
