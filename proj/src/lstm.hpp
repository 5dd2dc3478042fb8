#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "streams.hpp"

namespace gnss_sentry::lstm {

// Gate index order used everywhere (tensors, serialization, gradients).
enum Gate : int { kInput = 0, kForget = 1, kOutput = 2, kCell = 3 };
inline constexpr std::array<const char*, 4> kGateSuffix = {"i", "f", "o", "g"};

// All learnable parameters of the one-layer LSTM plus the dense scalar
// head. Biases and head vectors are stored as single-column matrices so
// every tensor can be visited uniformly (Adam, serialization, init).
struct LstmParams {
  std::array<Eigen::MatrixXd, 4> w_in;   // H x F
  std::array<Eigen::MatrixXd, 4> w_rec;  // H x H
  std::array<Eigen::MatrixXd, 4> bias;   // H x 1
  Eigen::MatrixXd w_head;                // H x 1
  Eigen::MatrixXd b_head;                // 1 x 1

  Eigen::Index hidden_size() const { return w_in[0].rows(); }
  Eigen::Index input_size() const { return w_in[0].cols(); }

  static LstmParams zeros(Eigen::Index hidden, Eigen::Index input);
  void set_zero();

  // 14 tensors in canonical order: W_i..W_g, U_i..U_g, b_i..b_g, w_out, b_out.
  std::array<Eigen::MatrixXd*, 14> tensors();
  std::array<const Eigen::MatrixXd*, 14> tensors() const;
  static std::array<std::string, 14> tensor_names();
};

struct TrainConfig {
  int hidden_size = 50;
  int epochs = 100;
  int batch_size = 50;
  double learning_rate = 0.01;
  int window_len = 10;
  std::uint64_t seed = 42;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

// Adam moment accumulators, shapes mirroring the parameters.
struct AdamState {
  LstmParams m;
  LstmParams v;
  long step = 0;

  static AdamState zeros(Eigen::Index hidden, Eigen::Index input);
};

// Per-step activations kept for backpropagation through time. Matrices
// are H x B (columns are batch items); x is F x B.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> x;
  std::array<std::vector<Eigen::MatrixXd>, 4> gates;  // activated i, f, o, g
  std::vector<Eigen::MatrixXd> cell;
  std::vector<Eigen::MatrixXd> cell_tanh;
  std::vector<Eigen::MatrixXd> hidden;
  Eigen::RowVectorXd prediction;  // 1 x B, normalized units

  Eigen::Index steps() const { return static_cast<Eigen::Index>(x.size()); }
  Eigen::Index batch() const { return x.empty() ? 0 : x[0].cols(); }
};

// Runs the recurrence over a batch of windows with zero initial state.
// xs has one F x B matrix per time step.
void forward_batch(const LstmParams& params, const std::vector<Eigen::MatrixXd>& xs,
                   ForwardCache& cache);

// Single-window convenience: window rows are time steps, columns features.
double forward(const LstmParams& params, const Eigen::MatrixXd& window, ForwardCache* cache);

// Mean-absolute-error gradients for the batch in `cache`; the subgradient
// at zero residual is zero. Gradients are averaged over the batch.
LstmParams backward_batch(const LstmParams& params, const ForwardCache& cache,
                          const Eigen::RowVectorXd& truth);

LstmParams backward(const LstmParams& params, const Eigen::MatrixXd& window, double truth,
                    const ForwardCache& cache);

// One Adam update with bias correction; epsilon is added outside the
// square root.
void adam_step(LstmParams& params, const LstmParams& grads, AdamState& state,
               const TrainConfig& config);

double mae(std::span<const double> predicted, std::span<const double> truth);

enum class RmseMode { standard, paper_literal };

// standard: sqrt(mean(err^2)). paper_literal: sqrt(sum(err^2)) / N.
double rmse(std::span<const double> predicted, std::span<const double> truth,
            RmseMode mode = RmseMode::standard);

// Trained predictor bundled with everything inference needs.
struct LstmModel {
  LstmParams params;
  streams::NormStats norm;
  std::vector<std::string> feature_names;
  TrainConfig config;
};

struct EpochStats {
  double train_mae = 0.0;  // normalized units
  double val_mae = 0.0;
};

struct TrainResult {
  LstmModel model;
  std::vector<EpochStats> history;
};

// Fits normalization on the training rows, then runs mini-batch BPTT
// over sliding windows (window predicts its final step's label).
TrainResult train(std::span<const streams::SyncedFrame> train_frames,
                  std::span<const streams::SyncedFrame> val_frames,
                  const TrainConfig& config,
                  const std::vector<std::string>& feature_names);

// Weight init: uniform in [-1/sqrt(H), 1/sqrt(H)], forget-gate bias 1,
// all other biases 0.
LstmParams init_params(Eigen::Index hidden, Eigen::Index input, std::uint64_t seed);

struct EvalResult {
  double rmse_m = 0.0;
  double mae_m = 0.0;
  double max_abs_err_m = 0.0;
  double min_abs_err_m = 0.0;
  std::vector<double> t;              // per predicted frame
  std::vector<double> predictions_m;  // de-normalized
  std::vector<double> labels_m;
  double hist_bin_width_m = 0.0;
  std::vector<std::size_t> hist_counts;  // |err| histogram, bin i = [i*w, (i+1)*w)
};

EvalResult evaluate(const LstmModel& model, std::span<const streams::SyncedFrame> frames,
                    RmseMode mode = RmseMode::standard, double hist_bin_width_m = 0.005);

// Versioned plain-text model file; numbers round-trip exactly.
void save_model(const LstmModel& model, const std::string& path);
LstmModel load_model(const std::string& path);

}  // namespace gnss_sentry::lstm
