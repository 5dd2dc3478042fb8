#include "lstm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "error.hpp"
#include "rng.hpp"
#include "textio.hpp"

namespace gnss_sentry::lstm {

namespace {

constexpr const char* kModelMagic = "gnss-sentry model";
constexpr int kModelVersion = 1;

Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& z) {
  return ((-z.array()).exp() + 1.0).inverse().matrix();
}

double sign_or_zero(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

void check_pair_lengths(std::span<const double> predicted, std::span<const double> truth,
                        const char* what) {
  if (predicted.size() != truth.size()) {
    throw_invalid(std::string(what) + ": length mismatch (" + std::to_string(predicted.size()) +
                  " vs " + std::to_string(truth.size()) + ")");
  }
  if (predicted.empty()) throw_invalid(std::string(what) + ": empty input");
}

}  // namespace

LstmParams LstmParams::zeros(Eigen::Index hidden, Eigen::Index input) {
  LstmParams p;
  for (int g = 0; g < 4; ++g) {
    p.w_in[g] = Eigen::MatrixXd::Zero(hidden, input);
    p.w_rec[g] = Eigen::MatrixXd::Zero(hidden, hidden);
    p.bias[g] = Eigen::MatrixXd::Zero(hidden, 1);
  }
  p.w_head = Eigen::MatrixXd::Zero(hidden, 1);
  p.b_head = Eigen::MatrixXd::Zero(1, 1);
  return p;
}

void LstmParams::set_zero() {
  for (auto* t : tensors()) t->setZero();
}

std::array<Eigen::MatrixXd*, 14> LstmParams::tensors() {
  return {&w_in[0], &w_in[1], &w_in[2], &w_in[3],  &w_rec[0], &w_rec[1], &w_rec[2],
          &w_rec[3], &bias[0], &bias[1], &bias[2], &bias[3],  &w_head,   &b_head};
}

std::array<const Eigen::MatrixXd*, 14> LstmParams::tensors() const {
  return {&w_in[0], &w_in[1], &w_in[2], &w_in[3],  &w_rec[0], &w_rec[1], &w_rec[2],
          &w_rec[3], &bias[0], &bias[1], &bias[2], &bias[3],  &w_head,   &b_head};
}

std::array<std::string, 14> LstmParams::tensor_names() {
  std::array<std::string, 14> names;
  for (int g = 0; g < 4; ++g) {
    names[g] = std::string("W_") + kGateSuffix[g];
    names[4 + g] = std::string("U_") + kGateSuffix[g];
    names[8 + g] = std::string("b_") + kGateSuffix[g];
  }
  names[12] = "w_out";
  names[13] = "b_out";
  return names;
}

void TrainConfig::validate() const {
  if (hidden_size <= 0) throw_invalid("config: hidden_size must be positive");
  if (epochs < 0) throw_invalid("config: epochs must be non-negative");
  if (batch_size <= 0) throw_invalid("config: batch_size must be positive");
  if (!(learning_rate > 0.0)) throw_invalid("config: learning_rate must be positive");
  if (window_len < 1) throw_invalid("config: window_len must be at least 1");
  if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) || !(adam_beta2 > 0.0 && adam_beta2 < 1.0)) {
    throw_invalid("config: Adam betas must lie in (0, 1)");
  }
  if (!(adam_eps > 0.0)) throw_invalid("config: Adam epsilon must be positive");
}

AdamState AdamState::zeros(Eigen::Index hidden, Eigen::Index input) {
  return {LstmParams::zeros(hidden, input), LstmParams::zeros(hidden, input), 0};
}

void forward_batch(const LstmParams& params, const std::vector<Eigen::MatrixXd>& xs,
                   ForwardCache& cache) {
  if (xs.empty()) throw_invalid("forward: empty window");
  const Eigen::Index hidden = params.hidden_size();
  const Eigen::Index input = params.input_size();
  const Eigen::Index batch = xs[0].cols();
  for (const auto& x : xs) {
    if (x.rows() != input || x.cols() != batch) {
      throw_invalid("forward: window shape does not match model input size");
    }
  }

  const std::size_t steps = xs.size();
  cache.x = xs;
  for (int g = 0; g < 4; ++g) cache.gates[g].resize(steps);
  cache.cell.resize(steps);
  cache.cell_tanh.resize(steps);
  cache.hidden.resize(steps);

  Eigen::MatrixXd h_prev = Eigen::MatrixXd::Zero(hidden, batch);
  Eigen::MatrixXd c_prev = Eigen::MatrixXd::Zero(hidden, batch);

  for (std::size_t t = 0; t < steps; ++t) {
    std::array<Eigen::MatrixXd, 4> pre;
    for (int g = 0; g < 4; ++g) {
      pre[g] = params.w_in[g] * xs[t] + params.w_rec[g] * h_prev;
      pre[g].colwise() += params.bias[g].col(0);
    }
    cache.gates[kInput][t] = sigmoid(pre[kInput]);
    cache.gates[kForget][t] = sigmoid(pre[kForget]);
    cache.gates[kOutput][t] = sigmoid(pre[kOutput]);
    cache.gates[kCell][t] = pre[kCell].array().tanh().matrix();

    cache.cell[t] = cache.gates[kForget][t].cwiseProduct(c_prev) +
                    cache.gates[kInput][t].cwiseProduct(cache.gates[kCell][t]);
    cache.cell_tanh[t] = cache.cell[t].array().tanh().matrix();
    cache.hidden[t] = cache.gates[kOutput][t].cwiseProduct(cache.cell_tanh[t]);

    h_prev = cache.hidden[t];
    c_prev = cache.cell[t];
  }

  cache.prediction =
      (params.w_head.col(0).transpose() * cache.hidden[steps - 1]).array() + params.b_head(0, 0);
}

double forward(const LstmParams& params, const Eigen::MatrixXd& window, ForwardCache* cache) {
  if (window.rows() < 1) throw_invalid("forward: empty window");
  if (window.cols() != params.input_size()) {
    throw_invalid("forward: window has " + std::to_string(window.cols()) +
                  " features, model expects " + std::to_string(params.input_size()));
  }
  std::vector<Eigen::MatrixXd> xs(static_cast<std::size_t>(window.rows()));
  for (Eigen::Index t = 0; t < window.rows(); ++t) {
    xs[static_cast<std::size_t>(t)] = window.row(t).transpose();
  }
  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  forward_batch(params, xs, c);
  return c.prediction(0);
}

LstmParams backward_batch(const LstmParams& params, const ForwardCache& cache,
                          const Eigen::RowVectorXd& truth) {
  const Eigen::Index steps = cache.steps();
  const Eigen::Index batch = cache.batch();
  if (steps == 0) throw_invalid("backward: empty cache");
  if (truth.size() != batch) throw_invalid("backward: truth size does not match batch");
  if (cache.x[0].rows() != params.input_size() ||
      cache.hidden[0].rows() != params.hidden_size()) {
    throw_invalid("backward: cache does not match parameter shapes");
  }

  LstmParams grads = LstmParams::zeros(params.hidden_size(), params.input_size());

  // d(mean_b |pred_b - truth_b|) / d pred
  Eigen::RowVectorXd d_pred(batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    d_pred(b) = sign_or_zero(cache.prediction(b) - truth(b)) / static_cast<double>(batch);
  }

  grads.w_head.col(0) = cache.hidden[steps - 1] * d_pred.transpose();
  grads.b_head(0, 0) = d_pred.sum();

  Eigen::MatrixXd dh = params.w_head.col(0) * d_pred;
  Eigen::MatrixXd dc = Eigen::MatrixXd::Zero(params.hidden_size(), batch);

  for (Eigen::Index t = steps - 1; t >= 0; --t) {
    const std::size_t ti = static_cast<std::size_t>(t);
    const auto& gi = cache.gates[kInput][ti];
    const auto& gf = cache.gates[kForget][ti];
    const auto& go = cache.gates[kOutput][ti];
    const auto& gg = cache.gates[kCell][ti];
    const auto& tc = cache.cell_tanh[ti];

    dc.array() += dh.array() * go.array() * (1.0 - tc.array().square());

    std::array<Eigen::MatrixXd, 4> d_pre;
    d_pre[kOutput] = (dh.array() * tc.array() * go.array() * (1.0 - go.array())).matrix();
    d_pre[kInput] = (dc.array() * gg.array() * gi.array() * (1.0 - gi.array())).matrix();
    d_pre[kCell] = (dc.array() * gi.array() * (1.0 - gg.array().square())).matrix();
    if (t > 0) {
      const auto& c_prev = cache.cell[ti - 1];
      d_pre[kForget] = (dc.array() * c_prev.array() * gf.array() * (1.0 - gf.array())).matrix();
    } else {
      d_pre[kForget] = Eigen::MatrixXd::Zero(params.hidden_size(), batch);
    }

    for (int g = 0; g < 4; ++g) {
      grads.w_in[g].noalias() += d_pre[g] * cache.x[ti].transpose();
      if (t > 0) grads.w_rec[g].noalias() += d_pre[g] * cache.hidden[ti - 1].transpose();
      grads.bias[g].col(0) += d_pre[g].rowwise().sum();
    }

    if (t > 0) {
      dh = params.w_rec[0].transpose() * d_pre[0];
      for (int g = 1; g < 4; ++g) dh.noalias() += params.w_rec[g].transpose() * d_pre[g];
      dc = dc.cwiseProduct(gf);
    }
  }
  return grads;
}

LstmParams backward(const LstmParams& params, const Eigen::MatrixXd& window, double truth,
                    const ForwardCache& cache) {
  if (cache.batch() != 1) throw_invalid("backward: cache holds a batch, expected one window");
  if (cache.steps() != window.rows()) {
    throw_invalid("backward: cache step count does not match window");
  }
  Eigen::RowVectorXd t(1);
  t(0) = truth;
  return backward_batch(params, cache, t);
}

void adam_step(LstmParams& params, const LstmParams& grads, AdamState& state,
               const TrainConfig& config) {
  if (params.hidden_size() != grads.hidden_size() || params.input_size() != grads.input_size()) {
    throw_invalid("adam_step: gradient shapes do not match parameters");
  }
  state.step += 1;
  const double b1 = config.adam_beta1;
  const double b2 = config.adam_beta2;
  const double m_corr = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double v_corr = 1.0 - std::pow(b2, static_cast<double>(state.step));

  auto p = params.tensors();
  auto g = grads.tensors();
  auto m = state.m.tensors();
  auto v = state.v.tensors();
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i]->array() = b1 * m[i]->array() + (1.0 - b1) * g[i]->array();
    v[i]->array() = b2 * v[i]->array() + (1.0 - b2) * g[i]->array().square();
    p[i]->array() -= config.learning_rate * (m[i]->array() / m_corr) /
                     ((v[i]->array() / v_corr).sqrt() + config.adam_eps);
  }
}

double mae(std::span<const double> predicted, std::span<const double> truth) {
  check_pair_lengths(predicted, truth, "mae");
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) sum += std::abs(predicted[i] - truth[i]);
  return sum / static_cast<double>(predicted.size());
}

double rmse(std::span<const double> predicted, std::span<const double> truth, RmseMode mode) {
  check_pair_lengths(predicted, truth, "rmse");
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double err = predicted[i] - truth[i];
    sum_sq += err * err;
  }
  const double n = static_cast<double>(predicted.size());
  if (mode == RmseMode::paper_literal) return std::sqrt(sum_sq) / n;
  return std::sqrt(sum_sq / n);
}

LstmParams init_params(Eigen::Index hidden, Eigen::Index input, std::uint64_t seed) {
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  LstmParams p = LstmParams::zeros(hidden, input);
  auto fill = [&](Eigen::MatrixXd& mat) {
    for (Eigen::Index r = 0; r < mat.rows(); ++r) {
      for (Eigen::Index c = 0; c < mat.cols(); ++c) mat(r, c) = rng.uniform(-bound, bound);
    }
  };
  for (int g = 0; g < 4; ++g) fill(p.w_in[g]);
  for (int g = 0; g < 4; ++g) fill(p.w_rec[g]);
  fill(p.w_head);
  p.bias[kForget].setOnes();
  return p;
}

namespace {

struct WindowSet {
  // xs[t] is F x N over all windows; window k's target is truth[k].
  std::vector<Eigen::MatrixXd> features_by_step;
  Eigen::RowVectorXd truth;
  Eigen::Index count = 0;
};

WindowSet build_windows(std::span<const streams::SyncedFrame> frames, int window_len,
                        Eigen::Index n_features) {
  WindowSet set;
  if (frames.size() < static_cast<std::size_t>(window_len)) return set;
  set.count = static_cast<Eigen::Index>(frames.size() - window_len + 1);
  set.features_by_step.assign(window_len, Eigen::MatrixXd(n_features, set.count));
  set.truth.resize(set.count);
  for (Eigen::Index k = 0; k < set.count; ++k) {
    for (int t = 0; t < window_len; ++t) {
      const auto& frame = frames[static_cast<std::size_t>(k) + t];
      if (static_cast<Eigen::Index>(frame.features.size()) != n_features) {
        throw_invalid("train: frame feature count does not match feature names");
      }
      for (Eigen::Index f = 0; f < n_features; ++f) {
        set.features_by_step[t](f, k) = frame.features[f];
      }
    }
    set.truth(k) = frames[static_cast<std::size_t>(k) + window_len - 1].label_distance_m;
  }
  return set;
}

// Gathers the batch columns selected by `index` from a window set.
void gather_batch(const WindowSet& set, std::span<const Eigen::Index> index,
                  std::vector<Eigen::MatrixXd>& xs, Eigen::RowVectorXd& truth) {
  const Eigen::Index b = static_cast<Eigen::Index>(index.size());
  const std::size_t steps = set.features_by_step.size();
  xs.resize(steps);
  truth.resize(b);
  for (std::size_t t = 0; t < steps; ++t) {
    xs[t].resize(set.features_by_step[t].rows(), b);
    for (Eigen::Index j = 0; j < b; ++j) xs[t].col(j) = set.features_by_step[t].col(index[j]);
  }
  for (Eigen::Index j = 0; j < b; ++j) truth(j) = set.truth(index[j]);
}

double mean_abs_error_over(const LstmParams& params, const WindowSet& set,
                           Eigen::Index chunk = 256) {
  double sum = 0.0;
  ForwardCache cache;
  std::vector<Eigen::MatrixXd> xs(set.features_by_step.size());
  for (Eigen::Index start = 0; start < set.count; start += chunk) {
    const Eigen::Index n = std::min(chunk, set.count - start);
    for (std::size_t t = 0; t < xs.size(); ++t) {
      xs[t] = set.features_by_step[t].middleCols(start, n);
    }
    forward_batch(params, xs, cache);
    sum += (cache.prediction - set.truth.segment(start, n)).cwiseAbs().sum();
  }
  return sum / static_cast<double>(set.count);
}

}  // namespace

TrainResult train(std::span<const streams::SyncedFrame> train_frames,
                  std::span<const streams::SyncedFrame> val_frames, const TrainConfig& config,
                  const std::vector<std::string>& feature_names) {
  config.validate();
  if (train_frames.empty()) throw_invalid("train: empty training set");
  const Eigen::Index n_features = static_cast<Eigen::Index>(feature_names.size());
  if (n_features == 0 ||
      train_frames[0].features.size() != static_cast<std::size_t>(n_features)) {
    throw_invalid("train: feature names do not match frame feature count");
  }

  const streams::NormStats norm = streams::fit_norm(train_frames, train_frames.size());
  const auto train_norm = streams::apply_norm(train_frames, norm);
  const auto val_norm = streams::apply_norm(val_frames, norm);

  const WindowSet train_set = build_windows(train_norm, config.window_len, n_features);
  const WindowSet val_set = build_windows(val_norm, config.window_len, n_features);
  if (train_set.count < config.batch_size) {
    throw_invalid("train: too few frames (" + std::to_string(train_frames.size()) + ") for " +
                  std::to_string(config.batch_size) + " windows of length " +
                  std::to_string(config.window_len));
  }
  if (val_set.count < 1) {
    throw_invalid("train: validation set too small for one window of length " +
                  std::to_string(config.window_len));
  }

  LstmParams params = init_params(config.hidden_size, n_features, config.seed);
  AdamState adam = AdamState::zeros(config.hidden_size, n_features);
  Rng shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ull);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(train_set.count));
  std::iota(order.begin(), order.end(), 0);

  std::vector<EpochStats> history;
  history.reserve(static_cast<std::size_t>(config.epochs));

  std::vector<Eigen::MatrixXd> xs;
  Eigen::RowVectorXd truth;
  ForwardCache cache;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double abs_err_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t n = std::min<std::size_t>(config.batch_size, order.size() - start);
      gather_batch(train_set, std::span(order).subspan(start, n), xs, truth);
      forward_batch(params, xs, cache);
      abs_err_sum += (cache.prediction - truth).cwiseAbs().sum();
      const LstmParams grads = backward_batch(params, cache, truth);
      adam_step(params, grads, adam, config);
    }
    EpochStats stats;
    stats.train_mae = abs_err_sum / static_cast<double>(train_set.count);
    stats.val_mae = mean_abs_error_over(params, val_set);
    history.push_back(stats);
  }

  TrainResult result;
  result.model = LstmModel{std::move(params), norm, feature_names, config};
  result.history = std::move(history);
  return result;
}

EvalResult evaluate(const LstmModel& model, std::span<const streams::SyncedFrame> frames,
                    RmseMode mode, double hist_bin_width_m) {
  const int window_len = model.config.window_len;
  if (frames.size() < static_cast<std::size_t>(window_len)) {
    throw_invalid("evaluate: insufficient frames (" + std::to_string(frames.size()) +
                  ") for window length " + std::to_string(window_len));
  }
  if (!(hist_bin_width_m > 0.0)) throw_invalid("evaluate: histogram bin width must be positive");
  const Eigen::Index n_features = static_cast<Eigen::Index>(model.norm.feature_min.size());

  const auto normalized = streams::apply_norm(frames, model.norm);
  const WindowSet set = build_windows(normalized, window_len, n_features);

  EvalResult result;
  result.hist_bin_width_m = hist_bin_width_m;
  result.t.reserve(set.count);
  result.predictions_m.reserve(set.count);
  result.labels_m.reserve(set.count);

  ForwardCache cache;
  std::vector<Eigen::MatrixXd> xs(set.features_by_step.size());
  constexpr Eigen::Index kChunk = 256;
  for (Eigen::Index start = 0; start < set.count; start += kChunk) {
    const Eigen::Index n = std::min(kChunk, set.count - start);
    for (std::size_t t = 0; t < xs.size(); ++t) {
      xs[t] = set.features_by_step[t].middleCols(start, n);
    }
    forward_batch(model.params, xs, cache);
    for (Eigen::Index j = 0; j < n; ++j) {
      const std::size_t frame_idx = static_cast<std::size_t>(start + j) + window_len - 1;
      result.t.push_back(frames[frame_idx].t);
      result.predictions_m.push_back(model.norm.denormalize_label(cache.prediction(j)));
      result.labels_m.push_back(frames[frame_idx].label_distance_m);
    }
  }

  double max_err = 0.0;
  double min_err = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < result.predictions_m.size(); ++i) {
    const double err = std::abs(result.predictions_m[i] - result.labels_m[i]);
    max_err = std::max(max_err, err);
    min_err = std::min(min_err, err);
    const auto bin = static_cast<std::size_t>(err / hist_bin_width_m);
    if (bin >= result.hist_counts.size()) result.hist_counts.resize(bin + 1, 0);
    result.hist_counts[bin] += 1;
  }
  result.mae_m = mae(result.predictions_m, result.labels_m);
  result.rmse_m = rmse(result.predictions_m, result.labels_m, mode);
  result.max_abs_err_m = max_err;
  result.min_abs_err_m = min_err;
  return result;
}

void save_model(const LstmModel& model, const std::string& path) {
  using textio::format_double;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_io("cannot write file: " + path);

  out << kModelMagic << " v" << kModelVersion << '\n';
  out << "hidden_size " << model.config.hidden_size << '\n';
  out << "input_size " << model.params.input_size() << '\n';
  out << "window_len " << model.config.window_len << '\n';
  out << "epochs " << model.config.epochs << '\n';
  out << "batch_size " << model.config.batch_size << '\n';
  out << "learning_rate " << format_double(model.config.learning_rate) << '\n';
  out << "seed " << model.config.seed << '\n';
  out << "adam_beta1 " << format_double(model.config.adam_beta1) << '\n';
  out << "adam_beta2 " << format_double(model.config.adam_beta2) << '\n';
  out << "adam_eps " << format_double(model.config.adam_eps) << '\n';

  out << "features";
  for (const auto& name : model.feature_names) out << ' ' << name;
  out << '\n';

  out << "norm_feature_min";
  for (double v : model.norm.feature_min) out << ' ' << format_double(v);
  out << '\n';
  out << "norm_feature_max";
  for (double v : model.norm.feature_max) out << ' ' << format_double(v);
  out << '\n';
  out << "norm_label_min " << format_double(model.norm.label_min) << '\n';
  out << "norm_label_max " << format_double(model.norm.label_max) << '\n';

  const auto names = LstmParams::tensor_names();
  const auto tensors = model.params.tensors();
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const Eigen::MatrixXd& m = *tensors[i];
    out << "tensor " << names[i] << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        if (c > 0) out << ' ';
        out << format_double(m(r, c));
      }
      out << '\n';
    }
  }
  out << "end\n";
  if (!out) throw_io("write failed: " + path);
}

namespace {

class LineReader {
public:
  LineReader(std::string text, std::string path)
      : text_(std::move(text)), lines_(textio::split_lines(text_)), path_(std::move(path)) {}

  // Next non-empty line; format error at EOF.
  std::string_view next(const char* expected) {
    while (pos_ < lines_.size()) {
      std::string_view line = textio::trim(lines_[pos_++]);
      if (!line.empty()) return line;
    }
    throw_format(path_ + ": unexpected end of file (expected " + std::string(expected) + ")");
  }

  const std::string& path() const { return path_; }
  std::size_t line_number() const { return pos_; }

private:
  std::string text_;
  std::vector<std::string_view> lines_;
  std::size_t pos_ = 0;
  std::string path_;
};

std::vector<std::string_view> expect_key(LineReader& reader, const std::string& key) {
  const std::string_view line = reader.next(key.c_str());
  auto fields = textio::split(line, ' ');
  std::erase_if(fields, [](std::string_view f) { return f.empty(); });
  if (fields.empty() || fields[0] != key) {
    throw_format(reader.path() + ":" + std::to_string(reader.line_number()) + ": expected '" +
                 key + "', got '" + std::string(line) + "'");
  }
  fields.erase(fields.begin());
  return fields;
}

double expect_double(LineReader& reader, const std::string& key) {
  const auto fields = expect_key(reader, key);
  if (fields.size() != 1) {
    throw_format(reader.path() + ": '" + key + "' expects one value");
  }
  const auto value = textio::parse_finite_double(fields[0]);
  if (!value) throw_format(reader.path() + ": '" + key + "': bad number");
  return *value;
}

long long expect_integer(LineReader& reader, const std::string& key) {
  const auto fields = expect_key(reader, key);
  if (fields.size() != 1) throw_format(reader.path() + ": '" + key + "' expects one value");
  const auto value = textio::parse_integer(fields[0]);
  if (!value) throw_format(reader.path() + ": '" + key + "': bad integer");
  return *value;
}

std::vector<double> expect_doubles(LineReader& reader, const std::string& key) {
  const auto fields = expect_key(reader, key);
  std::vector<double> values;
  values.reserve(fields.size());
  for (const auto& f : fields) {
    const auto value = textio::parse_finite_double(f);
    if (!value) throw_format(reader.path() + ": '" + key + "': bad number");
    values.push_back(*value);
  }
  return values;
}

}  // namespace

LstmModel load_model(const std::string& path) {
  LineReader reader(textio::read_file(path), path);

  const std::string_view header = reader.next("header");
  const std::string magic_prefix = std::string(kModelMagic) + " v";
  if (header.substr(0, magic_prefix.size()) != magic_prefix) {
    throw_format(path + ": not a model file");
  }
  const auto version = textio::parse_integer(header.substr(magic_prefix.size()));
  if (!version) throw_format(path + ": malformed version tag");
  if (*version != kModelVersion) {
    throw Error(ErrorCode::version_mismatch,
                path + ": model file version v" + std::to_string(*version) +
                    ", this build reads v" + std::to_string(kModelVersion));
  }

  LstmModel model;
  model.config.hidden_size = static_cast<int>(expect_integer(reader, "hidden_size"));
  const auto input_size = expect_integer(reader, "input_size");
  model.config.window_len = static_cast<int>(expect_integer(reader, "window_len"));
  model.config.epochs = static_cast<int>(expect_integer(reader, "epochs"));
  model.config.batch_size = static_cast<int>(expect_integer(reader, "batch_size"));
  model.config.learning_rate = expect_double(reader, "learning_rate");
  model.config.seed = static_cast<std::uint64_t>(expect_integer(reader, "seed"));
  model.config.adam_beta1 = expect_double(reader, "adam_beta1");
  model.config.adam_beta2 = expect_double(reader, "adam_beta2");
  model.config.adam_eps = expect_double(reader, "adam_eps");

  for (const auto& name : expect_key(reader, "features")) {
    model.feature_names.emplace_back(name);
  }
  model.norm.feature_min = expect_doubles(reader, "norm_feature_min");
  model.norm.feature_max = expect_doubles(reader, "norm_feature_max");
  model.norm.label_min = expect_double(reader, "norm_label_min");
  model.norm.label_max = expect_double(reader, "norm_label_max");

  if (model.config.hidden_size <= 0 || input_size <= 0) {
    throw_format(path + ": non-positive tensor dimensions");
  }
  if (model.feature_names.size() != static_cast<std::size_t>(input_size) ||
      model.norm.feature_min.size() != model.feature_names.size() ||
      model.norm.feature_max.size() != model.feature_names.size()) {
    throw_format(path + ": feature name/stat counts do not match input_size");
  }

  model.params = LstmParams::zeros(model.config.hidden_size, input_size);
  const auto names = LstmParams::tensor_names();
  const auto tensors = model.params.tensors();
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto dims = expect_key(reader, "tensor");
    if (dims.size() != 3 || dims[0] != names[i]) {
      throw_format(path + ": expected tensor '" + names[i] + "'");
    }
    const auto rows = textio::parse_integer(dims[1]);
    const auto cols = textio::parse_integer(dims[2]);
    if (!rows || !cols || *rows != tensors[i]->rows() || *cols != tensors[i]->cols()) {
      throw_format(path + ": tensor '" + names[i] + "' has unexpected shape");
    }
    for (Eigen::Index r = 0; r < tensors[i]->rows(); ++r) {
      const std::string_view line = reader.next("tensor row");
      auto fields = textio::split(line, ' ');
      std::erase_if(fields, [](std::string_view f) { return f.empty(); });
      if (static_cast<Eigen::Index>(fields.size()) != tensors[i]->cols()) {
        throw_format(path + ": tensor '" + names[i] + "' row " + std::to_string(r) +
                     " has wrong arity");
      }
      for (Eigen::Index c = 0; c < tensors[i]->cols(); ++c) {
        const auto value = textio::parse_finite_double(fields[static_cast<std::size_t>(c)]);
        if (!value) {
          throw_format(path + ": tensor '" + names[i] + "': bad number at row " +
                       std::to_string(r));
        }
        (*tensors[i])(r, c) = *value;
      }
    }
  }
  if (reader.next("end") != "end") throw_format(path + ": missing end marker");
  return model;
}

}  // namespace gnss_sentry::lstm
