#pragma once

// Independent reference implementations used to cross-check the library.
// Everything here is deliberately written in plain scalar arithmetic,
// sharing no code with the implementation paths it validates.

#include <cstdint>
#include <optional>
#include <vector>

#include "lstm.hpp"
#include "streams.hpp"

namespace gnss_sentry::oracles {

// Spherical law of cosines; ill-conditioned near antipodes but an
// independent route to the same great-circle distance.
double law_of_cosines_distance(double lat1_deg, double lon1_deg, double lat2_deg,
                               double lon2_deg, double radius_m);

// Haversine recoded with bare std::sin/cos calls (no shared helpers).
double scalar_haversine(double lat1_deg, double lon1_deg, double lat2_deg, double lon2_deg,
                        double radius_m);

// LSTM recurrence evaluated with index loops over plain vectors; window
// is row-per-step, normalized units.
double scalar_lstm_forward(const lstm::LstmParams& params,
                           const std::vector<std::vector<double>>& window);

// Central finite differences of the single-window MAE loss with respect
// to every parameter entry.
lstm::LstmParams fd_gradients(const lstm::LstmParams& params, const Eigen::MatrixXd& window,
                              double truth, double step);

// Scalar replay of the detection loop over already-synchronized frames:
// normalize, predict, de-normalize, compare the observed step distance.
// Returns the first step index (index of the step's starting fix) whose
// residual exceeds the threshold, if any.
std::optional<std::size_t> replay_first_alarm(const lstm::LstmModel& model,
                                              const std::vector<streams::SyncedFrame>& frames,
                                              const std::vector<streams::GnssFix>& gnss,
                                              double threshold_m, double radius_m);

std::uint64_t ulp_distance(double a, double b);

}  // namespace gnss_sentry::oracles
