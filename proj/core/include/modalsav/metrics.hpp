#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "modalsav/linalg.hpp"
#include "modalsav/sav_solver.hpp"

namespace modalsav {

/// sum |x~ - x|^2 / sum |x|^2. Throws UndefinedMetric for a zero target.
double mse_rel(std::span<const double> predicted, std::span<const double> target);
/// sum |x~ - x|_1 / sum |x|_1. Throws UndefinedMetric for a zero target.
double mae_rel(std::span<const double> predicted, std::span<const double> target);

/// Number of states covering the first `seconds` of a trajectory sampled at fs.
std::size_t window_samples(double sample_rate, double seconds);

/// Plain per-mode MSE over the first `window` states. Throws
/// std::invalid_argument if the window is empty or longer than either series.
Vec per_mode_mse(const Trajectory& predicted, const Trajectory& target, std::size_t window);

struct MetricsReport {
  // Relative errors, initial window and full duration.
  double q_mse_initial = 0.0;
  double w_mse_initial = 0.0;
  double q_mae_initial = 0.0;
  double w_mae_initial = 0.0;
  double q_mse_full = 0.0;
  double w_mse_full = 0.0;
  double q_mae_full = 0.0;
  double w_mae_full = 0.0;
  Vec per_mode_predicted;  // absolute MSE per mode over the initial window
  Vec per_mode_linear;
};

/// Metrics of one predicted trajectory (and its linear counterpart) against a
/// target over the initial window (default 100 ms) and the full length.
MetricsReport evaluate_trajectory(const Trajectory& predicted, const Trajectory& linear, const Trajectory& target,
                                  double initial_seconds = 0.1);

/// Averages every metric, per-mode errors included, over the reports.
MetricsReport aggregate(const std::vector<MetricsReport>& reports);

/// CSV with one row per metric (metric,value) followed by per-mode rows.
std::string metrics_csv(const MetricsReport& report);

/// Fundamental frequency estimate from upward zero crossings of a series
/// in [t0, t1). Returns 0 if fewer than two crossings are found.
double estimate_frequency(std::span<const double> series, double sample_rate, double t0, double t1);

}  // namespace modalsav
