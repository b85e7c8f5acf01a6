#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "modalsav/dataset.hpp"
#include "modalsav/gradnet.hpp"
#include "modalsav/metrics.hpp"

namespace modalsav {

enum class FieldKind { Oracle, Linear, GradNet };

/// Simulates one draw from rest with the chosen nonlinearity. `model` is
/// required for FieldKind::GradNet and ignored otherwise.
Trajectory simulate_draw(const DrawParams& draw, FieldKind kind, const GradNetParams* model = nullptr,
                         double eps = 1e-12, double lambda0 = 1.0);

struct DatasetEvaluation {
  MetricsReport model;   // trained model against the targets
  MetricsReport linear;  // f = 0 against the targets
  std::vector<MetricsReport> per_trajectory;
};

/// Rolls the model and the linear baseline out for every entry (in parallel,
/// results kept in entry order) and aggregates the metrics. `kind` selects the
/// nonlinearity standing in for the model; `model` is needed for GradNet only.
DatasetEvaluation evaluate_dataset(const Dataset& data, FieldKind kind, const GradNetParams* model,
                                   std::size_t workers = 0, double initial_seconds = 0.1);
DatasetEvaluation evaluate_dataset(const Dataset& data, const GradNetParams& model, std::size_t workers = 0,
                                   double initial_seconds = 0.1);

/// metric,model,linear rows for the scalar metrics, then mode_mse_<m> rows
/// with the per-mode errors.
std::string evaluation_csv(const DatasetEvaluation& eval);

/// Relative drop of the fundamental (upward zero crossings of `series`)
/// between the first `head` seconds and the last `tail` seconds:
/// f_head / f_tail - 1.
double pitch_glide(const std::vector<double>& series, double sample_rate, double head = 0.1, double tail = 0.5);

/// First modal coordinate q_1 of a trajectory.
Vec first_mode(const Trajectory& traj);

}  // namespace modalsav
