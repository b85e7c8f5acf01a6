#include "modalsav/evaluation.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "modalsav/errors.hpp"
#include "modalsav/parallel.hpp"
#include "modalsav/spectral.hpp"

namespace modalsav {

Trajectory simulate_draw(const DrawParams& draw, FieldKind kind, const GradNetParams* model, double eps,
                         double lambda0) {
  const ModalOperators ops = build_modal_operators(draw.string);
  SolverConfig cfg;
  cfg.time_step = 1.0 / draw.sample_rate;
  cfg.eps = eps;
  cfg.lambda0 = lambda0;
  switch (kind) {
    case FieldKind::Oracle: {
      SpectralNonlinearity field(ops);
      return simulate(draw.string, ops, field, draw.excitation, cfg, draw.steps());
    }
    case FieldKind::Linear: {
      ZeroField field(ops.modes());
      return simulate(draw.string, ops, field, draw.excitation, cfg, draw.steps());
    }
    case FieldKind::GradNet: {
      if (model == nullptr) throw std::invalid_argument("simulate_draw: GradNet rollout needs a model");
      if (model->modes != ops.modes()) throw std::invalid_argument("simulate_draw: model mode count mismatch");
      GradNetField field(*model);
      return simulate(draw.string, ops, field, draw.excitation, cfg, draw.steps());
    }
  }
  throw std::logic_error("simulate_draw: unknown field kind");
}

DatasetEvaluation evaluate_dataset(const Dataset& data, const GradNetParams& model, std::size_t workers,
                                   double initial_seconds) {
  return evaluate_dataset(data, FieldKind::GradNet, &model, workers, initial_seconds);
}

DatasetEvaluation evaluate_dataset(const Dataset& data, FieldKind kind, const GradNetParams* model,
                                   std::size_t workers, double initial_seconds) {
  if (data.entries.empty()) throw std::invalid_argument("evaluate_dataset: empty dataset");
  const std::size_t n = data.entries.size();
  std::vector<MetricsReport> model_reports(n);
  std::vector<MetricsReport> linear_reports(n);
  parallel_for(n, workers == 0 ? worker_count() : workers, [&](std::size_t i, std::size_t) {
    const DatasetEntry& e = data.entries[i];
    const double lambda0 = data.spec.lambda0;
    const Trajectory pred = simulate_draw(e.draw, kind, model, data.spec.eps, lambda0);
    const Trajectory lin = simulate_draw(e.draw, FieldKind::Linear, nullptr, data.spec.eps, lambda0);
    model_reports[i] = evaluate_trajectory(pred, lin, e.trajectory, initial_seconds);
    linear_reports[i] = evaluate_trajectory(lin, lin, e.trajectory, initial_seconds);
  });
  DatasetEvaluation out;
  out.model = aggregate(model_reports);
  out.linear = aggregate(linear_reports);
  out.per_trajectory = std::move(model_reports);
  return out;
}

std::string evaluation_csv(const DatasetEvaluation& eval) {
  std::ostringstream os;
  const auto row = [&os](const std::string& name, double a, double b) {
    char buf[96];
    std::snprintf(buf, sizeof buf, ",%.17g,%.17g\n", a, b);
    os << name << buf;
  };
  const MetricsReport& m = eval.model;
  const MetricsReport& l = eval.linear;
  os << "metric,model,linear\n";
  row("mse_rel_q_initial", m.q_mse_initial, l.q_mse_initial);
  row("mse_rel_w_initial", m.w_mse_initial, l.w_mse_initial);
  row("mae_rel_q_initial", m.q_mae_initial, l.q_mae_initial);
  row("mae_rel_w_initial", m.w_mae_initial, l.w_mae_initial);
  row("mse_rel_q_full", m.q_mse_full, l.q_mse_full);
  row("mse_rel_w_full", m.w_mse_full, l.w_mse_full);
  row("mae_rel_q_full", m.q_mae_full, l.q_mae_full);
  row("mae_rel_w_full", m.w_mae_full, l.w_mae_full);
  for (std::size_t i = 0; i < m.per_mode_predicted.size(); ++i) {
    row("mode_mse_" + std::to_string(i + 1), m.per_mode_predicted[i], m.per_mode_linear[i]);
  }
  return os.str();
}

double pitch_glide(const std::vector<double>& series, double sample_rate, double head, double tail) {
  const double total = static_cast<double>(series.size()) / sample_rate;
  if (head + tail > total) throw std::invalid_argument("pitch_glide: series too short for the windows");
  const double f_head = estimate_frequency(series, sample_rate, 0.0, head);
  const double f_tail = estimate_frequency(series, sample_rate, total - tail, total);
  if (!(f_head > 0.0) || !(f_tail > 0.0)) throw UndefinedMetric("pitch_glide: no oscillation in a window");
  return f_head / f_tail - 1.0;
}

Vec first_mode(const Trajectory& traj) {
  Vec out(traj.steps());
  for (std::size_t n = 0; n < out.size(); ++n) out[n] = traj.q_at(n)[0];
  return out;
}

}  // namespace modalsav
