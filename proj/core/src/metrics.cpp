#include "modalsav/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "modalsav/errors.hpp"

namespace modalsav {

double mse_rel(std::span<const double> predicted, std::span<const double> target) {
  if (predicted.size() != target.size()) throw std::invalid_argument("mse_rel: length mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double d = predicted[i] - target[i];
    num += d * d;
    den += target[i] * target[i];
  }
  if (!(den > 0.0)) throw UndefinedMetric("mse_rel: target has zero energy");
  return num / den;
}

double mae_rel(std::span<const double> predicted, std::span<const double> target) {
  if (predicted.size() != target.size()) throw std::invalid_argument("mae_rel: length mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    num += std::abs(predicted[i] - target[i]);
    den += std::abs(target[i]);
  }
  if (!(den > 0.0)) throw UndefinedMetric("mae_rel: target has zero magnitude");
  return num / den;
}

std::size_t window_samples(double sample_rate, double seconds) {
  return static_cast<std::size_t>(std::llround(sample_rate * seconds));
}

Vec per_mode_mse(const Trajectory& predicted, const Trajectory& target, std::size_t window) {
  if (predicted.modes != target.modes) throw std::invalid_argument("per_mode_mse: mode count mismatch");
  if (window == 0) throw std::invalid_argument("per_mode_mse: empty window");
  if (window > predicted.steps() || window > target.steps()) {
    throw std::invalid_argument("per_mode_mse: window exceeds trajectory length");
  }
  const auto m = static_cast<std::size_t>(target.modes);
  Vec out(m, 0.0);
  for (std::size_t n = 0; n < window; ++n) {
    const auto a = predicted.q_at(n);
    const auto b = target.q_at(n);
    for (std::size_t i = 0; i < m; ++i) out[i] += (a[i] - b[i]) * (a[i] - b[i]);
  }
  for (double& v : out) v /= static_cast<double>(window);
  return out;
}

MetricsReport evaluate_trajectory(const Trajectory& predicted, const Trajectory& linear, const Trajectory& target,
                                  double initial_seconds) {
  if (predicted.steps() != target.steps() || linear.steps() != target.steps()) {
    throw std::invalid_argument("evaluate_trajectory: trajectories must be aligned");
  }
  const std::size_t window = std::min(window_samples(target.sample_rate, initial_seconds), target.steps());
  const auto m = static_cast<std::size_t>(target.modes);
  const auto q_head = [&](const Trajectory& t) { return std::span<const double>(t.q.data(), window * m); };
  const auto w_head = [&](const Trajectory& t) { return std::span<const double>(t.output.data(), window); };

  MetricsReport r;
  r.q_mse_initial = mse_rel(q_head(predicted), q_head(target));
  r.w_mse_initial = mse_rel(w_head(predicted), w_head(target));
  r.q_mae_initial = mae_rel(q_head(predicted), q_head(target));
  r.w_mae_initial = mae_rel(w_head(predicted), w_head(target));
  r.q_mse_full = mse_rel(predicted.q, target.q);
  r.w_mse_full = mse_rel(predicted.output, target.output);
  r.q_mae_full = mae_rel(predicted.q, target.q);
  r.w_mae_full = mae_rel(predicted.output, target.output);
  r.per_mode_predicted = per_mode_mse(predicted, target, window);
  r.per_mode_linear = per_mode_mse(linear, target, window);
  return r;
}

MetricsReport aggregate(const std::vector<MetricsReport>& reports) {
  MetricsReport out;
  if (reports.empty()) return out;
  const double n = static_cast<double>(reports.size());
  out.per_mode_predicted.assign(reports.front().per_mode_predicted.size(), 0.0);
  out.per_mode_linear.assign(reports.front().per_mode_linear.size(), 0.0);
  for (const auto& r : reports) {
    out.q_mse_initial += r.q_mse_initial / n;
    out.w_mse_initial += r.w_mse_initial / n;
    out.q_mae_initial += r.q_mae_initial / n;
    out.w_mae_initial += r.w_mae_initial / n;
    out.q_mse_full += r.q_mse_full / n;
    out.w_mse_full += r.w_mse_full / n;
    out.q_mae_full += r.q_mae_full / n;
    out.w_mae_full += r.w_mae_full / n;
    if (r.per_mode_predicted.size() != out.per_mode_predicted.size()) {
      throw std::invalid_argument("aggregate: mode counts differ between reports");
    }
    for (std::size_t i = 0; i < out.per_mode_predicted.size(); ++i) {
      out.per_mode_predicted[i] += r.per_mode_predicted[i] / n;
      out.per_mode_linear[i] += r.per_mode_linear[i] / n;
    }
  }
  return out;
}

std::string metrics_csv(const MetricsReport& r) {
  std::ostringstream os;
  const auto row = [&os](const std::string& name, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << name << ',' << buf << '\n';
  };
  os << "metric,value\n";
  row("mse_rel_q_initial", r.q_mse_initial);
  row("mse_rel_w_initial", r.w_mse_initial);
  row("mae_rel_q_initial", r.q_mae_initial);
  row("mae_rel_w_initial", r.w_mae_initial);
  row("mse_rel_q_full", r.q_mse_full);
  row("mse_rel_w_full", r.w_mse_full);
  row("mae_rel_q_full", r.q_mae_full);
  row("mae_rel_w_full", r.w_mae_full);
  for (std::size_t i = 0; i < r.per_mode_predicted.size(); ++i) {
    row("mode_mse_predicted_" + std::to_string(i + 1), r.per_mode_predicted[i]);
  }
  for (std::size_t i = 0; i < r.per_mode_linear.size(); ++i) {
    row("mode_mse_linear_" + std::to_string(i + 1), r.per_mode_linear[i]);
  }
  return os.str();
}

double estimate_frequency(std::span<const double> series, double sample_rate, double t0, double t1) {
  const auto begin = static_cast<std::size_t>(std::max(0.0, std::ceil(t0 * sample_rate)));
  const auto end = std::min(series.size(), static_cast<std::size_t>(std::max(0.0, std::floor(t1 * sample_rate))));
  double first = -1.0, last = -1.0;
  std::size_t crossings = 0;
  for (std::size_t n = begin + 1; n < end; ++n) {
    const double a = series[n - 1];
    const double b = series[n];
    if (a < 0.0 && b >= 0.0) {
      const double t = (static_cast<double>(n - 1) + a / (a - b)) / sample_rate;
      if (crossings == 0) first = t;
      last = t;
      ++crossings;
    }
  }
  if (crossings < 2) return 0.0;
  return static_cast<double>(crossings - 1) / (last - first);
}

}  // namespace modalsav
