#include "modalsav/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "modalsav/errors.hpp"
#include "modalsav/parallel.hpp"

namespace modalsav {

std::size_t segment_steps(double sample_rate, double segment_ms) {
  const auto steps = static_cast<std::size_t>(std::llround(sample_rate * segment_ms / 1000.0));
  if (steps == 0) throw std::invalid_argument("segment length rounds to zero steps");
  return steps;
}

std::vector<Segment> segment_dataset(const Trajectory& traj, std::size_t steps, std::size_t trajectory_index) {
  if (steps == 0) throw std::invalid_argument("segment_dataset: segment length must be positive");
  const double k = 1.0 / traj.sample_rate;
  std::vector<Segment> out;
  for (std::size_t start = 0; start < traj.steps(); start += steps) {
    const std::size_t len = std::min(steps, traj.steps() - start);
    out.push_back({trajectory_index, start, len, static_cast<double>(start) * k});
  }
  return out;
}

double mse_loss(std::span<const double> pred_q, std::span<const double> pred_p,
                std::span<const double> target_q, std::span<const double> target_p, int modes) {
  if (pred_q.size() != target_q.size() || pred_p.size() != target_p.size() || pred_q.size() != pred_p.size()) {
    throw std::invalid_argument("mse_loss: length mismatch");
  }
  if (modes < 1 || pred_q.size() % static_cast<std::size_t>(modes) != 0) {
    throw std::invalid_argument("mse_loss: state size is not a multiple of the mode count");
  }
  if (pred_q.empty()) throw std::invalid_argument("mse_loss: empty series");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred_q.size(); ++i) {
    const double dq = pred_q[i] - target_q[i];
    const double dp = pred_p[i] - target_p[i];
    sum += dq * dq + dp * dp;
  }
  const double states = static_cast<double>(pred_q.size() / static_cast<std::size_t>(modes));
  return sum / (2.0 * modes * states);
}

double mse_loss(const Trajectory& predicted, const Trajectory& target) {
  if (predicted.modes != target.modes) throw std::invalid_argument("mse_loss: mode count mismatch");
  return mse_loss(predicted.q, predicted.p, target.q, target.p, predicted.modes);
}

double consistent_psi_init(std::span<const double> q0, const GradNetParams& params, double eps) {
  return quadratise(gradnet_potential(params, q0), eps);
}

StringContext StringContext::from_draw(const DrawParams& draw, double eps, double lambda0) {
  StringContext ctx;
  ctx.string = draw.string;
  ctx.ops = build_modal_operators(draw.string);
  ctx.excitation = draw.excitation;
  ctx.solver.time_step = 1.0 / draw.sample_rate;
  ctx.solver.eps = eps;
  ctx.solver.lambda0 = lambda0;
  ctx.excitation_weights = mode_shape(draw.excitation.position, draw.string.modes);
  return ctx;
}

SegmentResult forward_backward_segment(const Trajectory& target, const Segment& segment,
                                       const StringContext& ctx, const GradNetParams& params,
                                       GradNetGradient* grad, SegmentWorkspace& ws, ControlTerms control) {
  const auto m = static_cast<std::size_t>(params.modes);
  if (target.modes != params.modes || ctx.ops.modes() != params.modes) {
    throw std::invalid_argument("forward_backward_segment: mode count mismatch");
  }
  if (segment.length == 0 || segment.start + segment.length > target.steps()) {
    throw std::invalid_argument("forward_backward_segment: segment outside trajectory");
  }
  const std::size_t steps = segment.length - 1;
  SegmentResult result;
  result.steps = steps;
  if (steps == 0) return result;
  if (control.frozen != nullptr && control.frozen->size() < steps) {
    throw std::invalid_argument("forward_backward_segment: not enough frozen control terms");
  }
  if (control.record != nullptr) control.record->clear();

  const double k = ctx.solver.time_step;
  const double nu2 = ctx.string.nu * ctx.string.nu;
  const double c = 0.25 * k * k * nu2;
  const auto& sigma = ctx.ops.damping;
  const auto& omega2 = ctx.ops.stiffness;

  ws.traces.resize(steps);
  ws.tapes.resize(steps);
  ws.predicted_q.resize(steps);
  ws.predicted_p.resize(steps);

  SolverState state;
  const auto q0 = target.q_at(segment.start);
  const auto p0 = target.p_at(segment.start);
  state.q.assign(q0.begin(), q0.end());
  state.p.assign(p0.begin(), p0.end());
  gradnet_record(params, state.q, ws.initial_tape);
  const double psi0 = quadratise(gradnet_potential_from_tape(params, ws.initial_tape), ctx.solver.eps);
  state.psi = psi0;

  GradNetField field(params);
  SavSolver solver(ctx.ops, ctx.string.nu, ctx.solver, ctx.excitation_weights);
  double sum = 0.0;
  try {
    for (std::size_t j = 0; j < steps; ++j) {
      const double t_half = segment.time_offset + (static_cast<double>(j) + 0.5) * k;
      std::span<const double> frozen;
      if (control.frozen != nullptr) frozen = (*control.frozen)[j];
      solver.step(state, field, excitation_force(t_half, ctx.excitation), segment.start + j, &ws.traces[j], frozen);
      if (control.record != nullptr) control.record->push_back(ws.traces[j].g_mod);
      if (grad != nullptr) ws.tapes[j] = field.tape();
      ws.predicted_q[j] = state.q;
      ws.predicted_p[j] = state.p;
      const auto tq = target.q_at(segment.start + j + 1);
      const auto tp = target.p_at(segment.start + j + 1);
      for (std::size_t i = 0; i < m; ++i) {
        const double dq = state.q[i] - tq[i];
        const double dp = state.p[i] - tp[i];
        sum += dq * dq + dp * dp;
      }
    }
  } catch (const SolverDiverged&) {
    result.diverged = true;
    result.loss = std::numeric_limits<double>::quiet_NaN();
    return result;
  }
  const double norm = 2.0 * static_cast<double>(m) * static_cast<double>(segment.length);
  result.loss = sum / norm;
  if (!std::isfinite(result.loss)) {
    result.diverged = true;
    return result;
  }
  if (grad == nullptr) return result;

  // Reverse pass. Adjoints of (q^{j+1}, p^{j+1}, psi^{j+1}) flow back into
  // (q^j, p^j, psi^j); g_mod is treated as a constant.
  const double loss_scale = 2.0 / norm;
  Vec q_bar(m, 0.0), p_bar(m, 0.0);
  double psi_bar = 0.0;
  Vec u(m), g_bar(m), p1_bar(m), p0_bar(m), qh_bar(m), f_bar(m), net_q_bar(m);
  for (std::size_t jj = steps; jj-- > 0;) {
    const auto tq = target.q_at(segment.start + jj + 1);
    const auto tp = target.p_at(segment.start + jj + 1);
    for (std::size_t i = 0; i < m; ++i) {
      q_bar[i] += loss_scale * (ws.predicted_q[jj][i] - tq[i]);
      p_bar[i] += loss_scale * (ws.predicted_p[jj][i] - tp[i]);
    }
    const StepTrace& tr = ws.traces[jj];
    const Vec& g = tr.g;
    const Vec& pp = tr.p_prev;
    const Vec& pn = tr.p_next;

    // psi^{j+1} = psi^j + k/2 g^T (p^{j+1} + p^j);  q^{j+1} = q^{j+1/2} + k/2 p^{j+1}
    for (std::size_t i = 0; i < m; ++i) {
      g_bar[i] = psi_bar * 0.5 * k * (pn[i] + pp[i]);
      p1_bar[i] = p_bar[i] + psi_bar * 0.5 * k * g[i] + 0.5 * k * q_bar[i];
      p0_bar[i] = psi_bar * 0.5 * k * g[i];
      qh_bar[i] = q_bar[i];
    }
    double psi0_bar = psi_bar;

    // p^{j+1} = S^{-1} rhs with S = I + k Sigma + c g g^T symmetric.
    sherman_morrison_apply(sigma, c, g, p1_bar, k, u);
    const double gu = dot(g, u);
    const double gpn = dot(g, pn);
    const double gpp = dot(g, pp);
    for (std::size_t i = 0; i < m; ++i) {
      g_bar[i] += -c * (u[i] * gpn + pn[i] * gu) - c * (u[i] * gpp + pp[i] * gu) - k * nu2 * tr.psi_prev * u[i];
      p0_bar[i] += (1.0 - k * sigma[i]) * u[i] - c * g[i] * gu;
      qh_bar[i] += -k * omega2[i] * u[i];
    }
    psi0_bar += -k * nu2 * gu;

    // g = -f(q^{j+1/2}) / sqrt(2 V(q^{j+1/2}) + eps) + g_mod
    const double s = tr.root_half;
    double s_bar = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      f_bar[i] = -g_bar[i] / s;
      s_bar += g_bar[i] * tr.force_half[i];
    }
    s_bar /= s * s;
    const double v_bar = s_bar / s;
    gradnet_vjp(params, ws.tapes[jj], f_bar, v_bar, net_q_bar, *grad);

    // q^{j+1/2} = q^j + k/2 p^j
    for (std::size_t i = 0; i < m; ++i) {
      qh_bar[i] += net_q_bar[i];
      q_bar[i] = qh_bar[i];
      p_bar[i] = p0_bar[i] + 0.5 * k * qh_bar[i];
    }
    psi_bar = psi0_bar;
  }
  // psi^0 = sqrt(2 V_theta(q^0) + eps); q^0 and p^0 come from the target.
  const Vec zero(m, 0.0);
  gradnet_vjp_params(params, ws.initial_tape, zero, psi_bar / psi0, *grad);
  return result;
}

AdamState::AdamState(const GradNetParams& shape, AdamConfig cfg) : config(cfg), m(shape), v(shape) {}

void adam_step(GradNetParams& params, const GradNetGradient& grads, AdamState& state) {
  const AdamConfig& a = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(a.beta1, t);
  const double bc2 = 1.0 - std::pow(a.beta2, t);
  auto p_blocks = params.blocks();
  auto g_blocks = grads.blocks();
  auto m_blocks = state.m.blocks();
  auto v_blocks = state.v.blocks();
  for (std::size_t b = 0; b < p_blocks.size(); ++b) {
    if (p_blocks[b].size() != g_blocks[b].size() || p_blocks[b].size() != m_blocks[b].size()) {
      throw std::invalid_argument("adam_step: shape mismatch");
    }
    for (std::size_t i = 0; i < p_blocks[b].size(); ++i) {
      const double g = g_blocks[b][i];
      double& mi = m_blocks[b][i];
      double& vi = v_blocks[b][i];
      mi = a.beta1 * mi + (1.0 - a.beta1) * g;
      vi = a.beta2 * vi + (1.0 - a.beta2) * g * g;
      const double m_hat = mi / bc1;
      const double v_hat = vi / bc2;
      p_blocks[b][i] -= a.lr * m_hat / (std::sqrt(v_hat) + a.eps);
    }
  }
}

namespace {

struct PreparedSet {
  std::vector<StringContext> contexts;
  std::vector<Segment> segments;
};

PreparedSet prepare(const Dataset& data, const TrainConfig& cfg) {
  PreparedSet set;
  for (std::size_t i = 0; i < data.entries.size(); ++i) {
    const auto& entry = data.entries[i];
    set.contexts.push_back(StringContext::from_draw(entry.draw, cfg.eps, cfg.lambda0));
    if (entry.trajectory.decimation != 1) {
      throw std::invalid_argument("training requires undecimated trajectories");
    }
    for (const Segment& s :
         segment_dataset(entry.trajectory, segment_steps(entry.trajectory.sample_rate, cfg.segment_ms), i)) {
      if (s.length >= 2) set.segments.push_back(s);
    }
  }
  return set;
}

double mean_segment_loss(const Dataset& data, const PreparedSet& set, const GradNetParams& params,
                         std::size_t workers, std::size_t* diverged) {
  std::vector<SegmentWorkspace> ws(workers);
  std::vector<SegmentResult> results(set.segments.size());
  parallel_for(set.segments.size(), workers, [&](std::size_t i, std::size_t w) {
    const Segment& s = set.segments[i];
    results[i] = forward_backward_segment(data.entries[s.trajectory].trajectory, s, set.contexts[s.trajectory],
                                          params, nullptr, ws[w]);
  });
  double sum = 0.0;
  std::size_t ok = 0, bad = 0;
  for (const auto& r : results) {
    if (r.diverged) {
      ++bad;
    } else {
      sum += r.loss;
      ++ok;
    }
  }
  if (diverged != nullptr) *diverged = bad;
  return ok == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(ok);
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

double dataset_segment_loss(const Dataset& data, const GradNetParams& params, const TrainConfig& cfg,
                            std::size_t* diverged) {
  const PreparedSet set = prepare(data, cfg);
  return mean_segment_loss(data, set, params, cfg.workers == 0 ? worker_count() : cfg.workers, diverged);
}

TrainResult train(const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg,
                  const GradNetParams* initial, const std::function<void(const EpochLog&)>& on_epoch) {
  if (train_set.entries.empty() || val_set.entries.empty()) {
    throw std::invalid_argument("train: datasets must be non-empty");
  }
  if (cfg.epochs < 1 || cfg.batch_size < 1 || cfg.validation_period < 1 || cfg.hidden < 1) {
    throw std::invalid_argument("train: epochs, batch size, validation period and hidden size must be positive");
  }
  const int modes = train_set.entries.front().draw.string.modes;
  std::mt19937_64 rng(cfg.seed);
  GradNetParams params = initial != nullptr ? *initial : gradnet_init(modes, cfg.hidden, cfg.neg_slope, rng);
  if (params.modes != modes) throw std::invalid_argument("train: initial parameters have the wrong mode count");

  const PreparedSet train_prep = prepare(train_set, cfg);
  const PreparedSet val_prep = prepare(val_set, cfg);
  if (train_prep.segments.empty()) throw std::invalid_argument("train: no usable training segments");
  const std::size_t workers = cfg.workers == 0 ? worker_count() : cfg.workers;
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  AdamState adam(params, cfg.adam);
  std::vector<SegmentWorkspace> ws(workers);
  std::vector<GradNetGradient> grads(batch, GradNetGradient(params));
  std::vector<SegmentResult> results(batch);
  GradNetGradient total(params);

  TrainResult out;
  out.best = params;
  out.best_val_loss = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order(train_prep.segments.size());
  const auto t_start = std::chrono::steady_clock::now();

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t ok = 0, diverged = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += batch) {
      const std::size_t count = std::min(batch, order.size() - b0);
      parallel_for(count, workers, [&](std::size_t i, std::size_t w) {
        grads[i].set_zero();
        const Segment& s = train_prep.segments[order[b0 + i]];
        results[i] = forward_backward_segment(train_set.entries[s.trajectory].trajectory, s,
                                              train_prep.contexts[s.trajectory], params, &grads[i], ws[w]);
      });
      total.set_zero();
      std::size_t batch_ok = 0;
      for (std::size_t i = 0; i < count; ++i) {
        if (results[i].diverged) {
          ++diverged;
          continue;
        }
        total.add(grads[i]);
        loss_sum += results[i].loss;
        ++batch_ok;
      }
      if (batch_ok == 0) continue;
      ok += batch_ok;
      total.scale(1.0 / static_cast<double>(batch_ok));
      adam_step(params, total, adam);
    }
    if (ok == 0) {
      throw std::runtime_error("train: every segment diverged in epoch " + std::to_string(epoch));
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = loss_sum / static_cast<double>(ok);
    entry.diverged_segments = diverged;
    entry.val_loss = std::numeric_limits<double>::quiet_NaN();
    if (epoch % cfg.validation_period == 0 || epoch == cfg.epochs) {
      std::size_t val_diverged = 0;
      entry.val_loss = mean_segment_loss(val_set, val_prep, params, workers, &val_diverged);
      entry.diverged_segments += val_diverged;
      if (entry.val_loss < out.best_val_loss) {
        out.best_val_loss = entry.val_loss;
        out.best = params;
        out.best_epoch = epoch;
      }
    }
    entry.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    out.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  out.final_params = params;
  if (out.best_epoch == 0) out.best = params;
  return out;
}

std::string format_log_header() { return "epoch,train_loss,val_loss,wall_seconds,diverged_segments"; }

std::string format_log_row(const EpochLog& e) {
  char wall[32];
  std::snprintf(wall, sizeof wall, "%.3f", e.wall_seconds);
  return std::to_string(e.epoch) + "," + format_double(e.train_loss) + "," + format_double(e.val_loss) + "," +
         wall + "," + std::to_string(e.diverged_segments);
}

void write_training_log(const std::filesystem::path& path, const std::vector<EpochLog>& log) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write training log: " + path.string());
  os << format_log_header() << '\n';
  for (const auto& e : log) os << format_log_row(e) << '\n';
}

std::string train_config_to_json(const TrainConfig& cfg) {
  nlohmann::json j{{"epochs", cfg.epochs},
                   {"batch_size", cfg.batch_size},
                   {"segment_ms", cfg.segment_ms},
                   {"validation_period", cfg.validation_period},
                   {"seed", cfg.seed},
                   {"hidden", cfg.hidden},
                   {"neg_slope", cfg.neg_slope},
                   {"eps", cfg.eps},
                   {"lambda0", cfg.lambda0},
                   {"adam",
                    {{"lr", cfg.adam.lr}, {"beta1", cfg.adam.beta1}, {"beta2", cfg.adam.beta2}, {"eps", cfg.adam.eps}}}};
  return j.dump(2);
}

TrainConfig train_config_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  TrainConfig cfg;
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.segment_ms = j.value("segment_ms", cfg.segment_ms);
  cfg.validation_period = j.value("validation_period", cfg.validation_period);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.hidden = j.value("hidden", cfg.hidden);
  cfg.neg_slope = j.value("neg_slope", cfg.neg_slope);
  cfg.eps = j.value("eps", cfg.eps);
  cfg.lambda0 = j.value("lambda0", cfg.lambda0);
  if (j.contains("adam")) {
    const auto& a = j.at("adam");
    cfg.adam.lr = a.value("lr", cfg.adam.lr);
    cfg.adam.beta1 = a.value("beta1", cfg.adam.beta1);
    cfg.adam.beta2 = a.value("beta2", cfg.adam.beta2);
    cfg.adam.eps = a.value("eps", cfg.adam.eps);
  }
  return cfg;
}

}  // namespace modalsav
