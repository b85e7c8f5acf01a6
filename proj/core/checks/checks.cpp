#include "modalsav/checks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>

#include "modalsav/dataset.hpp"
#include "modalsav/errors.hpp"
#include "modalsav/evaluation.hpp"
#include "modalsav/gradnet.hpp"
#include "modalsav/oracles.hpp"
#include "modalsav/sav_solver.hpp"
#include "modalsav/spectral.hpp"
#include "modalsav/training.hpp"

namespace modalsav::checks {

namespace {

namespace fs = std::filesystem;

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

CheckResult result(int criterion, std::string name, bool passed, double value, double threshold,
                   std::string detail) {
  return {criterion, std::move(name), passed, value, threshold, std::move(detail)};
}

// Parameters in the middle of the training ranges.
ScaledStringParams mid_string(int modes) {
  ScaledStringParams s;
  s.gamma = 150.0;
  s.kappa = 1.03;
  s.nu = 150.0;
  s.sigma0 = 3.0;
  s.sigma1_hat = 2e-4;
  s.modes = modes;
  return s;
}

// A nonzero displacement/velocity pair at pluck-like amplitudes.
SolverState random_state(const ModalOperators& ops, std::mt19937_64& rng, double amplitude) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int m = ops.modes();
  SolverState st(m, 0.0);
  for (int i = 0; i < m; ++i) {
    const double scale = amplitude / static_cast<double>((i + 1) * (i + 1));
    st.q[static_cast<std::size_t>(i)] = scale * u(rng);
    st.p[static_cast<std::size_t>(i)] = scale * std::sqrt(ops.stiffness[static_cast<std::size_t>(i)]) * u(rng);
  }
  return st;
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

bool same_tree(const fs::path& a, const fs::path& b) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), a));
  }
  std::size_t count_b = 0;
  for (const auto& e : fs::recursive_directory_iterator(b)) count_b += e.is_regular_file() ? 1 : 0;
  if (files.empty() || files.size() != count_b) return false;
  for (const auto& f : files) {
    if (!fs::exists(b / f) || read_bytes(a / f) != read_bytes(b / f)) return false;
  }
  return true;
}

// Training log without the wall-clock column.
std::string log_without_wall(const std::vector<EpochLog>& log) {
  std::ostringstream os;
  for (const auto& e : log) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%zu\n", e.epoch, e.train_loss, e.val_loss, e.diverged_segments);
    os << buf;
  }
  return os.str();
}

double segment_loss(const Trajectory& target, const Segment& seg, const StringContext& ctx,
                    const GradNetParams& params, SegmentWorkspace& ws, const std::vector<Vec>* frozen) {
  return forward_backward_segment(target, seg, ctx, params, nullptr, ws, {nullptr, frozen}).loss;
}

// Worst normwise relative error over the four parameter blocks.
double backprop_error(const Trajectory& target, const Segment& seg, const StringContext& ctx,
                      const GradNetParams& base, bool freeze_control) {
  SegmentWorkspace ws;
  GradNetGradient grad(base);
  grad.set_zero();
  std::vector<Vec> recorded;
  forward_backward_segment(target, seg, ctx, base, &grad, ws, {freeze_control ? &recorded : nullptr, nullptr});
  const std::vector<Vec>* frozen = freeze_control ? &recorded : nullptr;

  GradNetParams probe = base;
  double worst = 0.0;
  const auto analytic = grad.blocks();
  auto blocks = probe.blocks();
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    Vec fd(blocks[b].size());
    for (std::size_t i = 0; i < blocks[b].size(); ++i) {
      const double x = blocks[b][i];
      const double h = 1e-4 * std::max(1.0, std::abs(x));
      const auto loss_at = [&](double v) {
        blocks[b][i] = v;
        return segment_loss(target, seg, ctx, probe, ws, frozen);
      };
      // Five-point central stencil.
      fd[i] = (loss_at(x - 2.0 * h) - 8.0 * loss_at(x - h) + 8.0 * loss_at(x + h) - loss_at(x + 2.0 * h)) / (12.0 * h);
      blocks[b][i] = x;
    }
    worst = std::max(worst, oracle::relative_error(analytic[b], fd));
  }
  return worst;
}

}  // namespace

std::string format_result(const CheckResult& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s %2d  %-28s value=%-12.4g threshold=%-10.4g ", r.passed ? "PASS" : "FAIL",
                r.criterion, r.name.c_str(), r.value, r.threshold);
  return buf + r.detail;
}

std::string results_csv(const std::vector<CheckResult>& results) {
  std::ostringstream os;
  os << "criterion,name,passed,value,threshold,detail\n";
  for (const auto& r : results) {
    std::string detail = r.detail;
    std::replace(detail.begin(), detail.end(), ',', ';');
    char buf[96];
    std::snprintf(buf, sizeof buf, ",%d,%.17g,%.17g,", r.passed ? 1 : 0, r.value, r.threshold);
    os << r.criterion << ',' << r.name << buf << detail << '\n';
  }
  return os.str();
}

CheckResult energy_conservation(std::size_t steps) {
  ScaledStringParams s = mid_string(30);
  s.sigma0 = 0.0;
  s.sigma1_hat = 0.0;
  const ModalOperators ops = build_modal_operators(s);
  SolverConfig cfg;
  cfg.time_step = 1.0 / 88200.0;
  cfg.lambda0 = 0.0;
  SpectralNonlinearity field(ops);
  SavSolver solver(ops, s.nu, cfg, Vec(30, 0.0));

  std::mt19937_64 rng(101);
  SolverState st = random_state(ops, rng, 0.03);
  st.psi = quadratise(field.potential(st.q), cfg.eps);
  const double e0 = energy(st, ops, s.nu, cfg.time_step);
  double worst = 0.0;
  for (std::size_t n = 0; n < steps; ++n) {
    solver.step(st, field, 0.0, n);
    worst = std::max(worst, std::abs(energy(st, ops, s.nu, cfg.time_step) - e0) / e0);
  }
  return result(1, "energy conservation", worst < 1e-9, worst, 1e-9,
                "max |E^n-E^0|/E^0 over " + std::to_string(steps) + " steps, M=30, fs=88.2 kHz");
}

CheckResult stability_draws(int draws, double duration) {
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> famp_dist(2.5e4, 5e4);
  std::vector<DrawParams> all;
  for (int i = 0; i < draws; ++i) {
    DatasetSpec spec = table1_spec(i % 2 == 0 ? DatasetRole::Train : DatasetRole::Test);
    spec.count = 1;
    DrawParams d = sample_spec(spec, rng).front();
    d.duration = duration;
    d.excitation.amplitude = famp_dist(rng);
    all.push_back(d);
  }

  bool finite = true;
  double worst_bound = 0.0;
  double worst_growth = 0.0;
  double largest = 0.0;
  std::string failure;
  for (std::size_t i = 0; i < all.size() && finite; ++i) {
    const DrawParams& d = all[i];
    const ModalOperators ops = build_modal_operators(d.string);
    SolverConfig cfg;
    cfg.time_step = 1.0 / d.sample_rate;
    if (!check_stability(ops, cfg.time_step).stable) {
      finite = false;
      failure = "draw " + std::to_string(i) + " unexpectedly fails the stability condition";
      break;
    }
    const Vec weights = mode_shape(d.excitation.position, d.string.modes);
    // Passivity bound on sqrt(2E) from the total excitation impulse.
    const double bound = std::sqrt(dot(weights, weights)) * d.excitation.amplitude * d.excitation.duration / 2.0;
    SpectralNonlinearity field(ops);
    SavSolver solver(ops, d.string.nu, cfg, weights);
    SolverState st(d.string.modes, quadratise(field.potential(Vec(weights.size(), 0.0)), cfg.eps));
    double e_prev = energy(st, ops, d.string.nu, cfg.time_step);
    try {
      for (std::size_t n = 0; n < d.steps(); ++n) {
        const double fe = excitation_force((static_cast<double>(n) + 0.5) * cfg.time_step, d.excitation);
        solver.step(st, field, fe, n);
        for (std::size_t m = 0; m < st.q.size(); ++m) {
          worst_bound = std::max(worst_bound, std::sqrt(ops.stiffness[m]) * std::abs(st.q[m]) / bound);
          largest = std::max({largest, std::abs(st.q[m]), std::abs(st.p[m])});
        }
        const double e = energy(st, ops, d.string.nu, cfg.time_step);
        if (fe == 0.0) worst_growth = std::max(worst_growth, (e - e_prev) / e_prev);
        e_prev = e;
      }
    } catch (const SolverDiverged& ex) {
      finite = false;
      failure = "draw " + std::to_string(i) + ": " + ex.what();
    }
  }

  // A draw that breaks the condition must be refused.
  ScaledStringParams bad = mid_string(75);
  bad.gamma = 174.62;
  bad.kappa = 1.1;
  const bool flagged = !check_stability(build_modal_operators(bad), 1.0 / 8000.0).stable;
  bool refused = false;
  DatasetSpec bad_spec = table1_spec(DatasetRole::Test);
  bad_spec.count = 1;
  bad_spec.sample_rate = {8000.0, 8000.0};
  bad_spec.duration = {0.01, 0.01};
  try {
    (void)generate(bad_spec);
  } catch (const InvalidParameter&) {
    refused = true;
  }

  const bool passed = finite && worst_bound <= 2.0 && largest < 1e6 && worst_growth <= 1e-10 && flagged && refused;
  std::string detail = std::to_string(draws) + " draws, largest |q|,|p| " + fmt("%.3g", largest) +
                       " (bound 1e6), max energy growth after pluck " + fmt("%.3g", worst_growth) +
                       ", unstable draw " + (flagged && refused ? "rejected" : "NOT rejected");
  if (!failure.empty()) detail += "; " + failure;
  return result(2, "stability condition", passed, worst_bound, 2.0, detail + " (value: max Omega_m|q_m| / impulse bound)");
}

CheckResult spectral_gradient() {
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (int modes : {2, 6, 20}) {
    const ModalOperators ops = build_modal_operators(mid_string(modes));
    SpectralNonlinearity field(ops);
    for (int trial = 0; trial < 100; ++trial) {
      Vec q(static_cast<std::size_t>(modes));
      for (int i = 0; i < modes; ++i) q[static_cast<std::size_t>(i)] = 0.05 * u(rng) / (i + 1);
      Vec f(q.size());
      field.force(q, f);
      for (double& v : f) v = -v;
      const Vec fd = oracle::central_gradient([&](std::span<const double> x) { return field.potential(x); }, q, 1e-6);
      worst = std::max(worst, oracle::relative_error(fd, f));
    }
  }
  return result(3, "spectral gradient oracle", worst < 1e-6, worst, 1e-6,
                "central differences of V vs -f, 100 q per M in {2,6,20}");
}

CheckResult gradnet_consistency() {
  std::mt19937_64 rng(404);
  GradNetParams params = gradnet_init(20, 200, 0.01, rng);
  std::normal_distribution<double> n01(0.0, 1.0);
  for (double& b : params.bias) b = 0.1 * n01(rng);
  for (double& a : params.log_alpha) a = 0.3 * n01(rng);
  for (double& b : params.log_beta) b = 0.3 * n01(rng);

  double min_v = INFINITY;
  double worst_grad = 0.0;
  double worst_sym = 0.0;
  GradNetTape tape;
  Vec q(20), f(20);
  int checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    for (double& v : q) v = 0.1 * n01(rng);
    min_v = std::min(min_v, gradnet_potential(params, q));
    if (trial >= 100) continue;
    gradnet_record(params, q, tape);
    // Derivatives are undefined on the activation kinks; keep clear of them.
    if (max_abs(tape.z) == 0.0 ||
        std::any_of(tape.z.begin(), tape.z.end(), [](double z) { return std::abs(z) < 1e-4; })) {
      continue;
    }
    ++checked;
    gradnet_force(params, q, f);
    Vec neg_f(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) neg_f[i] = -f[i];
    const Vec fd = oracle::central_gradient([&](std::span<const double> x) { return gradnet_potential(params, x); },
                                            q, 1e-6);
    worst_grad = std::max(worst_grad, oracle::relative_error(fd, neg_f));

    if (trial < 20) {
      Matrix jac(20, 20);
      Vec qp = q, fp(20), fm(20);
      for (std::size_t c = 0; c < 20; ++c) {
        qp[c] = q[c] + 1e-6;
        gradnet_force(params, qp, fp);
        qp[c] = q[c] - 1e-6;
        gradnet_force(params, qp, fm);
        qp[c] = q[c];
        for (std::size_t r = 0; r < 20; ++r) jac(r, c) = (fp[r] - fm[r]) / 2e-6;
      }
      double asym = 0.0;
      for (std::size_t r = 0; r < 20; ++r) {
        for (std::size_t c = 0; c < 20; ++c) asym = std::max(asym, std::abs(jac(r, c) - jac(c, r)));
      }
      worst_sym = std::max(worst_sym, asym / max_abs(jac.data));
    }
  }
  const bool passed = worst_grad < 1e-7 && min_v >= 0.0 && worst_sym < 1e-6 && checked >= 50;
  return result(4, "GradNet potential consistency", passed, worst_grad, 1e-7,
                "min V over 1000 q " + fmt("%.3g", min_v) + ", Jacobian asymmetry " + fmt("%.3g", worst_sym) +
                    " (bound 1e-6), " + std::to_string(checked) + " gradient points");
}

CheckResult solver_step_oracle() {
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const ScaledStringParams s = mid_string(20);
  const ModalOperators ops = build_modal_operators(s);
  SolverConfig cfg;
  cfg.time_step = 1.0 / 32000.0;
  cfg.lambda0 = 1.0;
  SpectralNonlinearity field(ops);

  double worst_step = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const Vec weights = mode_shape(0.5 + 0.4 * u(rng), s.modes);
    SavSolver solver(ops, s.nu, cfg, weights);
    SolverState st = random_state(ops, rng, 0.05);
    st.psi = quadratise(field.potential(st.q), cfg.eps) * (1.0 + 0.1 * u(rng));
    const double fe = 5e4 * u(rng);
    const SolverState ref = oracle::reference_step(st, field, fe, ops, s.nu, cfg, weights);
    solver.step(st, field, fe, 0);
    worst_step = std::max({worst_step, oracle::relative_error(st.q, ref.q), oracle::relative_error(st.p, ref.p),
                           std::abs(st.psi - ref.psi) / std::abs(ref.psi)});
  }

  double worst_sm = 0.0;
  const double k = cfg.time_step;
  const double c = 0.25 * k * k * s.nu * s.nu;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = 20;
    Vec g(m), rhs(m), out(m);
    for (std::size_t i = 0; i < m; ++i) {
      g[i] = 30.0 * u(rng);
      rhs[i] = u(rng);
    }
    Matrix a(m, m);
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t col = 0; col < m; ++col) a(r, col) = c * g[r] * g[col];
      a(r, r) += 1.0 + k * ops.damping[r];
    }
    sherman_morrison_apply(ops.damping, c, g, rhs, k, out);
    worst_sm = std::max(worst_sm, oracle::relative_error(out, oracle::lu_solve(a, rhs)));
  }
  const bool passed = worst_step < 1e-12 && worst_sm < 1e-13;
  return result(5, "solver-step oracle", passed, worst_step, 1e-12,
                "50 random steps vs dense solve; Sherman-Morrison vs LU " + fmt("%.3g", worst_sm) + " (bound 1e-13)");
}

CheckResult backprop_exactness() {
  DatasetSpec spec = desk_spec(DatasetRole::Train);
  spec.modes = 4;
  spec.count = 1;
  spec.seed = 606;
  spec.sample_rate = {32000.0, 32000.0};
  spec.duration = {0.002, 0.002};
  const Dataset data = generate(spec);
  const DatasetEntry& entry = data.entries.front();
  const double k = 1.0 / entry.draw.sample_rate;
  const Segment seg{0, 16, 9, 16 * k};

  std::mt19937_64 rng(607);
  GradNetParams params = gradnet_init(4, 6, 0.01, rng);
  std::normal_distribution<double> n01(0.0, 1.0);
  for (double& b : params.bias) b = 0.05 * n01(rng);
  for (double& a : params.log_alpha) a = 2.0 + 0.3 * n01(rng);
  for (double& b : params.log_beta) b = 0.3 * n01(rng);

  const StringContext plain = StringContext::from_draw(entry.draw, spec.eps, 0.0);
  const StringContext controlled = StringContext::from_draw(entry.draw, spec.eps, 1.0);
  const double err_plain = backprop_error(entry.trajectory, seg, plain, params, false);
  const double err_controlled = backprop_error(entry.trajectory, seg, controlled, params, true);
  const bool passed = err_plain < 1e-7 && err_controlled < 1e-5;
  return result(6, "backprop exactness", passed, err_plain, 1e-7,
                "8-step segment M=4 H=6; lambda0=1 with frozen control term " + fmt("%.3g", err_controlled) +
                    " (bound 1e-5)");
}

CheckResult drift_control() {
  DatasetSpec spec = desk_spec(DatasetRole::Train);
  spec.count = 1;
  std::mt19937_64 rng(spec.seed);
  DrawParams draw = sample_spec(spec, rng).front();
  draw.duration = 1.0;

  const ModalOperators ops = build_modal_operators(draw.string);
  SpectralNonlinearity field(ops);
  double mean_gap[2] = {0.0, 0.0};
  const double gains[2] = {1.0, 0.0};
  for (int run = 0; run < 2; ++run) {
    const Trajectory t = simulate_draw(draw, FieldKind::Oracle, nullptr, spec.eps, gains[run]);
    double sum = 0.0;
    for (std::size_t n = 0; n < t.steps(); ++n) {
      sum += std::abs(t.psi[n] - quadratise(field.potential(t.q_at(n)), spec.eps));
    }
    mean_gap[run] = sum / static_cast<double>(t.steps());
  }
  const double ratio = mean_gap[0] / mean_gap[1];
  return result(7, "drift control", mean_gap[0] < mean_gap[1], ratio, 1.0,
                "mean |psi - sqrt(2V+eps)| lambda0=1: " + fmt("%.3g", mean_gap[0]) + ", lambda0=0: " +
                    fmt("%.3g", mean_gap[1]) + " (value: ratio, must be < 1)");
}

CheckResult amplitude_law() {
  const double te = 1e-3;
  const double famp = 3e4;
  const double omega_e = 2.0 * std::acos(-1.0) / te;
  double worst = 0.0;
  std::string detail;
  for (double ratio : {20.0, 50.0, 100.0}) {
    const double omega = omega_e / ratio;
    ModalOperators ops;
    ops.wavenumbers = {std::acos(-1.0)};
    ops.damping = {0.0};
    ops.stiffness = {omega * omega};
    ops.dct = dct_matrix(1);
    SolverConfig cfg;
    cfg.time_step = 1.0 / 96000.0;
    cfg.lambda0 = 0.0;
    ZeroField field(1);
    SavSolver solver(ops, 0.0, cfg, Vec{1.0});
    SolverState st(1, std::sqrt(cfg.eps));
    const ExcitationParams exc{famp, te, 0.5, 0.5};
    const auto steps = static_cast<std::size_t>((te + 4.0 * 2.0 * std::acos(-1.0) / omega) / cfg.time_step);
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t n = 0; n < steps; ++n) {
      const double t = (static_cast<double>(n) + 0.5) * cfg.time_step;
      solver.step(st, field, excitation_force(t, exc), n);
      if (t > te) {
        sum += std::hypot(st.q[0], st.p[0] / omega);
        ++count;
      }
    }
    const double expected = oracle::oscillator_amplitude(famp, te, omega);
    const double err = std::abs(sum / static_cast<double>(count) - expected) / expected;
    worst = std::max(worst, err);
    detail += (detail.empty() ? "" : ", ") + fmt("%.0f", ratio) + ":" + fmt("%.3g", err);
  }
  return result(8, "amplitude law", worst <= 0.2, worst, 0.2,
                "relative amplitude error at omega_e/omega = " + detail);
}

std::vector<CheckResult> run_fast(const std::function<void(const CheckResult&)>& on_result) {
  std::vector<CheckResult> out;
  const auto add = [&](CheckResult r) {
    if (on_result) on_result(r);
    out.push_back(std::move(r));
  };
  add(energy_conservation());
  add(stability_draws());
  add(spectral_gradient());
  add(gradnet_consistency());
  add(solver_step_oracle());
  add(backprop_exactness());
  add(drift_control());
  add(amplitude_law());
  return out;
}

std::vector<CheckResult> run_desk(const DeskRunConfig& cfg,
                                  const std::function<void(const CheckResult&)>& on_result) {
  const auto say = [&](const std::string& s) {
    if (cfg.progress) cfg.progress(s);
  };
  std::vector<CheckResult> out;
  const auto add = [&](CheckResult r) {
    if (on_result) on_result(r);
    out.push_back(std::move(r));
  };
  fs::create_directories(cfg.workdir);
  const DatasetRole roles[3] = {DatasetRole::Train, DatasetRole::Validation, DatasetRole::Test};
  Dataset sets[3];
  bool data_identical = true;
  for (int i = 0; i < 3; ++i) {
    say("generating " + to_string(roles[i]) + " set");
    sets[i] = generate(desk_spec(roles[i]));
    const fs::path a = cfg.workdir / "run_a" / to_string(roles[i]);
    const fs::path b = cfg.workdir / "run_b" / to_string(roles[i]);
    fs::remove_all(a);
    fs::remove_all(b);
    save_dataset(sets[i], a);
    save_dataset(generate(desk_spec(roles[i])), b);
    data_identical = data_identical && same_tree(a, b);
  }
  const Dataset& train_set = sets[0];
  const Dataset& val_set = sets[1];
  const Dataset& test_set = sets[2];

  TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.workers = cfg.workers;
  say("training " + std::to_string(cfg.epochs) + " epochs");
  const TrainResult trained = train(train_set, val_set, tc, nullptr, [&](const EpochLog& e) {
    say(format_log_row(e));
  });
  write_training_log(cfg.workdir / "train_log.csv", trained.log);
  save_checkpoint(cfg.workdir / "model.gnck", trained.best);
  const GradNetParams& model = trained.best;

  // 9: desk-scale learning against the linear baseline.
  say("evaluating on the test set");
  const DatasetEvaluation eval = evaluate_dataset(test_set, model, cfg.workers);
  const std::string csv_a = evaluation_csv(eval);
  {
    std::ofstream(cfg.workdir / "metrics.csv") << csv_a;
  }
  const double gain = eval.linear.q_mse_initial / eval.model.q_mse_initial;
  std::size_t better = 0;
  const auto& pm = eval.model.per_mode_predicted;
  for (std::size_t i = 0; i < pm.size(); ++i) better += pm[i] < eval.model.per_mode_linear[i] ? 1 : 0;
  const double mode_fraction = static_cast<double>(better) / static_cast<double>(pm.size());
  add(result(9, "desk-scale learning", gain >= 10.0 && mode_fraction >= 0.8, gain, 10.0,
             "initial 100 ms MSE_rel(q) model " + fmt("%.3g", eval.model.q_mse_initial) + " vs linear " +
                 fmt("%.3g", eval.linear.q_mse_initial) + ", per-mode wins " + std::to_string(better) + "/" +
                 std::to_string(pm.size()) + " (bound 80%), best epoch " + std::to_string(trained.best_epoch)));

  // 10: same checkpoint at 48 kHz and twice the duration.
  say("re-simulating the test set at 48 kHz, doubled duration");
  bool stable = true;
  double gen_model = 0.0, gen_linear = 0.0;
  try {
    Dataset resampled;
    resampled.spec = test_set.spec;
    for (const auto& e : test_set.entries) {
      DatasetEntry r;
      r.draw = e.draw;
      r.draw.sample_rate = 48000.0;
      r.draw.duration = 2.0 * e.draw.duration;
      r.trajectory = simulate_draw(r.draw, FieldKind::Oracle, nullptr, test_set.spec.eps, test_set.spec.lambda0);
      resampled.entries.push_back(std::move(r));
    }
    const DatasetEvaluation g = evaluate_dataset(resampled, model, cfg.workers);
    gen_model = g.model.q_mse_initial;
    gen_linear = g.linear.q_mse_initial;
  } catch (const SolverDiverged& ex) {
    stable = false;
    say(std::string("diverged: ") + ex.what());
  }
  add(result(10, "rate/duration generalisation", stable && gen_model < gen_linear,
             stable ? gen_linear / gen_model : 0.0, 1.0,
             stable ? "initial 100 ms MSE_rel(q) model " + fmt("%.3g", gen_model) + " vs linear " +
                          fmt("%.3g", gen_linear) + " (value: linear/model, must exceed 1)"
                    : std::string("model rollout diverged")));

  // 11: pitch glide on the highest-amplitude test string.
  const auto loudest = std::max_element(test_set.entries.begin(), test_set.entries.end(),
                                        [](const DatasetEntry& a, const DatasetEntry& b) {
                                          return a.draw.excitation.amplitude < b.draw.excitation.amplitude;
                                        });
  const double fs_test = loudest->draw.sample_rate;
  const double glide_oracle = pitch_glide(first_mode(loudest->trajectory), fs_test);
  double glide_model = 0.0;
  try {
    glide_model = pitch_glide(
        first_mode(simulate_draw(loudest->draw, FieldKind::GradNet, &model, test_set.spec.eps, test_set.spec.lambda0)),
        fs_test);
  } catch (const std::exception& ex) {
    say(std::string("pitch glide (model): ") + ex.what());
  }
  add(result(11, "pitch glide", glide_oracle >= 0.005 && glide_model >= 0.005, std::min(glide_oracle, glide_model),
             0.005,
             "f(first 100 ms)/f(last 500 ms) - 1: oracle " + fmt("%.4f", glide_oracle) + ", model " +
                 fmt("%.4f", glide_model)));

  // 12: repeated runs are byte-identical.
  say("repeating a " + std::to_string(cfg.determinism_epochs) + "-epoch training run twice");
  TrainConfig short_cfg = tc;
  short_cfg.epochs = cfg.determinism_epochs;
  const TrainResult r1 = train(train_set, val_set, short_cfg);
  const TrainResult r2 = train(train_set, val_set, short_cfg);
  save_checkpoint(cfg.workdir / "determinism_a.gnck", r1.final_params);
  save_checkpoint(cfg.workdir / "determinism_b.gnck", r2.final_params);
  const bool log_identical = log_without_wall(r1.log) == log_without_wall(r2.log) &&
                             read_bytes(cfg.workdir / "determinism_a.gnck") ==
                                 read_bytes(cfg.workdir / "determinism_b.gnck");
  const std::string csv_b = evaluation_csv(evaluate_dataset(test_set, model, cfg.workers));
  {
    std::ofstream(cfg.workdir / "metrics_repeat.csv") << csv_b;
  }
  const bool metrics_identical = read_bytes(cfg.workdir / "metrics.csv") == read_bytes(cfg.workdir / "metrics_repeat.csv");
  const int matches = (data_identical ? 1 : 0) + (log_identical ? 1 : 0) + (metrics_identical ? 1 : 0);
  add(result(12, "determinism", matches == 3, matches, 3,
             std::string("dataset bytes ") + (data_identical ? "identical" : "DIFFER") + ", training log " +
                 (log_identical ? "identical" : "DIFFERS") + ", metrics CSV " +
                 (metrics_identical ? "identical" : "DIFFERS")));
  return out;
}

}  // namespace modalsav::checks
