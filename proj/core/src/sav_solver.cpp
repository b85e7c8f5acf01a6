#include "modalsav/sav_solver.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "binary_io.hpp"
#include "modalsav/errors.hpp"

namespace modalsav {

namespace {

constexpr char kTrajectoryMagic[5] = "MTRJ";
constexpr std::uint32_t kTrajectoryVersion = 1;

double sign_of(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

double quadratise(double potential, double eps) {
  if (potential < 0.0) throw std::logic_error("quadratise: potential field returned a negative value");
  return std::sqrt(2.0 * potential + eps);
}

void g_std(PotentialField& field, std::span<const double> q, double eps, std::span<double> out) {
  const double v = field.evaluate(q, out);
  const double root = quadratise(v, eps);
  for (double& x : out) x = -x / root;
}

void g_mod_from_potential(double potential_at_q, std::span<const double> p, double psi,
                          const SolverConfig& cfg, std::span<double> out) {
  double l1 = 0.0;
  for (double v : p) l1 += std::abs(v);
  if (l1 < cfg.p_l1_tolerance || cfg.lambda0 == 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  // sign(p)^T p == ||p||_1
  const double scale = -cfg.lambda0 * (psi - quadratise(potential_at_q, cfg.eps)) / l1;
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = scale * sign_of(p[i]);
}

void g_mod(PotentialField& field, std::span<const double> q, std::span<const double> p, double psi,
           const SolverConfig& cfg, std::span<double> out) {
  double l1 = 0.0;
  for (double v : p) l1 += std::abs(v);
  if (l1 < cfg.p_l1_tolerance || cfg.lambda0 == 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  g_mod_from_potential(field.potential(q), p, psi, cfg, out);
}

void sherman_morrison_apply(std::span<const double> sigma, double c, std::span<const double> g,
                            std::span<const double> rhs, double k, std::span<double> out) {
  const std::size_t m = sigma.size();
  if (g.size() != m || rhs.size() != m || out.size() != m) {
    throw std::invalid_argument("sherman_morrison_apply: dimension mismatch");
  }
  // A = I + k Sigma. x = A^-1 rhs - c (A^-1 g)(g^T A^-1 rhs) / (1 + c g^T A^-1 g)
  double g_ainv_rhs = 0.0;
  double g_ainv_g = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double inv = 1.0 / (1.0 + k * sigma[i]);
    g_ainv_rhs += g[i] * inv * rhs[i];
    g_ainv_g += g[i] * inv * g[i];
  }
  const double factor = c * g_ainv_rhs / (1.0 + c * g_ainv_g);
  for (std::size_t i = 0; i < m; ++i) {
    const double inv = 1.0 / (1.0 + k * sigma[i]);
    out[i] = inv * rhs[i] - factor * inv * g[i];
  }
}

double energy(std::span<const double> q_half_prev, std::span<const double> q_half_next,
              std::span<const double> p, double psi, const ModalOperators& ops, double nu) {
  double kinetic = 0.0;
  double potential = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    kinetic += p[i] * p[i];
    potential += q_half_next[i] * ops.stiffness[i] * q_half_prev[i];
  }
  return 0.5 * kinetic + 0.5 * potential + 0.5 * nu * nu * psi * psi;
}

double energy(const SolverState& state, const ModalOperators& ops, double nu, double time_step) {
  const std::size_t m = state.q.size();
  Vec prev(m), next(m);
  for (std::size_t i = 0; i < m; ++i) {
    prev[i] = state.q[i] - 0.5 * time_step * state.p[i];
    next[i] = state.q[i] + 0.5 * time_step * state.p[i];
  }
  return energy(prev, next, state.p, state.psi, ops, nu);
}

SavSolver::SavSolver(const ModalOperators& ops, double nu, const SolverConfig& cfg, Vec excitation_weights)
    : ops_(&ops),
      nu_(nu),
      cfg_(cfg),
      excitation_weights_(std::move(excitation_weights)),
      modes_(ops.modes()) {
  if (!(cfg.time_step > 0.0)) throw std::invalid_argument("SavSolver: time step must be positive");
  if (!(cfg.eps > 0.0)) throw std::invalid_argument("SavSolver: eps must be positive");
  if (!(cfg.lambda0 >= 0.0)) throw std::invalid_argument("SavSolver: lambda0 must be non-negative");
  if (static_cast<int>(excitation_weights_.size()) != modes_) {
    throw std::invalid_argument("SavSolver: excitation weight size mismatch");
  }
  const auto m = static_cast<std::size_t>(modes_);
  q_half_.resize(m);
  force_.resize(m);
  g_.resize(m);
  g_mod_.resize(m);
  rhs_.resize(m);
  p_next_.resize(m);
}

void SavSolver::step(SolverState& state, PotentialField& field, double forcing, std::size_t step_index,
                     StepTrace* trace, std::span<const double> frozen_g_mod) {
  const auto m = static_cast<std::size_t>(modes_);
  const double k = cfg_.time_step;
  const double nu2 = nu_ * nu_;
  const double c = 0.25 * k * k * nu2;
  const auto& sigma = ops_->damping;
  const auto& omega2 = ops_->stiffness;

  for (std::size_t i = 0; i < m; ++i) q_half_[i] = state.q[i] + 0.5 * k * state.p[i];

  if (!frozen_g_mod.empty()) {
    std::copy(frozen_g_mod.begin(), frozen_g_mod.end(), g_mod_.begin());
  } else {
    g_mod(field, state.q, state.p, state.psi, cfg_, g_mod_);
  }

  const double v_half = field.evaluate(q_half_, force_);
  const double root = quadratise(v_half, cfg_.eps);
  double gp = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    g_[i] = -force_[i] / root + g_mod_[i];
    gp += g_[i] * state.p[i];
  }

  for (std::size_t i = 0; i < m; ++i) {
    rhs_[i] = (1.0 - k * sigma[i]) * state.p[i] - c * g_[i] * gp +
              k * (-omega2[i] * q_half_[i] - nu2 * g_[i] * state.psi + excitation_weights_[i] * forcing);
  }
  sherman_morrison_apply(sigma, c, g_, rhs_, k, p_next_);

  double g_pavg = 0.0;
  for (std::size_t i = 0; i < m; ++i) g_pavg += g_[i] * 0.5 * (p_next_[i] + state.p[i]);

  if (trace != nullptr) {
    trace->q_half.assign(q_half_.begin(), q_half_.end());
    trace->force_half.assign(force_.begin(), force_.end());
    trace->g.assign(g_.begin(), g_.end());
    trace->g_mod.assign(g_mod_.begin(), g_mod_.end());
    trace->p_prev.assign(state.p.begin(), state.p.end());
    trace->p_next.assign(p_next_.begin(), p_next_.end());
    trace->psi_prev = state.psi;
    trace->potential_half = v_half;
    trace->root_half = root;
  }

  bool finite = true;
  for (std::size_t i = 0; i < m; ++i) {
    state.q[i] = q_half_[i] + 0.5 * k * p_next_[i];
    state.p[i] = p_next_[i];
    finite = finite && std::isfinite(state.q[i]) && std::isfinite(state.p[i]);
  }
  state.psi += k * g_pavg;
  if (!finite || !std::isfinite(state.psi)) throw SolverDiverged(step_index, "solver state became non-finite");
}

Trajectory simulate(const ScaledStringParams& params, const ModalOperators& ops, PotentialField& field,
                    const ExcitationParams& exc, const SolverConfig& cfg, std::size_t steps,
                    const SolverState& initial, std::size_t decimation, double time_offset) {
  if (decimation == 0) throw std::invalid_argument("simulate: decimation must be positive");
  if (field.dimension() != ops.modes() || static_cast<int>(initial.q.size()) != ops.modes() ||
      initial.p.size() != initial.q.size()) {
    throw std::invalid_argument("simulate: dimension mismatch");
  }
  if (!check_stability(ops, cfg.time_step).stable) {
    throw InvalidParameter("simulate: stability condition Omega_M < 2/k violated");
  }
  const auto m = static_cast<std::size_t>(ops.modes());
  SavSolver solver(ops, params.nu, cfg, mode_shape(exc.position, ops.modes()));
  const Vec out_weights = mode_shape(exc.output_position, ops.modes());

  Trajectory traj;
  traj.modes = ops.modes();
  traj.sample_rate = 1.0 / cfg.time_step;
  traj.excitation = exc;
  traj.lambda0 = cfg.lambda0;
  traj.decimation = decimation;
  const std::size_t stored = steps == 0 ? 0 : (steps - 1) / decimation + 1;
  traj.q.reserve(stored * m);
  traj.p.reserve(stored * m);
  traj.psi.reserve(stored);
  traj.output.reserve(stored);

  SolverState state = initial;
  const double k = cfg.time_step;
  for (std::size_t n = 0; n < steps; ++n) {
    if (n % decimation == 0) {
      traj.q.insert(traj.q.end(), state.q.begin(), state.q.end());
      traj.p.insert(traj.p.end(), state.p.begin(), state.p.end());
      traj.psi.push_back(state.psi);
      traj.output.push_back(dot(out_weights, state.q));
    }
    if (n + 1 == steps) break;
    const double t_half = time_offset + (static_cast<double>(n) + 0.5) * k;
    solver.step(state, field, excitation_force(t_half, exc), n);
  }
  return traj;
}

Trajectory simulate(const ScaledStringParams& params, const ModalOperators& ops, PotentialField& field,
                    const ExcitationParams& exc, const SolverConfig& cfg, std::size_t steps) {
  SolverState rest(ops.modes(), 0.0);
  rest.psi = quadratise(field.potential(rest.q), cfg.eps);
  return simulate(params, ops, field, exc, cfg, steps, rest);
}

void save_trajectory(const std::filesystem::path& path, const Trajectory& traj) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open trajectory for writing: " + path.string());
  detail::write_magic(os, kTrajectoryMagic);
  detail::write_le<std::uint32_t>(os, kTrajectoryVersion);
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(traj.modes));
  detail::write_le<std::uint64_t>(os, traj.steps());
  detail::write_le<double>(os, traj.sample_rate);
  detail::write_le<double>(os, traj.excitation.amplitude);
  detail::write_le<double>(os, traj.excitation.duration);
  detail::write_le<double>(os, traj.excitation.position);
  detail::write_le<double>(os, traj.excitation.output_position);
  detail::write_le<double>(os, traj.lambda0);
  detail::write_le<std::uint64_t>(os, traj.decimation);
  detail::write_doubles(os, traj.q);
  detail::write_doubles(os, traj.p);
  detail::write_doubles(os, traj.psi);
  detail::write_doubles(os, traj.output);
  if (!os) throw std::runtime_error("failed writing trajectory: " + path.string());
}

Trajectory load_trajectory(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open trajectory: " + path.string());
  detail::expect_magic(is, kTrajectoryMagic);
  const auto version = detail::read_le<std::uint32_t>(is);
  if (version != kTrajectoryVersion) throw FormatError("unsupported trajectory version");
  Trajectory traj;
  traj.modes = static_cast<int>(detail::read_le<std::uint32_t>(is));
  const auto n = detail::read_le<std::uint64_t>(is);
  traj.sample_rate = detail::read_le<double>(is);
  traj.excitation.amplitude = detail::read_le<double>(is);
  traj.excitation.duration = detail::read_le<double>(is);
  traj.excitation.position = detail::read_le<double>(is);
  traj.excitation.output_position = detail::read_le<double>(is);
  traj.lambda0 = detail::read_le<double>(is);
  traj.decimation = detail::read_le<std::uint64_t>(is);

  const auto m = static_cast<std::uint64_t>(traj.modes);
  const auto begin = is.tellg();
  is.seekg(0, std::ios::end);
  const auto remaining = static_cast<std::uint64_t>(is.tellg() - begin);
  is.seekg(begin);
  if (traj.modes <= 0 || remaining != (2 * n * m + 2 * n) * sizeof(double)) {
    throw FormatError("trajectory payload size does not match header: " + path.string());
  }
  traj.q.resize(n * m);
  traj.p.resize(n * m);
  traj.psi.resize(n);
  traj.output.resize(n);
  detail::read_doubles(is, traj.q);
  detail::read_doubles(is, traj.p);
  detail::read_doubles(is, traj.psi);
  detail::read_doubles(is, traj.output);
  return traj;
}

}  // namespace modalsav
