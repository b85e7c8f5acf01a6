#pragma once

#include <cstddef>
#include <filesystem>
#include <span>

#include "modalsav/linalg.hpp"
#include "modalsav/potential_field.hpp"
#include "modalsav/string_model.hpp"

namespace modalsav {

// State on the integer time grid: q^n = (q^{n-1/2} + q^{n+1/2}) / 2, p^n, psi^n.
struct SolverState {
  Vec q;
  Vec p;
  double psi = 0.0;

  SolverState() = default;
  SolverState(int modes, double psi0)
      : q(static_cast<std::size_t>(modes), 0.0), p(static_cast<std::size_t>(modes), 0.0), psi(psi0) {}
};

struct SolverConfig {
  double time_step = 1.0 / 32000.0;
  double eps = 1e-12;             // gauge constant
  double lambda0 = 1.0;           // drift-control gain
  double p_l1_tolerance = 1e-14;  // below this ||p||_1 the control term is switched off
};

double quadratise(double potential, double eps);

/// grad_q sqrt(2V + eps) = -f(q) / sqrt(2V(q) + eps).
void g_std(PotentialField& field, std::span<const double> q, double eps, std::span<double> out);

/// Drift-control coupling term
///   -lambda0 (psi - sqrt(2V(q)+eps)) sign(p) / (sign(p)^T p),
/// zero when ||p||_1 < cfg.p_l1_tolerance. sign(0) = 0.
void g_mod(PotentialField& field, std::span<const double> q, std::span<const double> p, double psi,
           const SolverConfig& cfg, std::span<double> out);

/// Same as g_mod with the potential at q already known.
void g_mod_from_potential(double potential_at_q, std::span<const double> p, double psi,
                          const SolverConfig& cfg, std::span<double> out);

/// Solves [I + k Sigma + c g g^T] x = rhs with the Sherman-Morrison formula.
void sherman_morrison_apply(std::span<const double> sigma, double c, std::span<const double> g,
                            std::span<const double> rhs, double k, std::span<double> out);

/// E^n = 1/2 p^T p + 1/2 (q^{n+1/2})^T Omega^2 q^{n-1/2} + nu^2/2 psi^2.
double energy(std::span<const double> q_half_prev, std::span<const double> q_half_next,
              std::span<const double> p, double psi, const ModalOperators& ops, double nu);

/// Energy of an integer-grid state (half-grid displacements reconstructed as q -/+ k/2 p).
double energy(const SolverState& state, const ModalOperators& ops, double nu, double time_step);

// Intermediate values of one update, kept for reverse-mode differentiation.
struct StepTrace {
  Vec q_half;       // q^{n+1/2}
  Vec force_half;   // f(q^{n+1/2})
  Vec g;            // g_std + g_mod
  Vec g_mod;
  Vec p_prev;
  Vec p_next;
  double psi_prev = 0.0;
  double potential_half = 0.0;
  double root_half = 0.0;  // sqrt(2V(q^{n+1/2}) + eps)
};

// One update of the explicit SAV scheme on a fixed string. Owns scratch
// buffers; use one instance per thread.
class SavSolver {
 public:
  SavSolver(const ModalOperators& ops, double nu, const SolverConfig& cfg, Vec excitation_weights);

  int modes() const { return modes_; }
  const SolverConfig& config() const { return cfg_; }
  const ModalOperators& operators() const { return *ops_; }
  double nu() const { return nu_; }
  std::span<const double> excitation_weights() const { return excitation_weights_; }

  /// Advances state by one step with excitation value f_e(t^{n+1/2}).
  /// When frozen_g_mod is non-empty it replaces the computed control term.
  /// Throws SolverDiverged if the new state is not finite.
  ///
  /// Field evaluation order: the potential at q^n (control term, only when
  /// needed) first, then potential and force at q^{n+1/2}. Fields that cache
  /// their last evaluation therefore hold the q^{n+1/2} pass afterwards.
  void step(SolverState& state, PotentialField& field, double forcing, std::size_t step_index,
            StepTrace* trace = nullptr, std::span<const double> frozen_g_mod = {});

 private:
  const ModalOperators* ops_;
  double nu_;
  SolverConfig cfg_;
  Vec excitation_weights_;
  int modes_;
  Vec q_half_;
  Vec force_;
  Vec g_;
  Vec g_mod_;
  Vec rhs_;
  Vec p_next_;
};

struct Trajectory {
  int modes = 0;
  double sample_rate = 0.0;
  ExcitationParams excitation;
  double lambda0 = 0.0;
  std::size_t decimation = 1;
  Vec q;       // steps x modes
  Vec p;       // steps x modes
  Vec psi;     // steps
  Vec output;  // w^n = Phi(x_o)^T q^n

  std::size_t steps() const { return psi.size(); }
  std::span<const double> q_at(std::size_t n) const {
    return {q.data() + n * static_cast<std::size_t>(modes), static_cast<std::size_t>(modes)};
  }
  std::span<const double> p_at(std::size_t n) const {
    return {p.data() + n * static_cast<std::size_t>(modes), static_cast<std::size_t>(modes)};
  }
};

/// Rolls the scheme out for `steps` stored states (state 0 is `initial`),
/// keeping every `decimation`-th state. Excitation is sampled at t^{n+1/2}
/// shifted by time_offset.
Trajectory simulate(const ScaledStringParams& params, const ModalOperators& ops, PotentialField& field,
                    const ExcitationParams& exc, const SolverConfig& cfg, std::size_t steps,
                    const SolverState& initial, std::size_t decimation = 1, double time_offset = 0.0);

/// Convenience overload starting from rest, psi0 = sqrt(2 V(0) + eps).
Trajectory simulate(const ScaledStringParams& params, const ModalOperators& ops, PotentialField& field,
                    const ExcitationParams& exc, const SolverConfig& cfg, std::size_t steps);

// "MTRJ" trajectory container; see README for the byte layout.
void save_trajectory(const std::filesystem::path& path, const Trajectory& traj);
Trajectory load_trajectory(const std::filesystem::path& path);

}  // namespace modalsav
