#pragma once

#include <functional>
#include <span>

#include "modalsav/linalg.hpp"
#include "modalsav/potential_field.hpp"
#include "modalsav/sav_solver.hpp"
#include "modalsav/string_model.hpp"

// Slow, independent reference implementations used to cross-check the
// production code paths.
namespace modalsav::oracle {

/// Dense LU with partial pivoting. Throws std::domain_error on a singular
/// matrix.
Vec lu_solve(Matrix a, Vec b);

/// One step of the scheme assembled as a dense M x M linear system
///   [I + k Sigma + c g g^T] p1 = [I - k Sigma - c g g^T] p0 - k Omega^2 q_half
///                                 - k nu^2 g psi0 + k phi_e f_e
/// and solved with lu_solve.
SolverState reference_step(const SolverState& state, PotentialField& field, double forcing,
                           const ModalOperators& ops, double nu, const SolverConfig& cfg,
                           std::span<const double> excitation_weights);

/// Dominant free-vibration amplitude of an undamped oscillator after a
/// raised-cosine pluck: famp Te / (2 omega).
double oscillator_amplitude(double famp, double duration, double omega);

/// Central differences of fn at x with step h in every coordinate.
Vec central_gradient(const std::function<double(std::span<const double>)>& fn, std::span<const double> x,
                     double h);

/// max |a - b| / max |b|; returns max |a| when b is identically zero.
double relative_error(std::span<const double> approx, std::span<const double> exact);

}  // namespace modalsav::oracle
