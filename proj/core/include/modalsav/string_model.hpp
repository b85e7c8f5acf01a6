#pragma once

#include <span>

#include "modalsav/linalg.hpp"

namespace modalsav {

// Physical description of a simply supported stiff string (SI units).
struct PhysicalStringParams {
  double length = 0.0;          // L (m)
  double density = 0.0;         // rho (kg m^-3)
  double radius = 0.0;          // r (m)
  double tension = 0.0;         // T0 (N)
  double youngs_modulus = 0.0;  // E (N m^-2)
  double sigma0 = 0.0;          // frequency-independent loss (s^-1)
  double sigma1 = 0.0;          // frequency-dependent loss (m^2 s^-1)
};

// Five-parameter scaled string plus the modal truncation order.
struct ScaledStringParams {
  double gamma = 0.0;       // scaled wave speed (s^-1)
  double kappa = 0.0;       // scaled stiffness (s^-1)
  double nu = 0.0;          // nonlinearity strength (s^-1)
  double sigma0 = 0.0;      // (s^-1)
  double sigma1_hat = 0.0;  // scaled frequency-dependent loss (s^-1)
  int modes = 1;
};

// Diagonals of B, Sigma and Omega^2 plus the truncated DCT-II matrix C.
struct ModalOperators {
  Vec wavenumbers;  // B_m = m pi
  Vec damping;      // Sigma_m = sigma0 + sigma1 B_m^2
  Vec stiffness;    // Omega^2_m = gamma^2 B_m^2 + kappa^2 B_m^4
  Matrix dct;       // M x (M+1)

  int modes() const { return static_cast<int>(wavenumbers.size()); }
};

// Plucking force parameters; positions are normalised to (0, 1).
struct ExcitationParams {
  double amplitude = 0.0;        // famp, scaled force units
  double duration = 1e-3;        // Te (s)
  double position = 0.5;         // xe
  double output_position = 0.5;  // xo
};

struct StabilityReport {
  bool stable = false;
  double margin = 0.0;  // 2/k - sqrt(Omega^2_M)
};

/// Reduces the physical parameter set to {gamma, kappa, nu, sigma0, sigma1_hat}.
/// Throws InvalidParameter for non-positive geometry/material values or when
/// EA < T0 (which would make nu imaginary).
ScaledStringParams scale_physical_params(const PhysicalStringParams& p, int modes);

/// Throws InvalidParameter if the scaled invariants do not hold.
void validate(const ScaledStringParams& s);
void validate(const ExcitationParams& e);

ModalOperators build_modal_operators(const ScaledStringParams& s);

/// Mode shapes sqrt(2) sin(m pi x), m = 1..M. Throws std::invalid_argument
/// outside [0, 1].
Vec mode_shape(double x, int modes);

/// Raised-cosine pluck, supported on the closed interval [0, Te].
double excitation_force(double t, const ExcitationParams& e);

StabilityReport check_stability(const ModalOperators& ops, double time_step);

}  // namespace modalsav
