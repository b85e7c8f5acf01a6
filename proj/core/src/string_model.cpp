#include "modalsav/string_model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "modalsav/errors.hpp"
#include "modalsav/spectral.hpp"

namespace modalsav {

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw InvalidParameter(std::string(name) + " must be positive and finite");
  }
}

void require_non_negative(double v, const char* name) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw InvalidParameter(std::string(name) + " must be non-negative and finite");
  }
}

}  // namespace

ScaledStringParams scale_physical_params(const PhysicalStringParams& p, int modes) {
  require_positive(p.length, "length");
  require_positive(p.density, "density");
  require_positive(p.radius, "radius");
  require_positive(p.tension, "tension");
  require_positive(p.youngs_modulus, "youngs_modulus");
  require_non_negative(p.sigma0, "sigma0");
  require_non_negative(p.sigma1, "sigma1");
  if (modes < 1) throw InvalidParameter("mode count must be at least 1");

  const double area = std::numbers::pi * p.radius * p.radius;
  const double inertia = 0.25 * std::numbers::pi * std::pow(p.radius, 4);
  const double ea = p.youngs_modulus * area;
  if (ea < p.tension) {
    throw InvalidParameter("E*A < T0: nonlinearity strength would be imaginary");
  }
  const double rho_a = p.density * area;
  const double alpha_sq = ea / p.tension;

  ScaledStringParams s;
  s.gamma = std::sqrt(p.tension / rho_a) / p.length;
  s.kappa = std::sqrt(p.youngs_modulus * inertia / rho_a) / (p.length * p.length);
  s.nu = s.gamma * std::sqrt((alpha_sq - 1.0) / 2.0);
  s.sigma0 = p.sigma0;
  s.sigma1_hat = p.sigma1 / (p.length * p.length);
  s.modes = modes;
  return s;
}

void validate(const ScaledStringParams& s) {
  require_positive(s.gamma, "gamma");
  require_non_negative(s.nu, "nu");
  require_non_negative(s.kappa, "kappa");
  require_non_negative(s.sigma0, "sigma0");
  require_non_negative(s.sigma1_hat, "sigma1_hat");
  if (s.modes < 1) throw InvalidParameter("mode count must be at least 1");
}

void validate(const ExcitationParams& e) {
  require_non_negative(e.amplitude, "famp");
  require_positive(e.duration, "Te");
  if (!(e.position > 0.0 && e.position < 1.0)) {
    throw InvalidParameter("excitation position must lie in (0, 1)");
  }
  if (!(e.output_position > 0.0 && e.output_position < 1.0)) {
    throw InvalidParameter("output position must lie in (0, 1)");
  }
}

ModalOperators build_modal_operators(const ScaledStringParams& s) {
  if (s.modes < 1) throw InvalidParameter("mode count must be at least 1");
  const auto m_count = static_cast<std::size_t>(s.modes);
  ModalOperators ops;
  ops.wavenumbers.resize(m_count);
  ops.damping.resize(m_count);
  ops.stiffness.resize(m_count);
  for (std::size_t i = 0; i < m_count; ++i) {
    const double b = static_cast<double>(i + 1) * std::numbers::pi;
    const double b2 = b * b;
    ops.wavenumbers[i] = b;
    ops.damping[i] = s.sigma0 + s.sigma1_hat * b2;
    ops.stiffness[i] = s.gamma * s.gamma * b2 + s.kappa * s.kappa * b2 * b2;
  }
  ops.dct = dct_matrix(s.modes);
  return ops;
}

Vec mode_shape(double x, int modes) {
  if (!(x >= 0.0 && x <= 1.0)) {
    throw std::invalid_argument("mode_shape: position must lie in [0, 1]");
  }
  Vec phi(static_cast<std::size_t>(modes));
  for (int m = 1; m <= modes; ++m) {
    phi[static_cast<std::size_t>(m - 1)] = std::numbers::sqrt2 * std::sin(m * std::numbers::pi * x);
  }
  // Exact zeros at the supports; sin(m pi) is only ~1e-16 in floating point.
  if (x == 0.0 || x == 1.0) phi.assign(phi.size(), 0.0);
  return phi;
}

double excitation_force(double t, const ExcitationParams& e) {
  if (t < 0.0 || t > e.duration) return 0.0;
  return 0.5 * e.amplitude * (1.0 - std::cos(std::numbers::pi * t / e.duration));
}

StabilityReport check_stability(const ModalOperators& ops, double time_step) {
  if (!(time_step > 0.0)) throw std::invalid_argument("time step must be positive");
  const double omega_max = ops.stiffness.empty() ? 0.0 : std::sqrt(ops.stiffness.back());
  return {omega_max * time_step < 2.0, 2.0 / time_step - omega_max};
}

}  // namespace modalsav
