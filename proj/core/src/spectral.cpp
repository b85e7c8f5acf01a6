#include "modalsav/spectral.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "modalsav/string_model.hpp"

namespace modalsav {

Matrix dct_matrix(int modes) {
  if (modes < 1) throw std::invalid_argument("dct_matrix: mode count must be at least 1");
  const auto m_count = static_cast<std::size_t>(modes);
  const double n = static_cast<double>(modes + 1);
  const double scale = std::sqrt(2.0 / n);
  Matrix c(m_count, m_count + 1);
  for (std::size_t m = 1; m <= m_count; ++m) {
    for (std::size_t l = 0; l <= m_count; ++l) {
      c(m - 1, l) = scale * std::cos(std::numbers::pi / n * static_cast<double>(m) *
                                     (static_cast<double>(l) + 0.5));
    }
  }
  return c;
}

double morse_potential(double xi) {
  // sqrt(1+xi^2) - 1 rewritten to avoid cancellation for small |xi|.
  const double r = std::sqrt(1.0 + xi * xi);
  const double d = xi * xi / (r + 1.0);
  return d * d;
}

double morse_potential_deriv(double xi) {
  const double r = std::sqrt(1.0 + xi * xi);
  const double d = xi * xi / (r + 1.0);
  return 2.0 * d * xi / r;
}

void spatial_gradient(std::span<const double> q, const Matrix& dct,
                      std::span<const double> wavenumbers, std::span<double> xi) {
  if (q.size() != dct.rows || wavenumbers.size() != dct.rows || xi.size() != dct.cols) {
    throw std::invalid_argument("spatial_gradient: dimension mismatch");
  }
  const double root = std::sqrt(static_cast<double>(dct.cols));
  for (std::size_t l = 0; l < xi.size(); ++l) xi[l] = 0.0;
  for (std::size_t m = 0; m < dct.rows; ++m) {
    const double bq = root * wavenumbers[m] * q[m];
    const double* row = dct.data.data() + m * dct.cols;
    for (std::size_t l = 0; l < dct.cols; ++l) xi[l] += row[l] * bq;
  }
}

SpectralNonlinearity::SpectralNonlinearity(const ModalOperators& ops)
    : modes_(ops.modes()),
      dct_(ops.dct),
      wavenumbers_(ops.wavenumbers),
      xi_(dct_.cols),
      dv_(dct_.cols),
      tmp_(dct_.rows) {}

double SpectralNonlinearity::potential(std::span<const double> q) {
  spatial_gradient(q, dct_, wavenumbers_, xi_);
  double sum = 0.0;
  for (double x : xi_) sum += morse_potential(x);
  return sum / static_cast<double>(dct_.cols);
}

void SpectralNonlinearity::force(std::span<const double> q, std::span<double> out) {
  evaluate(q, out);
}

double SpectralNonlinearity::evaluate(std::span<const double> q, std::span<double> force_out) {
  if (force_out.size() != dct_.rows) {
    throw std::invalid_argument("SpectralNonlinearity: dimension mismatch");
  }
  spatial_gradient(q, dct_, wavenumbers_, xi_);
  double sum = 0.0;
  for (std::size_t l = 0; l < xi_.size(); ++l) {
    sum += morse_potential(xi_[l]);
    dv_[l] = morse_potential_deriv(xi_[l]);
  }
  matvec(dct_, dv_, tmp_);
  const double scale = -1.0 / std::sqrt(static_cast<double>(dct_.cols));
  for (std::size_t m = 0; m < dct_.rows; ++m) force_out[m] = scale * wavenumbers_[m] * tmp_[m];
  return sum / static_cast<double>(dct_.cols);
}

}  // namespace modalsav
