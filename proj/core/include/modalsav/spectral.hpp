#pragma once

#include <span>

#include "modalsav/linalg.hpp"
#include "modalsav/potential_field.hpp"

namespace modalsav {

struct ModalOperators;

/// Truncated orthonormal DCT-II, rows m = 1..M, columns l = 0..M:
///   C[m-1][l] = sqrt(2/(M+1)) cos(pi m (l + 1/2) / (M+1)).
Matrix dct_matrix(int modes);

/// Morse-type transverse potential (sqrt(1 + xi^2) - 1)^2 and its derivative.
double morse_potential(double xi);
double morse_potential_deriv(double xi);

/// xi = sqrt(M+1) C^T diag(B) q, i.e. the slope of the modal superposition
/// sampled at x_{l+1/2} = (l + 1/2)/(M+1). Throws std::invalid_argument on
/// dimension mismatch.
void spatial_gradient(std::span<const double> q, const Matrix& dct,
                      std::span<const double> wavenumbers, std::span<double> xi);

// Oracle nonlinearity of the string:
//   f(q) = -(1/sqrt(M+1)) B C V'(xi),   V(q) = 1/(M+1) sum_l V(xi_l).
// Holds scratch buffers, so one instance per thread.
class SpectralNonlinearity final : public PotentialField {
 public:
  explicit SpectralNonlinearity(const ModalOperators& ops);

  int dimension() const override { return modes_; }
  double potential(std::span<const double> q) override;
  void force(std::span<const double> q, std::span<double> out) override;
  double evaluate(std::span<const double> q, std::span<double> force_out) override;

 private:
  int modes_;
  Matrix dct_;
  Vec wavenumbers_;
  Vec xi_;
  Vec dv_;
  Vec tmp_;
};

}  // namespace modalsav
