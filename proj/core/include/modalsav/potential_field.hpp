#pragma once

#include <span>

namespace modalsav {

// A non-negative potential V(q) together with its force field f = -grad V.
// Implementations may keep mutable scratch space and are not thread-safe.
class PotentialField {
 public:
  virtual ~PotentialField() = default;

  virtual int dimension() const = 0;
  virtual double potential(std::span<const double> q) = 0;
  virtual void force(std::span<const double> q, std::span<double> out) = 0;

  // Potential and force in one pass. Returns the potential.
  virtual double evaluate(std::span<const double> q, std::span<double> force_out) {
    force(q, force_out);
    return potential(q);
  }
};

// V = 0, f = 0: turns the solver into the plain linear modal scheme.
class ZeroField final : public PotentialField {
 public:
  explicit ZeroField(int modes) : modes_(modes) {}

  int dimension() const override { return modes_; }
  double potential(std::span<const double>) override { return 0.0; }
  void force(std::span<const double>, std::span<double> out) override {
    for (double& v : out) v = 0.0;
  }

 private:
  int modes_;
};

}  // namespace modalsav
