#pragma once

#include <array>
#include <filesystem>
#include <random>
#include <span>

#include "modalsav/linalg.hpp"
#include "modalsav/potential_field.hpp"

namespace modalsav {

// Single-hidden-layer gradient network
//   f(q) = -W^T [alpha * sigma(z)],  z = beta * (W q) + b,
//   V(q) = sum_i (alpha_i / beta_i) phi(z_i),
// with sigma a leaky ReLU and phi its non-negative antiderivative.
// alpha and beta are stored as logarithms so they stay positive.
struct GradNetParams {
  int modes = 0;
  int hidden = 0;
  double neg_slope = 0.01;
  Vec weights;  // hidden x modes, row-major
  Vec bias;
  Vec log_alpha;
  Vec log_beta;

  GradNetParams() = default;
  GradNetParams(int m, int h, double slope);

  std::array<std::span<double>, 4> blocks() { return {weights, bias, log_alpha, log_beta}; }
  std::array<std::span<const double>, 4> blocks() const {
    return {weights, bias, log_alpha, log_beta};
  }
  std::size_t size() const { return weights.size() + bias.size() + log_alpha.size() + log_beta.size(); }
};

// Gradients with the same block layout as GradNetParams (dlog_alpha and
// dlog_beta are derivatives with respect to the stored logarithms).
struct GradNetGradient {
  Vec weights;
  Vec bias;
  Vec log_alpha;
  Vec log_beta;

  GradNetGradient() = default;
  explicit GradNetGradient(const GradNetParams& shape);

  std::array<std::span<double>, 4> blocks() { return {weights, bias, log_alpha, log_beta}; }
  std::array<std::span<const double>, 4> blocks() const {
    return {weights, bias, log_alpha, log_beta};
  }
  void set_zero();
  void add(const GradNetGradient& other, double scale = 1.0);
  void scale(double s);
  double max_abs() const;
};

// Forward-pass cache for reverse-mode products.
struct GradNetTape {
  Vec q;            // input the tape was recorded at
  Vec projection;   // W q
  Vec z;
  Vec activation;   // sigma(z)
  Vec slope;        // sigma'(z), with sigma'(0) = 1
  Vec alpha;        // exp(log_alpha)
  Vec beta;         // exp(log_beta)
  Vec ratio;        // alpha / beta

  void resize(int modes, int hidden);
};

// exp(log_alpha), exp(log_beta) and their ratio, precomputed once per
// parameter update so repeated evaluations skip the exponentials.
struct GradNetScales {
  Vec alpha;
  Vec beta;
  Vec ratio;
};

GradNetScales gradnet_scales(const GradNetParams& params);

double leaky_relu(double x, double neg_slope);
double leaky_relu_antiderivative(double x, double neg_slope);

GradNetParams gradnet_init(int modes, int hidden, double neg_slope, std::mt19937_64& rng);

/// Runs the hidden layer at q and fills the tape.
void gradnet_record(const GradNetParams& params, std::span<const double> q, GradNetTape& tape);
void gradnet_record(const GradNetParams& params, const GradNetScales& scales, std::span<const double> q,
                    GradNetTape& tape);

/// Force and potential from a recorded tape.
void gradnet_force_from_tape(const GradNetParams& params, const GradNetTape& tape, std::span<double> out);
double gradnet_potential_from_tape(const GradNetParams& params, const GradNetTape& tape);

void gradnet_force(const GradNetParams& params, std::span<const double> q, std::span<double> out,
                   GradNetTape* tape = nullptr);
double gradnet_potential(const GradNetParams& params, std::span<const double> q);

/// (df/dq)^T upstream = -W^T diag(alpha sigma'(z) beta) W upstream.
void gradnet_vjp_input(const GradNetParams& params, const GradNetTape& tape,
                       std::span<const double> upstream, std::span<double> out);

/// Accumulates into grad the parameter gradient of
///   force_upstream^T f(q) + potential_upstream * V(q).
void gradnet_vjp_params(const GradNetParams& params, const GradNetTape& tape,
                        std::span<const double> force_upstream, double potential_upstream,
                        GradNetGradient& grad);

/// Fused reverse pass of force_upstream^T f(q) + potential_upstream * V(q):
/// writes the input adjoint to input_grad and accumulates parameter
/// gradients into grad. Shares the W u product between both.
void gradnet_vjp(const GradNetParams& params, const GradNetTape& tape, std::span<const double> force_upstream,
                 double potential_upstream, std::span<double> input_grad, GradNetGradient& grad);

// PotentialField adaptor over a parameter record. Keeps the tape of the most
// recent evaluation. The parameters must not change while the field is alive.
class GradNetField final : public PotentialField {
 public:
  explicit GradNetField(const GradNetParams& params);

  int dimension() const override { return params_->modes; }
  double potential(std::span<const double> q) override;
  void force(std::span<const double> q, std::span<double> out) override;
  double evaluate(std::span<const double> q, std::span<double> force_out) override;

  const GradNetTape& tape() const { return tape_; }
  const GradNetParams& params() const { return *params_; }
  const GradNetScales& scales() const { return scales_; }

 private:
  const GradNetParams* params_;
  GradNetScales scales_;
  GradNetTape tape_;
};

// "GNCK" checkpoint: magic, u32 version, u32 M, u32 H, f64 neg_slope, then
// W, b, log_alpha, log_beta as little-endian f64.
void save_checkpoint(const std::filesystem::path& path, const GradNetParams& params);
GradNetParams load_checkpoint(const std::filesystem::path& path);

}  // namespace modalsav
