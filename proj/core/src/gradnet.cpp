#include "modalsav/gradnet.hpp"

#include <cassert>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "binary_io.hpp"

namespace modalsav {

namespace {

constexpr char kCheckpointMagic[5] = "GNCK";
constexpr std::uint32_t kCheckpointVersion = 1;

void check_dims(const GradNetParams& params, std::size_t q_size) {
  if (static_cast<int>(q_size) != params.modes) {
    throw std::invalid_argument("gradnet: input dimension does not match parameter record");
  }
}

}  // namespace

GradNetParams::GradNetParams(int m, int h, double slope)
    : modes(m),
      hidden(h),
      neg_slope(slope),
      weights(static_cast<std::size_t>(m) * static_cast<std::size_t>(h), 0.0),
      bias(static_cast<std::size_t>(h), 0.0),
      log_alpha(static_cast<std::size_t>(h), 0.0),
      log_beta(static_cast<std::size_t>(h), 0.0) {}

GradNetGradient::GradNetGradient(const GradNetParams& shape)
    : weights(shape.weights.size(), 0.0),
      bias(shape.bias.size(), 0.0),
      log_alpha(shape.log_alpha.size(), 0.0),
      log_beta(shape.log_beta.size(), 0.0) {}

void GradNetGradient::set_zero() {
  for (auto block : blocks()) std::fill(block.begin(), block.end(), 0.0);
}

void GradNetGradient::add(const GradNetGradient& other, double s) {
  auto dst = blocks();
  auto src = other.blocks();
  for (std::size_t b = 0; b < dst.size(); ++b) {
    assert(dst[b].size() == src[b].size());
    for (std::size_t i = 0; i < dst[b].size(); ++i) dst[b][i] += s * src[b][i];
  }
}

void GradNetGradient::scale(double s) {
  for (auto block : blocks()) {
    for (double& v : block) v *= s;
  }
}

double GradNetGradient::max_abs() const {
  double m = 0.0;
  for (auto block : blocks()) {
    for (double v : block) m = std::max(m, std::abs(v));
  }
  return m;
}

void GradNetTape::resize(int modes, int hidden) {
  const auto m = static_cast<std::size_t>(modes);
  const auto h = static_cast<std::size_t>(hidden);
  q.resize(m);
  projection.resize(h);
  z.resize(h);
  activation.resize(h);
  slope.resize(h);
  alpha.resize(h);
  beta.resize(h);
  ratio.resize(h);
}

GradNetScales gradnet_scales(const GradNetParams& params) {
  const auto h = static_cast<std::size_t>(params.hidden);
  GradNetScales s{Vec(h), Vec(h), Vec(h)};
  for (std::size_t i = 0; i < h; ++i) {
    s.alpha[i] = std::exp(params.log_alpha[i]);
    s.beta[i] = std::exp(params.log_beta[i]);
    s.ratio[i] = std::exp(params.log_alpha[i] - params.log_beta[i]);
  }
  return s;
}

double leaky_relu(double x, double neg_slope) { return x >= 0.0 ? x : neg_slope * x; }

double leaky_relu_antiderivative(double x, double neg_slope) {
  return x >= 0.0 ? 0.5 * x * x : 0.5 * neg_slope * x * x;
}

GradNetParams gradnet_init(int modes, int hidden, double neg_slope, std::mt19937_64& rng) {
  if (modes < 1 || hidden < 1) throw std::invalid_argument("gradnet_init: sizes must be positive");
  if (!(neg_slope > 0.0)) throw std::invalid_argument("gradnet_init: neg_slope must be positive");
  GradNetParams params(modes, hidden, neg_slope);
  // Kaiming normal, fan-in mode, leaky-ReLU gain.
  const double gain = std::sqrt(2.0 / (1.0 + neg_slope * neg_slope));
  std::normal_distribution<double> weight_dist(0.0, gain / std::sqrt(static_cast<double>(modes)));
  for (double& w : params.weights) w = weight_dist(rng);
  std::normal_distribution<double> log_dist(0.0, 0.01);
  for (double& a : params.log_alpha) a = log_dist(rng);
  for (double& b : params.log_beta) b = log_dist(rng);
  return params;
}

namespace {

template <typename Scale>
void record_impl(const GradNetParams& params, std::span<const double> q, GradNetTape& tape, Scale scale) {
  check_dims(params, q.size());
  const auto m = static_cast<std::size_t>(params.modes);
  const auto h = static_cast<std::size_t>(params.hidden);
  tape.resize(params.modes, params.hidden);
  std::copy(q.begin(), q.end(), tape.q.begin());
  const double slope = params.neg_slope;
  for (std::size_t i = 0; i < h; ++i) {
    const double* row = params.weights.data() + i * m;
    double a = 0.0;
    for (std::size_t j = 0; j < m; ++j) a += row[j] * q[j];
    scale(i, tape.alpha[i], tape.beta[i], tape.ratio[i]);
    const double z = tape.beta[i] * a + params.bias[i];
    tape.projection[i] = a;
    tape.z[i] = z;
    tape.activation[i] = z >= 0.0 ? z : slope * z;
    tape.slope[i] = z >= 0.0 ? 1.0 : slope;
  }
}

}  // namespace

void gradnet_record(const GradNetParams& params, std::span<const double> q, GradNetTape& tape) {
  record_impl(params, q, tape, [&](std::size_t i, double& alpha, double& beta, double& ratio) {
    alpha = std::exp(params.log_alpha[i]);
    beta = std::exp(params.log_beta[i]);
    ratio = std::exp(params.log_alpha[i] - params.log_beta[i]);
  });
}

void gradnet_record(const GradNetParams& params, const GradNetScales& scales, std::span<const double> q,
                    GradNetTape& tape) {
  if (scales.alpha.size() != static_cast<std::size_t>(params.hidden)) {
    throw std::invalid_argument("gradnet_record: scales do not match the parameter shape");
  }
  record_impl(params, q, tape, [&](std::size_t i, double& alpha, double& beta, double& ratio) {
    alpha = scales.alpha[i];
    beta = scales.beta[i];
    ratio = scales.ratio[i];
  });
}

void gradnet_force_from_tape(const GradNetParams& params, const GradNetTape& tape, std::span<double> out) {
  const auto m = static_cast<std::size_t>(params.modes);
  const auto h = static_cast<std::size_t>(params.hidden);
  assert(out.size() == m);
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < h; ++i) {
    const double c = -tape.alpha[i] * tape.activation[i];
    if (c == 0.0) continue;
    const double* row = params.weights.data() + i * m;
    for (std::size_t j = 0; j < m; ++j) out[j] += c * row[j];
  }
}

double gradnet_potential_from_tape(const GradNetParams& params, const GradNetTape& tape) {
  double v = 0.0;
  for (std::size_t i = 0; i < tape.z.size(); ++i) {
    v += tape.ratio[i] * leaky_relu_antiderivative(tape.z[i], params.neg_slope);
  }
  return v;
}

void gradnet_force(const GradNetParams& params, std::span<const double> q, std::span<double> out,
                   GradNetTape* tape) {
  if (out.size() != q.size()) throw std::invalid_argument("gradnet_force: output size mismatch");
  GradNetTape local;
  GradNetTape& t = tape != nullptr ? *tape : local;
  gradnet_record(params, q, t);
  gradnet_force_from_tape(params, t, out);
}

double gradnet_potential(const GradNetParams& params, std::span<const double> q) {
  GradNetTape tape;
  gradnet_record(params, q, tape);
  return gradnet_potential_from_tape(params, tape);
}

void gradnet_vjp_input(const GradNetParams& params, const GradNetTape& tape,
                       std::span<const double> upstream, std::span<double> out) {
  const auto m = static_cast<std::size_t>(params.modes);
  const auto h = static_cast<std::size_t>(params.hidden);
  assert(upstream.size() == m && out.size() == m);
  assert(tape.z.size() == h);
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < h; ++i) {
    const double* row = params.weights.data() + i * m;
    double wu = 0.0;
    for (std::size_t j = 0; j < m; ++j) wu += row[j] * upstream[j];
    const double c = -tape.alpha[i] * tape.slope[i] * tape.beta[i] * wu;
    if (c == 0.0) continue;
    for (std::size_t j = 0; j < m; ++j) out[j] += c * row[j];
  }
}

void gradnet_vjp_params(const GradNetParams& params, const GradNetTape& tape,
                        std::span<const double> force_upstream, double potential_upstream,
                        GradNetGradient& grad) {
  const auto m = static_cast<std::size_t>(params.modes);
  const auto h = static_cast<std::size_t>(params.hidden);
  assert(force_upstream.size() == m);
  assert(grad.weights.size() == m * h);
  const std::span<const double> q = tape.q;
  for (std::size_t i = 0; i < h; ++i) {
    double* grow = grad.weights.data() + i * m;
    const double* row = params.weights.data() + i * m;
    double wu = 0.0;
    for (std::size_t j = 0; j < m; ++j) wu += row[j] * force_upstream[j];
    const double alpha = tape.alpha[i];
    const double beta = tape.beta[i];
    const double act = tape.activation[i];
    const double h_i = alpha * act;

    // Force term L = -(W u)^T (alpha * sigma(z)).
    const double zbar_force = -wu * alpha * tape.slope[i];
    // Potential term V = sum (alpha/beta) phi(z): dV/dz = (alpha/beta) sigma(z).
    const double ratio = tape.ratio[i];
    const double phi = leaky_relu_antiderivative(tape.z[i], params.neg_slope);
    const double zbar_pot = potential_upstream * ratio * act;
    const double zbar = zbar_force + zbar_pot;

    grad.bias[i] += zbar;
    grad.log_alpha[i] += -wu * h_i + potential_upstream * ratio * phi;
    // d/dlog_beta through z = beta a + b, plus the 1/beta prefactor of V.
    grad.log_beta[i] += zbar * tape.projection[i] * beta - potential_upstream * ratio * phi;
    const double zq = zbar * beta;
    for (std::size_t j = 0; j < m; ++j) grow[j] += zq * q[j] - h_i * force_upstream[j];
  }
}

void gradnet_vjp(const GradNetParams& params, const GradNetTape& tape, std::span<const double> force_upstream,
                 double potential_upstream, std::span<double> input_grad, GradNetGradient& grad) {
  const auto m = static_cast<std::size_t>(params.modes);
  const auto h = static_cast<std::size_t>(params.hidden);
  assert(force_upstream.size() == m && input_grad.size() == m);
  const std::span<const double> q = tape.q;
  std::fill(input_grad.begin(), input_grad.end(), 0.0);
  for (std::size_t i = 0; i < h; ++i) {
    double* grow = grad.weights.data() + i * m;
    const double* row = params.weights.data() + i * m;
    double wu = 0.0;
    for (std::size_t j = 0; j < m; ++j) wu += row[j] * force_upstream[j];
    const double alpha = tape.alpha[i];
    const double beta = tape.beta[i];
    const double act = tape.activation[i];
    const double h_i = alpha * act;
    const double ratio = tape.ratio[i];
    const double phi = leaky_relu_antiderivative(tape.z[i], params.neg_slope);
    const double zbar = -wu * alpha * tape.slope[i] + potential_upstream * ratio * act;

    grad.bias[i] += zbar;
    grad.log_alpha[i] += -wu * h_i + potential_upstream * ratio * phi;
    grad.log_beta[i] += zbar * tape.projection[i] * beta - potential_upstream * ratio * phi;
    const double zq = zbar * beta;
    // dz/dq = beta W, so the input adjoint is W^T (zbar * beta).
    for (std::size_t j = 0; j < m; ++j) {
      grow[j] += zq * q[j] - h_i * force_upstream[j];
      input_grad[j] += zq * row[j];
    }
  }
}

GradNetField::GradNetField(const GradNetParams& params) : params_(&params), scales_(gradnet_scales(params)) {
  tape_.resize(params.modes, params.hidden);
}

double GradNetField::potential(std::span<const double> q) {
  gradnet_record(*params_, scales_, q, tape_);
  return gradnet_potential_from_tape(*params_, tape_);
}

void GradNetField::force(std::span<const double> q, std::span<double> out) {
  gradnet_record(*params_, scales_, q, tape_);
  gradnet_force_from_tape(*params_, tape_, out);
}

double GradNetField::evaluate(std::span<const double> q, std::span<double> force_out) {
  gradnet_record(*params_, scales_, q, tape_);
  gradnet_force_from_tape(*params_, tape_, force_out);
  return gradnet_potential_from_tape(*params_, tape_);
}

void save_checkpoint(const std::filesystem::path& path, const GradNetParams& params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
  detail::write_magic(os, kCheckpointMagic);
  detail::write_le<std::uint32_t>(os, kCheckpointVersion);
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(params.modes));
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(params.hidden));
  detail::write_le<double>(os, params.neg_slope);
  for (auto block : params.blocks()) detail::write_doubles(os, block);
  if (!os) throw std::runtime_error("failed writing checkpoint: " + path.string());
}

GradNetParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path.string());
  detail::expect_magic(is, kCheckpointMagic);
  const auto version = detail::read_le<std::uint32_t>(is);
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto modes = detail::read_le<std::uint32_t>(is);
  const auto hidden = detail::read_le<std::uint32_t>(is);
  const auto slope = detail::read_le<double>(is);
  if (modes == 0 || hidden == 0 || modes > (1u << 20) || hidden > (1u << 24)) {
    throw FormatError("checkpoint has implausible dimensions");
  }
  GradNetParams params(static_cast<int>(modes), static_cast<int>(hidden), slope);
  for (auto block : params.blocks()) detail::read_doubles(is, block);
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes in checkpoint");
  return params;
}

}  // namespace modalsav
