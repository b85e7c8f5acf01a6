#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <doctest.h>

#include "modalsav/errors.hpp"
#include "modalsav/oracles.hpp"
#include "modalsav/sav_solver.hpp"
#include "modalsav/spectral.hpp"
#include "test_util.hpp"

using namespace modalsav;

namespace {

// Constant potential with a fixed force vector (not a gradient field; only
// used to probe the auxiliary-variable algebra).
class FixedField final : public PotentialField {
 public:
  FixedField(Vec f, double v) : f_(std::move(f)), v_(v) {}
  int dimension() const override { return static_cast<int>(f_.size()); }
  double potential(std::span<const double>) override { return v_; }
  void force(std::span<const double>, std::span<double> out) override {
    std::copy(f_.begin(), f_.end(), out.begin());
  }

 private:
  Vec f_;
  double v_;
};

class NanField final : public PotentialField {
 public:
  explicit NanField(int m) : m_(m) {}
  int dimension() const override { return m_; }
  double potential(std::span<const double>) override { return 0.0; }
  void force(std::span<const double>, std::span<double> out) override {
    for (double& v : out) v = std::numeric_limits<double>::quiet_NaN();
  }

 private:
  int m_;
};

ScaledStringParams string_params(int modes, double nu = 150.0, double sigma0 = 3.0, double sigma1 = 2e-4) {
  return {150.0, 1.03, nu, sigma0, sigma1, modes};
}

SolverConfig config(double fs, double lambda0 = 1.0) {
  SolverConfig cfg;
  cfg.time_step = 1.0 / fs;
  cfg.lambda0 = lambda0;
  return cfg;
}

SolverState random_state(int m, double amp, PotentialField& field, double eps, std::mt19937_64& rng) {
  SolverState s(m, 0.0);
  s.q = testutil::uniform_vec(m, amp, rng);
  s.p = testutil::uniform_vec(m, amp * 300.0, rng);
  s.psi = quadratise(field.potential(s.q), eps);
  return s;
}

}  // namespace

TEST_CASE("quadratise") {
  CHECK(quadratise(0.0, 1e-12) == std::sqrt(1e-12));
  CHECK(quadratise(2.0, 0.0) == 2.0);
  CHECK_THROWS_AS(quadratise(-1e-300, 1e-12), std::logic_error);
}

TEST_CASE("g_std") {
  SUBCASE("gradient of sqrt(2V + eps) for the oracle") {
    const auto ops = build_modal_operators(string_params(6));
    SpectralNonlinearity field(ops);
    std::mt19937_64 rng(21);
    const auto q = testutil::uniform_vec(6, 0.01, rng);
    Vec g(6);
    g_std(field, q, 1e-12, g);
    const auto fd = oracle::central_gradient(
        [&](std::span<const double> x) { return std::sqrt(2 * field.potential(x) + 1e-12); }, q, 1e-8);
    CHECK(oracle::relative_error(g, fd) < 1e-6);
  }
  SUBCASE("scales as 1/sqrt(eps) when V = 0") {
    FixedField field({1.0, -2.0}, 0.0);
    Vec g1(2), g2(2);
    const Vec q(2, 0.0);
    g_std(field, q, 1e-12, g1);
    g_std(field, q, 4e-12, g2);
    CHECK(g1[0] == doctest::Approx(-1e6));
    CHECK(g1[1] / g2[1] == doctest::Approx(2.0).epsilon(1e-14));
  }
}

TEST_CASE("g_mod") {
  const SolverConfig cfg = config(32000.0, 0.8);
  const Vec p{0.5, -2.0, 0.0, 1.0};
  Vec out(4);
  SUBCASE("consistent psi gives zero") {
    g_mod_from_potential(0.3, p, std::sqrt(0.6 + cfg.eps), cfg, out);
    for (double v : out) CHECK(v == 0.0);
  }
  SUBCASE("zero momentum gives zero") {
    const Vec zero(4, 0.0);
    g_mod_from_potential(0.3, zero, 5.0, cfg, out);
    for (double v : out) CHECK(v == 0.0);
  }
  SUBCASE("projection onto p cancels the drift") {
    const double psi = 2.0;
    const double root = std::sqrt(0.6 + cfg.eps);
    g_mod_from_potential(0.3, p, psi, cfg, out);
    CHECK(dot(out, p) == doctest::Approx(-cfg.lambda0 * (psi - root)).epsilon(1e-14));
    CHECK(out[2] == 0.0);
    CHECK(out[0] == out[3]);
  }
  SUBCASE("field overload evaluates V at q") {
    FixedField field({0.0, 0.0, 0.0, 0.0}, 0.3);
    Vec a(4), b(4);
    g_mod(field, Vec(4, 0.0), p, 2.0, cfg, a);
    g_mod_from_potential(0.3, p, 2.0, cfg, b);
    CHECK(a == b);
  }
}

TEST_CASE("Sherman-Morrison solve matches dense LU") {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int m : {1, 2, 7, 40}) {
    Vec sigma(m), g = testutil::uniform_vec(m, 30.0, rng), rhs = testutil::uniform_vec(m, 1.0, rng);
    for (double& s : sigma) s = 10.0 * u(rng);
    const double k = 1.0 / 44100.0, c = 0.25 * k * k * 150.0 * 150.0;
    Vec x(m);
    sherman_morrison_apply(sigma, c, g, rhs, k, x);
    Matrix a(m, m);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) a(i, j) = c * g[i] * g[j] + (i == j ? 1.0 + k * sigma[i] : 0.0);
    }
    CHECK_MESSAGE(oracle::relative_error(x, oracle::lu_solve(a, rhs)) < 1e-13, "M=" << m);
  }
  Vec bad(2);
  CHECK_THROWS_AS(sherman_morrison_apply(Vec(3), 1.0, Vec(3), Vec(3), 1.0, bad), std::invalid_argument);
}

TEST_CASE("single step matches the dense reference") {
  std::mt19937_64 rng(23);
  const auto s = string_params(8);
  const auto ops = build_modal_operators(s);
  SpectralNonlinearity field(ops);
  for (double lambda0 : {0.0, 1.0}) {
    const auto cfg = config(32000.0, lambda0);
    const auto w = mode_shape(0.3, 8);
    SavSolver solver(ops, s.nu, cfg, w);
    for (int trial = 0; trial < 10; ++trial) {
      auto state = random_state(8, 0.01, field, cfg.eps, rng);
      state.psi *= 1.0 + 0.01 * trial;  // inconsistent psi exercises the control term
      const auto ref = oracle::reference_step(state, field, 123.0, ops, s.nu, cfg, w);
      solver.step(state, field, 123.0, 0);
      CHECK(oracle::relative_error(state.p, ref.p) < 1e-12);
      CHECK(oracle::relative_error(state.q, ref.q) < 1e-12);
      CHECK(state.psi == doctest::Approx(ref.psi).epsilon(1e-12));
    }
  }
}

TEST_CASE("rest is a fixed point") {
  const auto s = string_params(10);
  const auto ops = build_modal_operators(s);
  SpectralNonlinearity field(ops);
  const auto cfg = config(32000.0);
  SavSolver solver(ops, s.nu, cfg, mode_shape(0.3, 10));
  SolverState state(10, std::sqrt(cfg.eps));
  for (std::size_t n = 0; n < 1000; ++n) solver.step(state, field, 0.0, n);
  for (int i = 0; i < 10; ++i) {
    CHECK(state.q[i] == 0.0);
    CHECK(state.p[i] == 0.0);
  }
  CHECK(state.psi == std::sqrt(cfg.eps));
  CHECK(energy(state, ops, s.nu, cfg.time_step) == doctest::Approx(0.5 * s.nu * s.nu * cfg.eps));
}

TEST_CASE("linear scheme") {
  SUBCASE("matches a per-mode scalar recurrence") {
    const auto s = string_params(3);
    const auto ops = build_modal_operators(s);
    ZeroField field(3);
    const auto cfg = config(32000.0);
    ExcitationParams exc{3e4, 1e-3, 0.3, 0.7};
    const std::size_t steps = 4000;
    const auto traj = simulate(s, ops, field, exc, cfg, steps);
    const auto w = mode_shape(0.3, 3);
    const double k = cfg.time_step;
    for (int m = 0; m < 3; ++m) {
      double q = 0.0, p = 0.0, worst = 0.0, peak = 0.0;
      for (std::size_t n = 0; n + 1 < steps; ++n) {
        const double fe = excitation_force((n + 0.5) * k, exc);
        const double qh = q + 0.5 * k * p;
        const double pn = ((1 - k * ops.damping[m]) * p + k * (-ops.stiffness[m] * qh + w[m] * fe)) /
                          (1 + k * ops.damping[m]);
        q = qh + 0.5 * k * pn;
        p = pn;
        worst = std::max(worst, std::abs(traj.q_at(n + 1)[m] - q));
        peak = std::max(peak, std::abs(q));
      }
      CHECK(worst / peak < 1e-10);
    }
  }
  SUBCASE("undamped oscillation at the discrete frequency") {
    const auto s = string_params(1, 0.0, 0.0, 0.0);
    const auto ops = build_modal_operators(s);
    ZeroField field(1);
    const auto cfg = config(16000.0);
    const double k = cfg.time_step, omega = std::sqrt(ops.stiffness[0]);
    const double wd = 2.0 / k * std::asin(omega * k / 2.0);
    const double a = 1e-3;
    SolverState init(1, std::sqrt(cfg.eps));
    init.p[0] = 2.0 * a * std::sin(wd * k / 2) / k;
    const auto traj = simulate(s, ops, field, {0.0, 1e-3, 0.5, 0.5}, cfg, 16000, init);
    double worst = 0.0;
    for (std::size_t n = 0; n < traj.steps(); ++n) {
      const double exact = a * std::sin(wd * n * k) * std::cos(wd * k / 2);
      worst = std::max(worst, std::abs(traj.q_at(n)[0] - exact));
    }
    CHECK(worst / a < 1e-9);
  }
}

TEST_CASE("energy") {
  SUBCASE("lossless nonlinear string conserves energy") {
    const auto s = string_params(3, 150.0, 0.0, 0.0);
    const auto ops = build_modal_operators(s);
    SpectralNonlinearity field(ops);
    const auto cfg = config(44100.0);
    std::mt19937_64 rng(24);
    auto state = random_state(3, 0.03, field, cfg.eps, rng);
    SavSolver solver(ops, s.nu, cfg, mode_shape(0.3, 3));
    const double e0 = energy(state, ops, s.nu, cfg.time_step);
    double worst = 0.0;
    for (std::size_t n = 0; n < 100000; ++n) {
      solver.step(state, field, 0.0, n);
      if (n % 100 == 0) worst = std::max(worst, std::abs(energy(state, ops, s.nu, cfg.time_step) / e0 - 1));
    }
    CHECK(worst < 1e-9);
  }
  SUBCASE("damped string never gains energy") {
    const auto s = string_params(10);
    const auto ops = build_modal_operators(s);
    SpectralNonlinearity field(ops);
    const auto cfg = config(32000.0);
    std::mt19937_64 rng(25);
    auto state = random_state(10, 0.02, field, cfg.eps, rng);
    SavSolver solver(ops, s.nu, cfg, mode_shape(0.3, 10));
    double prev = energy(state, ops, s.nu, cfg.time_step);
    for (std::size_t n = 0; n < 20000; ++n) {
      solver.step(state, field, 0.0, n);
      const double e = energy(state, ops, s.nu, cfg.time_step);
      CHECK(e <= prev * (1 + 1e-12));
      prev = e;
    }
  }
}

TEST_CASE("simulate") {
  const auto s = string_params(8);
  const auto ops = build_modal_operators(s);
  SpectralNonlinearity field(ops);
  const auto cfg = config(32000.0);

  SUBCASE("silent excitation stays at rest") {
    const auto traj = simulate(s, ops, field, {0.0, 1e-3, 0.3, 0.7}, cfg, 500);
    for (double v : traj.q) CHECK(v == 0.0);
    for (double v : traj.output) CHECK(v == 0.0);
  }
  SUBCASE("decimation keeps every d-th state") {
    ExcitationParams exc{3e4, 1e-3, 0.3, 0.7};
    const auto full = simulate(s, ops, field, exc, cfg, 301);
    SolverState rest(8, std::sqrt(cfg.eps));
    const auto dec = simulate(s, ops, field, exc, cfg, 301, rest, 3);
    REQUIRE(dec.steps() == 101);
    CHECK(dec.decimation == 3);
    for (std::size_t n = 0; n < dec.steps(); ++n) {
      for (int i = 0; i < 8; ++i) CHECK(dec.q_at(n)[i] == full.q_at(3 * n)[i]);
    }
    CHECK_THROWS_AS(simulate(s, ops, field, exc, cfg, 10, rest, 0), std::invalid_argument);
  }
  SUBCASE("output is the modal superposition at xo") {
    ExcitationParams exc{3e4, 1e-3, 0.3, 0.7};
    const auto traj = simulate(s, ops, field, exc, cfg, 200);
    const auto w = mode_shape(0.7, 8);
    for (std::size_t n = 0; n < traj.steps(); ++n) CHECK(traj.output[n] == dot(w, traj.q_at(n)));
  }
  SUBCASE("unstable discretisation is refused") {
    const ScaledStringParams fast{174.62, 1.1, 150.0, 0.0, 0.0, 75};
    const auto fops = build_modal_operators(fast);
    ZeroField zero(75);
    CHECK_THROWS_AS(simulate(fast, fops, zero, {1.0, 1e-3, 0.3, 0.7}, config(8000.0), 10), InvalidParameter);
  }
  SUBCASE("non-finite state raises divergence") {
    NanField nan_field(8);
    CHECK_THROWS_AS(simulate(s, ops, nan_field, {1.0, 1e-3, 0.3, 0.7}, cfg, 10), SolverDiverged);
  }
  SUBCASE("bad solver configuration") {
    auto bad = cfg;
    bad.eps = 0.0;
    CHECK_THROWS_AS(SavSolver(ops, s.nu, bad, Vec(8)), std::invalid_argument);
    CHECK_THROWS_AS(SavSolver(ops, s.nu, cfg, Vec(7)), std::invalid_argument);
  }
}

TEST_CASE("trajectory files") {
  const auto dir = testutil::scratch_dir("sav_mtrj");
  const auto s = string_params(5);
  const auto ops = build_modal_operators(s);
  SpectralNonlinearity field(ops);
  const auto traj = simulate(s, ops, field, {3e4, 1e-3, 0.3, 0.7}, config(32000.0), 257);
  save_trajectory(dir / "t.mtrj", traj);
  const auto back = load_trajectory(dir / "t.mtrj");
  CHECK(back.modes == traj.modes);
  CHECK(back.sample_rate == traj.sample_rate);
  CHECK(back.lambda0 == traj.lambda0);
  CHECK(back.decimation == traj.decimation);
  CHECK(back.excitation.amplitude == traj.excitation.amplitude);
  CHECK(back.excitation.position == traj.excitation.position);
  CHECK(back.q == traj.q);
  CHECK(back.p == traj.p);
  CHECK(back.psi == traj.psi);
  CHECK(back.output == traj.output);

  const auto bytes = testutil::read_file(dir / "t.mtrj");
  testutil::write_file(dir / "short.mtrj", bytes.substr(0, bytes.size() - 8));
  CHECK_THROWS_AS(load_trajectory(dir / "short.mtrj"), FormatError);
  testutil::write_file(dir / "magic.mtrj", "XXXX" + bytes.substr(4));
  CHECK_THROWS_AS(load_trajectory(dir / "magic.mtrj"), FormatError);
  CHECK_THROWS_AS(load_trajectory(dir / "none.mtrj"), FormatError);
}
