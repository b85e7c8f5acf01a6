#include <random>

#include <benchmark/benchmark.h>

#include "modalsav/gradnet.hpp"
#include "modalsav/sav_solver.hpp"
#include "modalsav/spectral.hpp"

using namespace modalsav;

namespace {

struct Setup {
  ScaledStringParams string;
  ModalOperators ops;
  SolverConfig cfg;
  SolverState state;

  explicit Setup(int modes) : string{150.0, 1.03, 150.0, 3.0, 2e-4, modes}, ops(build_modal_operators(string)) {
    cfg.time_step = 1.0 / 88200.0;
    state = SolverState(modes, 0.0);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1e-3, 1e-3);
    for (double& q : state.q) q = u(rng);
  }
};

void run_steps(benchmark::State& st, Setup& s, PotentialField& field) {
  s.state.psi = quadratise(field.potential(s.state.q), s.cfg.eps);
  SavSolver solver(s.ops, s.string.nu, s.cfg, mode_shape(0.3, s.string.modes));
  std::size_t n = 0;
  for (auto _ : st) {
    solver.step(s.state, field, 0.0, n++);
    benchmark::DoNotOptimize(s.state.psi);
  }
  st.SetItemsProcessed(static_cast<std::int64_t>(st.iterations()));
}

void BM_StepOracle(benchmark::State& st) {
  Setup s(static_cast<int>(st.range(0)));
  SpectralNonlinearity field(s.ops);
  run_steps(st, s, field);
}

void BM_StepGradNet(benchmark::State& st) {
  Setup s(static_cast<int>(st.range(0)));
  std::mt19937_64 rng(2);
  const auto params = gradnet_init(s.string.modes, static_cast<int>(st.range(1)), 0.01, rng);
  GradNetField field(params);
  run_steps(st, s, field);
}

void BM_StepLinear(benchmark::State& st) {
  Setup s(static_cast<int>(st.range(0)));
  ZeroField field(s.string.modes);
  run_steps(st, s, field);
}

}  // namespace

BENCHMARK(BM_StepLinear)->Arg(20)->Arg(75);
BENCHMARK(BM_StepOracle)->Arg(20)->Arg(75);
BENCHMARK(BM_StepGradNet)->Args({20, 200})->Args({75, 200});
