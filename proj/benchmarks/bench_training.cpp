#include <random>

#include <benchmark/benchmark.h>

#include "modalsav/dataset.hpp"
#include "modalsav/training.hpp"

using namespace modalsav;

namespace {

void BM_SegmentForwardBackward(benchmark::State& st) {
  DatasetSpec spec = desk_spec(DatasetRole::Train);
  spec.modes = static_cast<int>(st.range(0));
  spec.count = 1;
  spec.sample_rate = {88200.0, 88200.0};
  spec.duration = {0.01, 0.01};
  const Dataset data = generate(spec);
  const auto& entry = data.entries.front();
  const auto ctx = StringContext::from_draw(entry.draw, spec.eps, spec.lambda0);
  const std::size_t len = segment_steps(entry.draw.sample_rate);
  const Segment seg{0, 0, len, 0.0};

  std::mt19937_64 rng(3);
  const auto params = gradnet_init(spec.modes, static_cast<int>(st.range(1)), 0.01, rng);
  GradNetGradient grad(params);
  SegmentWorkspace ws;
  const bool backward = st.range(2) != 0;
  for (auto _ : st) {
    grad.set_zero();
    const auto r = forward_backward_segment(entry.trajectory, seg, ctx, params, backward ? &grad : nullptr, ws);
    benchmark::DoNotOptimize(r.loss);
  }
  st.SetItemsProcessed(static_cast<std::int64_t>(st.iterations() * (len - 1)));
}

}  // namespace

BENCHMARK(BM_SegmentForwardBackward)
    ->ArgNames({"modes", "hidden", "backward"})
    ->Args({20, 200, 0})
    ->Args({20, 200, 1})
    ->Args({75, 200, 1})
    ->Unit(benchmark::kMicrosecond);
