#include <cmath>
#include <cstring>
#include <numbers>
#include <random>
#include <sstream>

#include <doctest.h>

#include "modalsav/audio.hpp"
#include "modalsav/errors.hpp"
#include "modalsav/evaluation.hpp"
#include "modalsav/metrics.hpp"
#include "test_util.hpp"

using namespace modalsav;
using std::numbers::pi;

namespace {

Trajectory make_traj(int modes, std::size_t steps, double fs, std::mt19937_64& rng) {
  Trajectory t;
  t.modes = modes;
  t.sample_rate = fs;
  t.q = testutil::uniform_vec(steps * modes, 1.0, rng);
  t.p = testutil::uniform_vec(steps * modes, 1.0, rng);
  t.psi.assign(steps, 1.0);
  t.output = testutil::uniform_vec(steps, 1.0, rng);
  return t;
}

Vec sine(double f, double fs, std::size_t n, double amp = 1.0) {
  Vec x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = amp * std::sin(2 * pi * f * static_cast<double>(i) / fs);
  return x;
}

DatasetSpec eval_spec() {
  DatasetSpec s = desk_spec(DatasetRole::Test);
  s.modes = 6;
  s.count = 3;
  s.seed = 12;
  s.sample_rate = {16000.0, 16000.0};
  s.duration = {0.15, 0.15};
  return s;
}

}  // namespace

TEST_CASE("relative errors") {
  const Vec t{1.0, -2.0, 2.0};
  CHECK(mse_rel(t, t) == 0.0);
  CHECK(mae_rel(t, t) == 0.0);
  const Vec zero(3, 0.0);
  CHECK(mse_rel(zero, t) == 1.0);
  CHECK(mae_rel(zero, t) == 1.0);
  const Vec doubled{2.0, -4.0, 4.0};
  CHECK(mse_rel(doubled, t) == 1.0);
  const Vec shifted{2.0, -2.0, 2.0};
  CHECK(mse_rel(shifted, t) == doctest::Approx(1.0 / 9.0));
  CHECK(mae_rel(shifted, t) == doctest::Approx(1.0 / 5.0));
  CHECK_THROWS_AS(mse_rel(t, zero), UndefinedMetric);
  CHECK_THROWS_AS(mae_rel(t, zero), UndefinedMetric);
  CHECK_THROWS_AS(mse_rel(t, Vec(2, 1.0)), std::invalid_argument);

  // For a constant relative error sqrt(mse) equals mae; generally they stay
  // within a small factor on smooth signals.
  std::mt19937_64 rng(1);
  const auto x = sine(100.0, 8000.0, 800);
  auto y = x;
  for (double& v : y) v += 0.01 * std::uniform_real_distribution<double>(-1, 1)(rng);
  const double r = std::sqrt(mse_rel(y, x)) / mae_rel(y, x);
  CHECK(r > 0.2);
  CHECK(r < 5.0);
}

TEST_CASE("per-mode MSE") {
  std::mt19937_64 rng(2);
  const auto a = make_traj(3, 50, 1000.0, rng);
  auto b = a;
  for (double v : per_mode_mse(a, b, 50)) CHECK(v == 0.0);
  for (std::size_t n = 0; n < 50; ++n) b.q[n * 3 + 1] += 2.0;
  const auto e = per_mode_mse(b, a, 10);
  CHECK(e[0] == 0.0);
  CHECK(e[1] == doctest::Approx(4.0));
  CHECK(e[2] == 0.0);
  CHECK_THROWS_AS(per_mode_mse(a, b, 0), std::invalid_argument);
  CHECK_THROWS_AS(per_mode_mse(a, b, 51), std::invalid_argument);
  CHECK(window_samples(32000.0, 0.1) == 3200u);
}

TEST_CASE("trajectory report") {
  std::mt19937_64 rng(3);
  const auto target = make_traj(2, 400, 1000.0, rng);
  const auto r = evaluate_trajectory(target, target, target, 0.1);
  CHECK(r.q_mse_initial == 0.0);
  CHECK(r.w_mae_full == 0.0);
  REQUIRE(r.per_mode_linear.size() == 2);

  auto pred = target;
  for (std::size_t n = 0; n < 100; ++n) pred.output[n] = 0.0;
  const auto r2 = evaluate_trajectory(pred, target, target, 0.1);
  CHECK(r2.w_mse_initial == 1.0);
  CHECK(r2.w_mse_full > 0.0);
  CHECK(r2.w_mse_full < 1.0);
  CHECK(r2.q_mse_full == 0.0);

  auto shorter = target;
  shorter.psi.pop_back();
  CHECK_THROWS_AS(evaluate_trajectory(shorter, target, target), std::invalid_argument);

  SUBCASE("aggregation is order independent") {
    std::vector<MetricsReport> reps;
    for (int i = 0; i < 5; ++i) {
      auto p = make_traj(2, 400, 1000.0, rng);
      reps.push_back(evaluate_trajectory(p, target, target, 0.1));
    }
    auto rev = reps;
    std::swap(rev[0], rev[4]);
    std::swap(rev[1], rev[3]);
    const auto a = aggregate(reps), b = aggregate(rev);
    CHECK(a.q_mse_initial == doctest::Approx(b.q_mse_initial).epsilon(1e-14));
    CHECK(a.per_mode_predicted[1] == doctest::Approx(b.per_mode_predicted[1]).epsilon(1e-14));
    double mean = 0.0;
    for (const auto& x : reps) mean += x.w_mae_full / 5.0;
    CHECK(a.w_mae_full == doctest::Approx(mean));
    const auto csv = metrics_csv(a);
    CHECK(csv.rfind("metric,value\nmse_rel_q_initial,", 0) == 0);
    CHECK(csv.find("mode_mse_linear_2,") != std::string::npos);
  }
}

TEST_CASE("dataset evaluation") {
  const Dataset data = generate(eval_spec());
  SUBCASE("oracle against its own targets is exact") {
    const auto ev = evaluate_dataset(data, FieldKind::Oracle, nullptr, 2);
    CHECK(ev.model.q_mse_initial == 0.0);
    CHECK(ev.model.w_mae_full == 0.0);
    for (double v : ev.model.per_mode_predicted) CHECK(v == 0.0);
    CHECK(ev.linear.q_mse_initial > 0.0);
    CHECK(ev.per_trajectory.size() == 3);
    const auto csv = evaluation_csv(ev);
    CHECK(csv.rfind("metric,model,linear\nmse_rel_q_initial,0,", 0) == 0);
    CHECK(csv.find("mode_mse_6,0,") != std::string::npos);
  }
  SUBCASE("linear field reproduces the linear baseline") {
    const auto ev = evaluate_dataset(data, FieldKind::Linear, nullptr, 1);
    CHECK(ev.model.q_mse_full == ev.linear.q_mse_full);
  }
  SUBCASE("results do not depend on the worker count") {
    std::mt19937_64 rng(4);
    const auto model = gradnet_init(6, 12, 0.01, rng);
    const auto a = evaluate_dataset(data, model, 1);
    const auto b = evaluate_dataset(data, model, 3);
    CHECK(evaluation_csv(a) == evaluation_csv(b));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(evaluate_dataset(Dataset{}, FieldKind::Oracle, nullptr), std::invalid_argument);
    CHECK_THROWS_AS(simulate_draw(data.entries[0].draw, FieldKind::GradNet), std::invalid_argument);
    GradNetParams wrong(5, 3, 0.01);
    CHECK_THROWS_AS(simulate_draw(data.entries[0].draw, FieldKind::GradNet, &wrong), std::invalid_argument);
  }
}

TEST_CASE("pitch glide") {
  SUBCASE("pure tone has none") {
    const auto x = sine(110.0, 16000.0, 16000);
    CHECK(std::abs(pitch_glide(x, 16000.0)) < 1e-3);
  }
  SUBCASE("falling chirp") {
    const double fs = 16000.0;
    Vec x(16000);
    double phase = 0.0;
    for (std::size_t n = 0; n < x.size(); ++n) {
      const double f = 120.0 - 20.0 * static_cast<double>(n) / fs;
      phase += 2 * pi * f / fs;
      x[n] = std::sin(phase);
    }
    // Head centre 0.05 s -> 119 Hz, tail centre 0.75 s -> 105 Hz.
    CHECK(pitch_glide(x, fs) == doctest::Approx(119.0 / 105.0 - 1.0).epsilon(0.01));
  }
  SUBCASE("stiff nonlinear string glides downwards") {
    DrawParams d;
    d.string = {150.0, 1.03, 150.0, 3.0, 2e-4, 20};
    d.excitation = {4e4, 1e-3, 0.3, 0.7};
    d.sample_rate = 32000.0;
    d.duration = 1.0;
    const auto traj = simulate_draw(d, FieldKind::Oracle);
    CHECK(pitch_glide(first_mode(traj), d.sample_rate) > 0.005);
    const auto lin = simulate_draw(d, FieldKind::Linear);
    CHECK(std::abs(pitch_glide(first_mode(lin), d.sample_rate)) < 1e-3);
  }
  CHECK_THROWS_AS(pitch_glide(Vec(100, 0.0), 1000.0), std::invalid_argument);
  CHECK_THROWS_AS(pitch_glide(Vec(1000, 0.0), 1000.0), UndefinedMetric);
}

TEST_CASE("frequency estimate") {
  const auto x = sine(440.0, 48000.0, 48000);
  CHECK(estimate_frequency(x, 48000.0, 0.1, 0.9) == doctest::Approx(440.0).epsilon(1e-6));
  CHECK(estimate_frequency(Vec(100, 1.0), 48000.0, 0.0, 1.0) == 0.0);
}

TEST_CASE("WAV output") {
  const auto dir = testutil::scratch_dir("eval_wav");
  const auto x = sine(220.0, 16000.0, 1601, 0.003);

  SUBCASE("float32 round trip") {
    write_wav(dir / "f.wav", x, 16000.0, WavMode::Float32);
    const auto w = read_wav(dir / "f.wav");
    CHECK(w.format == 3);
    CHECK(w.bits_per_sample == 32);
    CHECK(w.sample_rate == 16000u);
    REQUIRE(w.samples.size() == x.size());
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(w.samples[i] == static_cast<double>(static_cast<float>(x[i])));
    const auto bytes = testutil::read_file(dir / "f.wav");
    CHECK(bytes.substr(0, 4) == "RIFF");
    CHECK(bytes.substr(8, 4) == "WAVE");
    std::uint32_t riff = 0;
    std::memcpy(&riff, bytes.data() + 4, 4);
    CHECK(riff == bytes.size() - 8);
    CHECK(bytes.find("modalsav render mode=float32") != std::string::npos);
  }
  SUBCASE("pcm16 is peak-normalised to -1 dBFS") {
    write_wav(dir / "p.wav", x, 16000.0, WavMode::Pcm16);
    const auto w = read_wav(dir / "p.wav");
    CHECK(w.format == 1);
    CHECK(w.bits_per_sample == 16);
    double peak = 0.0;
    for (double v : w.samples) peak = std::max(peak, std::abs(v));
    CHECK(peak == doctest::Approx(std::pow(10.0, -1.0 / 20.0)).epsilon(1e-4));
    const auto bytes = testutil::read_file(dir / "p.wav");
    CHECK(bytes.find("LIST") != std::string::npos);
    CHECK(bytes.find("modalsav render mode=pcm16") != std::string::npos);
  }
  SUBCASE("deterministic bytes") {
    write_wav(dir / "a.wav", x, 16000.0, WavMode::Pcm16);
    write_wav(dir / "b.wav", x, 16000.0, WavMode::Pcm16);
    CHECK(testutil::read_file(dir / "a.wav") == testutil::read_file(dir / "b.wav"));
  }
  SUBCASE("silence in pcm16") {
    write_wav(dir / "s.wav", Vec(10, 0.0), 8000.0, WavMode::Pcm16);
    for (double v : read_wav(dir / "s.wav").samples) CHECK(v == 0.0);
  }
  SUBCASE("errors") {
    Vec bad = x;
    bad[5] = std::nan("");
    CHECK_THROWS_AS(write_wav(dir / "n.wav", bad, 16000.0, WavMode::Float32), std::invalid_argument);
    CHECK_THROWS_AS(write_wav(dir / "r.wav", x, 0.0, WavMode::Float32), std::invalid_argument);
    CHECK_THROWS_AS(wav_mode_from_string("mp3"), std::invalid_argument);
    CHECK(wav_mode_from_string(to_string(WavMode::Pcm16)) == WavMode::Pcm16);
    testutil::write_file(dir / "junk.wav", "RIFFxxxxWAVE");
    CHECK_THROWS_AS(read_wav(dir / "junk.wav"), FormatError);
  }
}

TEST_CASE("spectrogram") {
  const double fs = 8000.0;
  SUBCASE("dominant bin") {
    const auto x = sine(1000.0, fs, 8192);
    const auto s = spectrogram(x, fs, 1024, 256);
    CHECK(s.frequencies.size() == 513);
    CHECK(s.times.size() == (8192 - 1024) / 256 + 1);
    CHECK(s.times[1] == doctest::Approx(256.0 / fs));
    for (std::size_t f = 0; f < s.times.size(); ++f) {
      std::size_t best = 0;
      for (std::size_t b = 0; b < 513; ++b) {
        if (s.magnitudes[f * 513 + b] > s.magnitudes[f * 513 + best]) best = b;
      }
      CHECK(s.frequencies[best] == doctest::Approx(1000.0));
    }
  }
  SUBCASE("Parseval on a single frame") {
    std::mt19937_64 rng(5);
    const std::size_t n = 512;
    const auto x = testutil::uniform_vec(n, 1.0, rng);
    const auto s = spectrogram(x, fs, n, n);
    REQUIRE(s.times.size() == 1);
    double time_energy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = 0.5 - 0.5 * std::cos(2 * pi * static_cast<double>(i) / n);
      time_energy += w * w * x[i] * x[i];
    }
    double freq_energy = 0.0;
    for (std::size_t b = 0; b <= n / 2; ++b) {
      const double m2 = s.magnitudes[b] * s.magnitudes[b];
      freq_energy += (b == 0 || b == n / 2) ? m2 : 2 * m2;
    }
    CHECK(std::abs(freq_energy / n / time_energy - 1.0) < 1e-8);
  }
  SUBCASE("silence") {
    const auto s = spectrogram(Vec(300, 0.0), fs, 64, 32);
    for (double v : s.magnitudes) CHECK(v == 0.0);
  }
  SUBCASE("errors and CSV") {
    CHECK_THROWS_AS(spectrogram(Vec(10), fs, 1, 1), std::invalid_argument);
    CHECK_THROWS_AS(spectrogram(Vec(10), fs, 4, 0), std::invalid_argument);
    CHECK_THROWS_AS(spectrogram(Vec(10), fs, 16, 4), std::invalid_argument);
    const auto dir = testutil::scratch_dir("eval_spec");
    spectrogram_csv(sine(500.0, fs, 256), fs, 64, 64, dir / "s.csv");
    std::istringstream in(testutil::read_file(dir / "s.csv"));
    std::string line;
    int rows = 0;
    std::getline(in, line);
    CHECK(line.rfind("time,0,125,", 0) == 0);
    CHECK(std::count(line.begin(), line.end(), ',') == 33);
    while (std::getline(in, line)) {
      ++rows;
      CHECK(std::count(line.begin(), line.end(), ',') == 33);
    }
    CHECK(rows == 4);
  }
}
