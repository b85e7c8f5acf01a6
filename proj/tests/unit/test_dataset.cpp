#include <cmath>
#include <random>
#include <set>

#include <doctest.h>

#include "modalsav/dataset.hpp"
#include "modalsav/errors.hpp"
#include "test_util.hpp"

using namespace modalsav;

namespace {

DatasetSpec small_spec(DatasetRole role, std::uint64_t seed) {
  DatasetSpec s = desk_spec(role);
  s.modes = 6;
  s.count = 3;
  s.seed = seed;
  s.sample_rate = {16000.0, 16000.0};
  s.duration = {0.02, 0.02};
  return s;
}

}  // namespace

TEST_CASE("roles") {
  for (auto r : {DatasetRole::Train, DatasetRole::Validation, DatasetRole::Test}) {
    CHECK(role_from_string(to_string(r)) == r);
  }
  CHECK_THROWS_AS(role_from_string("holdout"), std::invalid_argument);
}

TEST_CASE("famp scales linearly with the fundamental") {
  const auto r = famp_for_frequency({2.5e4, 3.5e4}, 2 * 61.74, 61.74);
  CHECK(r.lo == doctest::Approx(5e4));
  CHECK(r.hi == doctest::Approx(7e4));
  const auto same = famp_for_frequency({1.0, 2.0}, 87.31, 87.31);
  CHECK(same.lo == 1.0);
  CHECK(same.hi == 2.0);
  CHECK_THROWS_AS(famp_for_frequency({1.0, 2.0}, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("presets") {
  const auto train = table1_spec(DatasetRole::Train);
  CHECK(train.modes == 75);
  CHECK(train.count == 60);
  CHECK(train.sample_rate.lo == 88200.0);
  CHECK(train.duration.lo == 2.0);
  CHECK(train.gamma.lo == 123.48);
  CHECK(train.gamma.hi == 174.62);
  CHECK(train.kappa.hi == 1.05);
  CHECK(train.sigma0.lo == 3.0);
  const auto val = table1_spec(DatasetRole::Validation);
  CHECK(val.count == 20);
  const auto test = table1_spec(DatasetRole::Test);
  CHECK(test.count == 60);
  CHECK(test.sample_rate.lo == 96000.0);
  CHECK(test.duration.lo == 3.0);
  CHECK(test.gamma.lo == 174.62);
  CHECK(test.gamma.hi == 246.94);
  CHECK(test.famp.lo == 3.5e4);
  CHECK(test.sigma0.lo == 2.0);
  for (auto role : {DatasetRole::Train, DatasetRole::Validation, DatasetRole::Test}) {
    const auto s = table1_spec(role);
    CHECK(s.nu.lo == 123.48);
    CHECK(s.nu.hi == 174.62);
    CHECK(s.sigma1.lo == 2e-4);
    CHECK_NOTHROW(validate(s));
    // Every corner of the parameter box must be stable.
    const auto ops = build_modal_operators({s.gamma.hi, s.kappa.hi, 0.0, 0.0, 0.0, s.modes});
    CHECK(check_stability(ops, 1.0 / s.sample_rate.lo).stable);
    const auto desk = desk_spec(role);
    CHECK(desk.modes == 20);
    CHECK(desk.sample_rate.hi == 32000.0);
  }
  CHECK(desk_spec(DatasetRole::Train).count == 10);
  CHECK(desk_spec(DatasetRole::Test).count == 4);
}

TEST_CASE("sampling stays inside the ranges") {
  auto spec = table1_spec(DatasetRole::Test);
  spec.count = 200;
  std::mt19937_64 rng(5);
  const auto draws = sample_spec(spec, rng);
  REQUIRE(draws.size() == 200);
  std::set<double> gammas;
  for (const auto& d : draws) {
    CHECK(d.string.gamma >= spec.gamma.lo);
    CHECK(d.string.gamma <= spec.gamma.hi);
    CHECK(d.string.kappa >= spec.kappa.lo);
    CHECK(d.string.kappa <= spec.kappa.hi);
    CHECK(d.excitation.position >= 0.1);
    CHECK(d.excitation.position <= 0.9);
    CHECK(d.excitation.duration >= 0.5e-3);
    CHECK(d.excitation.duration <= 1.5e-3);
    const auto famp = famp_for_frequency(spec.famp, 0.5 * d.string.gamma, spec.famp_reference_hz);
    CHECK(d.excitation.amplitude >= famp.lo);
    CHECK(d.excitation.amplitude <= famp.hi);
    CHECK(d.sample_rate == 96000.0);
    CHECK(d.steps() == 288000u);
    gammas.insert(d.string.gamma);
  }
  CHECK(gammas.size() == 200);

  // Train and test strings only touch at gamma = 174.62.
  auto tr = table1_spec(DatasetRole::Train);
  tr.count = 200;
  for (const auto& d : sample_spec(tr, rng)) CHECK(d.string.gamma <= 174.62);
}

TEST_CASE("generation") {
  SUBCASE("silent strings") {
    auto spec = small_spec(DatasetRole::Train, 1);
    spec.famp = {0.0, 0.0};
    const auto data = generate(spec);
    for (const auto& e : data.entries) {
      for (double v : e.trajectory.q) CHECK(v == 0.0);
    }
  }
  SUBCASE("regeneration is bit-identical") {
    const auto a = generate(small_spec(DatasetRole::Test, 9));
    const auto b = generate(small_spec(DatasetRole::Test, 9));
    REQUIRE(a.entries.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(a.entries[i].trajectory.q == b.entries[i].trajectory.q);
      CHECK(a.entries[i].trajectory.p == b.entries[i].trajectory.p);
      CHECK(a.entries[i].draw.string.gamma == b.entries[i].draw.string.gamma);
    }
    const auto c = generate(small_spec(DatasetRole::Test, 10));
    CHECK(c.entries[0].draw.string.gamma != a.entries[0].draw.string.gamma);
  }
  SUBCASE("energy decays once the pluck is over") {
    const auto data = generate(small_spec(DatasetRole::Train, 2));
    for (const auto& e : data.entries) {
      const auto ops = build_modal_operators(e.draw.string);
      const double k = 1.0 / e.draw.sample_rate;
      const auto& t = e.trajectory;
      const auto first = static_cast<std::size_t>(std::ceil(e.draw.excitation.duration / k)) + 1;
      double prev = INFINITY;
      for (std::size_t n = first; n < t.steps(); ++n) {
        SolverState s;
        s.q.assign(t.q_at(n).begin(), t.q_at(n).end());
        s.p.assign(t.p_at(n).begin(), t.p_at(n).end());
        s.psi = t.psi[n];
        const double en = energy(s, ops, e.draw.string.nu, k);
        CHECK(en <= prev * (1 + 1e-12));
        prev = en;
      }
    }
  }
  SUBCASE("unstable draws are refused") {
    auto spec = small_spec(DatasetRole::Test, 3);
    spec.modes = 75;
    spec.sample_rate = {8000.0, 8000.0};
    CHECK_THROWS_AS(generate(spec), InvalidParameter);
  }
}

TEST_CASE("dataset files") {
  const auto dir = testutil::scratch_dir("dataset_io");
  const auto data = generate(small_spec(DatasetRole::Validation, 4));
  save_dataset(data, dir / "ok");
  const auto back = load_dataset(dir / "ok");
  REQUIRE(back.entries.size() == data.entries.size());
  CHECK(back.spec.seed == 4);
  CHECK(back.spec.role == DatasetRole::Validation);
  for (std::size_t i = 0; i < back.entries.size(); ++i) {
    CHECK(back.entries[i].trajectory.q == data.entries[i].trajectory.q);
    CHECK(back.entries[i].draw.string.nu == data.entries[i].draw.string.nu);
    CHECK(back.entries[i].draw.excitation.amplitude == data.entries[i].draw.excitation.amplitude);
    CHECK(back.entries[i].draw.sample_rate == data.entries[i].draw.sample_rate);
  }

  auto copy = [&](const std::string& name) {
    std::filesystem::copy(dir / "ok", dir / name, std::filesystem::copy_options::recursive);
    return dir / name;
  };
  SUBCASE("tampered manifest") {
    const auto d = copy("manifest");
    auto text = testutil::read_file(d / "manifest.json");
    const auto pos = text.find("\"seed\": 4");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 9, "\"seed\": 5");
    testutil::write_file(d / "manifest.json", text);
    CHECK_THROWS_AS(load_dataset(d), FormatError);
  }
  SUBCASE("tampered payload") {
    const auto d = copy("payload");
    auto bytes = testutil::read_file(d / "traj_0001.mtrj");
    bytes[bytes.size() - 1] ^= 1;
    testutil::write_file(d / "traj_0001.mtrj", bytes);
    CHECK_THROWS_AS(load_dataset(d), FormatError);
  }
  SUBCASE("missing trajectory") {
    const auto d = copy("missing");
    std::filesystem::remove(d / "traj_0002.mtrj");
    CHECK_THROWS_AS(load_dataset(d), FormatError);
  }
  SUBCASE("not a manifest") {
    const auto d = copy("garbage");
    testutil::write_file(d / "manifest.json", "{ not json");
    CHECK_THROWS_AS(load_dataset(d), FormatError);
  }
  SUBCASE("no directory") { CHECK_THROWS_AS(load_dataset(dir / "absent"), FormatError); }
}

TEST_CASE("spec JSON") {
  auto spec = small_spec(DatasetRole::Test, 77);
  spec.famp_reference_hz = 87.31;
  spec.lambda0 = 0.5;
  const auto back = spec_from_json(spec_to_json(spec));
  CHECK(back.role == DatasetRole::Test);
  CHECK(back.seed == 77);
  CHECK(back.modes == 6);
  CHECK(back.duration.hi == 0.02);
  CHECK(back.gamma.lo == spec.gamma.lo);
  CHECK(back.famp_reference_hz == 87.31);
  CHECK(back.lambda0 == 0.5);

  const auto scalar = spec_from_json(R"({"role": "train", "modes": 8, "gamma": 150.0})");
  CHECK(scalar.modes == 8);
  CHECK(scalar.gamma.lo == 150.0);
  CHECK(scalar.gamma.hi == 150.0);

  CHECK_THROWS_AS(spec_from_json(R"({"gamma": [200.0, 100.0]})"), std::invalid_argument);
  CHECK_THROWS_AS(spec_from_json(R"({"gamma": "fast"})"), std::invalid_argument);
  CHECK_THROWS_AS(spec_from_json(R"({"xe": [0.1, 1.0]})"), std::invalid_argument);
  CHECK_THROWS_AS(spec_from_json(R"({"count": 0})"), std::invalid_argument);
  CHECK_THROWS_AS(spec_from_json(R"({"nu": [-1.0, 2.0]})"), std::invalid_argument);
}

TEST_CASE("FNV-1a") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}
