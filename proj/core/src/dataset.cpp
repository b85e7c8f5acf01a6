#include "modalsav/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "modalsav/errors.hpp"
#include "modalsav/parallel.hpp"
#include "modalsav/spectral.hpp"

namespace modalsav {

using nlohmann::json;

namespace {

constexpr const char* kManifestName = "manifest.json";
constexpr const char* kManifestFormat = "modalsav-dataset";
constexpr int kManifestVersion = 1;

double draw(Range r, std::mt19937_64& rng) {
  if (r.lo == r.hi) return r.lo;
  std::uniform_real_distribution<double> dist(r.lo, r.hi);
  return dist(rng);
}

void check_range(Range r, const char* name, bool positive) {
  if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo > r.hi) {
    throw std::invalid_argument(std::string("dataset spec: range '") + name + "' is empty or unordered");
  }
  if (positive && !(r.lo > 0.0)) {
    throw std::invalid_argument(std::string("dataset spec: range '") + name + "' must be positive");
  }
}

json range_json(Range r) { return json::array({r.lo, r.hi}); }

Range range_from(const json& j, const char* key, Range fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (v.is_number()) return {v.get<double>(), v.get<double>()};
  if (!v.is_array() || v.size() != 2) {
    throw std::invalid_argument(std::string("dataset spec: '") + key + "' must be a number or [lo, hi]");
  }
  return {v[0].get<double>(), v[1].get<double>()};
}

json spec_json(const DatasetSpec& s) {
  return json{{"role", to_string(s.role)},
              {"count", s.count},
              {"seed", s.seed},
              {"modes", s.modes},
              {"sample_rate", range_json(s.sample_rate)},
              {"duration", range_json(s.duration)},
              {"excitation_duration", range_json(s.excitation_duration)},
              {"famp", range_json(s.famp)},
              {"famp_reference_hz", s.famp_reference_hz},
              {"gamma", range_json(s.gamma)},
              {"kappa", range_json(s.kappa)},
              {"nu", range_json(s.nu)},
              {"sigma0", range_json(s.sigma0)},
              {"sigma1", range_json(s.sigma1)},
              {"xe", range_json(s.xe)},
              {"xo", range_json(s.xo)},
              {"lambda0", s.lambda0},
              {"eps", s.eps}};
}

DatasetSpec spec_from(const json& j) {
  const DatasetRole role = role_from_string(j.value("role", std::string("train")));
  DatasetSpec s = desk_spec(role);
  s.count = j.value("count", s.count);
  s.seed = j.value("seed", s.seed);
  s.modes = j.value("modes", s.modes);
  s.sample_rate = range_from(j, "sample_rate", s.sample_rate);
  s.duration = range_from(j, "duration", s.duration);
  s.excitation_duration = range_from(j, "excitation_duration", s.excitation_duration);
  s.famp = range_from(j, "famp", s.famp);
  s.famp_reference_hz = j.value("famp_reference_hz", s.famp_reference_hz);
  s.gamma = range_from(j, "gamma", s.gamma);
  s.kappa = range_from(j, "kappa", s.kappa);
  s.nu = range_from(j, "nu", s.nu);
  s.sigma0 = range_from(j, "sigma0", s.sigma0);
  s.sigma1 = range_from(j, "sigma1", s.sigma1);
  s.xe = range_from(j, "xe", s.xe);
  s.xo = range_from(j, "xo", s.xo);
  s.lambda0 = j.value("lambda0", s.lambda0);
  s.eps = j.value("eps", s.eps);
  return s;
}

json draw_json(const DrawParams& d) {
  return json{{"gamma", d.string.gamma},
              {"kappa", d.string.kappa},
              {"nu", d.string.nu},
              {"sigma0", d.string.sigma0},
              {"sigma1", d.string.sigma1_hat},
              {"modes", d.string.modes},
              {"famp", d.excitation.amplitude},
              {"Te", d.excitation.duration},
              {"xe", d.excitation.position},
              {"xo", d.excitation.output_position},
              {"sample_rate", d.sample_rate},
              {"duration", d.duration}};
}

DrawParams draw_from(const json& j) {
  DrawParams d;
  d.string.gamma = j.at("gamma").get<double>();
  d.string.kappa = j.at("kappa").get<double>();
  d.string.nu = j.at("nu").get<double>();
  d.string.sigma0 = j.at("sigma0").get<double>();
  d.string.sigma1_hat = j.at("sigma1").get<double>();
  d.string.modes = j.at("modes").get<int>();
  d.excitation.amplitude = j.at("famp").get<double>();
  d.excitation.duration = j.at("Te").get<double>();
  d.excitation.position = j.at("xe").get<double>();
  d.excitation.output_position = j.at("xo").get<double>();
  d.sample_rate = j.at("sample_rate").get<double>();
  d.duration = j.at("duration").get<double>();
  return d;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("missing file: " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string trajectory_file_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "traj_%04zu.mtrj", i);
  return buf;
}

}  // namespace

std::string to_string(DatasetRole role) {
  switch (role) {
    case DatasetRole::Train: return "train";
    case DatasetRole::Validation: return "val";
    case DatasetRole::Test: return "test";
  }
  return "train";
}

DatasetRole role_from_string(const std::string& s) {
  if (s == "train") return DatasetRole::Train;
  if (s == "val" || s == "validation") return DatasetRole::Validation;
  if (s == "test") return DatasetRole::Test;
  throw std::invalid_argument("unknown dataset role '" + s + "'");
}

DatasetSpec table1_spec(DatasetRole role) {
  DatasetSpec s;
  s.role = role;
  s.modes = 75;
  if (role == DatasetRole::Train) {
    s.count = 60;
    s.seed = 1;
    s.sample_rate = {88200.0, 88200.0};
    s.duration = {2.0, 2.0};
    s.famp = {2.5e4, 3.5e4};
    s.famp_reference_hz = 61.74;
    s.gamma = {123.48, 174.62};
    s.kappa = {1.01, 1.05};
    s.sigma0 = {3.0, 3.0};
  } else {
    s.count = role == DatasetRole::Validation ? 20 : 60;
    s.seed = role == DatasetRole::Validation ? 2 : 3;
    s.sample_rate = {96000.0, 96000.0};
    s.duration = {3.0, 3.0};
    s.famp = {3.5e4, 5e4};
    s.famp_reference_hz = 87.31;
    s.gamma = {174.62, 246.94};
    s.kappa = {1.05, 1.1};
    s.sigma0 = {2.0, 2.0};
  }
  s.excitation_duration = {0.5e-3, 1.5e-3};
  s.nu = {123.48, 174.62};
  s.sigma1 = {2e-4, 2e-4};
  s.xe = {0.1, 0.9};
  s.xo = {0.1, 0.9};
  return s;
}

DatasetSpec desk_spec(DatasetRole role) {
  DatasetSpec s = table1_spec(role);
  s.modes = 20;
  s.sample_rate = {32000.0, 32000.0};
  s.count = role == DatasetRole::Train ? 10 : 4;
  return s;
}

void validate(const DatasetSpec& s) {
  if (s.count < 1) throw std::invalid_argument("dataset spec: count must be positive");
  if (s.modes < 1) throw std::invalid_argument("dataset spec: modes must be positive");
  check_range(s.sample_rate, "sample_rate", true);
  check_range(s.duration, "duration", true);
  check_range(s.excitation_duration, "excitation_duration", true);
  check_range(s.famp, "famp", false);
  check_range(s.gamma, "gamma", true);
  check_range(s.kappa, "kappa", false);
  check_range(s.nu, "nu", false);
  check_range(s.sigma0, "sigma0", false);
  check_range(s.sigma1, "sigma1", false);
  check_range(s.xe, "xe", true);
  check_range(s.xo, "xo", true);
  if (s.famp.lo < 0.0 || s.kappa.lo < 0.0 || s.nu.lo < 0.0 || s.sigma0.lo < 0.0 || s.sigma1.lo < 0.0) {
    throw std::invalid_argument("dataset spec: famp, kappa, nu and losses must be non-negative");
  }
  if (!(s.xe.hi < 1.0 && s.xo.hi < 1.0)) {
    throw std::invalid_argument("dataset spec: positions must lie in (0, 1)");
  }
  if (!(s.famp_reference_hz > 0.0)) throw std::invalid_argument("dataset spec: famp reference must be positive");
  if (!(s.eps > 0.0) || !(s.lambda0 >= 0.0)) throw std::invalid_argument("dataset spec: bad solver settings");
}

std::string spec_to_json(const DatasetSpec& spec) { return spec_json(spec).dump(2); }

DatasetSpec spec_from_json(const std::string& text) {
  DatasetSpec s = spec_from(json::parse(text));
  validate(s);
  return s;
}

DatasetSpec load_spec_file(const std::filesystem::path& path) { return spec_from_json(read_file(path)); }

std::size_t DrawParams::steps() const {
  return static_cast<std::size_t>(std::llround(duration * sample_rate));
}

Range famp_for_frequency(Range base, double omega_fundamental, double omega_reference) {
  if (!(omega_fundamental > 0.0) || !(omega_reference > 0.0)) {
    throw std::invalid_argument("famp_for_frequency: frequencies must be positive");
  }
  const double ratio = omega_fundamental / omega_reference;
  return {base.lo * ratio, base.hi * ratio};
}

std::vector<DrawParams> sample_spec(const DatasetSpec& spec, std::mt19937_64& rng) {
  validate(spec);
  std::vector<DrawParams> draws;
  draws.reserve(static_cast<std::size_t>(spec.count));
  for (int i = 0; i < spec.count; ++i) {
    DrawParams d;
    d.sample_rate = draw(spec.sample_rate, rng);
    d.duration = draw(spec.duration, rng);
    d.string.modes = spec.modes;
    d.string.gamma = draw(spec.gamma, rng);
    d.string.kappa = draw(spec.kappa, rng);
    d.string.nu = draw(spec.nu, rng);
    d.string.sigma0 = draw(spec.sigma0, rng);
    d.string.sigma1_hat = draw(spec.sigma1, rng);
    d.excitation.duration = draw(spec.excitation_duration, rng);
    // Fundamental frequency in Hz is gamma / 2.
    const Range famp = famp_for_frequency(spec.famp, 0.5 * d.string.gamma, spec.famp_reference_hz);
    d.excitation.amplitude = draw(famp, rng);
    d.excitation.position = draw(spec.xe, rng);
    d.excitation.output_position = draw(spec.xo, rng);
    draws.push_back(d);
  }
  return draws;
}

Dataset generate(const DatasetSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  const std::vector<DrawParams> draws = sample_spec(spec, rng);

  std::vector<ModalOperators> ops(draws.size());
  for (std::size_t i = 0; i < draws.size(); ++i) {
    ops[i] = build_modal_operators(draws[i].string);
    const auto report = check_stability(ops[i], 1.0 / draws[i].sample_rate);
    if (!report.stable) {
      throw InvalidParameter("dataset draw " + std::to_string(i) + " violates the stability condition (gamma=" +
                             std::to_string(draws[i].string.gamma) + ", kappa=" +
                             std::to_string(draws[i].string.kappa) + ", fs=" +
                             std::to_string(draws[i].sample_rate) + ", margin=" +
                             std::to_string(report.margin) + ")");
    }
  }

  Dataset dataset;
  dataset.spec = spec;
  dataset.entries.resize(draws.size());
  parallel_for(draws.size(), worker_count(), [&](std::size_t i, std::size_t) {
    const DrawParams& d = draws[i];
    SpectralNonlinearity oracle(ops[i]);
    SolverConfig cfg;
    cfg.time_step = 1.0 / d.sample_rate;
    cfg.eps = spec.eps;
    cfg.lambda0 = spec.lambda0;
    dataset.entries[i].draw = d;
    dataset.entries[i].trajectory = simulate(d.string, ops[i], oracle, d.excitation, cfg, d.steps());
  });
  return dataset;
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json records = json::array();
  for (std::size_t i = 0; i < dataset.entries.size(); ++i) {
    const std::string name = trajectory_file_name(i);
    save_trajectory(dir / name, dataset.entries[i].trajectory);
    json rec = draw_json(dataset.entries[i].draw);
    rec["file"] = name;
    rec["payload_fnv1a"] = hex64(fnv1a64(read_file(dir / name)));
    records.push_back(std::move(rec));
  }
  json body{{"format", kManifestFormat},
            {"version", kManifestVersion},
            {"seed", dataset.spec.seed},
            {"spec", spec_json(dataset.spec)},
            {"trajectories", std::move(records)}};
  body["manifest_fnv1a"] = hex64(fnv1a64(body.dump()));
  std::ofstream os(dir / kManifestName, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write manifest in " + dir.string());
  os << body.dump(2) << '\n';
}

Dataset load_dataset(const std::filesystem::path& dir) {
  json body;
  try {
    body = json::parse(read_file(dir / kManifestName));
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (body.value("format", std::string()) != kManifestFormat || body.value("version", 0) != kManifestVersion) {
    throw FormatError("unrecognised manifest format");
  }
  if (!body.contains("manifest_fnv1a")) throw FormatError("manifest hash missing");
  const std::string stored = body["manifest_fnv1a"].get<std::string>();
  body.erase("manifest_fnv1a");
  if (hex64(fnv1a64(body.dump())) != stored) throw FormatError("manifest hash mismatch");

  Dataset dataset;
  dataset.spec = spec_from(body.at("spec"));
  for (const auto& rec : body.at("trajectories")) {
    const std::string name = rec.at("file").get<std::string>();
    const auto path = dir / name;
    if (!std::filesystem::exists(path)) throw FormatError("missing trajectory file: " + name);
    if (hex64(fnv1a64(read_file(path))) != rec.at("payload_fnv1a").get<std::string>()) {
      throw FormatError("trajectory payload hash mismatch: " + name);
    }
    DatasetEntry entry;
    entry.draw = draw_from(rec);
    entry.trajectory = load_trajectory(path);
    if (entry.trajectory.modes != entry.draw.string.modes) {
      throw FormatError("trajectory mode count disagrees with manifest: " + name);
    }
    dataset.entries.push_back(std::move(entry));
  }
  return dataset;
}

}  // namespace modalsav
