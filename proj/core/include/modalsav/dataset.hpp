#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "modalsav/sav_solver.hpp"
#include "modalsav/string_model.hpp"

namespace modalsav {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

enum class DatasetRole { Train, Validation, Test };

std::string to_string(DatasetRole role);
DatasetRole role_from_string(const std::string& s);

// Uniform parameter ranges for one dataset. famp is given at the reference
// fundamental famp_reference_hz and rescaled per draw by (gamma/2) / reference.
struct DatasetSpec {
  DatasetRole role = DatasetRole::Train;
  int count = 1;
  std::uint64_t seed = 0;
  int modes = 20;
  Range sample_rate{32000.0, 32000.0};
  Range duration{2.0, 2.0};
  Range excitation_duration{0.5e-3, 1.5e-3};
  Range famp{2.5e4, 3.5e4};
  double famp_reference_hz = 61.74;
  Range gamma{123.48, 174.62};
  Range kappa{1.01, 1.05};
  Range nu{123.48, 174.62};
  Range sigma0{3.0, 3.0};
  Range sigma1{2e-4, 2e-4};
  Range xe{0.1, 0.9};
  Range xo{0.1, 0.9};
  double lambda0 = 1.0;
  double eps = 1e-12;
};

/// Table 1 settings (M = 75, 88.2/96 kHz, 60/20/60 trajectories).
DatasetSpec table1_spec(DatasetRole role);
/// Desk-scale analogue: M = 20, fs = 32 kHz, 10/4/4 trajectories.
DatasetSpec desk_spec(DatasetRole role);

/// Throws std::invalid_argument for empty or unordered ranges.
void validate(const DatasetSpec& spec);

/// JSON form of a spec (the `generate` subcommand input and the manifest's
/// "spec" section). Missing keys keep the role's desk-scale default.
std::string spec_to_json(const DatasetSpec& spec);
DatasetSpec spec_from_json(const std::string& text);
DatasetSpec load_spec_file(const std::filesystem::path& path);

struct DrawParams {
  ScaledStringParams string;
  ExcitationParams excitation;
  double sample_rate = 0.0;
  double duration = 0.0;

  std::size_t steps() const;
};

/// Scales an famp interval linearly with the fundamental frequency.
Range famp_for_frequency(Range base, double omega_fundamental, double omega_reference);

/// Draws count independent parameter sets from the spec's uniform ranges.
std::vector<DrawParams> sample_spec(const DatasetSpec& spec, std::mt19937_64& rng);

struct DatasetEntry {
  DrawParams draw;
  Trajectory trajectory;
};

struct Dataset {
  DatasetSpec spec;
  std::vector<DatasetEntry> entries;
};

/// Simulates every draw with the spectral oracle. Refuses (InvalidParameter)
/// if any draw violates the stability condition.
Dataset generate(const DatasetSpec& spec);

/// Directory with manifest.json plus one MTRJ file per trajectory.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

/// FNV-1a 64-bit; used for manifest and payload integrity checks.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace modalsav
