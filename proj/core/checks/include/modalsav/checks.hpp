#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace modalsav::checks {

struct CheckResult {
  int criterion = 0;
  std::string name;
  bool passed = false;
  double value = 0.0;      // measured quantity
  double threshold = 0.0;  // pass bound it was compared against
  std::string detail;
};

/// "PASS  3  spectral gradient oracle  value=... threshold=...  detail"
std::string format_result(const CheckResult& r);
/// criterion,name,passed,value,threshold,detail
std::string results_csv(const std::vector<CheckResult>& results);

CheckResult energy_conservation(std::size_t steps = 100000);
CheckResult stability_draws(int draws = 50, double duration = 3.0);
CheckResult spectral_gradient();
CheckResult gradnet_consistency();
CheckResult solver_step_oracle();
CheckResult backprop_exactness();
CheckResult drift_control();
CheckResult amplitude_law();

/// Criteria 1-8, in order.
std::vector<CheckResult> run_fast(const std::function<void(const CheckResult&)>& on_result = {});

struct DeskRunConfig {
  std::filesystem::path workdir;
  int epochs = 200;
  int determinism_epochs = 3;  // length of the repeated training run
  std::size_t workers = 0;
  std::function<void(const std::string&)> progress;
};

/// Criteria 9-12: generates the desk-scale datasets twice, trains, evaluates
/// on the test set, re-simulates at 48 kHz with doubled duration, checks the
/// pitch glide and compares repeated outputs byte for byte. Artifacts are
/// left in workdir.
std::vector<CheckResult> run_desk(const DeskRunConfig& cfg,
                                  const std::function<void(const CheckResult&)>& on_result = {});

}  // namespace modalsav::checks
