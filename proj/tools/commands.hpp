#pragma once

#include <functional>

#include <CLI11.hpp>

namespace modalsav::cli {

// Exit codes shared by every subcommand.
inline constexpr int kSuccess = 0;
inline constexpr int kUsageError = 1;
inline constexpr int kRuntimeError = 2;

// Each register_* call adds a subcommand to the app and returns a callable
// that runs it once parsing has succeeded.
using Runner = std::function<int()>;

Runner register_generate(CLI::App& app);
Runner register_train(CLI::App& app);
Runner register_simulate(CLI::App& app);
Runner register_evaluate(CLI::App& app);
Runner register_check(CLI::App& app);

}  // namespace modalsav::cli
