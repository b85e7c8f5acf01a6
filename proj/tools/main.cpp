#include <cstdio>
#include <exception>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"
#include "modalsav/errors.hpp"

int main(int argc, char** argv) {
  using namespace modalsav::cli;
  CLI::App app{"Modal string simulation with learned nonlinearities"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML file with option values; command-line flags take precedence");

  std::map<std::string, Runner> runners;
  runners["generate"] = register_generate(app);
  runners["train"] = register_train(app);
  runners["simulate"] = register_simulate(app);
  runners["evaluate"] = register_evaluate(app);
  runners["check"] = register_check(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    return runners.at(name)();
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsageError;
  } catch (const modalsav::SolverDiverged& e) {
    std::fprintf(stderr, "diverged: %s\n", e.what());
    return kRuntimeError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntimeError;
  }
}
