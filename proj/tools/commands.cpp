#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "modalsav/audio.hpp"
#include "modalsav/checks.hpp"
#include "modalsav/dataset.hpp"
#include "modalsav/evaluation.hpp"
#include "modalsav/gradnet.hpp"
#include "modalsav/training.hpp"

namespace modalsav::cli {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

FieldKind field_from_string(const std::string& s) {
  if (s == "oracle") return FieldKind::Oracle;
  if (s == "linear") return FieldKind::Linear;
  if (s == "gradnet") return FieldKind::GradNet;
  throw std::invalid_argument("unknown field '" + s + "' (expected oracle, linear or gradnet)");
}

}  // namespace

Runner register_generate(CLI::App& app) {
  struct Opts {
    std::string spec_file;
    std::string preset = "desk";
    std::string role = "train";
    std::string out;
    std::optional<int> count;
    std::optional<std::uint64_t> seed;
    std::optional<int> modes;
    bool print_spec = false;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("generate", "Simulate a dataset of oracle trajectories");
  cmd->add_option("--spec", o->spec_file, "JSON dataset spec (overrides --preset/--role)")->check(CLI::ExistingFile);
  cmd->add_option("--preset", o->preset, "Built-in ranges")->check(CLI::IsMember({"desk", "table1"}));
  cmd->add_option("--role", o->role, "Dataset role")->check(CLI::IsMember({"train", "val", "validation", "test"}));
  cmd->add_option("--out", o->out, "Output directory");
  cmd->add_option("--count", o->count, "Number of trajectories");
  cmd->add_option("--seed", o->seed, "Sampling seed");
  cmd->add_option("--modes", o->modes, "Modal truncation M");
  cmd->add_flag("--print-spec", o->print_spec, "Print the resolved spec as JSON and exit");

  return [o] {
    DatasetSpec spec;
    if (!o->spec_file.empty()) {
      spec = load_spec_file(o->spec_file);
    } else {
      const DatasetRole role = role_from_string(o->role);
      spec = o->preset == "table1" ? table1_spec(role) : desk_spec(role);
    }
    if (o->count) spec.count = *o->count;
    if (o->seed) spec.seed = *o->seed;
    if (o->modes) spec.modes = *o->modes;
    validate(spec);
    if (o->print_spec) {
      std::printf("%s\n", spec_to_json(spec).c_str());
      return kSuccess;
    }
    if (o->out.empty()) throw std::invalid_argument("generate: --out is required");
    const auto t0 = std::chrono::steady_clock::now();
    const Dataset data = generate(spec);
    save_dataset(data, o->out);
    std::printf("generated %zu %s trajectories (M=%d) in %.2f s -> %s\n", data.entries.size(),
                to_string(spec.role).c_str(), spec.modes, seconds_since(t0), o->out.c_str());
    return kSuccess;
  };
}

Runner register_train(CLI::App& app) {
  struct Opts {
    std::string train_dir;
    std::string val_dir;
    std::string out;
    std::string init;
    TrainConfig cfg;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("train", "Fit a GradNet nonlinearity to a dataset");
  cmd->add_option("--train", o->train_dir, "Training dataset directory")->required()->check(CLI::ExistingDirectory);
  cmd->add_option("--val", o->val_dir, "Validation dataset directory")->required()->check(CLI::ExistingDirectory);
  cmd->add_option("--out", o->out, "Output directory for checkpoints and log")->required();
  cmd->add_option("--init", o->init, "Start from this checkpoint")->check(CLI::ExistingFile);
  cmd->add_option("--epochs", o->cfg.epochs, "Training epochs")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--batch-size", o->cfg.batch_size, "Segments per batch")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--segment-ms", o->cfg.segment_ms, "Segment length (ms)")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--validation-period", o->cfg.validation_period, "Validate every N epochs")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--seed", o->cfg.seed, "Initialisation and shuffling seed")->capture_default_str();
  cmd->add_option("--hidden", o->cfg.hidden, "Hidden units H")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--neg-slope", o->cfg.neg_slope, "Leaky ReLU negative slope")->capture_default_str();
  cmd->add_option("--lr", o->cfg.adam.lr, "Adam learning rate")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--lambda0", o->cfg.lambda0, "Drift-control gain")->capture_default_str()->check(CLI::NonNegativeNumber);
  cmd->add_option("--workers", o->cfg.workers, "Worker threads (0: MODALSAV_WORKERS or all cores)")->capture_default_str();

  return [o] {
    const Dataset train_set = load_dataset(o->train_dir);
    const Dataset val_set = load_dataset(o->val_dir);
    std::optional<GradNetParams> initial;
    if (!o->init.empty()) initial = load_checkpoint(o->init);

    const fs::path out(o->out);
    fs::create_directories(out);
    write_text(out / "train_config.json", train_config_to_json(o->cfg));
    std::printf("%s\n", format_log_header().c_str());
    const TrainResult r = train(train_set, val_set, o->cfg, initial ? &*initial : nullptr, [](const EpochLog& e) {
      std::printf("%s\n", format_log_row(e).c_str());
      std::fflush(stdout);
    });
    write_training_log(out / "train_log.csv", r.log);
    save_checkpoint(out / "model.gnck", r.best);
    save_checkpoint(out / "final.gnck", r.final_params);
    std::printf("best epoch %d (validation loss %.6g) -> %s\n", r.best_epoch, r.best_val_loss,
                (out / "model.gnck").c_str());
    return kSuccess;
  };
}

Runner register_simulate(CLI::App& app) {
  struct Opts {
    std::string checkpoint;
    std::string field = "oracle";
    int modes = 20;
    double fs = 32000.0;
    double duration = 1.0;
    double lambda0 = 1.0;
    double eps = 1e-12;
    // Scaled parameters.
    double gamma = 150.0;
    double kappa = 1.03;
    double nu = 150.0;
    double sigma0 = 3.0;
    double sigma1 = 2e-4;
    // Physical parameters; used when --length is given.
    std::optional<double> length;
    double density = 7850.0;
    double radius = 5e-4;
    double tension = 60.0;
    double youngs = 2e11;
    ExcitationParams exc{3e4, 1e-3, 0.3, 0.7};
    std::string out;
    std::string wav;
    std::string wav_mode = "float32";
    std::string spectrogram;
    std::size_t window = 4096;
    std::size_t hop = 1024;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("simulate", "Roll out one string with the oracle, linear or learned nonlinearity");
  cmd->add_option("--checkpoint", o->checkpoint, "GNCK checkpoint (implies --field gradnet)")->check(CLI::ExistingFile);
  cmd->add_option("--field", o->field, "Nonlinearity")->capture_default_str()->check(CLI::IsMember({"oracle", "linear", "gradnet"}));
  cmd->add_option("--modes", o->modes, "Modal truncation M (taken from the checkpoint when given)")->capture_default_str();
  cmd->add_option("--fs", o->fs, "Sample rate (Hz)")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--duration", o->duration, "Simulated time (s)")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--lambda0", o->lambda0, "Drift-control gain")->capture_default_str()->check(CLI::NonNegativeNumber);
  cmd->add_option("--eps", o->eps, "Gauge constant")->capture_default_str()->check(CLI::PositiveNumber);
  auto* scaled = cmd->add_option_group("scaled", "Scaled string parameters");
  scaled->add_option("--gamma", o->gamma, "Wave speed (1/s)")->capture_default_str();
  scaled->add_option("--kappa", o->kappa, "Stiffness (1/s)")->capture_default_str();
  scaled->add_option("--nu", o->nu, "Nonlinearity strength (1/s)")->capture_default_str();
  cmd->add_option("--sigma0", o->sigma0, "Frequency-independent loss (1/s)")->capture_default_str();
  cmd->add_option("--sigma1", o->sigma1, "Frequency-dependent loss (scaled 1/s, or m^2/s with --length)")
      ->capture_default_str();
  auto* physical = cmd->add_option_group("physical", "Physical string parameters (SI units)");
  physical->add_option("--length", o->length, "Length L (m); switches to physical parameters");
  physical->add_option("--density", o->density, "Density (kg/m^3)")->capture_default_str();
  physical->add_option("--radius", o->radius, "Radius (m)")->capture_default_str();
  physical->add_option("--tension", o->tension, "Tension (N)")->capture_default_str();
  physical->add_option("--youngs", o->youngs, "Young's modulus (Pa)")->capture_default_str();
  cmd->add_option("--famp", o->exc.amplitude, "Excitation amplitude")->capture_default_str();
  cmd->add_option("--te", o->exc.duration, "Excitation duration (s)")->capture_default_str();
  cmd->add_option("--xe", o->exc.position, "Excitation position in (0,1)")->capture_default_str();
  cmd->add_option("--xo", o->exc.output_position, "Output position in (0,1)")->capture_default_str();
  cmd->add_option("--out", o->out, "Write the trajectory (MTRJ)");
  cmd->add_option("--wav", o->wav, "Write the output signal as WAV");
  cmd->add_option("--wav-mode", o->wav_mode, "WAV sample format")->capture_default_str()->check(CLI::IsMember({"float32", "pcm16"}));
  cmd->add_option("--spectrogram", o->spectrogram, "Write a magnitude spectrogram CSV of the output");
  cmd->add_option("--window", o->window, "Spectrogram window length")->capture_default_str();
  cmd->add_option("--hop", o->hop, "Spectrogram hop")->capture_default_str();

  return [o, cmd] {
    FieldKind kind = field_from_string(o->field);
    std::optional<GradNetParams> model;
    if (!o->checkpoint.empty()) {
      model = load_checkpoint(o->checkpoint);
      kind = FieldKind::GradNet;
      if (cmd->count("--modes") > 0 && o->modes != model->modes) {
        throw std::invalid_argument("--modes does not match the checkpoint (M=" + std::to_string(model->modes) + ")");
      }
      o->modes = model->modes;
    }
    if (kind == FieldKind::GradNet && !model) throw std::invalid_argument("--field gradnet needs --checkpoint");

    DrawParams draw;
    if (o->length) {
      if (cmd->count("--gamma") + cmd->count("--kappa") + cmd->count("--nu") > 0) {
        throw std::invalid_argument("give either scaled (--gamma/--kappa/--nu) or physical (--length ...) parameters");
      }
      PhysicalStringParams p{*o->length, o->density, o->radius, o->tension, o->youngs, o->sigma0, o->sigma1};
      draw.string = scale_physical_params(p, o->modes);
    } else {
      draw.string = {o->gamma, o->kappa, o->nu, o->sigma0, o->sigma1, o->modes};
    }
    validate(draw.string);
    validate(o->exc);
    draw.excitation = o->exc;
    draw.sample_rate = o->fs;
    draw.duration = o->duration;

    const auto t0 = std::chrono::steady_clock::now();
    const Trajectory t = simulate_draw(draw, kind, model ? &*model : nullptr, o->eps, o->lambda0);
    double peak = 0.0;
    for (double w : t.output) peak = std::max(peak, std::abs(w));
    std::printf("simulated %zu steps (M=%d, fs=%g Hz, gamma=%.6g, kappa=%.6g, nu=%.6g) in %.2f s, peak |w| = %.6g\n",
                t.steps(), t.modes, t.sample_rate, draw.string.gamma, draw.string.kappa, draw.string.nu,
                seconds_since(t0), peak);
    if (!o->out.empty()) save_trajectory(o->out, t);
    if (!o->wav.empty()) write_wav(o->wav, t.output, t.sample_rate, wav_mode_from_string(o->wav_mode));
    if (!o->spectrogram.empty()) spectrogram_csv(t.output, t.sample_rate, o->window, o->hop, o->spectrogram);
    return kSuccess;
  };
}

Runner register_evaluate(CLI::App& app) {
  struct Opts {
    std::string checkpoint;
    std::string field = "gradnet";
    std::string dataset;
    std::string out = "metrics.csv";
    double initial_ms = 100.0;
    std::size_t workers = 0;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("evaluate", "Metrics of a model and the linear baseline against a dataset");
  cmd->add_option("--dataset", o->dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  cmd->add_option("--checkpoint", o->checkpoint, "GNCK checkpoint")->check(CLI::ExistingFile);
  cmd->add_option("--field", o->field, "Model nonlinearity")->capture_default_str()->check(CLI::IsMember({"oracle", "linear", "gradnet"}));
  cmd->add_option("--out", o->out, "Metrics CSV")->capture_default_str();
  cmd->add_option("--initial-ms", o->initial_ms, "Initial window (ms)")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--workers", o->workers, "Worker threads")->capture_default_str();

  return [o] {
    const FieldKind kind = field_from_string(o->field);
    std::optional<GradNetParams> model;
    if (kind == FieldKind::GradNet) {
      if (o->checkpoint.empty()) throw std::invalid_argument("evaluate: --checkpoint is required for --field gradnet");
      model = load_checkpoint(o->checkpoint);
    }
    const Dataset data = load_dataset(o->dataset);
    const DatasetEvaluation eval =
        evaluate_dataset(data, kind, model ? &*model : nullptr, o->workers, o->initial_ms / 1000.0);
    write_text(o->out, evaluation_csv(eval));

    const auto row = [](const char* name, double a, double b) { std::printf("%-20s %14.6g %14.6g\n", name, a, b); };
    std::printf("%-20s %14s %14s\n", "metric", o->field.c_str(), "linear");
    const MetricsReport& m = eval.model;
    const MetricsReport& l = eval.linear;
    row("MSE_rel q initial", m.q_mse_initial, l.q_mse_initial);
    row("MSE_rel w initial", m.w_mse_initial, l.w_mse_initial);
    row("MAE_rel q initial", m.q_mae_initial, l.q_mae_initial);
    row("MAE_rel w initial", m.w_mae_initial, l.w_mae_initial);
    row("MSE_rel q full", m.q_mse_full, l.q_mse_full);
    row("MSE_rel w full", m.w_mse_full, l.w_mse_full);
    row("MAE_rel q full", m.q_mae_full, l.q_mae_full);
    row("MAE_rel w full", m.w_mae_full, l.w_mae_full);
    std::size_t better = 0;
    for (std::size_t i = 0; i < m.per_mode_predicted.size(); ++i) {
      better += m.per_mode_predicted[i] < m.per_mode_linear[i] ? 1 : 0;
    }
    std::printf("per-mode MSE below linear on %zu/%zu modes; CSV -> %s\n", better, m.per_mode_predicted.size(),
                o->out.c_str());
    return kSuccess;
  };
}

Runner register_check(CLI::App& app) {
  struct Opts {
    bool long_suite = false;
    std::string workdir = "check_run";
    int epochs = 200;
    int determinism_epochs = 3;
    std::size_t workers = 0;
    std::string csv;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("check", "Run the gradient, energy and oracle test suites");
  cmd->add_flag("--long", o->long_suite, "Also run the desk-scale training suite (criteria 9-12)");
  cmd->add_option("--workdir", o->workdir, "Artifact directory for the long suite")->capture_default_str();
  cmd->add_option("--epochs", o->epochs, "Training epochs for the long suite")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--determinism-epochs", o->determinism_epochs, "Epochs of the repeated training run")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--workers", o->workers, "Worker threads")->capture_default_str();
  cmd->add_option("--csv", o->csv, "Also write the results as CSV");

  return [o] {
    const auto print = [](const checks::CheckResult& r) {
      std::printf("%s\n", checks::format_result(r).c_str());
      std::fflush(stdout);
    };
    std::vector<checks::CheckResult> results = checks::run_fast(print);
    if (o->long_suite) {
      checks::DeskRunConfig cfg;
      cfg.workdir = o->workdir;
      cfg.epochs = o->epochs;
      cfg.determinism_epochs = o->determinism_epochs;
      cfg.workers = o->workers;
      cfg.progress = [](const std::string& s) {
        std::fprintf(stderr, "  %s\n", s.c_str());
      };
      for (auto& r : checks::run_desk(cfg, print)) results.push_back(std::move(r));
    }
    if (!o->csv.empty()) write_text(o->csv, checks::results_csv(results));
    std::size_t passed = 0;
    for (const auto& r : results) passed += r.passed ? 1 : 0;
    std::printf("%zu/%zu checks passed\n", passed, results.size());
    return passed == results.size() ? kSuccess : kRuntimeError;
  };
}

}  // namespace modalsav::cli
