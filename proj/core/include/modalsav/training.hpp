#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "modalsav/dataset.hpp"
#include "modalsav/gradnet.hpp"
#include "modalsav/sav_solver.hpp"

namespace modalsav {

// A teacher-forced window [start, start + length) of one target trajectory.
// State `start` provides the initial condition; the remaining length - 1
// states are predicted.
struct Segment {
  std::size_t trajectory = 0;
  std::size_t start = 0;
  std::size_t length = 0;
  double time_offset = 0.0;  // start * k, shifts the excitation
};

/// round(fs * segment_ms / 1000)
std::size_t segment_steps(double sample_rate, double segment_ms = 1.0);

/// Contiguous partition of a trajectory into segments of `steps` states; the
/// last one may be shorter.
std::vector<Segment> segment_dataset(const Trajectory& traj, std::size_t steps, std::size_t trajectory_index = 0);

/// 1/(2M N) sum_n (|q~ - q|^2 + |p~ - p|^2) over N row-major states. psi is
/// not part of the loss.
double mse_loss(std::span<const double> pred_q, std::span<const double> pred_p,
                std::span<const double> target_q, std::span<const double> target_p, int modes);
double mse_loss(const Trajectory& predicted, const Trajectory& target);

/// psi0 = sqrt(2 V_theta(q0) + eps).
double consistent_psi_init(std::span<const double> q0, const GradNetParams& params, double eps);

// Everything the solver needs to replay one target string.
struct StringContext {
  ScaledStringParams string;
  ModalOperators ops;
  ExcitationParams excitation;
  SolverConfig solver;
  Vec excitation_weights;

  static StringContext from_draw(const DrawParams& draw, double eps, double lambda0);
};

// Per-thread buffers for forward/backward over a segment.
struct SegmentWorkspace {
  std::vector<StepTrace> traces;
  std::vector<GradNetTape> tapes;
  GradNetTape initial_tape;
  std::vector<Vec> predicted_q;
  std::vector<Vec> predicted_p;
};

// How the control term is treated during a segment pass. The control term is
// always excluded from the reverse pass; `record` captures the values used
// and `frozen` replays previously captured ones (finite-difference checks with
// matching detachment semantics).
struct ControlTerms {
  std::vector<Vec>* record = nullptr;
  const std::vector<Vec>* frozen = nullptr;
};

struct SegmentResult {
  double loss = 0.0;
  bool diverged = false;
  std::size_t steps = 0;
};

/// Teacher-forced forward pass over a segment and, when grad is non-null, the
/// exact reverse pass through every stage of the scheme (Sherman-Morrison
/// solve, g_std through f_theta and V_theta, psi update, consistent psi0).
/// Gradients are accumulated into *grad. Divergence yields diverged = true and
/// leaves *grad untouched.
SegmentResult forward_backward_segment(const Trajectory& target, const Segment& segment,
                                       const StringContext& ctx, const GradNetParams& params,
                                       GradNetGradient* grad, SegmentWorkspace& ws,
                                       ControlTerms control = {});

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  GradNetGradient m;
  GradNetGradient v;
  std::uint64_t step = 0;

  AdamState() = default;
  AdamState(const GradNetParams& shape, AdamConfig cfg);
};

/// Standard bias-corrected Adam update, in place.
void adam_step(GradNetParams& params, const GradNetGradient& grads, AdamState& state);

struct TrainConfig {
  int epochs = 200;
  int batch_size = 8;
  double segment_ms = 1.0;
  int validation_period = 1;
  std::uint64_t seed = 0;
  int hidden = 200;
  double neg_slope = 0.01;
  double eps = 1e-12;
  double lambda0 = 1.0;
  AdamConfig adam;
  std::size_t workers = 0;  // 0: MODALSAV_WORKERS / hardware concurrency
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;  // NaN when not validated this epoch
  double wall_seconds = 0.0;
  std::size_t diverged_segments = 0;
};

struct TrainResult {
  GradNetParams best;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  GradNetParams final_params;
  std::vector<EpochLog> log;
};

/// Teacher-forced segment loss averaged over every segment of a dataset.
double dataset_segment_loss(const Dataset& data, const GradNetParams& params, const TrainConfig& cfg,
                            std::size_t* diverged = nullptr);

/// Trains from `initial` (or a fresh Kaiming initialisation when null).
/// on_epoch, if set, is called after each epoch with the entry just logged.
TrainResult train(const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg,
                  const GradNetParams* initial = nullptr,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

/// CSV header + one row per epoch: epoch,train_loss,val_loss,wall_seconds,diverged_segments.
std::string format_log_header();
std::string format_log_row(const EpochLog& e);
void write_training_log(const std::filesystem::path& path, const std::vector<EpochLog>& log);

std::string train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const std::string& text);

}  // namespace modalsav
