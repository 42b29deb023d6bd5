#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "cryopose/adam.hpp"
#include "cryopose/dataset.hpp"
#include "cryopose/encoder.hpp"
#include "cryopose/metrics.hpp"

namespace cryopose {

/// Learned: poses amortized through the encoder (the full method).
/// Tomo:    ground-truth poses from metadata, encoder bypassed.
/// RawAd:   one free pose variable per training image, no encoder.
enum class TrainMode { Learned, Tomo, RawAd };

std::string train_mode_name(TrainMode mode);
TrainMode train_mode_from_name(const std::string& name);

enum class LossKind { Sum, Mean };

struct TrainConfig {
  TrainMode mode = TrainMode::Learned;
  so3::HeadKind head = so3::HeadKind::S2S2;
  int batch_size = 32;
  int steps = 10000;
  double lr_volume = 3e-3;
  double lr_encoder = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  LossKind loss = LossKind::Sum;
  int eval_interval = 200;
  int checkpoint_interval = 0;  // 0: no intermediate checkpoints
  std::uint64_t seed = 0;
  double volume_init_max = -1.0;  // <= 0: 0.01 x peak image value (auto)
  int pad_factor = 1;
  std::array<int, 3> filters = {32, 64, 128};
  std::array<int, 2> mlp = {512, 512};

  void validate() const;
};

struct MetricsRow {
  std::int64_t step = 0;
  double loss = 0.0;
  double pose_mae_raw_deg = 0.0;
  double pose_mae_aligned_deg = 0.0;
  double fsc_resolution_A = std::numeric_limits<double>::quiet_NaN();
};

struct TrainState {
  std::int64_t step = 0;
  Volume volume;
  EncoderConfig encoder;
  EncoderWeights weights;       // Learned mode only
  Tensor rawad_params;          // (n_train, head_dim), RawAd mode only
  AdamState volume_adam;
  std::vector<AdamState> weight_adam;
  AdamState rawad_adam;         // full-table moments; rows update lazily
  std::vector<double> loss_history;
  std::int64_t skipped_updates = 0;  // non-finite gradient events
  int s2s2_perturbations = 0;
  Rng batch_rng{0};
};

TrainState init_train_state(const ParticleStack& stack, const TrainConfig& cfg);

/// One minibatch update: forward through (encoder ->) head -> decoder ->
/// loss, one backward pass, simultaneous Adam updates of the volume and the
/// pose parameters. Returns the batch loss.
double train_step(TrainState& state, const ParticleStack& stack,
                  const OpticsConfig& optics, const TrainConfig& cfg);

/// Loss between two image batches (b, n, n): sum over images of the per-image
/// sum of squared pixel differences (Mean divides by b*n*n).
double loss_l2(const Tensor& y, const Tensor& y_hat, LossKind kind = LossKind::Sum);

/// Pose and map quality of the current state: MAE over the test split
/// (train split in RawAd mode) and, when a ground-truth volume is supplied,
/// the gauge-aligned FSC resolution at the 0.143 threshold.
MetricsRow evaluate_state(const TrainState& state, const ParticleStack& stack,
                          const TrainConfig& cfg, const Volume* gt_volume,
                          double loss_value);

struct TrainResult {
  TrainState state;
  std::vector<MetricsRow> metrics;
};

using EvalCallback = std::function<void(const MetricsRow&)>;
using CheckpointCallback = std::function<void(const TrainState&)>;

/// Algorithm: initialize the volume uniformly at random and the encoder with
/// random weights, then run cfg.steps minibatch updates with uniform batch
/// sampling (with replacement), recording metrics every eval_interval steps
/// and at the final step.
TrainResult train(const ParticleStack& stack, const OpticsConfig& optics,
                  const TrainConfig& cfg, const Volume* gt_volume = nullptr,
                  const EvalCallback& on_eval = {},
                  const CheckpointCallback& on_checkpoint = {});

/// Estimated rotations for images [i0, i1) of the stack under the current
/// state (encoder output, raw pose table, or metadata poses in Tomo mode).
std::vector<so3::Rotation> state_rotations(const TrainState& state,
                                           const ParticleStack& stack,
                                           std::int64_t i0, std::int64_t i1);

}  // namespace cryopose
