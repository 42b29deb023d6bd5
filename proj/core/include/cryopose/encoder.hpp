#pragma once

#include <Eigen/Core>

#include <array>
#include <string>
#include <vector>

#include "cryopose/ops.hpp"
#include "cryopose/rng.hpp"
#include "cryopose/so3_heads.hpp"

namespace cryopose {

/// Pose-regression encoder: three conv-conv-maxpool blocks, then a two-layer
/// MLP and a linear head sized for the chosen rotation parameterization.
struct EncoderConfig {
  int input_size = 32;
  std::array<int, 3> filters = {32, 64, 128};
  std::array<int, 2> mlp = {512, 512};
  so3::HeadKind head = so3::HeadKind::S2S2;

  int head_dim() const { return so3::head_dim(head); }
  /// Spatial extent after the three maxpool stages.
  int final_spatial() const { return input_size / 8; }
  int flatten_dim() const { return filters[2] * final_spatial() * final_spatial(); }
  void validate() const;
};

/// All learnable parameters, ordered and named (conv1.w, conv1.b, ...).
struct EncoderWeights {
  struct Entry {
    std::string name;
    Tensor tensor;
  };
  std::vector<Entry> entries;

  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  std::int64_t parameter_count() const;
};

std::int64_t encoder_parameter_count(const EncoderConfig& cfg);

/// Fan-in-scaled uniform initialization (+-sqrt(6/fan_in) for weights,
/// +-sqrt(1/fan_in) for biases). Deterministic given the rng state.
EncoderWeights init_encoder_weights(const EncoderConfig& cfg, Rng& rng);

/// Weight tensors as tape leaves, in entry order.
struct EncoderVars {
  std::vector<std::pair<std::string, ad::Var>> vars;
  const ad::Var& at(const std::string& name) const;
};
EncoderVars encoder_leaves(ad::Tape& tape, const EncoderWeights& w, bool requires_grad);

/// Forward pass for a batch: images (B, 1, N, N) -> raw head outputs
/// (B, head_dim). Inputs are expected already normalized (see
/// normalize_image); the pass itself is deterministic.
ad::Var encoder_forward(const ad::Var& images, const EncoderVars& w,
                        const EncoderConfig& cfg);

/// Per-image zero-mean unit-variance normalization applied before encoding,
/// identical at train and eval time.
Tensor normalize_image(const Tensor& image);

/// Value-path batched encoding (no gradients): images (B, N, N) raw (not yet
/// normalized) -> (B, head_dim) rows.
std::vector<Eigen::VectorXd> encode_batch(const Tensor& images, const EncoderWeights& w,
                                          const EncoderConfig& cfg);

/// Raw head output routed through the matching rotation head. Degenerate
/// s2s2 outputs are perturbed deterministically (the event is counted in
/// *perturbed when given).
so3::Rotation rotation_from_raw(const Eigen::VectorXd& raw, so3::HeadKind kind,
                                int* perturbed = nullptr);

/// Encode a full stack of images to rotations.
std::vector<so3::Rotation> encode_rotations(const Tensor& images, const EncoderWeights& w,
                                            const EncoderConfig& cfg,
                                            int* perturbed = nullptr);

}  // namespace cryopose
