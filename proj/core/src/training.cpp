#include "cryopose/training.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace cryopose {

std::string train_mode_name(TrainMode mode) {
  switch (mode) {
    case TrainMode::Learned: return "learned";
    case TrainMode::Tomo: return "tomo";
    case TrainMode::RawAd: return "rawad";
  }
  return "?";
}

TrainMode train_mode_from_name(const std::string& name) {
  if (name == "learned") return TrainMode::Learned;
  if (name == "tomo") return TrainMode::Tomo;
  if (name == "rawad" || name == "raw-ad") return TrainMode::RawAd;
  throw ConfigError("unknown train mode '" + name + "' (learned|tomo|rawad)");
}

void TrainConfig::validate() const {
  CP_CHECK(batch_size >= 1, ConfigError, "train: batch size must be >= 1");
  CP_CHECK(steps >= 0, ConfigError, "train: steps must be >= 0");
  CP_CHECK(lr_volume >= 0 && lr_encoder >= 0, ConfigError,
           "train: learning rates must be non-negative");
  CP_CHECK(eval_interval >= 1, ConfigError, "train: eval interval must be >= 1");
  CP_CHECK(pad_factor >= 1, ConfigError, "train: pad factor must be >= 1");
}

double loss_l2(const Tensor& y, const Tensor& y_hat, LossKind kind) {
  CP_CHECK_SHAPE(y.same_shape(y_hat) && !y.is_complex() && !y_hat.is_complex(),
                 "loss_l2: mismatched or non-real inputs");
  const double* a = y.real_data();
  const double* b = y_hat.real_data();
  double acc = 0.0;
  for (std::int64_t i = 0; i < y.numel(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return kind == LossKind::Sum ? acc : acc / static_cast<double>(y.numel());
}

namespace {

// Derived rng streams so initialization and batch sampling never interleave.
enum : std::uint64_t { kVolumeStream = 1, kEncoderStream = 2, kRawAdStream = 3, kBatchStream = 4 };

double auto_volume_init_max(const ParticleStack& stack) {
  const std::int64_t sample = std::min<std::int64_t>(stack.count(), 64);
  const std::int64_t plane = static_cast<std::int64_t>(stack.n()) * stack.n();
  const double* p = stack.images.real_data();
  double peak = 0.0;
  for (std::int64_t i = 0; i < sample * plane; ++i) peak = std::max(peak, std::abs(p[i]));
  return peak > 0.0 ? 0.01 * peak : 0.01;
}

Tensor rotation_constant(const so3::Rotation& r) {
  Tensor t = Tensor::zeros({3, 3}, Dtype::Real64);
  double* p = t.mutable_real();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) p[i * 3 + j] = r(i, j);
  return t;
}

bool s2s2_degenerate(const double* p) {
  const Eigen::Vector3d v1(p[0], p[1], p[2]);
  const Eigen::Vector3d v2(p[3], p[4], p[5]);
  const double n1 = v1.norm();
  if (n1 <= 1e-8) return true;
  const Eigen::Vector3d w1 = v1 / n1;
  return (v2 - v2.dot(w1) * w1).norm() <= 1e-8;
}

// Routes a raw head output Var through the rotation head, perturbing
// degenerate s2s2 outputs deterministically (gradients still flow; the
// perturbation is a constant).
ad::Var head_rotation_guarded(ad::Tape& tape, ad::Var raw, so3::HeadKind head,
                              int* perturb_count) {
  if (head == so3::HeadKind::S2S2) {
    int attempt = 0;
    while (s2s2_degenerate(raw.value().real_data()) && attempt < 8) {
      const double eps = 1e-6 * std::pow(10.0, attempt);
      Tensor bump = Tensor::zeros({6}, Dtype::Real64);
      double* b = bump.mutable_real();
      for (int i = 0; i < 6; ++i) b[i] = eps * (i + 1);
      raw = ad::add(raw, tape.constant(bump));
      ++attempt;
      if (perturb_count) ++*perturb_count;
    }
    CP_CHECK(!s2s2_degenerate(raw.value().real_data()), NumericError,
             "s2s2 head output degenerate beyond repair");
  }
  return so3::head_to_rotation(raw, head);
}

struct RowView {
  Tensor param;  // copy of one row
  std::int64_t row;
};

Tensor copy_row(const Tensor& table, std::int64_t row) {
  const std::int64_t d = table.dim(1);
  return Tensor::from_real({d}, std::vector<double>(table.real_data() + row * d,
                                                    table.real_data() + (row + 1) * d));
}

void write_row(Tensor& table, std::int64_t row, const Tensor& values) {
  const std::int64_t d = table.dim(1);
  std::copy_n(values.real_data(), d, table.mutable_real() + row * d);
}

}  // namespace

TrainState init_train_state(const ParticleStack& stack, const TrainConfig& cfg) {
  cfg.validate();
  CP_CHECK(stack.n_train >= 1, DataError, "training requires a non-empty train split");
  TrainState state;
  const int n = stack.n();

  const double init_max =
      cfg.volume_init_max > 0.0 ? cfg.volume_init_max : auto_volume_init_max(stack);
  Tensor density = Tensor::zeros({n, n, n}, Dtype::Real64);
  {
    Rng rng = Rng::substream(cfg.seed, kVolumeStream);
    double* p = density.mutable_real();
    for (std::int64_t i = 0; i < density.numel(); ++i) p[i] = rng.uniform(0.0, init_max);
  }
  state.volume = Volume{density, stack.pixel_size};
  state.volume_adam = AdamState::for_param(state.volume.density);

  state.encoder.input_size = n;
  state.encoder.filters = cfg.filters;
  state.encoder.mlp = cfg.mlp;
  state.encoder.head = cfg.head;
  if (cfg.mode == TrainMode::Learned) {
    Rng rng = Rng::substream(cfg.seed, kEncoderStream);
    state.weights = init_encoder_weights(state.encoder, rng);
    for (const auto& e : state.weights.entries)
      state.weight_adam.push_back(AdamState::for_param(e.tensor));
  } else if (cfg.mode == TrainMode::RawAd) {
    const int d = so3::head_dim(cfg.head);
    state.rawad_params = Tensor::zeros({stack.n_train, d}, Dtype::Real64);
    double* p = state.rawad_params.mutable_real();
    for (std::int64_t i = 0; i < stack.n_train; ++i) {
      Rng rng = Rng::substream(Rng::splitmix64(cfg.seed) ^ kRawAdStream,
                               static_cast<std::uint64_t>(i));
      for (int j = 0; j < d; ++j) p[i * d + j] = rng.normal();
    }
    state.rawad_adam = AdamState::for_param(state.rawad_params);
  }

  state.batch_rng = Rng::substream(cfg.seed, kBatchStream);
  return state;
}

double train_step(TrainState& state, const ParticleStack& stack,
                  const OpticsConfig& optics, const TrainConfig& cfg) {
  const int n = stack.n();
  const std::int64_t plane = static_cast<std::int64_t>(n) * n;
  const int B = cfg.batch_size;

  // Batch sampling: uniform with replacement over the training split.
  std::vector<std::int64_t> indices(static_cast<std::size_t>(B));
  for (auto& idx : indices)
    idx = std::min<std::int64_t>(
        static_cast<std::int64_t>(state.batch_rng.uniform() * stack.n_train),
        stack.n_train - 1);

  ad::Tape tape;
  const Projector projector(n);
  const ad::Var volume_var = tape.leaf(state.volume.density, true);
  const ad::Var fvol = projector.fourier_volume(volume_var);

  // Pose source per mode.
  EncoderVars enc_vars;
  ad::Var raw_batch;
  std::map<std::int64_t, ad::Var> rawad_leaves;
  if (cfg.mode == TrainMode::Learned) {
    Tensor batch = Tensor::zeros({B, 1, n, n}, Dtype::Real64);
    double* dst = batch.mutable_real();
    for (int b = 0; b < B; ++b) {
      Tensor norm = normalize_image(stack.image(indices[static_cast<std::size_t>(b)]));
      std::copy_n(norm.real_data(), plane, dst + b * plane);
    }
    enc_vars = encoder_leaves(tape, state.weights, true);
    raw_batch = encoder_forward(tape.leaf(std::move(batch), false), enc_vars, state.encoder);
  } else if (cfg.mode == TrainMode::RawAd) {
    for (std::int64_t idx : indices)
      if (!rawad_leaves.count(idx))
        rawad_leaves.emplace(idx, tape.leaf(copy_row(state.rawad_params, idx), true));
  }

  std::vector<ad::Var> per_image_losses;
  per_image_losses.reserve(static_cast<std::size_t>(B));
  for (int b = 0; b < B; ++b) {
    const std::int64_t idx = indices[static_cast<std::size_t>(b)];
    const ParticleMeta& meta = stack.meta[static_cast<std::size_t>(idx)];
    ad::Var rotation;
    if (cfg.mode == TrainMode::Tomo) {
      rotation = tape.constant(rotation_constant(so3::quaternion_to_matrix(meta.rotation)));
    } else {
      ad::Var raw = cfg.mode == TrainMode::Learned
                        ? ad::reshape(ad::slice_rows(raw_batch, b, b + 1),
                                      {so3::head_dim(cfg.head)})
                        : rawad_leaves.at(idx);
      rotation = head_rotation_guarded(tape, raw, cfg.head, &state.s2s2_perturbations);
    }
    const ad::Var y_hat = projector.decode(fvol, rotation, meta.shift, meta.ctf, optics,
                                           cfg.pad_factor);
    const ad::Var diff = ad::sub(y_hat, tape.constant(stack.image(idx)));
    per_image_losses.push_back(ad::sum_all(ad::mul(diff, diff)));
  }
  ad::Var loss_var = ad::sum_all(ad::concat0(per_image_losses));
  if (cfg.loss == LossKind::Mean) {
    loss_var = ad::affine(loss_var, 1.0 / (static_cast<double>(B) * plane));
  }

  const double loss = loss_var.value().scalar_value();
  if (!std::isfinite(loss)) {
    std::ostringstream os;
    os << "train_step: non-finite loss " << loss << " at step " << state.step
       << " (mode " << train_mode_name(cfg.mode) << ", recent losses:";
    const std::size_t tail = std::min<std::size_t>(state.loss_history.size(), 5);
    for (std::size_t i = state.loss_history.size() - tail; i < state.loss_history.size(); ++i)
      os << " " << state.loss_history[i];
    os << ")";
    throw NumericError(os.str());
  }

  tape.backward(loss_var);

  const std::int64_t t = state.step + 1;
  const AdamConfig vol_adam{cfg.lr_volume, cfg.beta1, cfg.beta2, cfg.eps};
  const AdamConfig enc_adam{cfg.lr_encoder, cfg.beta1, cfg.beta2, cfg.eps};

  if (cfg.lr_volume > 0.0) {
    if (!adam_step(state.volume.density, volume_var.grad(), state.volume_adam, vol_adam, t))
      ++state.skipped_updates;
  }
  if (cfg.mode == TrainMode::Learned && cfg.lr_encoder > 0.0) {
    for (std::size_t i = 0; i < state.weights.entries.size(); ++i) {
      const ad::Var& wv = enc_vars.vars[i].second;
      if (!adam_step(state.weights.entries[i].tensor, wv.grad(),
                     state.weight_adam[static_cast<std::size_t>(i)], enc_adam, t))
        ++state.skipped_updates;
    }
  }
  if (cfg.mode == TrainMode::RawAd && cfg.lr_encoder > 0.0) {
    // Lazy Adam over the touched rows only, with the global step counter.
    for (const auto& [idx, leaf] : rawad_leaves) {
      Tensor param = copy_row(state.rawad_params, idx);
      AdamState row{copy_row(state.rawad_adam.m, idx), copy_row(state.rawad_adam.v, idx)};
      if (adam_step(param, leaf.grad(), row, enc_adam, t)) {
        write_row(state.rawad_params, idx, param);
        write_row(state.rawad_adam.m, idx, row.m);
        write_row(state.rawad_adam.v, idx, row.v);
      } else {
        ++state.skipped_updates;
      }
    }
  }

  ++state.step;
  state.loss_history.push_back(loss);
  return loss;
}

std::vector<so3::Rotation> state_rotations(const TrainState& state,
                                           const ParticleStack& stack,
                                           std::int64_t i0, std::int64_t i1) {
  std::vector<so3::Rotation> out;
  if (stack.count() == 0 || i0 >= i1) return out;
  if (state.weights.entries.empty() && state.rawad_params.defined()) {
    // RawAd: poses exist for training images only.
    CP_CHECK(i1 <= state.rawad_params.dim(0), DataError,
             "rawad poses exist for the training split only");
    const std::int64_t d = state.rawad_params.dim(1);
    const auto head = state.encoder.head;
    for (std::int64_t i = i0; i < i1; ++i) {
      Eigen::VectorXd raw(d);
      for (std::int64_t j = 0; j < d; ++j) raw[j] = state.rawad_params.real_data()[i * d + j];
      out.push_back(rotation_from_raw(raw, head));
    }
    return out;
  }
  if (!state.weights.entries.empty()) {
    Tensor images = stack.images_range(i0, i1);
    return encode_rotations(images, state.weights, state.encoder);
  }
  // Tomo: metadata poses.
  return stack.rotations(i0, i1);
}

MetricsRow evaluate_state(const TrainState& state, const ParticleStack& stack,
                          const TrainConfig& cfg, const Volume* gt_volume,
                          double loss_value) {
  MetricsRow row;
  row.step = state.step;
  row.loss = loss_value;

  so3::PoseAlignment alignment;  // identity by default (Tomo)
  if (cfg.mode == TrainMode::Tomo) {
    row.pose_mae_raw_deg = 0.0;
    row.pose_mae_aligned_deg = 0.0;
  } else {
    std::int64_t i0 = stack.n_train, i1 = stack.count();
    if (cfg.mode == TrainMode::RawAd || i0 == i1) {
      i0 = 0;
      i1 = stack.n_train;
    }
    const auto est = state_rotations(state, stack, i0, i1);
    const auto gt = stack.rotations(i0, i1);
    const PoseEvalResult eval = evaluate_poses(est, gt);
    row.pose_mae_raw_deg = eval.raw_mae_deg;
    row.pose_mae_aligned_deg = eval.aligned_mae_deg;
    alignment = eval.alignment;
  }

  if (gt_volume) {
    auto [aligned, info] = align_volumes(state.volume, *gt_volume, alignment, false);
    (void)info;
    row.fsc_resolution_A =
        resolution_at_threshold(fsc(aligned, *gt_volume), kFscResolutionThreshold,
                                gt_volume->pixel_size);
  }
  return row;
}

TrainResult train(const ParticleStack& stack, const OpticsConfig& optics,
                  const TrainConfig& cfg, const Volume* gt_volume,
                  const EvalCallback& on_eval, const CheckpointCallback& on_checkpoint) {
  TrainResult result;
  result.state = init_train_state(stack, cfg);

  auto record = [&](double loss_value) {
    MetricsRow row = evaluate_state(result.state, stack, cfg, gt_volume, loss_value);
    result.metrics.push_back(row);
    if (on_eval) on_eval(row);
  };

  {
    // Initial row: loss of the first batch under the initialization, computed
    // on a copy of the sampling stream so training consumes the same batches.
    TrainState peek = result.state;
    TrainConfig frozen = cfg;
    frozen.lr_volume = 0.0;
    frozen.lr_encoder = 0.0;
    record(train_step(peek, stack, optics, frozen));
  }

  for (int s = 1; s <= cfg.steps; ++s) {
    const double loss = train_step(result.state, stack, optics, cfg);
    if (s % cfg.eval_interval == 0 || s == cfg.steps) record(loss);
    if (on_checkpoint && cfg.checkpoint_interval > 0 && s % cfg.checkpoint_interval == 0 &&
        s != cfg.steps) {
      on_checkpoint(result.state);
    }
  }
  if (on_checkpoint) on_checkpoint(result.state);
  return result;
}

}  // namespace cryopose
