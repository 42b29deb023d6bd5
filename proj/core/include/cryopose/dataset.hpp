#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "cryopose/phantom.hpp"
#include "cryopose/projector.hpp"
#include "cryopose/rng.hpp"
#include "cryopose/so3.hpp"

namespace cryopose {

struct DatasetConfig {
  int n_images = 2200;
  std::optional<double> snr_db;                             // absent: noiseless
  std::optional<std::pair<double, double>> ctf_range_um;    // absent: no CTF
  double split_train = 0.9;                                 // fraction of images for training
  int pad_factor = 2;                                       // CTF padding when simulating
  std::uint64_t seed = 0;

  void validate() const;
  std::int64_t train_count() const;
};

struct ParticleMeta {
  std::int64_t index = 0;
  so3::Quaternion rotation{1.0, 0.0, 0.0, 0.0};  // ground truth (w,x,y,z)
  Eigen::Vector2d shift = Eigen::Vector2d::Zero();
  std::optional<CtfParams> ctf;
  double sigma = 0.0;  // noise sigma actually applied
  std::optional<double> snr_db;
};

/// Simulated particle images plus per-image ground truth. The first
/// `n_train` images form the training split, the rest the test split.
struct ParticleStack {
  Tensor images;  // (M, N, N) real
  std::vector<ParticleMeta> meta;
  double pixel_size = 1.0;
  std::int64_t n_train = 0;

  int n() const { return static_cast<int>(images.dim(1)); }
  std::int64_t count() const { return images.dim(0); }
  std::int64_t n_test() const { return count() - n_train; }
  Tensor image(std::int64_t i) const;
  Tensor images_range(std::int64_t i0, std::int64_t i1) const;  // (i1-i0, N, N)
  std::vector<so3::Rotation> rotations(std::int64_t i0, std::int64_t i1) const;
};

/// Additive white Gaussian noise scaled so that Var(img)/sigma^2 matches the
/// requested SNR in dB: sigma^2 = Var(img) / 10^(snr_db/10).
/// Throws for (near-)constant images. Returns the noisy image and stores the
/// sigma used.
Tensor add_noise_to_snr(const Tensor& img, double snr_db, Rng& rng, double* sigma_out);

/// Generate a particle stack: per image an independent substream of
/// cfg.seed draws a Haar-uniform rotation, a defocus (when configured) and
/// the noise, so generation order cannot change the result.
ParticleStack generate_dataset(const Volume& vol, const DatasetConfig& cfg,
                               const OpticsConfig& optics);

}  // namespace cryopose
