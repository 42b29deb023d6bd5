#include "cryopose/dataset.hpp"

#include <cmath>

namespace cryopose {

void DatasetConfig::validate() const {
  CP_CHECK(n_images > 0, ConfigError, "dataset: n_images must be positive");
  CP_CHECK(split_train >= 0.0 && split_train <= 1.0, ConfigError,
           "dataset: split_train must lie in [0,1]");
  CP_CHECK(pad_factor >= 1, ConfigError, "dataset: pad_factor must be >= 1");
  if (ctf_range_um) {
    CP_CHECK(ctf_range_um->first > 0 && ctf_range_um->first <= ctf_range_um->second,
             ConfigError, "dataset: CTF range must satisfy 0 < lo <= hi");
  }
}

std::int64_t DatasetConfig::train_count() const {
  auto c = static_cast<std::int64_t>(std::llround(split_train * n_images));
  return std::min<std::int64_t>(std::max<std::int64_t>(c, 0), n_images);
}

Tensor ParticleStack::image(std::int64_t i) const { return images_range(i, i + 1).reshaped({n(), n()}); }

Tensor ParticleStack::images_range(std::int64_t i0, std::int64_t i1) const {
  CP_CHECK_SHAPE(0 <= i0 && i0 < i1 && i1 <= count(), "image range out of bounds");
  const std::int64_t plane = static_cast<std::int64_t>(n()) * n();
  return Tensor::from_real({i1 - i0, n(), n()},
                           std::vector<double>(images.real_data() + i0 * plane,
                                               images.real_data() + i1 * plane));
}

std::vector<so3::Rotation> ParticleStack::rotations(std::int64_t i0, std::int64_t i1) const {
  std::vector<so3::Rotation> out;
  out.reserve(static_cast<std::size_t>(i1 - i0));
  for (std::int64_t i = i0; i < i1; ++i)
    out.push_back(so3::quaternion_to_matrix(meta[static_cast<std::size_t>(i)].rotation));
  return out;
}

Tensor add_noise_to_snr(const Tensor& img, double snr_db, Rng& rng, double* sigma_out) {
  CP_CHECK_SHAPE(!img.is_complex(), "add_noise_to_snr expects a real image");
  const std::int64_t n = img.numel();
  const double* p = img.real_data();
  double mean = 0.0;
  for (std::int64_t i = 0; i < n; ++i) mean += p[i];
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (std::int64_t i = 0; i < n; ++i) var += (p[i] - mean) * (p[i] - mean);
  var /= static_cast<double>(n);
  CP_CHECK(var > 1e-300, Error, "add_noise_to_snr: image is constant");
  const double sigma = std::sqrt(var / std::pow(10.0, snr_db / 10.0));
  Tensor out = Tensor::zeros(img.shape(), Dtype::Real64);
  double* o = out.mutable_real();
  for (std::int64_t i = 0; i < n; ++i) o[i] = p[i] + sigma * rng.normal();
  if (sigma_out) *sigma_out = sigma;
  return out;
}

namespace {

so3::Quaternion sample_quaternion(Rng& rng) {
  so3::Quaternion q;
  double norm2 = 0.0;
  do {
    for (int i = 0; i < 4; ++i) q[i] = rng.normal();
    norm2 = q.squaredNorm();
  } while (norm2 < 1e-12);
  q /= std::sqrt(norm2);
  if (q[0] < 0.0) q = -q;
  return q;
}

}  // namespace

ParticleStack generate_dataset(const Volume& vol, const DatasetConfig& cfg,
                               const OpticsConfig& optics) {
  cfg.validate();
  vol.validate();
  optics.validate();
  const int n = vol.n();
  const std::int64_t plane = static_cast<std::int64_t>(n) * n;
  const FourierVolume fvol = volume_fft(vol);

  ParticleStack stack;
  stack.pixel_size = vol.pixel_size;
  stack.n_train = cfg.train_count();
  stack.images = Tensor::zeros({cfg.n_images, n, n}, Dtype::Real64);
  stack.meta.resize(static_cast<std::size_t>(cfg.n_images));
  double* dst = stack.images.mutable_real();

  for (std::int64_t i = 0; i < cfg.n_images; ++i) {
    Rng rng = Rng::substream(cfg.seed, static_cast<std::uint64_t>(i));
    ParticleMeta& m = stack.meta[static_cast<std::size_t>(i)];
    m.index = i;
    m.rotation = sample_quaternion(rng);
    ImagingParams params;
    params.rotation = so3::quaternion_to_matrix(m.rotation);
    if (cfg.ctf_range_um) {
      const double d = rng.uniform(cfg.ctf_range_um->first, cfg.ctf_range_um->second);
      m.ctf = CtfParams{d, d, 0.0};
      params.ctf = m.ctf;
    }
    Tensor img = project_image(fvol, params, optics, cfg.pad_factor);
    if (cfg.snr_db) {
      m.snr_db = cfg.snr_db;
      img = add_noise_to_snr(img, *cfg.snr_db, rng, &m.sigma);
    }
    std::copy_n(img.real_data(), plane, dst + i * plane);
  }
  return stack;
}

}  // namespace cryopose
