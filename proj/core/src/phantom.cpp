#include "cryopose/phantom.hpp"

#include <cmath>

namespace cryopose {

void PhantomSpec::validate() const {
  CP_CHECK(n >= 4, ConfigError, "phantom: box too small");
  CP_CHECK(pixel_size > 0, ConfigError, "phantom: pixel size must be positive");
  CP_CHECK(!blobs.empty(), ConfigError, "phantom: at least one blob required");
  for (const auto& b : blobs) {
    CP_CHECK(b.center_frac.cwiseAbs().maxCoeff() < 0.5, ConfigError,
             "phantom: blob center outside the box");
    CP_CHECK(b.sigma_vox > 0.5, ConfigError,
             "phantom: sigma must exceed 0.5 voxel for interpolation fidelity");
  }
}

PhantomSpec default_phantom(int n, double pixel_size) {
  PhantomSpec spec;
  spec.n = n;
  spec.pixel_size = pixel_size;
  spec.blobs = {
      {{0.00, 0.00, 0.00}, 2.4, 1.0},
      {{0.20, 0.06, -0.04}, 1.6, 0.9},
      {{-0.10, 0.18, 0.08}, 1.3, 0.8},
      {{-0.16, -0.12, 0.16}, 1.1, 0.7},
      {{0.06, -0.20, -0.18}, 0.9, 0.6},
  };
  return spec;
}

Volume make_phantom(const PhantomSpec& spec) {
  spec.validate();
  const int n = spec.n;
  Tensor density = Tensor::zeros({n, n, n}, Dtype::Real64);
  double* d = density.mutable_real();
  const double c = n / 2;
  for (const auto& b : spec.blobs) {
    const double cx = c + b.center_frac.x() * n;
    const double cy = c + b.center_frac.y() * n;
    const double cz = c + b.center_frac.z() * n;
    const double inv2s2 = 1.0 / (2.0 * b.sigma_vox * b.sigma_vox);
    std::int64_t i = 0;
    for (int z = 0; z < n; ++z) {
      const double dz2 = (z - cz) * (z - cz);
      for (int y = 0; y < n; ++y) {
        const double dy2 = (y - cy) * (y - cy);
        for (int x = 0; x < n; ++x, ++i) {
          const double r2 = (x - cx) * (x - cx) + dy2 + dz2;
          d[i] += b.amplitude * std::exp(-r2 * inv2s2);
        }
      }
    }
  }
  return Volume{density, spec.pixel_size};
}

}  // namespace cryopose
