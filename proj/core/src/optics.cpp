#include "cryopose/optics.hpp"

#include <cmath>

namespace cryopose {

void OpticsConfig::validate() const {
  CP_CHECK(voltage_kv > 0 && cs_mm >= 0 && pixel_size > 0, ConfigError,
           "optics: voltage, Cs and pixel size must be positive");
  CP_CHECK(amplitude_contrast >= 0.0 && amplitude_contrast <= 1.0, ConfigError,
           "optics: amplitude contrast must lie in [0,1]");
}

double electron_wavelength_A(double voltage_kv) {
  const double v = voltage_kv * 1e3;
  return 12.2639 / std::sqrt(v + 0.97845e-6 * v * v);
}

double ctf_value(double kx, double ky, const CtfParams& p, const OpticsConfig& optics) {
  const double k2 = kx * kx + ky * ky;
  if (k2 == 0.0) return -optics.amplitude_contrast;
  const double lambda = electron_wavelength_A(optics.voltage_kv);
  const double d1 = p.d1_um * 1e4;  // um -> A
  const double d2 = p.d2_um * 1e4;
  const double cs = optics.cs_mm * 1e7;  // mm -> A
  const double phi = std::atan2(ky, kx);
  const double dz = 0.5 * (d1 + d2) + 0.5 * (d1 - d2) * std::cos(2.0 * (phi - p.alpha_rad));
  const double chi = M_PI * lambda * dz * k2 - 0.5 * M_PI * cs * lambda * lambda * lambda * k2 * k2;
  const double w = optics.amplitude_contrast;
  return -std::sqrt(1.0 - w * w) * std::sin(chi) - w * std::cos(chi);
}

Tensor ctf_image(const CtfParams& p, const OpticsConfig& optics, int n) {
  CP_CHECK(p.d1_um > 0 && p.d2_um > 0, ConfigError, "ctf: defocus must be positive");
  Tensor out = Tensor::zeros({n, n}, Dtype::Real64);
  double* o = out.mutable_real();
  const double step = 1.0 / (n * optics.pixel_size);
  const int c = n / 2;
  for (int iy = 0; iy < n; ++iy) {
    const double ky = (iy - c) * step;
    for (int ix = 0; ix < n; ++ix) {
      const double kx = (ix - c) * step;
      o[static_cast<std::int64_t>(iy) * n + ix] = ctf_value(kx, ky, p, optics);
    }
  }
  return out;
}

}  // namespace cryopose
