#pragma once

#include "cryopose/tensor.hpp"

namespace cryopose {

/// Microscope constants shared by a whole dataset.
struct OpticsConfig {
  double voltage_kv = 300.0;
  double cs_mm = 2.7;               // spherical aberration
  double amplitude_contrast = 0.1;  // fraction in [0,1]
  double pixel_size = 1.0;          // Angstrom per pixel

  void validate() const;
};

/// Per-image CTF parameters: major/minor defocus and astigmatism angle.
struct CtfParams {
  double d1_um = 1.0;
  double d2_um = 1.0;
  double alpha_rad = 0.0;
};

/// Relativistic electron wavelength in Angstrom for a voltage in kV.
double electron_wavelength_A(double voltage_kv);

/// Astigmatic weak-phase CTF at spatial frequency (kx, ky) in cycles/Angstrom:
///   CTF = -sqrt(1-w^2) sin(chi) - w cos(chi)
///   chi = pi lambda dz(phi) |k|^2 - (pi/2) Cs lambda^3 |k|^4
///   dz(phi) = (d1+d2)/2 + (d1-d2)/2 cos(2(phi - alpha))
double ctf_value(double kx, double ky, const CtfParams& p, const OpticsConfig& optics);

/// (n, n) real CTF image on the centered frequency grid; pixel (iy, ix) holds
/// the CTF at ((ix - n/2)/(n a), (iy - n/2)/(n a)) with a the pixel size.
Tensor ctf_image(const CtfParams& p, const OpticsConfig& optics, int n);

}  // namespace cryopose
