#pragma once

// Test-only oracles, implemented independently of the library code paths they
// check: direct-summation projections, finite differences, naive loss sums,
// chi-square tail probabilities. Nothing here may call into the projector,
// tape or metrics implementations being verified.

#include <Eigen/Core>

#include <functional>

#include "cryopose/projector.hpp"
#include "cryopose/tensor.hpp"

namespace oracles {

/// Brute-force real-space projector: rotate the volume by R and sum along z,
/// with its own trilinear sampler. image(iy, ix) = sum_z v(R^T (p - c) + c).
cryopose::Tensor brute_force_project(const cryopose::Volume& v,
                                     const Eigen::Matrix3d& rotation);

/// Plain z-axis summation (projection at identity).
cryopose::Tensor z_projection(const cryopose::Volume& v);

/// Central finite difference of a scalar functional at one coordinate of a
/// real tensor parameter.
double central_fd(const std::function<double(const cryopose::Tensor&)>& f,
                  const cryopose::Tensor& p0, std::int64_t index, double h = 1e-5);

double rel_error(double got, double want);

/// Naive two-loop sum of squared differences.
double naive_sq_loss(const cryopose::Tensor& a, const cryopose::Tensor& b);

/// Upper-tail probability P(Chi2_dof > x) via the regularized incomplete
/// gamma function (series + continued fraction).
double chi2_tail(double x, int dof);

/// Analytic mass of an isotropic 3D Gaussian, amplitude * (2 pi)^{3/2} sigma^3.
double gaussian_mass(double amplitude, double sigma);

/// Independently coded CTF zero: solves chi(k) = pi - asin(w) by bisection
/// using its own chi and wavelength formulas. Defocus in um, Cs in mm,
/// voltage in kV; returns cycles/Angstrom.
double first_ctf_zero_radius(double defocus_um, double voltage_kv, double cs_mm,
                             double amplitude_contrast);

}  // namespace oracles
