#pragma once

#include <Eigen/Core>

#include <vector>

#include "cryopose/projector.hpp"

namespace cryopose {

/// One isotropic Gaussian blob. The center is expressed as an offset from the
/// box center in fractions of the box size, sigma in voxels.
struct GaussianBlob {
  Eigen::Vector3d center_frac = Eigen::Vector3d::Zero();
  double sigma_vox = 1.5;
  double amplitude = 1.0;
};

struct PhantomSpec {
  int n = 32;
  double pixel_size = 1.0;
  std::vector<GaussianBlob> blobs;

  void validate() const;
};

/// The stock five-blob arrangement: chiral and asymmetric so that pose
/// learning has no degenerate symmetry, with a spread of widths so the
/// spectrum carries signal out to Nyquist.
PhantomSpec default_phantom(int n = 32, double pixel_size = 1.0);

/// Sample the blob sum on the grid. Deterministic in the spec.
Volume make_phantom(const PhantomSpec& spec);

}  // namespace cryopose
