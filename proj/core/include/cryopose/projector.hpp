#pragma once

#include <Eigen/Core>

#include <optional>

#include "cryopose/ops.hpp"
#include "cryopose/optics.hpp"
#include "cryopose/so3.hpp"

namespace cryopose {

/// Real-space density on a cubic grid. Data layout is (z, y, x) row-major;
/// the structure is centered at voxel n/2 along each axis.
struct Volume {
  Tensor density;     // (n, n, n) real
  double pixel_size;  // Angstrom per voxel

  int n() const { return static_cast<int>(density.dim(0)); }
  void validate() const;
};

/// Centered 3D spectrum of a Volume: zero frequency at index n/2.
struct FourierVolume {
  Tensor data;  // (n, n, n) complex
  double pixel_size;

  int n() const { return static_cast<int>(data.dim(0)); }
};

/// Centered transforms between the two (forward unnormalized, inverse 1/N^3).
FourierVolume volume_fft(const Volume& v);
Volume volume_ifft(const FourierVolume& f);

/// Per-image imaging parameters, the learnable/known pose.
struct ImagingParams {
  so3::Rotation rotation = so3::Rotation::Identity();
  Eigen::Vector2d shift = Eigen::Vector2d::Zero();  // pixels
  std::optional<CtfParams> ctf;
};

/// Phase ramp exp(-2 pi i (kx t1 + ky t2)/n) on the centered (n, n) frequency
/// grid; multiplying a centered spectrum by it shifts the image by t pixels.
Tensor shift_phase_image(int n, const Eigen::Vector2d& t);

/// The imaging operator: central slice of the Fourier volume at the given
/// rotation (trilinear interpolation, out-of-grid zero), shift phase ramp,
/// CTF, inverse 2D transform, real part.
///
/// pad_factor 1 multiplies the CTF directly on the (n, n) slice; pad_factor 2
/// applies it on the zero-padded (2n, 2n) image, which avoids circular
/// wraparound of the CTF point-spread function (used when simulating data).
/// Padding only matters when a CTF is present.
Tensor project_image(const FourierVolume& f, const ImagingParams& params,
                     const OpticsConfig& optics, int pad_factor = 1);

/// Convenience wrapper computing the Fourier volume first.
Tensor project_volume(const Volume& v, const ImagingParams& params,
                      const OpticsConfig& optics, int pad_factor = 1);

/// Differentiable decoder. Precomputes the slice coordinate grid once; the
/// tape paths produce bit-identical values to project_image at pad_factor 1.
class Projector {
 public:
  explicit Projector(int n);

  int n() const { return n_; }

  /// Centered Fourier volume of a real (n,n,n) volume Var.
  ad::Var fourier_volume(const ad::Var& volume) const;

  /// (n, n) complex central slice of the Fourier volume at `rotation`
  /// ((3,3) Var); differentiable in both.
  ad::Var slice(const ad::Var& fvol, const ad::Var& rotation) const;

  /// Full decode to a real (n, n) image.
  ad::Var decode(const ad::Var& fvol, const ad::Var& rotation,
                 const Eigen::Vector2d& shift, const std::optional<CtfParams>& ctf,
                 const OpticsConfig& optics, int pad_factor = 1) const;

  const Tensor& freq_basis() const { return freq_rows_; }

 private:
  int n_;
  Tensor freq_rows_;  // (n*n, 3) rows (kx - c, ky - c, 0), ky slow
};

}  // namespace cryopose
