#pragma once

#include <vector>

#include "cryopose/projector.hpp"
#include "cryopose/so3.hpp"

namespace cryopose {

/// FSC threshold conventionally used for map resolution.
inline constexpr double kFscResolutionThreshold = 0.143;

struct FscCurve {
  std::vector<double> shell_freq;    // cycles/pixel, shells r/N for r = 0..N/2
  std::vector<double> resolution_A;  // N*pixel_size/r (inf at DC)
  std::vector<double> fsc;
};

/// Fourier shell correlation between two volumes on matching grids:
/// per integer-rounded shell, Re(sum F1 conj(F2)) / sqrt(sum|F1|^2 sum|F2|^2).
FscCurve fsc(const Volume& a, const Volume& b);

/// Resolution in Angstrom at the first threshold crossing of the curve
/// (linear interpolation between shells). Without a crossing the volumes
/// agree to Nyquist and 2*pixel_size is returned.
double resolution_at_threshold(const FscCurve& curve, double threshold, double pixel_size);

struct PoseEvalResult {
  double raw_mae_deg = 0.0;
  double aligned_mae_deg = 0.0;
  so3::PoseAlignment alignment;
};

/// Raw and gauge-aligned mean geodesic error between estimated and ground
/// truth rotations; alignment considers the handedness flip and keeps the
/// better gauge.
PoseEvalResult evaluate_poses(const std::vector<so3::Rotation>& est,
                              const std::vector<so3::Rotation>& gt);

/// Trilinear resampling out(r) = v(M (r - c) + c), zero outside the grid.
Volume resample_volume(const Volume& v, const Eigen::Matrix3d& m);

double volume_correlation(const Volume& a, const Volume& b);

struct VolumeAlignment {
  Eigen::Matrix3d map = Eigen::Matrix3d::Identity();
  double correlation = 0.0;
};

/// Align an estimated volume onto a reference using the pose-derived gauge
/// (including the handedness flip when the pose alignment selected it),
/// optionally refined by a local search over rotations maximizing real-space
/// correlation. The returned volume never correlates worse than the
/// unaligned input.
std::pair<Volume, VolumeAlignment> align_volumes(const Volume& est, const Volume& ref,
                                                 const so3::PoseAlignment& pose_gauge,
                                                 bool refine = false);

}  // namespace cryopose
