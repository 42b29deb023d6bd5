#include "cryopose/metrics.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <limits>

namespace cryopose {

FscCurve fsc(const Volume& a, const Volume& b) {
  CP_CHECK(a.density.same_shape(b.density), DataError, "fsc: volume grids differ");
  CP_CHECK(a.pixel_size == b.pixel_size, DataError, "fsc: pixel sizes differ");
  const int n = a.n();
  const int c = n / 2;
  const int rmax = n / 2;
  const FourierVolume fa = volume_fft(a);
  const FourierVolume fb = volume_fft(b);

  std::vector<double> cross(static_cast<std::size_t>(rmax) + 1, 0.0);
  std::vector<double> p1(cross.size(), 0.0), p2(cross.size(), 0.0);
  const cdouble* pa = fa.data.complex_data();
  const cdouble* pb = fb.data.complex_data();
  std::int64_t i = 0;
  for (int z = 0; z < n; ++z) {
    const double kz = z - c;
    for (int y = 0; y < n; ++y) {
      const double ky = y - c;
      for (int x = 0; x < n; ++x, ++i) {
        const double kx = x - c;
        const double r = std::sqrt(kx * kx + ky * ky + kz * kz);
        const auto shell = static_cast<int>(std::llround(r));
        if (shell > rmax) continue;
        cross[static_cast<std::size_t>(shell)] += (pa[i] * std::conj(pb[i])).real();
        p1[static_cast<std::size_t>(shell)] += std::norm(pa[i]);
        p2[static_cast<std::size_t>(shell)] += std::norm(pb[i]);
      }
    }
  }

  FscCurve curve;
  for (int r = 0; r <= rmax; ++r) {
    const double denom = std::sqrt(p1[static_cast<std::size_t>(r)] *
                                   p2[static_cast<std::size_t>(r)]);
    const double value = denom > 0.0 ? cross[static_cast<std::size_t>(r)] / denom : 0.0;
    curve.shell_freq.push_back(static_cast<double>(r) / n);
    curve.resolution_A.push_back(r == 0 ? std::numeric_limits<double>::infinity()
                                        : n * a.pixel_size / r);
    curve.fsc.push_back(std::min(1.0, std::max(-1.0, value)));
  }
  return curve;
}

double resolution_at_threshold(const FscCurve& curve, double threshold, double pixel_size) {
  CP_CHECK(threshold > 0.0 && threshold < 1.0, ConfigError,
           "resolution threshold must lie in (0,1)");
  CP_CHECK(!curve.fsc.empty(), Error, "resolution_at_threshold: empty curve");
  for (std::size_t i = 1; i < curve.fsc.size(); ++i) {
    if (curve.fsc[i] < threshold) {
      const double f0 = curve.shell_freq[i - 1], f1 = curve.shell_freq[i];
      const double v0 = curve.fsc[i - 1], v1 = curve.fsc[i];
      const double t = v0 > v1 ? (v0 - threshold) / (v0 - v1) : 1.0;
      const double freq = f0 + t * (f1 - f0);
      return pixel_size / freq;
    }
  }
  return 2.0 * pixel_size;  // no crossing: Nyquist
}

PoseEvalResult evaluate_poses(const std::vector<so3::Rotation>& est,
                              const std::vector<so3::Rotation>& gt) {
  PoseEvalResult out;
  out.raw_mae_deg = so3::mean_geodesic_deg(est, gt);
  out.alignment = so3::align_pose_sets_with_flip(est, gt);
  out.aligned_mae_deg = out.alignment.mae_deg;
  return out;
}

Volume resample_volume(const Volume& v, const Eigen::Matrix3d& m) {
  const int n = v.n();
  const double c = n / 2;
  Tensor out = Tensor::zeros({n, n, n}, Dtype::Real64);
  double* o = out.mutable_real();
  const double* src = v.density.real_data();
  std::int64_t i = 0;
  for (int z = 0; z < n; ++z)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x, ++i) {
        const Eigen::Vector3d r(x - c, y - c, z - c);
        const Eigen::Vector3d s = m * r;  // sample position, centered coords
        const double px = s.x() + c, py = s.y() + c, pz = s.z() + c;
        const double fx = std::floor(px), fy = std::floor(py), fz = std::floor(pz);
        const auto ix = static_cast<std::int64_t>(fx);
        const auto iy = static_cast<std::int64_t>(fy);
        const auto iz = static_cast<std::int64_t>(fz);
        if (ix < 0 || iy < 0 || iz < 0 || ix + 1 >= n || iy + 1 >= n || iz + 1 >= n) continue;
        const double wx = px - fx, wy = py - fy, wz = pz - fz;
        const double* base = src + (iz * n + iy) * n + ix;
        const double c00 = base[0] * (1 - wx) + base[1] * wx;
        const double c10 = base[n] * (1 - wx) + base[n + 1] * wx;
        const double c01 = base[n * (std::int64_t)n] * (1 - wx) + base[n * (std::int64_t)n + 1] * wx;
        const double c11 = base[n * (std::int64_t)n + n] * (1 - wx) + base[n * (std::int64_t)n + n + 1] * wx;
        o[i] = (c00 * (1 - wy) + c10 * wy) * (1 - wz) + (c01 * (1 - wy) + c11 * wy) * wz;
      }
  return Volume{out, v.pixel_size};
}

double volume_correlation(const Volume& a, const Volume& b) {
  CP_CHECK(a.density.same_shape(b.density), DataError, "correlation: grids differ");
  const std::int64_t n = a.density.numel();
  const double* pa = a.density.real_data();
  const double* pb = b.density.real_data();
  double ma = 0.0, mb = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    ma += pa[i];
    mb += pb[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double da = pa[i] - ma, db = pb[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  const double denom = std::sqrt(saa * sbb);
  return denom > 0.0 ? sab / denom : 0.0;
}

namespace {

Eigen::Matrix3d zflip() {
  Eigen::Matrix3d z = Eigen::Matrix3d::Identity();
  z(2, 2) = -1.0;
  return z;
}

}  // namespace

std::pair<Volume, VolumeAlignment> align_volumes(const Volume& est, const Volume& ref,
                                                 const so3::PoseAlignment& pose_gauge,
                                                 bool refine) {
  CP_CHECK(est.density.same_shape(ref.density), DataError, "align_volumes: grids differ");
  // Candidate maps; out(r) = est(M r). For a pure gauge G between poses the
  // estimate satisfies est = truth o G^T, so M = G recovers it; with the
  // handedness flip the recovery map is Z * G.
  std::vector<Eigen::Matrix3d> candidates = {Eigen::Matrix3d::Identity()};
  candidates.push_back(pose_gauge.flipped ? Eigen::Matrix3d(zflip() * pose_gauge.gauge)
                                          : pose_gauge.gauge);

  VolumeAlignment best;
  Volume best_vol = est;
  best.correlation = volume_correlation(est, ref);
  for (const auto& m : candidates) {
    Volume v = resample_volume(est, m);
    const double corr = volume_correlation(v, ref);
    if (corr > best.correlation) {
      best.correlation = corr;
      best.map = m;
      best_vol = std::move(v);
    }
  }

  if (refine) {
    // Pattern search over small axis rotations composed onto the best map.
    double step = 4.0 * M_PI / 180.0;
    while (step > 0.05 * M_PI / 180.0) {
      bool improved = false;
      for (int axis = 0; axis < 3; ++axis) {
        for (double sign : {+1.0, -1.0}) {
          const Eigen::AngleAxisd delta(sign * step, Eigen::Vector3d::Unit(axis));
          const Eigen::Matrix3d m = best.map * delta.toRotationMatrix();
          Volume v = resample_volume(est, m);
          const double corr = volume_correlation(v, ref);
          if (corr > best.correlation) {
            best.correlation = corr;
            best.map = m;
            best_vol = std::move(v);
            improved = true;
          }
        }
      }
      if (!improved) step *= 0.5;
    }
  }
  return {best_vol, best};
}

}  // namespace cryopose
