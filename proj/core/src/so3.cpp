#include "cryopose/so3.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>

#include "cryopose/errors.hpp"

namespace cryopose::so3 {

Rotation euler_to_matrix(double a, double b, double c) {
  const double ca = std::cos(a), sa = std::sin(a);
  const double cb = std::cos(b), sb = std::sin(b);
  const double cc = std::cos(c), sc = std::sin(c);
  Rotation r;
  r << ca * cb * cc - sa * sc, -ca * cb * sc - sa * cc, ca * sb,
       sa * cb * cc + ca * sc, -sa * cb * sc + ca * cc, sa * sb,
       -sb * cc,               sb * sc,                 cb;
  return r;
}

Quaternion raw3_to_quaternion(const Eigen::Vector3d& v) {
  const double s = v.squaredNorm();
  double half_sinc;  // sin(|v|/2)/|v|, smooth in s = |v|^2
  double w;
  if (s < 1e-8) {
    half_sinc = 0.5 - s / 48.0 + s * s / 3840.0;
    w = 1.0 - s / 8.0 + s * s / 384.0;
  } else {
    const double n = std::sqrt(s);
    half_sinc = std::sin(0.5 * n) / n;
    w = std::cos(0.5 * n);
  }
  Quaternion q;
  q << w, half_sinc * v.x(), half_sinc * v.y(), half_sinc * v.z();
  return q;
}

Rotation quaternion_to_matrix(const Quaternion& q) {
  CP_CHECK(std::abs(q.norm() - 1.0) <= 1e-6, Error,
           "quaternion_to_matrix: input is not unit-norm");
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Rotation r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z),     2 * (x * z + w * y),
       2 * (x * y + w * z),     1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
       2 * (x * z - w * y),     2 * (y * z + w * x),     1 - 2 * (x * x + y * y);
  return r;
}

Quaternion matrix_to_quaternion(const Rotation& r) {
  Eigen::Quaterniond q(r);
  q.normalize();
  Quaternion out;
  out << q.w(), q.x(), q.y(), q.z();
  if (out[0] < 0.0) out = -out;  // canonical hemisphere
  return out;
}

Rotation s2s2_to_matrix(const Eigen::Vector3d& v1, const Eigen::Vector3d& v2, double eps) {
  const double n1 = v1.norm();
  CP_CHECK(n1 > eps, Error, "s2s2_to_matrix: first vector is degenerate");
  const Eigen::Vector3d w1 = v1 / n1;
  const Eigen::Vector3d u2 = v2 - v2.dot(w1) * w1;
  const double n2 = u2.norm();
  CP_CHECK(n2 > eps, Error, "s2s2_to_matrix: second vector is collinear with the first");
  const Eigen::Vector3d w2 = u2 / n2;
  const Eigen::Vector3d w3 = w1.cross(w2);
  Rotation r;
  r.row(0) = w1;
  r.row(1) = w2;
  r.row(2) = w3;
  return r;
}

bool is_rotation(const Rotation& r, double tol) {
  const double ortho = (r.transpose() * r - Rotation::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && std::abs(r.determinant() - 1.0) <= tol;
}

Rotation sample_uniform_rotation(Rng& rng) {
  // Four iid normals normalized to the 3-sphere give a Haar-uniform quaternion.
  Quaternion q;
  double norm2 = 0.0;
  do {
    for (int i = 0; i < 4; ++i) q[i] = rng.normal();
    norm2 = q.squaredNorm();
  } while (norm2 < 1e-12);
  q /= std::sqrt(norm2);
  return quaternion_to_matrix(q);
}

double geodesic_distance(const Rotation& r1, const Rotation& r2) {
  // acos((trace(R1^T R2) - 1)/2), evaluated as atan2(|skew|, (trace-1)/2)
  // which is the same angle but accurate near zero.
  const Rotation m = r1.transpose() * r2;
  const double c = std::min(1.0, std::max(-1.0, (m.trace() - 1.0) / 2.0));
  const Eigen::Vector3d s(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1));
  return std::atan2(0.5 * s.norm(), c);
}

namespace {

constexpr double kRadToDeg = 57.295779513082320876798154814105;

PoseAlignment align_impl(const std::vector<Rotation>& est,
                         const std::vector<Rotation>& gt, bool flipped) {
  const Eigen::Vector3d zflip(1.0, 1.0, -1.0);
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < est.size(); ++i) {
    const Rotation e =
        flipped ? Rotation(zflip.asDiagonal() * est[i] * zflip.asDiagonal()) : est[i];
    h += e.transpose() * gt[i];
  }
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Vector3d d(1.0, 1.0, 1.0);
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d[2] = -1.0;
  PoseAlignment out;
  out.gauge = svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose();
  out.flipped = flipped;
  double sum = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const Rotation e =
        flipped ? Rotation(zflip.asDiagonal() * est[i] * zflip.asDiagonal()) : est[i];
    sum += geodesic_distance(e * out.gauge, gt[i]);
  }
  out.mae_deg = kRadToDeg * sum / static_cast<double>(est.size());
  return out;
}

}  // namespace

PoseAlignment align_pose_sets(const std::vector<Rotation>& est,
                              const std::vector<Rotation>& gt) {
  CP_CHECK(!est.empty() && est.size() == gt.size(), Error,
           "align_pose_sets: inputs must be non-empty and the same length");
  return align_impl(est, gt, false);
}

PoseAlignment align_pose_sets_with_flip(const std::vector<Rotation>& est,
                                        const std::vector<Rotation>& gt) {
  CP_CHECK(!est.empty() && est.size() == gt.size(), Error,
           "align_pose_sets_with_flip: inputs must be non-empty and the same length");
  const PoseAlignment plain = align_impl(est, gt, false);
  const PoseAlignment flip = align_impl(est, gt, true);
  return flip.mae_deg < plain.mae_deg ? flip : plain;
}

double mean_geodesic_deg(const std::vector<Rotation>& est,
                         const std::vector<Rotation>& gt) {
  CP_CHECK(!est.empty() && est.size() == gt.size(), Error,
           "mean_geodesic_deg: inputs must be non-empty and the same length");
  double sum = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) sum += geodesic_distance(est[i], gt[i]);
  return kRadToDeg * sum / static_cast<double>(est.size());
}

}  // namespace cryopose::so3
