#pragma once

#include <Eigen/Core>

#include <vector>

#include "cryopose/rng.hpp"

namespace cryopose::so3 {

using Rotation = Eigen::Matrix3d;
using Quaternion = Eigen::Vector4d;  // (w, x, y, z), scalar first

/// ZYZ Euler angles: R = Rz(a) * Ry(b) * Rz(c).
Rotation euler_to_matrix(double a, double b, double c);

/// Exponential-map embedding of a raw 3-vector into a unit quaternion:
/// q = (cos(|v|/2), sin(|v|/2) * v/|v|), with the |v| -> 0 limit handled by
/// series expansion. Smooth everywhere, surjective onto rotations with
/// angle < 2*pi.
Quaternion raw3_to_quaternion(const Eigen::Vector3d& v);

/// Standard unit-quaternion to matrix map (rotation by 2*acos(q1) about
/// (q2,q3,q4)). Throws when |q| deviates from 1 by more than 1e-6.
Rotation quaternion_to_matrix(const Quaternion& q);

Quaternion matrix_to_quaternion(const Rotation& r);

/// Gram-Schmidt two-vector parameterization: rows of R are
/// w1 = v1/|v1|, w2 = normalize(v2 - (v2.w1) w1), w3 = w1 x w2.
/// Throws when |v1| or the component of v2 orthogonal to w1 has norm <= eps.
Rotation s2s2_to_matrix(const Eigen::Vector3d& v1, const Eigen::Vector3d& v2,
                        double eps = 1e-8);

bool is_rotation(const Rotation& r, double tol = 1e-9);

/// Haar-uniform rotation (uniform quaternion on the 3-sphere).
Rotation sample_uniform_rotation(Rng& rng);

/// Relative rotation angle acos((trace(R1^T R2) - 1)/2), radians.
double geodesic_distance(const Rotation& r1, const Rotation& r2);

struct PoseAlignment {
  Rotation gauge = Rotation::Identity();  // applied on the right: est * gauge
  bool flipped = false;                   // estimates conjugated by diag(1,1,-1)
  double mae_deg = 0.0;                   // mean geodesic error after alignment
};

/// Least-squares global gauge between two pose sets: G minimizing
/// sum_i || R_est_i * G - R_gt_i ||_F^2 via SVD of sum_i R_est_i^T R_gt_i
/// with determinant correction. Returns the gauge and the aligned mean
/// geodesic error in degrees.
PoseAlignment align_pose_sets(const std::vector<Rotation>& est,
                              const std::vector<Rotation>& gt);

/// As align_pose_sets, but also tries the handedness-flip gauge (estimates
/// conjugated by Z = diag(1,1,-1), the ambiguity projection data cannot
/// resolve) and returns whichever alignment has the lower error.
PoseAlignment align_pose_sets_with_flip(const std::vector<Rotation>& est,
                                        const std::vector<Rotation>& gt);

double mean_geodesic_deg(const std::vector<Rotation>& est,
                         const std::vector<Rotation>& gt);

}  // namespace cryopose::so3
