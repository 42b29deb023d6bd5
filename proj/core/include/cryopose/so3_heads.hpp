#pragma once

#include <Eigen/Core>

#include <string>

#include "cryopose/ops.hpp"
#include "cryopose/so3.hpp"

namespace cryopose::so3 {

enum class HeadKind { Euler, Quaternion, S2S2 };

int head_dim(HeadKind kind);
std::string head_name(HeadKind kind);
HeadKind head_from_name(const std::string& name);

/// Differentiable parameterization head: maps a raw (3) or (6) real Var to a
/// (3,3) rotation-matrix Var built from tape primitives.
///   Euler:      ZYZ angles fed to R = Rz * Ry * Rz.
///   Quaternion: exponential-map embedding into a unit quaternion, then the
///               standard quaternion-to-matrix formula.
///   S2S2:       Gram-Schmidt on two 3-vectors; rows (w1, w2, w1 x w2).
/// Throws Error for degenerate s2s2 inputs (caller perturbs and retries).
ad::Var head_to_rotation(const ad::Var& raw, HeadKind kind);

/// Value-level twin of head_to_rotation (same conventions, no tape).
Rotation head_to_rotation_value(const Eigen::VectorXd& raw, HeadKind kind);

}  // namespace cryopose::so3
