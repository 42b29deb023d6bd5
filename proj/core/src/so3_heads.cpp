#include "cryopose/so3_heads.hpp"

#include "cryopose/errors.hpp"

namespace cryopose::so3 {

using ad::Var;

int head_dim(HeadKind kind) { return kind == HeadKind::S2S2 ? 6 : 3; }

std::string head_name(HeadKind kind) {
  switch (kind) {
    case HeadKind::Euler: return "euler";
    case HeadKind::Quaternion: return "quaternion";
    case HeadKind::S2S2: return "s2s2";
  }
  return "?";
}

HeadKind head_from_name(const std::string& name) {
  if (name == "euler") return HeadKind::Euler;
  if (name == "quaternion" || name == "quat") return HeadKind::Quaternion;
  if (name == "s2s2") return HeadKind::S2S2;
  throw ConfigError("unknown rotation head '" + name + "' (euler|quaternion|s2s2)");
}

namespace {

Var matrix_from_entries(const std::vector<Var>& e) {
  return ad::reshape(ad::concat0(e), {3, 3});
}

Var euler_head(const Var& raw) {
  using namespace ad;
  const Var a = index1(raw, 0), b = index1(raw, 1), c = index1(raw, 2);
  const Var sa = sin_v(a), ca = cos_v(a);
  const Var sb = sin_v(b), cb = cos_v(b);
  const Var sc = sin_v(c), cc = cos_v(c);
  // R = Rz(a) Ry(b) Rz(c)
  const Var r00 = sub(mul(mul(ca, cb), cc), mul(sa, sc));
  const Var r01 = neg(add(mul(mul(ca, cb), sc), mul(sa, cc)));
  const Var r02 = mul(ca, sb);
  const Var r10 = add(mul(mul(sa, cb), cc), mul(ca, sc));
  const Var r11 = sub(mul(ca, cc), mul(mul(sa, cb), sc));
  const Var r12 = mul(sa, sb);
  const Var r20 = neg(mul(sb, cc));
  const Var r21 = mul(sb, sc);
  const Var r22 = cb;
  return matrix_from_entries({r00, r01, r02, r10, r11, r12, r20, r21, r22});
}

Var quaternion_matrix(const Var& q) {
  using namespace ad;
  const Var w = index1(q, 0), x = index1(q, 1), y = index1(q, 2), z = index1(q, 3);
  const Var xx = mul(x, x), yy = mul(y, y), zz = mul(z, z);
  const Var xy = mul(x, y), xz = mul(x, z), yz = mul(y, z);
  const Var wx = mul(w, x), wy = mul(w, y), wz = mul(w, z);
  const Var r00 = affine(add(yy, zz), -2.0, 1.0);
  const Var r01 = mul_scalar(sub(xy, wz), 2.0);
  const Var r02 = mul_scalar(add(xz, wy), 2.0);
  const Var r10 = mul_scalar(add(xy, wz), 2.0);
  const Var r11 = affine(add(xx, zz), -2.0, 1.0);
  const Var r12 = mul_scalar(sub(yz, wx), 2.0);
  const Var r20 = mul_scalar(sub(xz, wy), 2.0);
  const Var r21 = mul_scalar(add(yz, wx), 2.0);
  const Var r22 = affine(add(xx, yy), -2.0, 1.0);
  return matrix_from_entries({r00, r01, r02, r10, r11, r12, r20, r21, r22});
}

Var quaternion_head(const Var& raw) {
  using namespace ad;
  const Var s = sum_all(mul(raw, raw));
  const Var w = cos_sqrt_half(s);
  const Var qv = mul_scalar_var(raw, sinc_half(s));
  return quaternion_matrix(concat0({w, qv}));
}

Var s2s2_head(const Var& raw) {
  using namespace ad;
  // Degeneracy is decided on values before any sqrt/reciprocal is recorded.
  {
    const double* p = raw.value().real_data();
    const Eigen::Vector3d v1(p[0], p[1], p[2]);
    const Eigen::Vector3d v2(p[3], p[4], p[5]);
    const double n1 = v1.norm();
    CP_CHECK(n1 > 1e-8, Error, "s2s2 head: first vector is degenerate");
    const Eigen::Vector3d w1 = v1 / n1;
    CP_CHECK((v2 - v2.dot(w1) * w1).norm() > 1e-8, Error,
             "s2s2 head: second vector is collinear with the first");
  }
  const Var v1 = slice_rows(raw, 0, 3);
  const Var v2 = slice_rows(raw, 3, 6);
  const Var w1 = mul_scalar_var(v1, reciprocal(sqrt_v(sum_all(mul(v1, v1)))));
  const Var proj = sum_all(mul(v2, w1));
  const Var u2 = sub(v2, mul_scalar_var(w1, proj));
  const Var w2 = mul_scalar_var(u2, reciprocal(sqrt_v(sum_all(mul(u2, u2)))));
  const Var w3 = cross3(w1, w2);
  return ad::reshape(concat0({w1, w2, w3}), {3, 3});
}

}  // namespace

Var head_to_rotation(const Var& raw, HeadKind kind) {
  const Tensor& v = raw.value();
  CP_CHECK_SHAPE(!v.is_complex() && v.rank() == 1 && v.dim(0) == head_dim(kind),
                 "rotation head expects a real vector of length " +
                     std::to_string(head_dim(kind)));
  switch (kind) {
    case HeadKind::Euler: return euler_head(raw);
    case HeadKind::Quaternion: return quaternion_head(raw);
    case HeadKind::S2S2: return s2s2_head(raw);
  }
  throw Error("unreachable");
}

Rotation head_to_rotation_value(const Eigen::VectorXd& raw, HeadKind kind) {
  CP_CHECK_SHAPE(raw.size() == head_dim(kind), "rotation head: bad raw length");
  switch (kind) {
    case HeadKind::Euler:
      return euler_to_matrix(raw[0], raw[1], raw[2]);
    case HeadKind::Quaternion:
      return quaternion_to_matrix(raw3_to_quaternion(raw.head<3>()));
    case HeadKind::S2S2:
      return s2s2_to_matrix(raw.head<3>(), raw.tail<3>());
  }
  throw Error("unreachable");
}

}  // namespace cryopose::so3
