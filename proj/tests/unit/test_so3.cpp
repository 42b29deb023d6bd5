#include <doctest.h>

#include <Eigen/Geometry>

#include <cmath>

#include "cryopose/rng.hpp"
#include "cryopose/so3.hpp"
#include "cryopose/so3_heads.hpp"
#include "oracles.hpp"

using namespace cryopose;
using so3::Rotation;

namespace {

constexpr double kPi = 3.14159265358979323846;

Eigen::VectorXd random_vec(int n, Rng& rng, double lo = -2.0, double hi = 2.0) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.uniform(lo, hi);
  return v;
}

}  // namespace

TEST_SUITE_BEGIN("so3");

TEST_CASE("euler_to_matrix: identity and single-axis rotations") {
  CHECK((so3::euler_to_matrix(0, 0, 0) - Rotation::Identity()).norm() < 1e-15);
  // (pi/2, 0, 0) maps x to y.
  const Eigen::Vector3d y = so3::euler_to_matrix(kPi / 2, 0, 0) * Eigen::Vector3d::UnitX();
  CHECK((y - Eigen::Vector3d::UnitY()).norm() < 1e-12);
}

TEST_CASE("euler and quaternion routes agree on random rotations") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    // Same rotation built from ZYZ angles and from axis-angle quaternion
    // factors.
    const double a = rng.uniform(-kPi, kPi);
    const double b = rng.uniform(-kPi, kPi);
    const double c = rng.uniform(-kPi, kPi);
    const Rotation r1 = so3::euler_to_matrix(a, b, c);
    const auto qz1 = so3::raw3_to_quaternion(Eigen::Vector3d(0, 0, a));
    const auto qy = so3::raw3_to_quaternion(Eigen::Vector3d(0, b, 0));
    const auto qz2 = so3::raw3_to_quaternion(Eigen::Vector3d(0, 0, c));
    const Rotation r2 = so3::quaternion_to_matrix(qz1) * so3::quaternion_to_matrix(qy) *
                        so3::quaternion_to_matrix(qz2);
    CHECK((r1 - r2).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("raw3_to_quaternion basics") {
  CHECK((so3::raw3_to_quaternion(Eigen::Vector3d::Zero()) -
         so3::Quaternion(1, 0, 0, 0)).norm() < 1e-15);
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto q = so3::raw3_to_quaternion(random_vec(3, rng, -4, 4));
    CHECK(std::abs(q.norm() - 1.0) < 1e-12);
  }
  // v along z with |v| = pi/2 rotates by pi/2 about z.
  const auto q = so3::raw3_to_quaternion(Eigen::Vector3d(0, 0, kPi / 2));
  CHECK(q[0] == doctest::Approx(std::cos(kPi / 4)).epsilon(1e-12));
  CHECK(q[3] == doctest::Approx(std::sin(kPi / 4)).epsilon(1e-12));
  CHECK(std::abs(q[1]) < 1e-15);
  CHECK(std::abs(q[2]) < 1e-15);
}

TEST_CASE("quaternion_to_matrix: identity, double cover, conjugation oracle") {
  CHECK((so3::quaternion_to_matrix({1, 0, 0, 0}) - Rotation::Identity()).norm() < 1e-15);

  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    so3::Quaternion q;
    for (int i = 0; i < 4; ++i) q[i] = rng.normal();
    q.normalize();
    const Rotation rp = so3::quaternion_to_matrix(q);
    const Rotation rm = so3::quaternion_to_matrix(-q);
    CHECK((rp - rm).cwiseAbs().maxCoeff() == 0.0);  // exact double cover

    // Oracle: rotate basis vectors by quaternion conjugation q v q*.
    const Eigen::Quaterniond eq(q[0], q[1], q[2], q[3]);
    for (int axis = 0; axis < 3; ++axis) {
      const Eigen::Vector3d v = Eigen::Vector3d::Unit(axis);
      const Eigen::Vector3d via_conj = (eq * Eigen::Quaterniond(0, v.x(), v.y(), v.z()) *
                                        eq.conjugate()).vec();
      CHECK((rp * v - via_conj).norm() < 1e-12);
    }
  }

  const Rotation r90 = so3::quaternion_to_matrix(
      {std::cos(kPi / 4), 0, 0, std::sin(kPi / 4)});
  CHECK((r90 * Eigen::Vector3d::UnitX() - Eigen::Vector3d::UnitY()).norm() < 1e-12);
  CHECK_THROWS_AS(so3::quaternion_to_matrix({1.1, 0, 0, 0}), Error);
}

TEST_CASE("s2s2_to_matrix: identity, invariances, degeneracy") {
  const Rotation id = so3::s2s2_to_matrix(Eigen::Vector3d::UnitX(), Eigen::Vector3d::UnitY());
  CHECK((id - Rotation::Identity()).norm() < 1e-15);

  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Vector3d v1 = random_vec(3, rng);
    Eigen::Vector3d v2 = random_vec(3, rng);
    if (v1.norm() < 1e-3 || v1.cross(v2).norm() < 1e-3) continue;
    const Rotation r = so3::s2s2_to_matrix(v1, v2);
    CHECK(so3::is_rotation(r, 1e-9));
    // Positive scaling of v1 and shears of v2 along v1 leave R unchanged.
    const double a = rng.uniform(0.1, 5.0), b = rng.uniform(0.1, 5.0);
    const double c = rng.uniform(-3.0, 3.0);
    const Rotation r2 = so3::s2s2_to_matrix(a * v1, b * v2 + c * v1);
    CHECK((r - r2).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK_THROWS_AS(so3::s2s2_to_matrix(Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitY()),
                  Error);
  CHECK_THROWS_AS(
      so3::s2s2_to_matrix(Eigen::Vector3d::UnitX(), 2.0 * Eigen::Vector3d::UnitX()), Error);
}

TEST_CASE("all heads produce valid rotations on 10^4 random inputs") {
  Rng rng(13);
  for (int trial = 0; trial < 10000; ++trial) {
    const int pick = trial % 3;
    Rotation r;
    if (pick == 0) {
      r = so3::euler_to_matrix(rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(-4, 4));
    } else if (pick == 1) {
      r = so3::quaternion_to_matrix(so3::raw3_to_quaternion(random_vec(3, rng, -4, 4)));
    } else {
      const Eigen::Vector3d v1 = random_vec(3, rng);
      const Eigen::Vector3d v2 = random_vec(3, rng);
      if (v1.norm() < 1e-6 || v1.cross(v2).norm() < 1e-6) continue;
      r = so3::s2s2_to_matrix(v1, v2);
    }
    REQUIRE(so3::is_rotation(r, 1e-9));
  }
}

TEST_CASE("uniform sampler: reproducibility, zero mean, Haar angle density") {
  {
    Rng a(99), b(99);
    for (int i = 0; i < 10; ++i)
      CHECK((so3::sample_uniform_rotation(a) - so3::sample_uniform_rotation(b)).norm() == 0.0);
  }

  Rng rng(17);
  Eigen::Matrix3d mean = Eigen::Matrix3d::Zero();
  const int n_mean = 100000;
  for (int i = 0; i < n_mean; ++i) mean += so3::sample_uniform_rotation(rng);
  mean /= n_mean;
  CHECK(mean.cwiseAbs().maxCoeff() < 0.02);

  // Angle density (1 - cos w)/pi, chi-square over 18 bins, 1e4 samples.
  const int bins = 18, n_samples = 10000;
  std::vector<int> counts(bins, 0);
  Rng rng2(19);
  for (int i = 0; i < n_samples; ++i) {
    const Rotation r = so3::sample_uniform_rotation(rng2);
    const double w = so3::geodesic_distance(Rotation::Identity(), r);
    int bin = static_cast<int>(w / kPi * bins);
    bin = std::min(bin, bins - 1);
    ++counts[static_cast<std::size_t>(bin)];
  }
  double chi2 = 0.0;
  for (int k = 0; k < bins; ++k) {
    const double lo = kPi * k / bins, hi = kPi * (k + 1) / bins;
    const double p = ((hi - std::sin(hi)) - (lo - std::sin(lo))) / kPi;
    const double expected = p * n_samples;
    chi2 += (counts[static_cast<std::size_t>(k)] - expected) *
            (counts[static_cast<std::size_t>(k)] - expected) / expected;
  }
  CHECK(oracles::chi2_tail(chi2, bins - 1) > 0.01);
}

TEST_CASE("geodesic distance basics") {
  Rng rng(23);
  const Rotation rz = so3::euler_to_matrix(kPi, 0, 0);
  CHECK(so3::geodesic_distance(rz, rz) == doctest::Approx(0.0));
  CHECK(so3::geodesic_distance(Rotation::Identity(), rz) == doctest::Approx(kPi));
  for (int i = 0; i < 50; ++i) {
    const Rotation a = so3::sample_uniform_rotation(rng);
    const Rotation b = so3::sample_uniform_rotation(rng);
    CHECK(so3::geodesic_distance(a, b) == doctest::Approx(so3::geodesic_distance(b, a)));
  }
}

TEST_CASE("align_pose_sets: identity, constructed gauge, single outlier") {
  Rng rng(29);
  std::vector<Rotation> gt;
  for (int i = 0; i < 60; ++i) gt.push_back(so3::sample_uniform_rotation(rng));

  {
    const auto res = so3::align_pose_sets(gt, gt);
    CHECK(res.mae_deg < 1e-9);
    CHECK((res.gauge - Rotation::Identity()).cwiseAbs().maxCoeff() < 1e-9);
  }
  {
    const Rotation g0 = so3::sample_uniform_rotation(rng);
    std::vector<Rotation> est;
    for (const auto& r : gt) est.push_back(r * g0);
    const auto res = so3::align_pose_sets(est, gt);
    CHECK(res.mae_deg < 1e-6);
    CHECK((res.gauge - g0.transpose()).cwiseAbs().maxCoeff() < 1e-9);
  }
  {
    std::vector<Rotation> est = gt;
    est[0] = est[0] * so3::euler_to_matrix(kPi, 0, 0);
    const auto res = so3::align_pose_sets(est, gt);
    CHECK(res.mae_deg == doctest::Approx(180.0 / 60).epsilon(0.05));
  }
  CHECK_THROWS_AS(so3::align_pose_sets({}, {}), Error);
}

TEST_CASE("alignment detects the handedness flip") {
  Rng rng(31);
  Eigen::Matrix3d z = Eigen::Matrix3d::Identity();
  z(2, 2) = -1.0;
  std::vector<Rotation> gt, est;
  const Rotation g0 = so3::sample_uniform_rotation(rng);
  for (int i = 0; i < 40; ++i) {
    const Rotation r = so3::sample_uniform_rotation(rng);
    gt.push_back(r);
    est.push_back(z * r * z * g0);  // flipped convention plus a gauge
  }
  const auto plain = so3::align_pose_sets(est, gt);
  const auto both = so3::align_pose_sets_with_flip(est, gt);
  CHECK(both.flipped);
  CHECK(both.mae_deg < 1e-6);
  CHECK(both.mae_deg < plain.mae_deg);
}

TEST_CASE("tape heads match their value twins and pass finite differences") {
  Rng rng(37);
  for (const auto kind :
       {so3::HeadKind::Euler, so3::HeadKind::Quaternion, so3::HeadKind::S2S2}) {
    const int dim = so3::head_dim(kind);
    for (int trial = 0; trial < 20; ++trial) {
      const Eigen::VectorXd raw = random_vec(dim, rng);
      if (kind == so3::HeadKind::S2S2 &&
          (raw.head<3>().norm() < 1e-2 ||
           raw.head<3>().cross(Eigen::Vector3d(raw.tail<3>())).norm() < 1e-2))
        continue;
      Tensor raw_t = Tensor::zeros({dim}, Dtype::Real64);
      for (int i = 0; i < dim; ++i) raw_t.mutable_real()[i] = raw[i];

      ad::Tape tape;
      const ad::Var v = tape.leaf(raw_t, true);
      const ad::Var rot = so3::head_to_rotation(v, kind);
      const Rotation expect = so3::head_to_rotation_value(raw, kind);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          CHECK(rot.value().real_data()[i * 3 + j] ==
                doctest::Approx(expect(i, j)).epsilon(1e-12));

      // Gradient of a random linear functional of R against finite differences.
      Tensor probe = Tensor::zeros({3, 3}, Dtype::Real64);
      for (int i = 0; i < 9; ++i) probe.mutable_real()[i] = rng.uniform(-1, 1);
      const ad::Var loss = ad::sum_all(ad::mul(rot, tape.constant(probe)));
      tape.backward(loss);
      auto eval = [&](const Tensor& p) {
        ad::Tape t2;
        const ad::Var v2 = t2.leaf(p, false);
        return ad::sum_all(ad::mul(so3::head_to_rotation(v2, kind), t2.constant(probe)))
            .value()
            .scalar_value();
      };
      for (int i = 0; i < dim; ++i) {
        const double fd = oracles::central_fd(eval, raw_t, i, 1e-6);
        CHECK(oracles::rel_error(v.grad().real_data()[i], fd) < 1e-4);
      }
    }
  }
}

TEST_SUITE_END();
