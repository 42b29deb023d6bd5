#include <doctest.h>

#include <cmath>

#include "cryopose/fft.hpp"
#include "cryopose/phantom.hpp"
#include "cryopose/projector.hpp"
#include "cryopose/rng.hpp"
#include "cryopose/so3_heads.hpp"
#include "oracles.hpp"

using namespace cryopose;

namespace {

double rel_l2(const Tensor& got, const Tensor& want) {
  double num = 0, den = 0;
  for (std::int64_t i = 0; i < got.numel(); ++i) {
    const double d = got.real_data()[i] - want.real_data()[i];
    num += d * d;
    den += want.real_data()[i] * want.real_data()[i];
  }
  return std::sqrt(num / den);
}

Volume test_phantom(int n = 32) { return make_phantom(default_phantom(n)); }

}  // namespace

TEST_SUITE_BEGIN("decoder");

TEST_CASE("volume fft: delta spectrum, hermitian symmetry, parseval") {
  const int n = 16;
  Tensor d = Tensor::zeros({n, n, n});
  d.mutable_real()[(static_cast<std::int64_t>(n / 2) * n + n / 2) * n + n / 2] = 1.0;
  const FourierVolume fd = volume_fft(Volume{d, 1.0});
  for (std::int64_t i = 0; i < fd.data.numel(); ++i)
    CHECK(std::abs(std::abs(fd.data.complex_data()[i]) - 1.0) < 1e-12);

  const Volume v = test_phantom(n);
  const FourierVolume f = volume_fft(v);
  const int c = n / 2;
  double worst = 0.0;
  for (int z = 0; z < n; ++z)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const int mz = (2 * c - z) % n, my = (2 * c - y) % n, mx = (2 * c - x) % n;
        if (mz < 0 || my < 0 || mx < 0) continue;
        const cdouble a = f.data.complex_data()[(static_cast<std::int64_t>(z) * n + y) * n + x];
        const cdouble b =
            f.data.complex_data()[(static_cast<std::int64_t>(mz) * n + my) * n + mx];
        worst = std::max(worst, std::abs(a - std::conj(b)));
      }
  CHECK(worst < 1e-8);

  double sum_r = 0, sum_f = 0;
  for (std::int64_t i = 0; i < v.density.numel(); ++i) {
    sum_r += v.density.real_data()[i] * v.density.real_data()[i];
    sum_f += std::norm(f.data.complex_data()[i]);
  }
  CHECK(std::abs(sum_r - sum_f / v.density.numel()) / sum_r < 1e-10);

  // Round trip through the inverse.
  const Volume back = volume_ifft(f);
  CHECK(rel_l2(back.density, v.density) < 1e-12);
}

TEST_CASE("identity slice is exactly the kz = 0 plane") {
  const int n = 16;
  const Volume v = test_phantom(n);
  const FourierVolume f = volume_fft(v);
  const Projector proj(n);
  ad::Tape tape;
  const ad::Var fvol = tape.constant(f.data);
  const ad::Var rot = tape.constant(Tensor::from_real({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
  const Tensor& slice = proj.slice(fvol, rot).value();
  const int c = n / 2;
  double worst = 0.0;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      worst = std::max(worst,
                       std::abs(slice.complex_data()[static_cast<std::int64_t>(y) * n + x] -
                                f.data.complex_data()[(static_cast<std::int64_t>(c) * n + y) * n + x]));
  CHECK(worst == 0.0);  // axis-aligned gather hits grid points exactly
}

TEST_CASE("fourier slice theorem: identity projection equals the z sum") {
  const Volume v = test_phantom(32);
  const Tensor direct = oracles::z_projection(v);
  const Tensor proj = project_volume(v, ImagingParams{}, OpticsConfig{});
  CHECK(rel_l2(proj, direct) < 1e-8);
}

TEST_CASE("rotated projections match the brute-force rotate-and-sum oracle") {
  const Volume v = test_phantom(32);
  const FourierVolume f = volume_fft(v);
  Rng rng(41);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const so3::Rotation r = so3::sample_uniform_rotation(rng);
    ImagingParams params;
    params.rotation = r;
    const Tensor got = project_image(f, params, OpticsConfig{});
    const Tensor want = oracles::brute_force_project(v, r);
    worst = std::max(worst, rel_l2(got, want));
  }
  CHECK(worst < 0.05);
}

TEST_CASE("projection of a spherically symmetric phantom is rotation invariant") {
  PhantomSpec spec;
  spec.n = 32;
  spec.pixel_size = 1.0;
  spec.blobs = {{{0, 0, 0}, 3.0, 1.0}};
  const Volume v = make_phantom(spec);
  const FourierVolume f = volume_fft(v);
  const Tensor base = project_image(f, ImagingParams{}, OpticsConfig{});
  Rng rng(43);
  for (int trial = 0; trial < 5; ++trial) {
    ImagingParams params;
    params.rotation = so3::sample_uniform_rotation(rng);
    const Tensor rotated = project_image(f, params, OpticsConfig{});
    CHECK(rel_l2(rotated, base) < 0.01);
  }
}

TEST_CASE("apply_shift: identity, integer roll, additivity") {
  const int n = 16;
  const Volume v = test_phantom(n);
  const FourierVolume f = volume_fft(v);

  {
    const Tensor phase = shift_phase_image(n, {0.0, 0.0});
    for (std::int64_t i = 0; i < phase.numel(); ++i)
      CHECK(std::abs(phase.complex_data()[i] - cdouble{1.0, 0.0}) < 1e-15);
  }
  {
    ImagingParams params;
    params.shift = Eigen::Vector2d(3.0, -2.0);
    const Tensor shifted = project_image(f, params, OpticsConfig{});
    const Tensor base = project_image(f, ImagingParams{}, OpticsConfig{});
    // shift by integer t rolls the image: shifted(y, x) = base(y - t2, x - t1)
    double worst = 0.0;
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const int sy = ((y + 2) % n + n) % n;
        const int sx = ((x - 3) % n + n) % n;
        worst = std::max(worst, std::abs(shifted.real_data()[y * n + x] -
                                         base.real_data()[sy * n + sx]));
      }
    CHECK(worst < 1e-9);
  }
  {
    Rng rng(47);
    const Eigen::Vector2d a(rng.uniform(-3, 3), rng.uniform(-3, 3));
    const Eigen::Vector2d b(rng.uniform(-3, 3), rng.uniform(-3, 3));
    const Tensor pa = shift_phase_image(n, a);
    const Tensor pb = shift_phase_image(n, b);
    const Tensor pab = shift_phase_image(n, a + b);
    double worst = 0.0;
    for (std::int64_t i = 0; i < pa.numel(); ++i)
      worst = std::max(worst, std::abs(pa.complex_data()[i] * pb.complex_data()[i] -
                                       pab.complex_data()[i]));
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("ctf: zero frequency value, radial symmetry, first zero against the root oracle") {
  OpticsConfig optics;
  optics.pixel_size = 1.0;
  const CtfParams sym{1.0, 1.0, 0.0};

  CHECK(ctf_value(0, 0, sym, optics) == doctest::Approx(-optics.amplitude_contrast));

  {
    Rng rng(53);
    for (int i = 0; i < 200; ++i) {
      const double k = rng.uniform(0.01, 0.45);
      const double phi = rng.uniform(0, 2 * M_PI);
      const double a = ctf_value(k * std::cos(phi), k * std::sin(phi), sym, optics);
      const double b = ctf_value(k, 0, sym, optics);
      CHECK(std::abs(a - b) < 1e-12);
    }
  }
  {
    // First zero from an independently coded chi root.
    const double k_star = oracles::first_ctf_zero_radius(1.0, 300.0, 2.7, 0.1);
    // Library CTF changes sign across k_star.
    const double before = ctf_value(k_star * 0.999, 0, sym, optics);
    const double after = ctf_value(k_star * 1.001, 0, sym, optics);
    CHECK(before < 0.0);
    CHECK(after > 0.0);
    CHECK(std::abs(ctf_value(k_star, 0, sym, optics)) < 1e-6);
  }
  {
    // Astigmatism breaks radial symmetry but keeps CTF even under k -> -k.
    const CtfParams astig{1.2, 0.8, 0.4};
    Rng rng(59);
    for (int i = 0; i < 100; ++i) {
      const double kx = rng.uniform(-0.4, 0.4), ky = rng.uniform(-0.4, 0.4);
      CHECK(ctf_value(kx, ky, astig, optics) ==
            doctest::Approx(ctf_value(-kx, -ky, astig, optics)).epsilon(1e-12));
    }
  }
}

TEST_CASE("decoder is linear in the volume") {
  const int n = 16;
  const Volume v1 = test_phantom(n);
  PhantomSpec spec2 = default_phantom(n);
  spec2.blobs[1].center_frac = {-0.2, 0.1, 0.15};
  const Volume v2 = make_phantom(spec2);

  Rng rng(61);
  const so3::Rotation r = so3::sample_uniform_rotation(rng);
  ImagingParams params;
  params.rotation = r;
  params.ctf = CtfParams{1.0, 0.9, 0.2};
  OpticsConfig optics;
  optics.pixel_size = 3.0;

  const double a = 1.7, b = -0.6;
  Tensor combo = Tensor::zeros({n, n, n});
  for (std::int64_t i = 0; i < combo.numel(); ++i)
    combo.mutable_real()[i] = a * v1.density.real_data()[i] + b * v2.density.real_data()[i];

  const Tensor p1 = project_volume(v1, params, optics);
  const Tensor p2 = project_volume(v2, params, optics);
  const Tensor pc = project_volume(Volume{combo, v1.pixel_size}, params, optics);
  double num = 0, den = 0;
  for (std::int64_t i = 0; i < pc.numel(); ++i) {
    const double want = a * p1.real_data()[i] + b * p2.real_data()[i];
    num += (pc.real_data()[i] - want) * (pc.real_data()[i] - want);
    den += want * want;
  }
  CHECK(std::sqrt(num / den) < 1e-10);
}

TEST_CASE("tape decode matches the value path bit for bit") {
  const int n = 16;
  const Volume v = test_phantom(n);
  Rng rng(67);
  OpticsConfig optics;
  optics.pixel_size = 3.0;

  for (int trial = 0; trial < 4; ++trial) {
    ImagingParams params;
    params.rotation = so3::sample_uniform_rotation(rng);
    params.shift = trial % 2 ? Eigen::Vector2d(1.3, -0.7) : Eigen::Vector2d::Zero();
    if (trial >= 2) params.ctf = CtfParams{0.8, 0.7, 0.1};
    const int pad = trial == 3 ? 2 : 1;

    const Tensor want = project_volume(v, params, optics, pad);

    ad::Tape tape;
    const Projector proj(n);
    const ad::Var vol = tape.leaf(v.density, true);
    const ad::Var fvol = proj.fourier_volume(vol);
    Tensor rot = Tensor::zeros({3, 3});
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) rot.mutable_real()[i * 3 + j] = params.rotation(i, j);
    const Tensor got =
        proj.decode(fvol, tape.constant(rot), params.shift, params.ctf, optics, pad).value();
    for (std::int64_t i = 0; i < got.numel(); ++i)
      CHECK(got.real_data()[i] == want.real_data()[i]);
  }
}

TEST_CASE("loss gradients w.r.t. volume and every head parameterization pass FD") {
  const int n = 16;
  const Volume v = test_phantom(n);
  OpticsConfig optics;
  optics.pixel_size = 3.0;
  Rng rng(71);

  // Target image at a reference pose.
  ImagingParams gt_params;
  gt_params.rotation = so3::sample_uniform_rotation(rng);
  gt_params.ctf = CtfParams{1.0, 0.9, 0.3};
  const Tensor target = project_volume(v, gt_params, optics);
  const Projector proj(n);

  for (const auto kind :
       {so3::HeadKind::Euler, so3::HeadKind::Quaternion, so3::HeadKind::S2S2}) {
    const int dim = so3::head_dim(kind);
    Tensor raw0 = Tensor::zeros({dim});
    for (int i = 0; i < dim; ++i) raw0.mutable_real()[i] = rng.uniform(-1.0, 1.0);
    if (kind == so3::HeadKind::S2S2) raw0.mutable_real()[0] += 1.5;  // keep well-conditioned

    auto loss_at = [&](const Tensor& raw, const Tensor& vol, bool need_grads,
                       Tensor* graw, Tensor* gvol) {
      ad::Tape tape;
      const ad::Var vol_var = tape.leaf(vol, need_grads);
      const ad::Var raw_var = tape.leaf(raw, need_grads);
      const ad::Var rot = so3::head_to_rotation(raw_var, kind);
      const ad::Var img = proj.decode(proj.fourier_volume(vol_var), rot, {0, 0},
                                      gt_params.ctf, optics);
      const ad::Var diff = ad::sub(img, tape.constant(target));
      const ad::Var loss = ad::sum_all(ad::mul(diff, diff));
      const double value = loss.value().scalar_value();
      if (need_grads) {
        tape.backward(loss);
        *graw = raw_var.grad();
        *gvol = vol_var.grad();
      }
      return value;
    };

    Tensor graw, gvol;
    loss_at(raw0, v.density, true, &graw, &gvol);

    for (int i = 0; i < dim; ++i) {
      const double fd = oracles::central_fd(
          [&](const Tensor& raw) { return loss_at(raw, v.density, false, nullptr, nullptr); },
          raw0, i, 1e-5);
      INFO("head ", so3::head_name(kind), " param ", i);
      CHECK(oracles::rel_error(graw.real_data()[i], fd) < 1e-3);
    }
    Rng pick(73);
    for (int t = 0; t < 4; ++t) {
      const auto idx =
          static_cast<std::int64_t>(pick.uniform() * static_cast<double>(v.density.numel()));
      const double fd = oracles::central_fd(
          [&](const Tensor& vol) { return loss_at(raw0, vol, false, nullptr, nullptr); },
          v.density, idx, 1e-5);
      INFO("head ", so3::head_name(kind), " voxel ", idx);
      CHECK(oracles::rel_error(gvol.real_data()[idx], fd) < 1e-3);
    }
  }
}

TEST_SUITE_END();
