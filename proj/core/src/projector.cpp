#include "cryopose/projector.hpp"

#include <Eigen/Dense>

#include <cmath>

#include "cryopose/fft.hpp"

namespace cryopose {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Tensor rotation_tensor(const so3::Rotation& r) {
  Tensor t = Tensor::zeros({3, 3}, Dtype::Real64);
  double* p = t.mutable_real();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) p[i * 3 + j] = r(i, j);
  return t;
}

// Same GEMM expression as the tape matmul so value and tape paths agree bit
// for bit.
Tensor slice_coords(const Tensor& freq_rows, const Tensor& rot3x3) {
  const auto m = freq_rows.dim(0);
  Tensor out = Tensor::zeros({m, 3}, Dtype::Real64);
  Eigen::Map<RowMat>(out.mutable_real(), m, 3).noalias() =
      Eigen::Map<const RowMat>(freq_rows.real_data(), m, 3) *
      Eigen::Map<const RowMat>(rot3x3.real_data(), 3, 3);
  return out;
}

void mul_complex_inplace(Tensor& a, const Tensor& b_complex) {
  cdouble* pa = a.mutable_complex();
  const cdouble* pb = b_complex.complex_data();
  for (std::int64_t i = 0; i < a.numel(); ++i) pa[i] = pa[i] * pb[i];
}

Tensor embed_center2d(const Tensor& img, std::int64_t s) {
  const auto n = img.dim(0);
  const std::int64_t off = (s - n) / 2;
  Tensor out = Tensor::zeros({s, s}, img.dtype());
  if (img.is_complex()) {
    const cdouble* src = img.complex_data();
    cdouble* dst = out.mutable_complex();
    for (std::int64_t y = 0; y < n; ++y)
      for (std::int64_t x = 0; x < n; ++x) dst[(y + off) * s + (x + off)] = src[y * n + x];
  } else {
    const double* src = img.real_data();
    double* dst = out.mutable_real();
    for (std::int64_t y = 0; y < n; ++y)
      for (std::int64_t x = 0; x < n; ++x) dst[(y + off) * s + (x + off)] = src[y * n + x];
  }
  return out;
}

Tensor crop_center2d(const Tensor& img, std::int64_t n) {
  const auto s = img.dim(0);
  const std::int64_t off = (s - n) / 2;
  Tensor out = Tensor::zeros({n, n}, img.dtype());
  if (img.is_complex()) {
    const cdouble* src = img.complex_data();
    cdouble* dst = out.mutable_complex();
    for (std::int64_t y = 0; y < n; ++y)
      for (std::int64_t x = 0; x < n; ++x) dst[y * n + x] = src[(y + off) * s + (x + off)];
  } else {
    const double* src = img.real_data();
    double* dst = out.mutable_real();
    for (std::int64_t y = 0; y < n; ++y)
      for (std::int64_t x = 0; x < n; ++x) dst[y * n + x] = src[(y + off) * s + (x + off)];
  }
  return out;
}

// Centered spectrum -> real-space image centered in the box.
Tensor centered_ifft2_real(const Tensor& spectrum) {
  Tensor t = ad::fftshift2_value(spectrum);
  fft::fft2_inplace(t.mutable_complex(), static_cast<int>(t.dim(0)),
                    static_cast<int>(t.dim(1)), /*inverse=*/true);
  return ad::fftshift2_value(t).real_part();
}

Tensor centered_fft2(const Tensor& image_real) {
  Tensor t = ad::fftshift2_value(image_real).to_complex();
  fft::fft2_inplace(t.mutable_complex(), static_cast<int>(t.dim(0)),
                    static_cast<int>(t.dim(1)), /*inverse=*/false);
  return ad::fftshift2_value(t);
}

}  // namespace

void Volume::validate() const {
  CP_CHECK_SHAPE(density.rank() == 3 && !density.is_complex(), "volume must be a real cube");
  const auto nn = density.dim(0);
  CP_CHECK_SHAPE(density.dim(1) == nn && density.dim(2) == nn, "volume must be cubic");
  CP_CHECK_SHAPE(fft::is_pow2(nn), "volume extent must be a power of two");
  CP_CHECK(pixel_size > 0, ConfigError, "volume pixel size must be positive");
  CP_CHECK(density.all_finite(), NumericError, "volume contains non-finite values");
}

FourierVolume volume_fft(const Volume& v) {
  Tensor t = ad::fftshift3_value(v.density).to_complex();
  fft::fft3_inplace(t.mutable_complex(), v.n(), v.n(), v.n(), /*inverse=*/false);
  return FourierVolume{ad::fftshift3_value(t), v.pixel_size};
}

Volume volume_ifft(const FourierVolume& f) {
  Tensor t = ad::fftshift3_value(f.data);
  fft::fft3_inplace(t.mutable_complex(), f.n(), f.n(), f.n(), /*inverse=*/true);
  return Volume{ad::fftshift3_value(t).real_part(), f.pixel_size};
}

Tensor shift_phase_image(int n, const Eigen::Vector2d& t) {
  Tensor out = Tensor::zeros({n, n}, Dtype::Complex128);
  cdouble* o = out.mutable_complex();
  const int c = n / 2;
  const double f = -2.0 * M_PI / static_cast<double>(n);
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix) {
      const double arg = f * ((ix - c) * t.x() + (iy - c) * t.y());
      o[static_cast<std::int64_t>(iy) * n + ix] = cdouble{std::cos(arg), std::sin(arg)};
    }
  return out;
}

Tensor project_image(const FourierVolume& f, const ImagingParams& params,
                     const OpticsConfig& optics, int pad_factor) {
  CP_CHECK(pad_factor >= 1, ConfigError, "pad_factor must be >= 1");
  const int n = f.n();
  Tensor coords = slice_coords(Projector(n).freq_basis(), rotation_tensor(params.rotation));
  Tensor g = Tensor::zeros({static_cast<std::int64_t>(n) * n}, Dtype::Complex128);
  ad::trilinear_gather_value(f.data, coords, g.mutable_complex());
  g = g.reshaped({n, n});
  if (params.shift.squaredNorm() > 0.0) {
    mul_complex_inplace(g, shift_phase_image(n, params.shift));
  }
  if (params.ctf && pad_factor == 1) {
    mul_complex_inplace(g, ctf_image(*params.ctf, optics, n).to_complex());
  }
  Tensor img = centered_ifft2_real(g);
  if (params.ctf && pad_factor > 1) {
    const std::int64_t s = static_cast<std::int64_t>(pad_factor) * n;
    Tensor big = centered_fft2(embed_center2d(img, s));
    OpticsConfig padded = optics;  // same physical pixel size, finer freq step
    mul_complex_inplace(big, ctf_image(*params.ctf, padded, static_cast<int>(s)).to_complex());
    img = crop_center2d(centered_ifft2_real(big), n);
  }
  return img;
}

Tensor project_volume(const Volume& v, const ImagingParams& params,
                      const OpticsConfig& optics, int pad_factor) {
  return project_image(volume_fft(v), params, optics, pad_factor);
}

Projector::Projector(int n) : n_(n) {
  CP_CHECK_SHAPE(fft::is_pow2(n), "projector extent must be a power of two");
  freq_rows_ = Tensor::zeros({static_cast<std::int64_t>(n) * n, 3}, Dtype::Real64);
  double* p = freq_rows_.mutable_real();
  const int c = n / 2;
  std::int64_t m = 0;
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix, ++m) {
      p[m * 3 + 0] = ix - c;
      p[m * 3 + 1] = iy - c;
      p[m * 3 + 2] = 0.0;
    }
}

ad::Var Projector::fourier_volume(const ad::Var& volume) const {
  using namespace ad;
  const Tensor& v = volume.value();
  CP_CHECK_SHAPE(v.rank() == 3 && v.dim(0) == n_ && !v.is_complex(),
                 "fourier_volume expects a real (n,n,n) Var");
  return fftshift3_v(fft3_v(to_complex(fftshift3_v(volume))));
}

ad::Var Projector::slice(const ad::Var& fvol, const ad::Var& rotation) const {
  using namespace ad;
  Tape& t = *fvol.tape();
  const Var basis = t.constant(freq_rows_);
  const Var coords = matmul(basis, rotation);
  return reshape(trilinear_gather(fvol, coords), {n_, n_});
}

ad::Var Projector::decode(const ad::Var& fvol, const ad::Var& rotation,
                          const Eigen::Vector2d& shift, const std::optional<CtfParams>& ctf,
                          const OpticsConfig& optics, int pad_factor) const {
  using namespace ad;
  CP_CHECK(pad_factor >= 1, ConfigError, "pad_factor must be >= 1");
  Tape& t = *fvol.tape();
  Var g = slice(fvol, rotation);
  if (shift.squaredNorm() > 0.0) {
    g = mul(g, t.constant(shift_phase_image(n_, shift)));
  }
  if (ctf && pad_factor == 1) {
    g = mul(g, t.constant(ctf_image(*ctf, optics, n_).to_complex()));
  }
  Var img = real_part(fftshift2_v(ifft2_v(fftshift2_v(g))));
  if (ctf && pad_factor > 1) {
    const std::int64_t s = static_cast<std::int64_t>(pad_factor) * n_;
    Var big = fftshift2_v(fft2_v(fftshift2_v(to_complex(pad_center2d(img, s)))));
    big = mul(big, t.constant(ctf_image(*ctf, optics, static_cast<int>(s)).to_complex()));
    img = crop_center2d(real_part(fftshift2_v(ifft2_v(fftshift2_v(big)))), n_);
  }
  return img;
}

}  // namespace cryopose
