#include "oracles.hpp"

#include <cmath>

namespace oracles {

using cryopose::Tensor;

namespace {

double sample_trilinear(const double* v, int n, double x, double y, double z) {
  const double fx = std::floor(x), fy = std::floor(y), fz = std::floor(z);
  const int ix = static_cast<int>(fx), iy = static_cast<int>(fy), iz = static_cast<int>(fz);
  if (ix < 0 || iy < 0 || iz < 0 || ix + 1 >= n || iy + 1 >= n || iz + 1 >= n) return 0.0;
  const double wx = x - fx, wy = y - fy, wz = z - fz;
  double acc = 0.0;
  for (int k = 0; k < 2; ++k)
    for (int j = 0; j < 2; ++j)
      for (int i = 0; i < 2; ++i) {
        const double w = (i ? wx : 1 - wx) * (j ? wy : 1 - wy) * (k ? wz : 1 - wz);
        acc += w * v[(static_cast<std::int64_t>(iz + k) * n + (iy + j)) * n + (ix + i)];
      }
  return acc;
}

}  // namespace

Tensor brute_force_project(const cryopose::Volume& v, const Eigen::Matrix3d& rotation) {
  const int n = v.n();
  const double c = n / 2;
  const Eigen::Matrix3d rt = rotation.transpose();
  Tensor out = Tensor::zeros({n, n}, cryopose::Dtype::Real64);
  double* o = out.mutable_real();
  const double* src = v.density.real_data();
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix) {
      double acc = 0.0;
      for (int z = 0; z < n; ++z) {
        const Eigen::Vector3d p = rt * Eigen::Vector3d(ix - c, iy - c, z - c);
        acc += sample_trilinear(src, n, p.x() + c, p.y() + c, p.z() + c);
      }
      o[static_cast<std::int64_t>(iy) * n + ix] = acc;
    }
  return out;
}

Tensor z_projection(const cryopose::Volume& v) {
  const int n = v.n();
  Tensor out = Tensor::zeros({n, n}, cryopose::Dtype::Real64);
  double* o = out.mutable_real();
  const double* src = v.density.real_data();
  for (int z = 0; z < n; ++z)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x)
        o[static_cast<std::int64_t>(y) * n + x] +=
            src[(static_cast<std::int64_t>(z) * n + y) * n + x];
  return out;
}

double central_fd(const std::function<double(const Tensor&)>& f, const Tensor& p0,
                  std::int64_t index, double h) {
  Tensor plus = Tensor::from_real(p0.shape(),
                                  std::vector<double>(p0.real_data(),
                                                      p0.real_data() + p0.numel()));
  Tensor minus = plus;
  plus.mutable_real()[index] += h;
  minus.mutable_real()[index] -= h;
  return (f(plus) - f(minus)) / (2.0 * h);
}

double rel_error(double got, double want) {
  const double denom = std::max({std::abs(got), std::abs(want), 1e-12});
  return std::abs(got - want) / denom;
}

double naive_sq_loss(const Tensor& a, const Tensor& b) {
  // Outer loop over images, inner loop over pixels.
  const std::int64_t rows = a.dim(0);
  const std::int64_t per_row = a.numel() / rows;
  double acc = 0.0;
  for (std::int64_t r = 0; r < rows; ++r) {
    double row_acc = 0.0;
    for (std::int64_t i = 0; i < per_row; ++i) {
      const double d = a.real_data()[r * per_row + i] - b.real_data()[r * per_row + i];
      row_acc += d * d;
    }
    acc += row_acc;
  }
  return acc;
}

namespace {

// Regularized incomplete gamma P(a,x), Numerical-Recipes style.
double gamma_p(double a, double x) {
  if (x < 0 || a <= 0) return 0.0;
  if (x == 0) return 0.0;
  const double gln = std::lgamma(a);
  if (x < a + 1.0) {
    double ap = a, sum = 1.0 / a, del = sum;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - gln);
  }
  // continued fraction for Q(a,x)
  double b = x + 1.0 - a, c = 1e300, d = 1.0 / b, h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -static_cast<double>(i) * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < 1e-300) d = 1e-300;
    c = b + an / c;
    if (std::abs(c) < 1e-300) c = 1e-300;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-15) break;
  }
  const double q = std::exp(-x + a * std::log(x) - gln) * h;
  return 1.0 - q;
}

}  // namespace

double chi2_tail(double x, int dof) { return 1.0 - gamma_p(0.5 * dof, 0.5 * x); }

double gaussian_mass(double amplitude, double sigma) {
  return amplitude * std::pow(2.0 * M_PI, 1.5) * sigma * sigma * sigma;
}

double first_ctf_zero_radius(double defocus_um, double voltage_kv, double cs_mm,
                             double amplitude_contrast) {
  // Own formulas on purpose: chi(k) = pi lambda dz k^2 - pi/2 Cs lambda^3 k^4.
  const double v = voltage_kv * 1e3;
  const double lambda = 12.2639 / std::sqrt(v * (1.0 + 0.97845e-6 * v));
  const double dz = defocus_um * 1e4;
  const double cs = cs_mm * 1e7;
  auto chi = [&](double k) {
    const double k2 = k * k;
    return M_PI * lambda * dz * k2 - 0.5 * M_PI * cs * lambda * lambda * lambda * k2 * k2;
  };
  const double target = M_PI - std::asin(amplitude_contrast);
  double lo = 0.0, hi = 1e-4;
  while (chi(hi) < target) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (chi(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace oracles
