#include "cryopose/ops.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "cryopose/fft.hpp"

namespace cryopose::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<RowMat>;
using CMapRM = Eigen::Map<const RowMat>;

Tape* tape_of(const Var& a) {
  CP_CHECK_GRAPH(a.valid(), "op on a Var with no tape");
  return a.tape();
}

Tape* tape_of(const Var& a, const Var& b) {
  Tape* t = tape_of(a);
  CP_CHECK_GRAPH(b.valid() && b.tape() == t, "op inputs live on different tapes");
  return t;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  CP_CHECK_SHAPE(a.same_shape(b), std::string(what) + ": shape mismatch " +
                                      shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

// out = alpha*a + beta*b elementwise, dispatching on dtype (dtypes equal).
Tensor linear_combine(const Tensor& a, const Tensor& b, double alpha, double beta) {
  Tensor out = Tensor::zeros(a.shape(), a.dtype());
  const std::int64_t n = a.numel();
  if (a.is_complex()) {
    const cdouble* pa = a.complex_data();
    const cdouble* pb = b.complex_data();
    cdouble* po = out.mutable_complex();
    for (std::int64_t i = 0; i < n; ++i) po[i] = alpha * pa[i] + beta * pb[i];
  } else {
    const double* pa = a.real_data();
    const double* pb = b.real_data();
    double* po = out.mutable_real();
    for (std::int64_t i = 0; i < n; ++i) po[i] = alpha * pa[i] + beta * pb[i];
  }
  return out;
}

void accum_scaled(Tape& t, const Var& v, const Tensor& g, double alpha) {
  if (!t.requires_grad(v)) return;
  Tensor& dst = t.grad_ref(v);
  const std::int64_t n = dst.numel();
  if (dst.is_complex()) {
    cdouble* d = dst.mutable_complex();
    const cdouble* s = g.complex_data();
    for (std::int64_t i = 0; i < n; ++i) d[i] += alpha * s[i];
  } else {
    double* d = dst.mutable_real();
    const double* s = g.real_data();
    for (std::int64_t i = 0; i < n; ++i) d[i] += alpha * s[i];
  }
}

Var elementwise_unary(const Var& a, double (*f)(double), double (*dfdx)(double)) {
  Tape& t = *tape_of(a);
  const Tensor& x = a.value();
  CP_CHECK_SHAPE(!x.is_complex(), "elementwise function expects a real tensor");
  Tensor out = Tensor::zeros(x.shape(), Dtype::Real64);
  const double* px = x.real_data();
  double* po = out.mutable_real();
  const std::int64_t n = x.numel();
  for (std::int64_t i = 0; i < n; ++i) po[i] = f(px[i]);
  return t.record(std::move(out), {a}, [a, x, dfdx](Tape& tp, const Tensor& g) {
    if (!tp.requires_grad(a)) return;
    Tensor& ga = tp.grad_ref(a);
    double* d = ga.mutable_real();
    const double* pg = g.real_data();
    const double* px2 = x.real_data();
    for (std::int64_t i = 0; i < g.numel(); ++i) d[i] += pg[i] * dfdx(px2[i]);
  });
}

}  // namespace

Var add(const Var& a, const Var& b) {
  Tape& t = *tape_of(a, b);
  const Tensor &va = a.value(), &vb = b.value();
  check_same_shape(va, vb, "add");
  CP_CHECK_SHAPE(va.dtype() == vb.dtype(), "add: dtype mismatch");
  Tensor out = linear_combine(va, vb, 1.0, 1.0);
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Tensor& g) {
    tp.accum(a, g);
    tp.accum(b, g);
  });
}

Var sub(const Var& a, const Var& b) {
  Tape& t = *tape_of(a, b);
  const Tensor &va = a.value(), &vb = b.value();
  check_same_shape(va, vb, "sub");
  CP_CHECK_SHAPE(va.dtype() == vb.dtype(), "sub: dtype mismatch");
  Tensor out = linear_combine(va, vb, 1.0, -1.0);
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Tensor& g) {
    tp.accum(a, g);
    accum_scaled(tp, b, g, -1.0);
  });
}

Var mul(const Var& a, const Var& b) {
  Tape& t = *tape_of(a, b);
  const Tensor va = a.value(), vb = b.value();
  check_same_shape(va, vb, "mul");
  const std::int64_t n = va.numel();

  if (!va.is_complex() && !vb.is_complex()) {
    Tensor out = Tensor::zeros(va.shape(), Dtype::Real64);
    const double *pa = va.real_data(), *pb = vb.real_data();
    double* po = out.mutable_real();
    for (std::int64_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
    return t.record(std::move(out), {a, b}, [a, b, va, vb](Tape& tp, const Tensor& g) {
      const double* pg = g.real_data();
      if (tp.requires_grad(a)) {
        double* d = tp.grad_ref(a).mutable_real();
        const double* pb2 = vb.real_data();
        for (std::int64_t i = 0; i < g.numel(); ++i) d[i] += pg[i] * pb2[i];
      }
      if (tp.requires_grad(b)) {
        double* d = tp.grad_ref(b).mutable_real();
        const double* pa2 = va.real_data();
        for (std::int64_t i = 0; i < g.numel(); ++i) d[i] += pg[i] * pa2[i];
      }
    });
  }

  // At least one side complex: promote and use the real-linear adjoint,
  // ga += g*conj(b) (taking the real part when a is real), symmetrically for b.
  const Tensor ca = va.is_complex() ? va : va.to_complex();
  const Tensor cb = vb.is_complex() ? vb : vb.to_complex();
  Tensor out = Tensor::zeros(va.shape(), Dtype::Complex128);
  {
    const cdouble *pa = ca.complex_data(), *pb = cb.complex_data();
    cdouble* po = out.mutable_complex();
    for (std::int64_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
  }
  const bool a_real = !va.is_complex();
  const bool b_real = !vb.is_complex();
  return t.record(std::move(out), {a, b},
                  [a, b, ca, cb, a_real, b_real](Tape& tp, const Tensor& g) {
    const cdouble* pg = g.complex_data();
    if (tp.requires_grad(a)) {
      Tensor& ga = tp.grad_ref(a);
      const cdouble* pb2 = cb.complex_data();
      if (a_real) {
        double* d = ga.mutable_real();
        for (std::int64_t i = 0; i < g.numel(); ++i)
          d[i] += (pg[i] * std::conj(pb2[i])).real();
      } else {
        cdouble* d = ga.mutable_complex();
        for (std::int64_t i = 0; i < g.numel(); ++i) d[i] += pg[i] * std::conj(pb2[i]);
      }
    }
    if (tp.requires_grad(b)) {
      Tensor& gb = tp.grad_ref(b);
      const cdouble* pa2 = ca.complex_data();
      if (b_real) {
        double* d = gb.mutable_real();
        for (std::int64_t i = 0; i < g.numel(); ++i)
          d[i] += (pg[i] * std::conj(pa2[i])).real();
      } else {
        cdouble* d = gb.mutable_complex();
        for (std::int64_t i = 0; i < g.numel(); ++i) d[i] += pg[i] * std::conj(pa2[i]);
      }
    }
  });
}

Var affine(const Var& a, double alpha, double beta) {
  Tape& t = *tape_of(a);
  const Tensor& va = a.value();
  Tensor out = Tensor::zeros(va.shape(), va.dtype());
  const std::int64_t n = va.numel();
  if (va.is_complex()) {
    const cdouble* p = va.complex_data();
    cdouble* po = out.mutable_complex();
    for (std::int64_t i = 0; i < n; ++i) po[i] = alpha * p[i] + beta;
  } else {
    const double* p = va.real_data();
    double* po = out.mutable_real();
    for (std::int64_t i = 0; i < n; ++i) po[i] = alpha * p[i] + beta;
  }
  return t.record(std::move(out), {a}, [a, alpha](Tape& tp, const Tensor& g) {
    accum_scaled(tp, a, g, alpha);
  });
}

Var mul_scalar_var(const Var& a, const Var& s) {
  Tape& t = *tape_of(a, s);
  const Tensor va = a.value(), vs = s.value();
  CP_CHECK_SHAPE(!va.is_complex() && !vs.is_complex() && vs.numel() == 1,
                 "mul_scalar_var expects real a and one-element real s");
  const double sv = vs.real_data()[0];
  Tensor out = Tensor::zeros(va.shape(), Dtype::Real64);
  const double* pa = va.real_data();
  double* po = out.mutable_real();
  for (std::int64_t i = 0; i < va.numel(); ++i) po[i] = pa[i] * sv;
  return t.record(std::move(out), {a, s}, [a, s, va, sv](Tape& tp, const Tensor& g) {
    const double* pg = g.real_data();
    if (tp.requires_grad(a)) {
      double* d = tp.grad_ref(a).mutable_real();
      for (std::int64_t i = 0; i < g.numel(); ++i) d[i] += pg[i] * sv;
    }
    if (tp.requires_grad(s)) {
      const double* pa2 = va.real_data();
      double acc = 0.0;
      for (std::int64_t i = 0; i < g.numel(); ++i) acc += pg[i] * pa2[i];
      tp.grad_ref(s).mutable_real()[0] += acc;
    }
  });
}

Var relu(const Var& a) {
  Tape& t = *tape_of(a);
  const Tensor x = a.value();
  CP_CHECK_SHAPE(!x.is_complex(), "relu expects a real tensor");
  Tensor out = Tensor::zeros(x.shape(), Dtype::Real64);
  const double* px = x.real_data();
  double* po = out.mutable_real();
  const std::int64_t n = x.numel();
  for (std::int64_t i = 0; i < n; ++i) po[i] = px[i] > 0.0 ? px[i] : 0.0;
  return t.record(std::move(out), {a}, [a, x](Tape& tp, const Tensor& g) {
    if (!tp.requires_grad(a)) return;
    double* d = tp.grad_ref(a).mutable_real();
    const double* pg = g.real_data();
    const double* px2 = x.real_data();
    for (std::int64_t i = 0; i < g.numel(); ++i)
      if (px2[i] > 0.0) d[i] += pg[i];
  });
}

Var reciprocal(const Var& a) {
  return elementwise_unary(
      a, [](double x) { return 1.0 / x; },
      [](double x) { return -1.0 / (x * x); });
}

Var sqrt_v(const Var& a) {
  return elementwise_unary(
      a, [](double x) { return std::sqrt(x); },
      [](double x) { return 0.5 / std::sqrt(x); });
}

Var sin_v(const Var& a) {
  return elementwise_unary(
      a, [](double x) { return std::sin(x); }, [](double x) { return std::cos(x); });
}

Var cos_v(const Var& a) {
  return elementwise_unary(
      a, [](double x) { return std::cos(x); }, [](double x) { return -std::sin(x); });
}

namespace {

double sinc_half_value(double s) {
  if (s < 1e-8) return 0.5 - s / 48.0 + s * s / 3840.0;
  const double u = std::sqrt(s);
  return std::sin(0.5 * u) / u;
}

double sinc_half_deriv(double s) {
  if (s < 1e-6) return -1.0 / 48.0 + s / 1920.0;
  const double u = std::sqrt(s);
  return std::cos(0.5 * u) / (4.0 * s) - std::sin(0.5 * u) / (2.0 * s * u);
}

}  // namespace

Var cos_sqrt_half(const Var& s) {
  CP_CHECK_SHAPE(s.value().numel() == 1, "cos_sqrt_half expects a one-element tensor");
  return elementwise_unary(
      s, [](double x) { return std::cos(0.5 * std::sqrt(x)); },
      [](double x) { return -0.25 * sinc_half_value(x); });
}

Var sinc_half(const Var& s) {
  CP_CHECK_SHAPE(s.value().numel() == 1, "sinc_half expects a one-element tensor");
  return elementwise_unary(s, &sinc_half_value, &sinc_half_deriv);
}

Var matmul(const Var& a, const Var& b) {
  Tape& t = *tape_of(a, b);
  const Tensor va = a.value(), vb = b.value();
  CP_CHECK_SHAPE(va.rank() == 2 && vb.rank() == 2 && va.dim(1) == vb.dim(0),
                 "matmul: incompatible shapes " + shape_str(va.shape()) + " x " +
                     shape_str(vb.shape()));
  CP_CHECK_SHAPE(!va.is_complex() && !vb.is_complex(), "matmul expects real tensors");
  const auto M = va.dim(0), K = va.dim(1), N = vb.dim(1);
  Tensor out = Tensor::zeros({M, N}, Dtype::Real64);
  MapRM(out.mutable_real(), M, N).noalias() =
      CMapRM(va.real_data(), M, K) * CMapRM(vb.real_data(), K, N);
  return t.record(std::move(out), {a, b}, [a, b, va, vb, M, K, N](Tape& tp, const Tensor& g) {
    CMapRM gm(g.real_data(), M, N);
    if (tp.requires_grad(a)) {
      MapRM(tp.grad_ref(a).mutable_real(), M, K).noalias() +=
          gm * CMapRM(vb.real_data(), K, N).transpose();
    }
    if (tp.requires_grad(b)) {
      MapRM(tp.grad_ref(b).mutable_real(), K, N).noalias() +=
          CMapRM(va.real_data(), M, K).transpose() * gm;
    }
  });
}

Var cross3(const Var& a, const Var& b) {
  Tape& t = *tape_of(a, b);
  const Tensor va = a.value(), vb = b.value();
  CP_CHECK_SHAPE(va.numel() == 3 && vb.numel() == 3 && !va.is_complex() && !vb.is_complex(),
                 "cross3 expects real 3-vectors");
  const double* x = va.real_data();
  const double* y = vb.real_data();
  Tensor out = Tensor::from_real({3}, {x[1] * y[2] - x[2] * y[1],
                                       x[2] * y[0] - x[0] * y[2],
                                       x[0] * y[1] - x[1] * y[0]});
  return t.record(std::move(out), {a, b}, [a, b, va, vb](Tape& tp, const Tensor& g) {
    const double* pg = g.real_data();
    // <da x b, g> = <da, b x g>; <a x db, g> = <db, g x a>
    if (tp.requires_grad(a)) {
      const double* y2 = vb.real_data();
      double* d = tp.grad_ref(a).mutable_real();
      d[0] += y2[1] * pg[2] - y2[2] * pg[1];
      d[1] += y2[2] * pg[0] - y2[0] * pg[2];
      d[2] += y2[0] * pg[1] - y2[1] * pg[0];
    }
    if (tp.requires_grad(b)) {
      const double* x2 = va.real_data();
      double* d = tp.grad_ref(b).mutable_real();
      d[0] += pg[1] * x2[2] - pg[2] * x2[1];
      d[1] += pg[2] * x2[0] - pg[0] * x2[2];
      d[2] += pg[0] * x2[1] - pg[1] * x2[0];
    }
  });
}

namespace {

// col is (C*9, H*W) row-major; row (c*9 + ky*3 + kx) holds the input value at
// (c, y+ky-1, x+kx-1), zero outside.
void im2col_3x3(const double* x, std::int64_t C, std::int64_t H, std::int64_t W,
                double* col) {
  const std::int64_t HW = H * W;
  for (std::int64_t c = 0; c < C; ++c) {
    const double* xc = x + c * HW;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        double* row = col + (c * 9 + ky * 3 + kx) * HW;
        for (std::int64_t oy = 0; oy < H; ++oy) {
          const std::int64_t iy = oy + ky - 1;
          double* dst = row + oy * W;
          if (iy < 0 || iy >= H) {
            std::fill(dst, dst + W, 0.0);
            continue;
          }
          const double* src = xc + iy * W;
          if (kx == 1) {
            std::memcpy(dst, src, sizeof(double) * static_cast<std::size_t>(W));
          } else if (kx == 0) {
            dst[0] = 0.0;
            std::memcpy(dst + 1, src, sizeof(double) * static_cast<std::size_t>(W - 1));
          } else {
            std::memcpy(dst, src + 1, sizeof(double) * static_cast<std::size_t>(W - 1));
            dst[W - 1] = 0.0;
          }
        }
      }
    }
  }
}

// Adjoint of im2col_3x3: scatter-add columns back into the image gradient.
void col2im_3x3_accum(const double* col, std::int64_t C, std::int64_t H, std::int64_t W,
                      double* gx) {
  const std::int64_t HW = H * W;
  for (std::int64_t c = 0; c < C; ++c) {
    double* gc = gx + c * HW;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const double* row = col + (c * 9 + ky * 3 + kx) * HW;
        for (std::int64_t oy = 0; oy < H; ++oy) {
          const std::int64_t iy = oy + ky - 1;
          if (iy < 0 || iy >= H) continue;
          const double* src = row + oy * W;
          double* dst = gc + iy * W;
          if (kx == 1) {
            for (std::int64_t i = 0; i < W; ++i) dst[i] += src[i];
          } else if (kx == 0) {
            for (std::int64_t i = 1; i < W; ++i) dst[i - 1] += src[i];
          } else {
            for (std::int64_t i = 0; i < W - 1; ++i) dst[i + 1] += src[i];
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d(const Var& x, const Var& w) {
  Tape& t = *tape_of(x, w);
  const Tensor vx = x.value(), vw = w.value();
  CP_CHECK_SHAPE(vx.rank() == 4 && vw.rank() == 4 && vw.dim(2) == 3 && vw.dim(3) == 3 &&
                     vw.dim(1) == vx.dim(1),
                 "conv2d expects x (B,C,H,W) and w (F,C,3,3)");
  CP_CHECK_SHAPE(!vx.is_complex() && !vw.is_complex(), "conv2d expects real tensors");
  const auto B = vx.dim(0), C = vx.dim(1), H = vx.dim(2), W = vx.dim(3);
  const auto F = vw.dim(0);
  const std::int64_t HW = H * W, C9 = C * 9;

  Tensor out = Tensor::zeros({B, F, H, W}, Dtype::Real64);
  {
    std::vector<double> col(static_cast<std::size_t>(C9 * HW));
    CMapRM wm(vw.real_data(), F, C9);
    double* po = out.mutable_real();
    for (std::int64_t b = 0; b < B; ++b) {
      im2col_3x3(vx.real_data() + b * C * HW, C, H, W, col.data());
      MapRM(po + b * F * HW, F, HW).noalias() = wm * CMapRM(col.data(), C9, HW);
    }
  }
  return t.record(std::move(out), {x, w},
                  [x, w, vx, vw, B, C, H, W, F, HW, C9](Tape& tp, const Tensor& g) {
    std::vector<double> col(static_cast<std::size_t>(C9 * HW));
    const double* pg = g.real_data();
    if (tp.requires_grad(x)) {
      double* gx = tp.grad_ref(x).mutable_real();
      CMapRM wm(vw.real_data(), F, C9);
      for (std::int64_t b = 0; b < B; ++b) {
        MapRM(col.data(), C9, HW).noalias() =
            wm.transpose() * CMapRM(pg + b * F * HW, F, HW);
        col2im_3x3_accum(col.data(), C, H, W, gx + b * C * HW);
      }
    }
    if (tp.requires_grad(w)) {
      MapRM gw(tp.grad_ref(w).mutable_real(), F, C9);
      for (std::int64_t b = 0; b < B; ++b) {
        im2col_3x3(vx.real_data() + b * C * HW, C, H, W, col.data());
        gw.noalias() += CMapRM(pg + b * F * HW, F, HW) * CMapRM(col.data(), C9, HW).transpose();
      }
    }
  });
}

Var bias_channels(const Var& x, const Var& b) {
  Tape& t = *tape_of(x, b);
  const Tensor vx = x.value(), vb = b.value();
  CP_CHECK_SHAPE(vx.rank() == 4 && vb.rank() == 1 && vb.dim(0) == vx.dim(1),
                 "bias_channels expects x (B,C,H,W) and b (C)");
  const auto B = vx.dim(0), C = vx.dim(1), HW = vx.dim(2) * vx.dim(3);
  Tensor out = Tensor::zeros(vx.shape(), Dtype::Real64);
  {
    const double* px = vx.real_data();
    const double* pb = vb.real_data();
    double* po = out.mutable_real();
    for (std::int64_t bi = 0; bi < B; ++bi)
      for (std::int64_t c = 0; c < C; ++c) {
        const double bias = pb[c];
        const std::int64_t base = (bi * C + c) * HW;
        for (std::int64_t i = 0; i < HW; ++i) po[base + i] = px[base + i] + bias;
      }
  }
  return t.record(std::move(out), {x, b}, [x, b, B, C, HW](Tape& tp, const Tensor& g) {
    tp.accum(x, g);
    if (tp.requires_grad(b)) {
      double* d = tp.grad_ref(b).mutable_real();
      const double* pg = g.real_data();
      for (std::int64_t bi = 0; bi < B; ++bi)
        for (std::int64_t c = 0; c < C; ++c) {
          const std::int64_t base = (bi * C + c) * HW;
          double acc = 0.0;
          for (std::int64_t i = 0; i < HW; ++i) acc += pg[base + i];
          d[c] += acc;
        }
    }
  });
}

Var add_rowvec(const Var& x, const Var& b) {
  Tape& t = *tape_of(x, b);
  const Tensor vx = x.value(), vb = b.value();
  CP_CHECK_SHAPE(vx.rank() == 2 && vb.rank() == 1 && vb.dim(0) == vx.dim(1),
                 "add_rowvec expects x (B,D) and b (D)");
  const auto B = vx.dim(0), D = vx.dim(1);
  Tensor out = Tensor::zeros(vx.shape(), Dtype::Real64);
  {
    const double* px = vx.real_data();
    const double* pb = vb.real_data();
    double* po = out.mutable_real();
    for (std::int64_t r = 0; r < B; ++r)
      for (std::int64_t c = 0; c < D; ++c) po[r * D + c] = px[r * D + c] + pb[c];
  }
  return t.record(std::move(out), {x, b}, [x, b, B, D](Tape& tp, const Tensor& g) {
    tp.accum(x, g);
    if (tp.requires_grad(b)) {
      double* d = tp.grad_ref(b).mutable_real();
      const double* pg = g.real_data();
      for (std::int64_t r = 0; r < B; ++r)
        for (std::int64_t c = 0; c < D; ++c) d[c] += pg[r * D + c];
    }
  });
}

Var maxpool2d(const Var& x) {
  Tape& t = *tape_of(x);
  const Tensor vx = x.value();
  CP_CHECK_SHAPE(vx.rank() == 4 && vx.dim(2) % 2 == 0 && vx.dim(3) % 2 == 0,
                 "maxpool2d expects (B,C,H,W) with even H and W");
  CP_CHECK_SHAPE(!vx.is_complex(), "maxpool2d expects a real tensor");
  const auto B = vx.dim(0), C = vx.dim(1), H = vx.dim(2), W = vx.dim(3);
  const auto Ho = H / 2, Wo = W / 2;
  Tensor out = Tensor::zeros({B, C, Ho, Wo}, Dtype::Real64);
  auto argmax = std::make_shared<std::vector<std::int64_t>>(
      static_cast<std::size_t>(B * C * Ho * Wo));
  {
    const double* px = vx.real_data();
    double* po = out.mutable_real();
    std::int64_t o = 0;
    for (std::int64_t bc = 0; bc < B * C; ++bc) {
      const double* plane = px + bc * H * W;
      const std::int64_t plane_base = bc * H * W;
      for (std::int64_t oy = 0; oy < Ho; ++oy)
        for (std::int64_t ox = 0; ox < Wo; ++ox, ++o) {
          const std::int64_t i00 = (2 * oy) * W + 2 * ox;
          std::int64_t best = i00;
          double bv = plane[i00];
          const std::int64_t cand[3] = {i00 + 1, i00 + W, i00 + W + 1};
          for (std::int64_t ci : cand)
            if (plane[ci] > bv) {
              bv = plane[ci];
              best = ci;
            }
          po[o] = bv;
          (*argmax)[static_cast<std::size_t>(o)] = plane_base + best;
        }
    }
  }
  return t.record(std::move(out), {x}, [x, argmax](Tape& tp, const Tensor& g) {
    if (!tp.requires_grad(x)) return;
    double* d = tp.grad_ref(x).mutable_real();
    const double* pg = g.real_data();
    for (std::int64_t i = 0; i < g.numel(); ++i)
      d[(*argmax)[static_cast<std::size_t>(i)]] += pg[i];
  });
}

Var reshape(const Var& a, Shape shape) {
  Tape& t = *tape_of(a);
  const Shape original = a.value().shape();
  Tensor out = a.value().reshaped(std::move(shape));
  return t.record(std::move(out), {a}, [a, original](Tape& tp, const Tensor& g) {
    tp.accum(a, g.reshaped(original));
  });
}

Var slice_rows(const Var& a, std::int64_t r0, std::int64_t r1) {
  Tape& t = *tape_of(a);
  const Tensor va = a.value();
  CP_CHECK_SHAPE(va.rank() >= 1 && 0 <= r0 && r0 < r1 && r1 <= va.dim(0),
                 "slice_rows: bad range");
  const std::int64_t stride = va.numel() / va.dim(0);
  Shape os = va.shape();
  os[0] = r1 - r0;
  Tensor out = Tensor::zeros(os, va.dtype());
  const std::int64_t count = (r1 - r0) * stride;
  if (va.is_complex()) {
    std::copy_n(va.complex_data() + r0 * stride, count, out.mutable_complex());
  } else {
    std::copy_n(va.real_data() + r0 * stride, count, out.mutable_real());
  }
  return t.record(std::move(out), {a}, [a, r0, stride, count](Tape& tp, const Tensor& g) {
    if (!tp.requires_grad(a)) return;
    Tensor& ga = tp.grad_ref(a);
    if (ga.is_complex()) {
      cdouble* d = ga.mutable_complex() + r0 * stride;
      const cdouble* s = g.complex_data();
      for (std::int64_t i = 0; i < count; ++i) d[i] += s[i];
    } else {
      double* d = ga.mutable_real() + r0 * stride;
      const double* s = g.real_data();
      for (std::int64_t i = 0; i < count; ++i) d[i] += s[i];
    }
  });
}

Var concat0(const std::vector<Var>& parts) {
  CP_CHECK_GRAPH(!parts.empty(), "concat0 of zero tensors");
  Tape& t = *tape_of(parts.front());
  const Tensor& first = parts.front().value();
  Shape os = first.shape();
  std::int64_t rows = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    CP_CHECK_SHAPE(v.rank() == first.rank() && v.dtype() == first.dtype(),
                   "concat0: rank/dtype mismatch");
    for (int d = 1; d < first.rank(); ++d)
      CP_CHECK_SHAPE(v.dim(d) == first.dim(d), "concat0: trailing shape mismatch");
    rows += v.dim(0);
  }
  os[0] = rows;
  Tensor out = Tensor::zeros(os, first.dtype());
  std::int64_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    if (v.is_complex()) {
      std::copy_n(v.complex_data(), v.numel(), out.mutable_complex() + offset);
    } else {
      std::copy_n(v.real_data(), v.numel(), out.mutable_real() + offset);
    }
    offset += v.numel();
  }
  return t.record(std::move(out), parts, [parts](Tape& tp, const Tensor& g) {
    std::int64_t off = 0;
    for (const Var& p : parts) {
      const std::int64_t n = p.value().numel();
      if (tp.requires_grad(p)) {
        Tensor& gp = tp.grad_ref(p);
        if (gp.is_complex()) {
          cdouble* d = gp.mutable_complex();
          const cdouble* s = g.complex_data() + off;
          for (std::int64_t i = 0; i < n; ++i) d[i] += s[i];
        } else {
          double* d = gp.mutable_real();
          const double* s = g.real_data() + off;
          for (std::int64_t i = 0; i < n; ++i) d[i] += s[i];
        }
      }
      off += n;
    }
  });
}

namespace {

Var reduce_all(const Var& a, bool mean) {
  Tape& t = *tape_of(a);
  const Tensor va = a.value();
  const double scale = mean ? 1.0 / static_cast<double>(va.numel()) : 1.0;
  Tensor out = Tensor::zeros({1}, va.dtype());
  if (va.is_complex()) {
    cdouble acc{0.0, 0.0};
    const cdouble* p = va.complex_data();
    for (std::int64_t i = 0; i < va.numel(); ++i) acc += p[i];
    out.mutable_complex()[0] = acc * scale;
  } else {
    double acc = 0.0;
    const double* p = va.real_data();
    for (std::int64_t i = 0; i < va.numel(); ++i) acc += p[i];
    out.mutable_real()[0] = acc * scale;
  }
  return t.record(std::move(out), {a}, [a, scale](Tape& tp, const Tensor& g) {
    if (!tp.requires_grad(a)) return;
    Tensor& ga = tp.grad_ref(a);
    if (ga.is_complex()) {
      const cdouble gv = g.complex_data()[0] * scale;
      cdouble* d = ga.mutable_complex();
      for (std::int64_t i = 0; i < ga.numel(); ++i) d[i] += gv;
    } else {
      const double gv = g.real_data()[0] * scale;
      double* d = ga.mutable_real();
      for (std::int64_t i = 0; i < ga.numel(); ++i) d[i] += gv;
    }
  });
}

}  // namespace

Var sum_all(const Var& a) { return reduce_all(a, false); }
Var mean_all(const Var& a) { return reduce_all(a, true); }

Var to_complex(const Var& a) {
  Tape& t = *tape_of(a);
  CP_CHECK_SHAPE(!a.value().is_complex(), "to_complex expects a real tensor");
  return t.record(a.value().to_complex(), {a}, [a](Tape& tp, const Tensor& g) {
    if (!tp.requires_grad(a)) return;
    double* d = tp.grad_ref(a).mutable_real();
    const cdouble* s = g.complex_data();
    for (std::int64_t i = 0; i < g.numel(); ++i) d[i] += s[i].real();
  });
}

Var real_part(const Var& z) {
  Tape& t = *tape_of(z);
  CP_CHECK_SHAPE(z.value().is_complex(), "real_part expects a complex tensor");
  return t.record(z.value().real_part(), {z}, [z](Tape& tp, const Tensor& g) {
    if (!tp.requires_grad(z)) return;
    cdouble* d = tp.grad_ref(z).mutable_complex();
    const double* s = g.real_data();
    for (std::int64_t i = 0; i < g.numel(); ++i) d[i] += cdouble{s[i], 0.0};
  });
}

Var conj_v(const Var& z) {
  Tape& t = *tape_of(z);
  const Tensor vz = z.value();
  CP_CHECK_SHAPE(vz.is_complex(), "conj expects a complex tensor");
  Tensor out = Tensor::zeros(vz.shape(), Dtype::Complex128);
  const cdouble* p = vz.complex_data();
  cdouble* po = out.mutable_complex();
  for (std::int64_t i = 0; i < vz.numel(); ++i) po[i] = std::conj(p[i]);
  return t.record(std::move(out), {z}, [z](Tape& tp, const Tensor& g) {
    if (!tp.requires_grad(z)) return;
    cdouble* d = tp.grad_ref(z).mutable_complex();
    const cdouble* s = g.complex_data();
    for (std::int64_t i = 0; i < g.numel(); ++i) d[i] += std::conj(s[i]);
  });
}

namespace {

enum class FftKind { Fwd2, Inv2, Fwd3 };

Var fft_op(const Var& z, FftKind kind) {
  Tape& t = *tape_of(z);
  const Tensor vz = z.value();
  const int rank = kind == FftKind::Fwd3 ? 3 : 2;
  CP_CHECK_SHAPE(vz.rank() == rank && vz.is_complex(), "fft op: bad rank or dtype");
  Tensor out = rank == 2 ? fft::fft2(vz, kind == FftKind::Inv2) : fft::fft3(vz, false);
  const double total = static_cast<double>(vz.numel());
  return t.record(std::move(out), {z}, [z, kind, rank, total](Tape& tp, const Tensor& g) {
    if (!tp.requires_grad(z)) return;
    // Adjoint of the unnormalized forward transform is total * inverse;
    // adjoint of the normalized inverse is (1/total) * forward.
    Tensor gin;
    if (kind == FftKind::Inv2) {
      gin = fft::fft2(g, false);
      cdouble* p = gin.mutable_complex();
      const double s = 1.0 / total;
      for (std::int64_t i = 0; i < gin.numel(); ++i) p[i] *= s;
    } else {
      gin = rank == 2 ? fft::fft2(g, true) : fft::fft3(g, true);
      cdouble* p = gin.mutable_complex();
      for (std::int64_t i = 0; i < gin.numel(); ++i) p[i] *= total;
    }
    tp.accum(z, gin);
  });
}

template <typename T>
void roll_half_2d(const T* src, T* dst, std::int64_t H, std::int64_t W) {
  const std::int64_t h2 = H / 2, w2 = W / 2;
  for (std::int64_t y = 0; y < H; ++y) {
    const std::int64_t sy = (y + h2) % H;
    for (std::int64_t x = 0; x < W; ++x) dst[y * W + x] = src[sy * W + (x + w2) % W];
  }
}

template <typename T>
void roll_half_3d(const T* src, T* dst, std::int64_t D, std::int64_t H, std::int64_t W) {
  const std::int64_t d2 = D / 2, h2 = H / 2, w2 = W / 2;
  for (std::int64_t zz = 0; zz < D; ++zz) {
    const std::int64_t sz = (zz + d2) % D;
    for (std::int64_t y = 0; y < H; ++y) {
      const std::int64_t sy = (y + h2) % H;
      const T* srow = src + (sz * H + sy) * W;
      T* drow = dst + (zz * H + y) * W;
      for (std::int64_t x = 0; x < W; ++x) drow[x] = srow[(x + w2) % W];
    }
  }
}

}  // namespace

Tensor fftshift2_value(const Tensor& t) {
  CP_CHECK_SHAPE(t.rank() == 2 && t.dim(0) % 2 == 0 && t.dim(1) % 2 == 0,
                 "fftshift2 expects a rank-2 tensor with even extents");
  Tensor out = Tensor::zeros(t.shape(), t.dtype());
  if (t.is_complex()) {
    roll_half_2d(t.complex_data(), out.mutable_complex(), t.dim(0), t.dim(1));
  } else {
    roll_half_2d(t.real_data(), out.mutable_real(), t.dim(0), t.dim(1));
  }
  return out;
}

Tensor fftshift3_value(const Tensor& t) {
  CP_CHECK_SHAPE(t.rank() == 3 && t.dim(0) % 2 == 0 && t.dim(1) % 2 == 0 && t.dim(2) % 2 == 0,
                 "fftshift3 expects a rank-3 tensor with even extents");
  Tensor out = Tensor::zeros(t.shape(), t.dtype());
  if (t.is_complex()) {
    roll_half_3d(t.complex_data(), out.mutable_complex(), t.dim(0), t.dim(1), t.dim(2));
  } else {
    roll_half_3d(t.real_data(), out.mutable_real(), t.dim(0), t.dim(1), t.dim(2));
  }
  return out;
}

Var fft2_v(const Var& z) { return fft_op(z, FftKind::Fwd2); }
Var ifft2_v(const Var& z) { return fft_op(z, FftKind::Inv2); }
Var fft3_v(const Var& z) { return fft_op(z, FftKind::Fwd3); }

Var fftshift2_v(const Var& a) {
  Tape& t = *tape_of(a);
  return t.record(fftshift2_value(a.value()), {a}, [a](Tape& tp, const Tensor& g) {
    tp.accum(a, fftshift2_value(g));  // self-inverse permutation for even extents
  });
}

Var fftshift3_v(const Var& a) {
  Tape& t = *tape_of(a);
  return t.record(fftshift3_value(a.value()), {a}, [a](Tape& tp, const Tensor& g) {
    tp.accum(a, fftshift3_value(g));
  });
}

namespace {

template <typename T>
void copy_center_block(const T* src, std::int64_t ssize, T* dst, std::int64_t dsize) {
  // Copies the overlapping centered block between two square grids.
  const std::int64_t n = std::min(ssize, dsize);
  const std::int64_t soff = (ssize - n) / 2, doff = (dsize - n) / 2;
  for (std::int64_t y = 0; y < n; ++y)
    for (std::int64_t x = 0; x < n; ++x)
      dst[(y + doff) * dsize + (x + doff)] = src[(y + soff) * ssize + (x + soff)];
}

template <typename T>
void accum_center_block(const T* src, std::int64_t ssize, T* dst, std::int64_t dsize) {
  const std::int64_t n = std::min(ssize, dsize);
  const std::int64_t soff = (ssize - n) / 2, doff = (dsize - n) / 2;
  for (std::int64_t y = 0; y < n; ++y)
    for (std::int64_t x = 0; x < n; ++x)
      dst[(y + doff) * dsize + (x + doff)] += src[(y + soff) * ssize + (x + soff)];
}

Var recenter2d(const Var& img, std::int64_t out_size) {
  Tape& t = *img.tape();
  const Tensor v = img.value();
  CP_CHECK_SHAPE(v.rank() == 2 && v.dim(0) == v.dim(1), "pad/crop expects a square image");
  const std::int64_t in_size = v.dim(0);
  CP_CHECK_SHAPE((out_size - in_size) % 2 == 0, "pad/crop requires an even size difference");
  Tensor out = Tensor::zeros({out_size, out_size}, v.dtype());
  if (v.is_complex()) {
    copy_center_block(v.complex_data(), in_size, out.mutable_complex(), out_size);
  } else {
    copy_center_block(v.real_data(), in_size, out.mutable_real(), out_size);
  }
  return t.record(std::move(out), {img}, [img, in_size, out_size](Tape& tp, const Tensor& g) {
    if (!tp.requires_grad(img)) return;
    Tensor& gi = tp.grad_ref(img);
    if (gi.is_complex()) {
      accum_center_block(g.complex_data(), out_size, gi.mutable_complex(), in_size);
    } else {
      accum_center_block(g.real_data(), out_size, gi.mutable_real(), in_size);
    }
  });
}

}  // namespace

Var pad_center2d(const Var& img, std::int64_t s) {
  CP_CHECK_SHAPE(s >= img.value().dim(0), "pad_center2d: target smaller than input");
  return recenter2d(img, s);
}

Var crop_center2d(const Var& img, std::int64_t n) {
  CP_CHECK_SHAPE(n <= img.value().dim(0), "crop_center2d: target larger than input");
  return recenter2d(img, n);
}

void trilinear_gather_value(const Tensor& grid, const Tensor& coords, cdouble* out) {
  CP_CHECK_SHAPE(grid.rank() == 3 && grid.is_complex(), "gather grid must be complex rank-3");
  CP_CHECK_SHAPE(coords.rank() == 2 && coords.dim(1) == 3 && !coords.is_complex(),
                 "gather coords must be real (M,3)");
  const std::int64_t N = grid.dim(0);
  CP_CHECK_SHAPE(grid.dim(1) == N && grid.dim(2) == N, "gather grid must be cubic");
  const double center = static_cast<double>(N / 2);
  const cdouble* G = grid.complex_data();
  const double* C = coords.real_data();
  const std::int64_t M = coords.dim(0);
  for (std::int64_t m = 0; m < M; ++m) {
    const double px = C[m * 3 + 0] + center;
    const double py = C[m * 3 + 1] + center;
    const double pz = C[m * 3 + 2] + center;
    const double fx = std::floor(px), fy = std::floor(py), fz = std::floor(pz);
    const auto ix = static_cast<std::int64_t>(fx);
    const auto iy = static_cast<std::int64_t>(fy);
    const auto iz = static_cast<std::int64_t>(fz);
    if (ix < 0 || iy < 0 || iz < 0 || ix + 1 >= N || iy + 1 >= N || iz + 1 >= N) {
      out[m] = cdouble{0.0, 0.0};
      continue;
    }
    const double wx = px - fx, wy = py - fy, wz = pz - fz;
    const cdouble* base = G + (iz * N + iy) * N + ix;
    const cdouble c00 = base[0] * (1.0 - wx) + base[1] * wx;
    const cdouble c10 = base[N] * (1.0 - wx) + base[N + 1] * wx;
    const cdouble c01 = base[N * N] * (1.0 - wx) + base[N * N + 1] * wx;
    const cdouble c11 = base[N * N + N] * (1.0 - wx) + base[N * N + N + 1] * wx;
    out[m] = (c00 * (1.0 - wy) + c10 * wy) * (1.0 - wz) +
             (c01 * (1.0 - wy) + c11 * wy) * wz;
  }
}

Var trilinear_gather(const Var& grid, const Var& coords) {
  Tape& t = *tape_of(grid, coords);
  const Tensor vg = grid.value(), vc = coords.value();
  Tensor out = Tensor::zeros({vc.dim(0)}, Dtype::Complex128);
  trilinear_gather_value(vg, vc, out.mutable_complex());
  return t.record(std::move(out), {grid, coords},
                  [grid, coords, vg, vc](Tape& tp, const Tensor& g) {
    const std::int64_t N = vg.dim(0);
    const double center = static_cast<double>(N / 2);
    const std::int64_t M = vc.dim(0);
    const cdouble* pg = g.complex_data();
    const double* C = vc.real_data();
    const bool want_grid = tp.requires_grad(grid);
    const bool want_coords = tp.requires_grad(coords);
    cdouble* gg = want_grid ? tp.grad_ref(grid).mutable_complex() : nullptr;
    double* gc = want_coords ? tp.grad_ref(coords).mutable_real() : nullptr;
    const cdouble* G = vg.complex_data();
    for (std::int64_t m = 0; m < M; ++m) {
      const cdouble gm = pg[m];
      if (gm == cdouble{0.0, 0.0}) continue;
      const double px = C[m * 3 + 0] + center;
      const double py = C[m * 3 + 1] + center;
      const double pz = C[m * 3 + 2] + center;
      const double fx = std::floor(px), fy = std::floor(py), fz = std::floor(pz);
      const auto ix = static_cast<std::int64_t>(fx);
      const auto iy = static_cast<std::int64_t>(fy);
      const auto iz = static_cast<std::int64_t>(fz);
      if (ix < 0 || iy < 0 || iz < 0 || ix + 1 >= N || iy + 1 >= N || iz + 1 >= N) continue;
      const double wx = px - fx, wy = py - fy, wz = pz - fz;
      const double u[2] = {1.0 - wx, wx}, v[2] = {1.0 - wy, wy}, s[2] = {1.0 - wz, wz};
      double dx = 0.0, dy = 0.0, dz = 0.0;
      for (int k = 0; k < 2; ++k)
        for (int j = 0; j < 2; ++j)
          for (int i = 0; i < 2; ++i) {
            const std::int64_t idx = ((iz + k) * N + (iy + j)) * N + (ix + i);
            if (want_grid) gg[idx] += u[i] * v[j] * s[k] * gm;
            if (want_coords) {
              const double re = (std::conj(gm) * G[idx]).real();
              dx += (i ? 1.0 : -1.0) * v[j] * s[k] * re;
              dy += u[i] * (j ? 1.0 : -1.0) * s[k] * re;
              dz += u[i] * v[j] * (k ? 1.0 : -1.0) * re;
            }
          }
      if (want_coords) {
        gc[m * 3 + 0] += dx;
        gc[m * 3 + 1] += dy;
        gc[m * 3 + 2] += dz;
      }
    }
  });
}

}  // namespace cryopose::ad
