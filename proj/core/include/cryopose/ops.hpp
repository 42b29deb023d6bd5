#pragma once

#include <vector>

#include "cryopose/tape.hpp"

namespace cryopose::ad {

// Elementwise arithmetic (same shape; real*real -> real, any complex -> complex).
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);

/// alpha * a + beta, elementwise. Covers negation, scalar multiply and
/// scalar add in one primitive.
Var affine(const Var& a, double alpha, double beta = 0.0);
inline Var mul_scalar(const Var& a, double c) { return affine(a, c); }
inline Var neg(const Var& a) { return affine(a, -1.0); }

/// a * s with s a one-element real Var (broadcast over a; a real).
Var mul_scalar_var(const Var& a, const Var& s);

// Elementwise real functions.
Var relu(const Var& a);
Var reciprocal(const Var& a);
Var sqrt_v(const Var& a);
Var sin_v(const Var& a);
Var cos_v(const Var& a);

// Scalar (one-element) maps used by the quaternion head; both are smooth at
// s = 0 where s stands for a squared norm.
//   cos_sqrt_half(s) = cos(sqrt(s)/2)
//   sinc_half(s)     = sin(sqrt(s)/2)/sqrt(s)
Var cos_sqrt_half(const Var& s);
Var sinc_half(const Var& s);

// Linear algebra (real, row-major).
Var matmul(const Var& a, const Var& b);           // (M,K) x (K,N) -> (M,N)
Var cross3(const Var& a, const Var& b);           // (3) x (3) -> (3)

// Neural-network blocks (real).
Var conv2d(const Var& x, const Var& w);           // (B,C,H,W), (F,C,3,3) -> (B,F,H,W); stride 1, zero "same" padding
Var bias_channels(const Var& x, const Var& b);    // (B,C,H,W) + (C)
Var add_rowvec(const Var& x, const Var& b);       // (B,D) + (D)
Var maxpool2d(const Var& x);                      // (B,C,H,W) -> (B,C,H/2,W/2), 2x2 window, first max wins ties

// Shape ops.
Var reshape(const Var& a, Shape shape);
Var slice_rows(const Var& a, std::int64_t r0, std::int64_t r1);  // block along dim 0
Var concat0(const std::vector<Var>& parts);                      // concatenate along dim 0
inline Var index1(const Var& v, std::int64_t i) { return slice_rows(v, i, i + 1); }

// Reductions.
Var sum_all(const Var& a);    // -> (1)
Var mean_all(const Var& a);   // -> (1)

// Complex structure.
Var to_complex(const Var& a);  // real -> complex
Var real_part(const Var& z);   // complex -> real
Var conj_v(const Var& z);

// Fourier transforms (complex; power-of-two extents; forward unnormalized,
// inverse scaled by 1/N; gradients are the adjoint transforms).
Var fft2_v(const Var& z);    // rank 2
Var ifft2_v(const Var& z);
Var fft3_v(const Var& z);    // rank 3

// Half-grid circular shifts moving the zero frequency to/from the center
// (extents must be even; the permutation is then self-inverse).
Var fftshift2_v(const Var& t);
Var fftshift3_v(const Var& t);

// Centered zero-padding of a square image to (s,s) and its adjoint crop back
// to (n,n).
Var pad_center2d(const Var& img, std::int64_t s);
Var crop_center2d(const Var& img, std::int64_t n);

/// Trilinear interpolation of a complex (N,N,N) grid at M fractional
/// coordinates, differentiable in both the grid values and the coordinates.
/// `coords` is (M,3) real, rows (cx,cy,cz) relative to the grid center
/// N/2; the grid is indexed [z][y][x]. Samples whose 2x2x2 neighborhood
/// leaves the grid yield zero (and propagate no gradient).
Var trilinear_gather(const Var& grid, const Var& coords);

// Value-level counterparts shared with non-tape code paths.
Tensor fftshift2_value(const Tensor& t);
Tensor fftshift3_value(const Tensor& t);
void trilinear_gather_value(const Tensor& grid, const Tensor& coords, cdouble* out);

}  // namespace cryopose::ad
