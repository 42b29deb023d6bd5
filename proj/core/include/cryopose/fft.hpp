#pragma once

#include "cryopose/tensor.hpp"

namespace cryopose::fft {

/// In-place complex transforms backed by FFTW. Extents must be powers of two.
/// Convention: forward is unnormalized, inverse carries the full 1/N factor
/// (N = product of transformed extents).
void fft2_inplace(cdouble* data, int n0, int n1, bool inverse);
void fft3_inplace(cdouble* data, int n0, int n1, int n2, bool inverse);

/// Out-of-place helpers on tensors (input untouched).
Tensor fft2(const Tensor& t, bool inverse = false);
Tensor fft3(const Tensor& t, bool inverse = false);

bool is_pow2(std::int64_t n);

}  // namespace cryopose::fft
