#pragma once

#include "cryopose/tensor.hpp"

namespace cryopose {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment estimates for one parameter tensor.
struct AdamState {
  Tensor m;
  Tensor v;

  static AdamState for_param(const Tensor& param) {
    return {Tensor::zeros(param.shape(), Dtype::Real64),
            Tensor::zeros(param.shape(), Dtype::Real64)};
  }
};

/// One Adam update with bias correction, in place. `step` is the 1-based
/// update count. Returns false (and leaves everything untouched) when the
/// gradient contains non-finite values; the caller reports and skips.
bool adam_step(Tensor& param, const Tensor& grad, AdamState& state,
               const AdamConfig& cfg, std::int64_t step);

}  // namespace cryopose
