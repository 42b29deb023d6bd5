#include "cryopose/adam.hpp"

#include <cmath>

namespace cryopose {

bool adam_step(Tensor& param, const Tensor& grad, AdamState& state,
               const AdamConfig& cfg, std::int64_t step) {
  CP_CHECK_SHAPE(param.same_shape(grad) && param.same_shape(state.m) &&
                     param.same_shape(state.v),
                 "adam_step: shape mismatch between param, grad and state");
  CP_CHECK_SHAPE(!param.is_complex() && !grad.is_complex(),
                 "adam_step expects real parameters and gradients");
  CP_CHECK(step >= 1, Error, "adam_step: step counter must be >= 1");
  if (!grad.all_finite()) return false;

  const std::int64_t n = param.numel();
  const double* g = grad.real_data();
  double* p = param.mutable_real();
  double* m = state.m.mutable_real();
  double* v = state.v.mutable_real();

  // beta = 0 reduces to the uncorrected moment (bias factor 1).
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  const double inv_bc1 = bc1 > 0.0 ? 1.0 / bc1 : 1.0;
  const double inv_bc2 = bc2 > 0.0 ? 1.0 / bc2 : 1.0;

  for (std::int64_t i = 0; i < n; ++i) {
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
    const double mhat = m[i] * inv_bc1;
    const double vhat = v[i] * inv_bc2;
    p[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
  return true;
}

}  // namespace cryopose
