#include "cryopose/tensor.hpp"

#include <cmath>
#include <sstream>

namespace cryopose {

std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (auto d : s) {
    CP_CHECK_SHAPE(d >= 0, "negative extent in shape " + shape_str(s));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

Tensor Tensor::zeros(Shape shape, Dtype dtype) {
  Tensor t;
  t.numel_ = shape_numel(shape);
  t.shape_ = std::move(shape);
  t.dtype_ = dtype;
  if (dtype == Dtype::Real64) {
    t.real_ = std::make_shared<std::vector<double>>(t.numel_, 0.0);
  } else {
    t.cplx_ = std::make_shared<std::vector<cdouble>>(t.numel_, cdouble{0.0, 0.0});
  }
  return t;
}

Tensor Tensor::full(Shape shape, double value) {
  Tensor t = zeros(std::move(shape), Dtype::Real64);
  auto& v = *t.real_;
  for (auto& x : v) x = value;
  return t;
}

Tensor Tensor::from_real(Shape shape, std::vector<double> data) {
  Tensor t;
  t.numel_ = shape_numel(shape);
  CP_CHECK_SHAPE(t.numel_ == static_cast<std::int64_t>(data.size()),
                 "data length does not match shape " + shape_str(shape));
  t.shape_ = std::move(shape);
  t.dtype_ = Dtype::Real64;
  t.real_ = std::make_shared<std::vector<double>>(std::move(data));
  return t;
}

Tensor Tensor::from_complex(Shape shape, std::vector<cdouble> data) {
  Tensor t;
  t.numel_ = shape_numel(shape);
  CP_CHECK_SHAPE(t.numel_ == static_cast<std::int64_t>(data.size()),
                 "data length does not match shape " + shape_str(shape));
  t.shape_ = std::move(shape);
  t.dtype_ = Dtype::Complex128;
  t.cplx_ = std::make_shared<std::vector<cdouble>>(std::move(data));
  return t;
}

const double* Tensor::real_data() const {
  CP_CHECK_SHAPE(dtype_ == Dtype::Real64, "tensor is not real-valued");
  return real_->data();
}

const cdouble* Tensor::complex_data() const {
  CP_CHECK_SHAPE(dtype_ == Dtype::Complex128, "tensor is not complex-valued");
  return cplx_->data();
}

double* Tensor::mutable_real() {
  CP_CHECK_SHAPE(dtype_ == Dtype::Real64, "tensor is not real-valued");
  if (real_.use_count() > 1) real_ = std::make_shared<std::vector<double>>(*real_);
  return real_->data();
}

cdouble* Tensor::mutable_complex() {
  CP_CHECK_SHAPE(dtype_ == Dtype::Complex128, "tensor is not complex-valued");
  if (cplx_.use_count() > 1) cplx_ = std::make_shared<std::vector<cdouble>>(*cplx_);
  return cplx_->data();
}

Tensor Tensor::reshaped(Shape shape) const {
  CP_CHECK_SHAPE(shape_numel(shape) == numel_,
                 "reshape " + shape_str(shape_) + " -> " + shape_str(shape) +
                     " changes the element count");
  Tensor t = *this;
  t.shape_ = std::move(shape);
  return t;
}

Tensor Tensor::to_complex() const {
  if (dtype_ == Dtype::Complex128) return *this;
  Tensor t = zeros(shape_, Dtype::Complex128);
  const double* src = real_->data();
  cdouble* dst = t.cplx_->data();
  for (std::int64_t i = 0; i < numel_; ++i) dst[i] = cdouble{src[i], 0.0};
  return t;
}

Tensor Tensor::real_part() const {
  if (dtype_ == Dtype::Real64) return *this;
  Tensor t = zeros(shape_, Dtype::Real64);
  const cdouble* src = cplx_->data();
  double* dst = t.real_->data();
  for (std::int64_t i = 0; i < numel_; ++i) dst[i] = src[i].real();
  return t;
}

bool Tensor::all_finite() const {
  if (dtype_ == Dtype::Real64) {
    for (double v : *real_)
      if (!std::isfinite(v)) return false;
  } else {
    for (const cdouble& v : *cplx_)
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  }
  return true;
}

double Tensor::scalar_value() const {
  CP_CHECK_SHAPE(numel_ == 1, "scalar_value() on tensor of shape " + shape_str(shape_));
  return dtype_ == Dtype::Real64 ? (*real_)[0] : (*cplx_)[0].real();
}

}  // namespace cryopose
