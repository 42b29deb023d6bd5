#pragma once

#include <complex>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cryopose/errors.hpp"

namespace cryopose {

using cdouble = std::complex<double>;
using Shape = std::vector<std::int64_t>;

enum class Dtype { Real64, Complex128 };

std::int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

/// Dense row-major tensor of float64 or complex128 values.
///
/// Storage is shared between copies; all tape operations produce fresh
/// outputs, so sharing is safe. Mutation goes through mutable_real() /
/// mutable_complex(), which unshare the buffer first (copy on write).
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, Dtype dtype = Dtype::Real64);
  static Tensor full(Shape shape, double value);
  static Tensor from_real(Shape shape, std::vector<double> data);
  static Tensor from_complex(Shape shape, std::vector<cdouble> data);
  static Tensor scalar(double v) { return from_real({1}, {v}); }

  const Shape& shape() const { return shape_; }
  Dtype dtype() const { return dtype_; }
  bool is_complex() const { return dtype_ == Dtype::Complex128; }
  std::int64_t numel() const { return numel_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  std::int64_t dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  bool defined() const { return real_ != nullptr || cplx_ != nullptr; }

  const double* real_data() const;
  const cdouble* complex_data() const;
  double* mutable_real();
  cdouble* mutable_complex();

  /// Same data, new shape (element counts must agree). Shares the buffer.
  Tensor reshaped(Shape shape) const;

  /// Value-level conversions (element-wise copies).
  Tensor to_complex() const;
  Tensor real_part() const;

  bool all_finite() const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  /// Convenience scalar access; requires numel() == 1.
  double scalar_value() const;

 private:
  Shape shape_;
  Dtype dtype_ = Dtype::Real64;
  std::int64_t numel_ = 0;
  std::shared_ptr<std::vector<double>> real_;
  std::shared_ptr<std::vector<cdouble>> cplx_;
};

}  // namespace cryopose
