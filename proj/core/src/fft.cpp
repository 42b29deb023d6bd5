#include "cryopose/fft.hpp"

#include <fftw3.h>

#include <array>
#include <map>
#include <mutex>

namespace cryopose::fft {

namespace {

// FFTW planning is not thread-safe; executing distinct or identical plans on
// distinct arrays is. Plans are created once per (rank, extents, sign) with
// FFTW_UNALIGNED so they can be executed on any buffer.
class PlanCache {
 public:
  fftw_plan get(int rank, std::array<int, 3> n, int sign) {
    const std::array<int, 5> key{rank, n[0], n[1], n[2], sign};
    std::lock_guard<std::mutex> lock(mu_);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    std::int64_t total = 1;
    for (int i = 0; i < rank; ++i) total *= n[i];
    std::vector<cdouble> scratch(static_cast<std::size_t>(total));
    auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
    fftw_plan p = fftw_plan_dft(rank, n.data(), buf, buf, sign,
                                FFTW_ESTIMATE | FFTW_UNALIGNED);
    CP_CHECK(p != nullptr, Error, "fftw_plan_dft failed");
    plans_.emplace(key, p);
    return p;
  }

 private:
  std::mutex mu_;
  std::map<std::array<int, 5>, fftw_plan> plans_;
};

PlanCache& cache() {
  static PlanCache c;
  return c;
}

void run(cdouble* data, int rank, std::array<int, 3> n, bool inverse) {
  std::int64_t total = 1;
  for (int i = 0; i < rank; ++i) {
    CP_CHECK_SHAPE(is_pow2(n[i]), "FFT extent is not a power of two");
    total *= n[i];
  }
  fftw_plan p = cache().get(rank, n, inverse ? FFTW_BACKWARD : FFTW_FORWARD);
  auto* buf = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(p, buf, buf);
  if (inverse) {
    const double scale = 1.0 / static_cast<double>(total);
    for (std::int64_t i = 0; i < total; ++i) data[i] *= scale;
  }
}

}  // namespace

bool is_pow2(std::int64_t n) { return n > 0 && (n & (n - 1)) == 0; }

void fft2_inplace(cdouble* data, int n0, int n1, bool inverse) {
  run(data, 2, {n0, n1, 1}, inverse);
}

void fft3_inplace(cdouble* data, int n0, int n1, int n2, bool inverse) {
  run(data, 3, {n0, n1, n2}, inverse);
}

Tensor fft2(const Tensor& t, bool inverse) {
  CP_CHECK_SHAPE(t.rank() == 2, "fft2 expects a rank-2 tensor");
  Tensor out = t.is_complex() ? t : t.to_complex();
  out = Tensor::from_complex(out.shape(),
                             std::vector<cdouble>(out.complex_data(),
                                                  out.complex_data() + out.numel()));
  fft2_inplace(out.mutable_complex(), static_cast<int>(t.dim(0)),
               static_cast<int>(t.dim(1)), inverse);
  return out;
}

Tensor fft3(const Tensor& t, bool inverse) {
  CP_CHECK_SHAPE(t.rank() == 3, "fft3 expects a rank-3 tensor");
  Tensor out = t.is_complex() ? t : t.to_complex();
  out = Tensor::from_complex(out.shape(),
                             std::vector<cdouble>(out.complex_data(),
                                                  out.complex_data() + out.numel()));
  fft3_inplace(out.mutable_complex(), static_cast<int>(t.dim(0)),
               static_cast<int>(t.dim(1)), static_cast<int>(t.dim(2)), inverse);
  return out;
}

}  // namespace cryopose::fft
