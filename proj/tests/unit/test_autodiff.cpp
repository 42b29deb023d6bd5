#include <doctest.h>

#include <cmath>

#include "cryopose/adam.hpp"
#include "cryopose/fft.hpp"
#include "cryopose/ops.hpp"
#include "cryopose/rng.hpp"
#include "oracles.hpp"

using namespace cryopose;
using ad::Var;

namespace {

Tensor rand_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t = Tensor::zeros(shape, Dtype::Real64);
  double* p = t.mutable_real();
  for (std::int64_t i = 0; i < t.numel(); ++i) p[i] = rng.uniform(lo, hi);
  return t;
}

using GraphFn = std::function<Var(ad::Tape&, const Var&)>;

// Compares the tape gradient of a scalar functional against central finite
// differences at the given coordinates.
void check_gradients(const GraphFn& f, const Tensor& p0,
                     const std::vector<std::int64_t>& idxs, double tol = 1e-4,
                     double h = 1e-5) {
  ad::Tape tape;
  const Var p = tape.leaf(p0, true);
  const Var loss = f(tape, p);
  tape.backward(loss);
  const Tensor& grad = p.grad();
  auto eval = [&](const Tensor& pv) {
    ad::Tape t2;
    return f(t2, t2.leaf(pv, false)).value().scalar_value();
  };
  for (std::int64_t idx : idxs) {
    const double fd = oracles::central_fd(eval, p0, idx, h);
    const double an = grad.real_data()[idx];
    INFO("index ", idx, ": analytic ", an, " vs fd ", fd);
    CHECK(oracles::rel_error(an, fd) < tol);
  }
}

// Projects a complex Var to a scalar through a fixed random complex image so
// both real and imaginary parts influence the loss.
Var complex_probe(ad::Tape& tape, const Var& z, Rng& rng) {
  Tensor probe = Tensor::zeros(z.value().shape(), Dtype::Complex128);
  cdouble* p = probe.mutable_complex();
  for (std::int64_t i = 0; i < probe.numel(); ++i)
    p[i] = cdouble{rng.uniform(-1, 1), rng.uniform(-1, 1)};
  return ad::sum_all(ad::real_part(ad::mul(z, tape.constant(probe))));
}

}  // namespace

TEST_SUITE_BEGIN("autodiff");

TEST_CASE("conv2d of a constant image with an all-ones kernel") {
  ad::Tape tape;
  const Var x = tape.constant(Tensor::full({1, 1, 8, 8}, 1.0));
  const Var w = tape.constant(Tensor::full({1, 1, 3, 3}, 1.0));
  const Tensor& out = ad::conv2d(x, w).value();
  for (int y = 1; y < 7; ++y)
    for (int xx = 1; xx < 7; ++xx) CHECK(out.real_data()[y * 8 + xx] == doctest::Approx(9.0));
  CHECK(out.real_data()[0] == doctest::Approx(4.0));  // corner: 2x2 support
}

TEST_CASE("fft2 then ifft2 restores a 16x16 tensor") {
  Rng rng(11);
  Tensor t = Tensor::zeros({16, 16}, Dtype::Complex128);
  cdouble* p = t.mutable_complex();
  for (std::int64_t i = 0; i < t.numel(); ++i)
    p[i] = cdouble{rng.uniform(-1, 1), rng.uniform(-1, 1)};
  ad::Tape tape;
  const Tensor& back = ad::ifft2_v(ad::fft2_v(tape.constant(t))).value();
  double num = 0, den = 0;
  for (std::int64_t i = 0; i < t.numel(); ++i) {
    num += std::norm(back.complex_data()[i] - p[i]);
    den += std::norm(p[i]);
  }
  CHECK(std::sqrt(num / den) < 1e-10);
}

TEST_CASE("gradient of sum(relu(W v)) matches finite differences to 1e-6") {
  Rng rng(42);
  const Tensor w0 = rand_tensor({6, 4}, rng);
  const Tensor v = rand_tensor({4, 1}, rng);
  check_gradients(
      [&](ad::Tape& t, const Var& w) {
        return ad::sum_all(ad::relu(ad::matmul(w, t.constant(v))));
      },
      w0, {0, 5, 11, 17, 23}, 1e-6);
}

TEST_CASE("finite differences across the elementwise and reduction primitives") {
  Rng rng(7);
  const Tensor a0 = rand_tensor({3, 4}, rng, 0.3, 1.7);  // positive, away from relu kink
  const Tensor b = rand_tensor({3, 4}, rng, 0.2, 1.0);

  check_gradients([&](ad::Tape& t, const Var& a) {
    return ad::sum_all(ad::mul(ad::add(a, t.constant(b)), t.constant(b)));
  }, a0, {0, 3, 11});
  check_gradients([&](ad::Tape& t, const Var& a) {
    return ad::sum_all(ad::mul(ad::sub(a, t.constant(b)), a));
  }, a0, {1, 6, 10});
  check_gradients([&](ad::Tape& t, const Var& a) {
    (void)t;
    return ad::mean_all(ad::mul(a, a));
  }, a0, {0, 5});
  check_gradients([&](ad::Tape& t, const Var& a) {
    (void)t;
    return ad::sum_all(ad::affine(a, -2.5, 0.75));
  }, a0, {2, 7});
  check_gradients([&](ad::Tape& t, const Var& a) {
    (void)t;
    return ad::sum_all(ad::relu(ad::affine(a, 1.0, -1.0)));
  }, a0, {0, 4, 9});
  check_gradients([&](ad::Tape& t, const Var& a) {
    (void)t;
    return ad::sum_all(ad::reciprocal(a));
  }, a0, {0, 8});
  check_gradients([&](ad::Tape& t, const Var& a) {
    (void)t;
    return ad::sum_all(ad::sqrt_v(a));
  }, a0, {1, 9});
  check_gradients([&](ad::Tape& t, const Var& a) {
    (void)t;
    return ad::sum_all(ad::sin_v(ad::cos_v(a)));
  }, a0, {0, 2, 11});
}

TEST_CASE("finite differences for scalar broadcast, slicing and concatenation") {
  Rng rng(13);
  const Tensor a0 = rand_tensor({6}, rng, 0.5, 1.5);
  check_gradients([&](ad::Tape& t, const Var& a) {
    (void)t;
    const Var s = ad::sum_all(ad::slice_rows(a, 0, 2));
    return ad::sum_all(ad::mul_scalar_var(ad::slice_rows(a, 2, 6), s));
  }, a0, {0, 1, 2, 5});
  check_gradients([&](ad::Tape& t, const Var& a) {
    (void)t;
    const Var parts = ad::concat0({ad::slice_rows(a, 3, 6), ad::slice_rows(a, 0, 3)});
    return ad::sum_all(ad::mul(parts, parts));
  }, a0, {0, 3, 5});
  check_gradients([&](ad::Tape& t, const Var& a) {
    (void)t;
    const Var m = ad::reshape(a, {2, 3});
    return ad::sum_all(ad::matmul(m, ad::reshape(a, {3, 2})));
  }, a0, {0, 2, 4});
  check_gradients([&](ad::Tape& t, const Var& a) {
    (void)t;
    return ad::sum_all(ad::cross3(ad::slice_rows(a, 0, 3), ad::slice_rows(a, 3, 6)));
  }, a0, {0, 1, 4});
}

TEST_CASE("finite differences for the quaternion scalar maps") {
  for (double s0 : {0.05, 0.3, 2.0}) {
    const Tensor p0 = Tensor::from_real({1}, {s0});
    check_gradients([&](ad::Tape& t, const Var& s) {
      (void)t;
      return ad::add(ad::cos_sqrt_half(s), ad::sinc_half(s));
    }, p0, {0}, 1e-4, 1e-5);
  }
}

TEST_CASE("quaternion scalar maps are smooth at s = 0") {
  // Series limits: d/ds cos(sqrt(s)/2) -> -1/8, d/ds sinc_half -> -1/48.
  for (double s0 : {0.0, 1e-12, 1e-9}) {
    ad::Tape tape;
    const Var s = tape.leaf(Tensor::from_real({1}, {s0}), true);
    const Var loss = ad::add(ad::cos_sqrt_half(s), ad::sinc_half(s));
    CHECK(loss.value().scalar_value() == doctest::Approx(1.5).epsilon(1e-9));
    tape.backward(loss);
    CHECK(s.grad().real_data()[0] ==
          doctest::Approx(-1.0 / 8.0 - 1.0 / 48.0).epsilon(1e-6));
  }
}

TEST_CASE("finite differences through the network blocks") {
  Rng rng(17);
  const Tensor x0 = rand_tensor({2, 2, 4, 4}, rng);
  const Tensor w0 = rand_tensor({3, 2, 3, 3}, rng);
  const Tensor bias0 = rand_tensor({3}, rng);
  const Tensor probe = rand_tensor({2, 3, 4, 4}, rng);
  const Tensor pool_probe = rand_tensor({2, 2, 2, 2}, rng);

  check_gradients([&](ad::Tape& t, const Var& x) {
    return ad::sum_all(ad::mul(ad::conv2d(x, t.constant(w0)), t.constant(probe)));
  }, x0, {0, 7, 31, 63});
  check_gradients([&](ad::Tape& t, const Var& w) {
    return ad::sum_all(ad::mul(ad::conv2d(t.constant(x0), w), t.constant(probe)));
  }, w0, {0, 9, 26, 53});
  check_gradients([&](ad::Tape& t, const Var& b) {
    return ad::sum_all(ad::mul(bias_channels(ad::conv2d(t.constant(x0), t.constant(w0)), b),
                               t.constant(probe)));
  }, bias0, {0, 1, 2});
  check_gradients([&](ad::Tape& t, const Var& x) {
    return ad::sum_all(ad::mul(ad::maxpool2d(x), t.constant(pool_probe)));
  }, x0, {0, 5, 21, 42});

  const Tensor xr = rand_tensor({3, 4}, rng);
  const Tensor br = rand_tensor({4}, rng);
  check_gradients([&](ad::Tape& t, const Var& b) {
    return ad::sum_all(ad::mul(ad::add_rowvec(t.constant(xr), b), t.constant(xr)));
  }, br, {0, 3});
}

TEST_CASE("finite differences through the complex primitives") {
  Rng rng(23);
  Rng probe_rng(24);
  const Tensor x0 = rand_tensor({8, 8}, rng);

  check_gradients([&](ad::Tape& t, const Var& x) {
    Rng pr(101);
    return complex_probe(t, ad::fft2_v(ad::to_complex(x)), pr);
  }, x0, {0, 9, 37, 63});
  check_gradients([&](ad::Tape& t, const Var& x) {
    Rng pr(102);
    return complex_probe(t, ad::ifft2_v(ad::to_complex(x)), pr);
  }, x0, {0, 13, 55});
  check_gradients([&](ad::Tape& t, const Var& x) {
    Rng pr(103);
    return complex_probe(t, ad::conj_v(ad::fft2_v(ad::to_complex(x))), pr);
  }, x0, {0, 21, 47});
  check_gradients([&](ad::Tape& t, const Var& x) {
    Rng pr(104);
    return complex_probe(t, ad::fftshift2_v(ad::to_complex(x)), pr);
  }, x0, {0, 11});
  check_gradients([&](ad::Tape& t, const Var& x) {
    Rng pr(105);
    const Var z = ad::to_complex(x);
    return complex_probe(t, ad::mul(z, ad::conj_v(ad::fftshift2_v(z))), pr);
  }, x0, {0, 30, 62});
  check_gradients([&](ad::Tape& t, const Var& x) {
    Rng pr(106);
    return complex_probe(t, ad::to_complex(ad::crop_center2d(
        ad::real_part(ad::fft2_v(ad::to_complex(ad::pad_center2d(x, 16)))), 8)), pr);
  }, x0, {0, 18, 44});

  const Tensor v0 = rand_tensor({4, 4, 4}, rng);
  check_gradients([&](ad::Tape& t, const Var& x) {
    Rng pr(107);
    return complex_probe(t, ad::fft3_v(ad::to_complex(ad::fftshift3_v(x))), pr);
  }, v0, {0, 17, 63});
  (void)probe_rng;
}

TEST_CASE("finite differences through trilinear gather, grid and coordinates") {
  Rng rng(31);
  const int n = 8;
  const Tensor grid0 = rand_tensor({n, n, n}, rng);
  // Coordinates with fractional parts away from cell boundaries (the weight
  // derivative is discontinuous at integers).
  Tensor coords0 = Tensor::zeros({5, 3}, Dtype::Real64);
  {
    double* p = coords0.mutable_real();
    for (std::int64_t i = 0; i < coords0.numel(); ++i) {
      const double cell = std::floor(rng.uniform(-3.0, 2.0));
      p[i] = cell + rng.uniform(0.25, 0.75);
    }
  }

  check_gradients([&](ad::Tape& t, const Var& g) {
    Rng pr(201);
    return complex_probe(t, ad::trilinear_gather(ad::to_complex(g), t.constant(coords0)), pr);
  }, grid0, {0, 100, 300, 511});
  check_gradients([&](ad::Tape& t, const Var& c) {
    Rng pr(202);
    return complex_probe(t, ad::trilinear_gather(t.constant(grid0.to_complex()), c), pr);
  }, coords0, {0, 1, 2, 7, 14});
}

TEST_CASE("fft3 followed by its adjoint scales by the element count") {
  Rng rng(5);
  Tensor x = Tensor::zeros({8, 8, 8}, Dtype::Complex128);
  cdouble* p = x.mutable_complex();
  for (std::int64_t i = 0; i < x.numel(); ++i)
    p[i] = cdouble{rng.uniform(-1, 1), rng.uniform(-1, 1)};
  // Adjoint of the unnormalized forward transform is N * inverse.
  Tensor fwd = fft::fft3(x, false);
  Tensor adj = fft::fft3(fwd, true);
  const double scale = static_cast<double>(x.numel());
  double worst = 0.0;
  for (std::int64_t i = 0; i < x.numel(); ++i)
    worst = std::max(worst, std::abs(adj.complex_data()[i] * scale - scale * p[i]));
  CHECK(worst / scale < 1e-10);
}

TEST_CASE("a tensor consumed by two branches accumulates both contributions") {
  // loss = x*x + x at x=2: dloss/dx = 2x + 1 = 5.
  ad::Tape tape;
  const Var x = tape.leaf(Tensor::scalar(2.0), true);
  const Var loss = ad::sum_all(ad::add(ad::mul(x, x), x));
  tape.backward(loss);
  CHECK(x.grad().real_data()[0] == doctest::Approx(5.0).epsilon(1e-14));
}

TEST_CASE("graph misuse raises GraphError") {
  ad::Tape tape;
  const Var x = tape.leaf(Tensor::scalar(1.0), true);
  const Var y = ad::mul(x, x);

  SUBCASE("gradient read before backward") { CHECK_THROWS_AS((void)y.grad(), GraphError); }
  SUBCASE("backward on a detached Var") {
    Var none;
    CHECK_THROWS_AS(tape.backward(none), GraphError);
  }
  SUBCASE("backward twice") {
    tape.backward(y);
    CHECK_THROWS_AS(tape.backward(y), GraphError);
  }
  SUBCASE("non-scalar loss") {
    const Var v = tape.leaf(Tensor::full({3}, 1.0), true);
    CHECK_THROWS_AS(tape.backward(v), GraphError);
  }
  SUBCASE("inputs from different tapes") {
    ad::Tape other;
    const Var z = other.leaf(Tensor::scalar(1.0), true);
    CHECK_THROWS_AS(ad::mul(x, z), GraphError);
  }
}

TEST_CASE("ops validate shapes") {
  ad::Tape tape;
  const Var a = tape.constant(Tensor::full({2, 2}, 1.0));
  const Var b = tape.constant(Tensor::full({3}, 1.0));
  CHECK_THROWS_AS(ad::add(a, b), ShapeError);
  CHECK_THROWS_AS(ad::matmul(a, b), ShapeError);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  Tensor p = Tensor::from_real({3}, {1.0, -2.0, 3.0});
  AdamState st = AdamState::for_param(p);
  const Tensor g = Tensor::zeros({3});
  CHECK(adam_step(p, g, st, {0.1, 0.9, 0.999, 1e-8}, 1));
  CHECK(p.real_data()[0] == 1.0);
  CHECK(p.real_data()[1] == -2.0);
  CHECK(p.real_data()[2] == 3.0);
}

TEST_CASE("adam: beta1 = beta2 = 0 reduces to the sign-like update") {
  Tensor p = Tensor::from_real({2}, {0.0, 0.0});
  AdamState st = AdamState::for_param(p);
  const Tensor g = Tensor::from_real({2}, {3.0, -0.5});
  const double lr = 0.25, eps = 1e-8;
  CHECK(adam_step(p, g, st, {lr, 0.0, 0.0, eps}, 1));
  for (int i = 0; i < 2; ++i) {
    const double gi = g.real_data()[i];
    const double want = -lr * gi / (std::abs(gi) + eps);
    CHECK(p.real_data()[i] == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("adam: non-finite gradient reports a skipped step") {
  Tensor p = Tensor::from_real({2}, {1.0, 1.0});
  AdamState st = AdamState::for_param(p);
  Tensor g = Tensor::from_real({2}, {1.0, std::nan("")});
  CHECK(!adam_step(p, g, st, {0.1, 0.9, 0.999, 1e-8}, 1));
  CHECK(p.real_data()[0] == 1.0);
  CHECK(st.m.real_data()[0] == 0.0);
}

TEST_CASE("adam on the quadratic bowl matches a scalar simulation") {
  // Independent scalar oracle.
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  std::vector<double> oracle;
  {
    double w = 1.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 100; ++t) {
      const double g = 2.0 * w;
      m = b1 * m + (1 - b1) * g;
      v = b2 * v + (1 - b2) * g * g;
      const double mh = m / (1 - std::pow(b1, t));
      const double vh = v / (1 - std::pow(b2, t));
      w -= lr * mh / (std::sqrt(vh) + eps);
      oracle.push_back(w);
    }
  }

  Tensor p = Tensor::scalar(1.0);
  AdamState st = AdamState::for_param(p);
  for (int t = 1; t <= 100; ++t) {
    const Tensor g = Tensor::scalar(2.0 * p.real_data()[0]);
    REQUIRE(adam_step(p, g, st, {lr, b1, b2, eps}, t));
    CHECK(p.real_data()[0] ==
          doctest::Approx(oracle[static_cast<std::size_t>(t - 1)]).epsilon(1e-13));
  }

  // |w| decreases monotonically after warmup, until momentum overshoots near
  // the bottom of the bowl (frozen from the oracle trajectory).
  std::size_t first_rise = oracle.size();
  for (std::size_t i = 1; i < oracle.size(); ++i) {
    if (std::abs(oracle[i]) >= std::abs(oracle[i - 1])) {
      first_rise = i;
      break;
    }
  }
  CHECK(first_rise >= 9);
  CHECK(std::abs(oracle[first_rise - 1]) < 0.3);
  CHECK(std::abs(oracle.back()) < 0.2);
}

TEST_SUITE_END();
