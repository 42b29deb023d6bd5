#include <doctest.h>

#include "cryopose/tensor.hpp"

using namespace cryopose;

TEST_SUITE_BEGIN("tensor");

TEST_CASE("element count follows the shape") {
  Tensor t = Tensor::zeros({2, 3, 4});
  CHECK(t.numel() == 24);
  CHECK(t.rank() == 3);
  CHECK_THROWS_AS(Tensor::from_real({2, 2}, {1.0, 2.0, 3.0}), ShapeError);
}

TEST_CASE("copies share storage until mutated") {
  Tensor a = Tensor::full({4}, 1.0);
  Tensor b = a;
  CHECK(b.real_data() == a.real_data());
  b.mutable_real()[0] = 5.0;
  CHECK(a.real_data()[0] == 1.0);
  CHECK(b.real_data()[0] == 5.0);
}

TEST_CASE("reshape shares data and validates the count") {
  Tensor a = Tensor::from_real({6}, {0, 1, 2, 3, 4, 5});
  Tensor b = a.reshaped({2, 3});
  CHECK(b.real_data() == a.real_data());
  CHECK_THROWS_AS(a.reshaped({4}), ShapeError);
}

TEST_CASE("dtype conversions") {
  Tensor a = Tensor::from_real({2}, {1.5, -2.0});
  Tensor c = a.to_complex();
  CHECK(c.is_complex());
  CHECK(c.complex_data()[1] == cdouble{-2.0, 0.0});
  CHECK(c.real_part().real_data()[0] == 1.5);
  CHECK_THROWS_AS((void)a.complex_data(), ShapeError);
}

TEST_CASE("finiteness check") {
  Tensor a = Tensor::from_real({2}, {1.0, 2.0});
  CHECK(a.all_finite());
  a.mutable_real()[1] = std::nan("");
  CHECK(!a.all_finite());
}

TEST_SUITE_END();
