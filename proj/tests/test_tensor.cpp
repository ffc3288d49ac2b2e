#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"

using namespace mvscreen;

TEST_CASE("shape helpers") {
  CHECK(shape_numel({}) == 1);
  CHECK(shape_numel({2, 3, 4}) == 24);
  CHECK(to_string({2, 3}) == "[2x3]");
  CHECK_THROWS_AS(TensorD({2, 2}, TensorD::Vector::Zero(3)), ShapeError);
}

TEST_CASE("construction and access") {
  const auto t = TensorD::from_values({2, 2}, {1, 2, 3, 4});
  CHECK(t.rank() == 2);
  CHECK(t.dim(1) == 2);
  CHECK(t[3] == 4.0);
  CHECK_THROWS_AS(t.item(), ShapeError);
  CHECK(TensorD::full({1}, 2.5).item() == 2.5);
  CHECK_FALSE(t.has_grad());
  CHECK(t.grad().isZero());
}

TEST_CASE("chain rule through a shared input") {
  // f(a, b) = sum(a * b + a); df/da = b + 1, df/db = a.
  const auto a = TensorD::from_values({3}, {1, -2, 3}, true);
  const auto b = TensorD::from_values({3}, {4, 5, -6}, true);
  const auto f = nn::sum(nn::add(nn::mul(a, b), a));
  CHECK(f.item() == doctest::Approx(4 - 10 - 18 + 2));
  f.backward();
  CHECK(a.grad() == (TensorD::Vector(3) << 5, 6, -5).finished());
  CHECK(b.grad() == a.values());
}

TEST_CASE("gradients accumulate across backward calls until zeroed") {
  const auto x = TensorD::from_values({2}, {1, 2}, true);
  nn::sum(nn::scale(x, 3.0)).backward();
  nn::sum(nn::scale(x, 3.0)).backward();
  CHECK(x.grad() == TensorD::Vector::Constant(2, 6.0));
  x.zero_grad();
  CHECK_FALSE(x.has_grad());
}

TEST_CASE("interior gradients are released after backward") {
  const auto x = TensorD::from_values({2}, {1, 2}, true);
  const auto y = nn::scale(x, 2.0);
  nn::sum(y).backward();
  CHECK_FALSE(y.has_grad());
  CHECK(x.has_grad());
}

TEST_CASE("no-grad guard records nothing") {
  const auto x = TensorD::from_values({2}, {1, 2}, true);
  TensorD y;
  {
    NoGradGuard guard;
    y = nn::sum(nn::scale(x, 2.0));
  }
  CHECK(GradMode::enabled());
  CHECK_FALSE(y.requires_grad());
  y.backward();
  CHECK_FALSE(x.has_grad());
}

TEST_CASE("backward needs a scalar") {
  const auto x = TensorD::from_values({2}, {1, 2}, true);
  CHECK_THROWS_AS(nn::scale(x, 2.0).backward(), ShapeError);
}

TEST_CASE("detached copy has fresh storage") {
  const auto x = TensorD::from_values({2}, {1, 2}, true);
  auto y = x.detached_copy();
  y.values_mut()[0] = 7;
  CHECK(x[0] == 1.0);
  CHECK_FALSE(y.same_storage(x));
  CHECK(x.same_storage(x));
}

TEST_CASE("accumulate_grad rejects mismatched size") {
  const auto x = TensorD::zeros({3}, true);
  CHECK_THROWS_AS(x.accumulate_grad(TensorD::Vector::Zero(2)), ShapeError);
}

TEST_CASE("cast between scalars") {
  const auto x = TensorD::from_values({2}, {0.5, -1.25});
  const auto f = cast<float>(x);
  CHECK(f[0] == 0.5f);
  CHECK(f[1] == -1.25f);
}
