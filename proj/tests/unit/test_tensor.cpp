#include <doctest.h>

#include <cmath>
#include <limits>

#include "csifb/errors.hpp"
#include "csifb/gradcheck.hpp"
#include "csifb/layers.hpp"
#include "helpers.hpp"

using namespace csifb;
using namespace csifb::tk;

TEST_CASE("tensor shape and data must agree") {
  Tensor t({2, 3}, 1.5);
  CHECK(t.size() == 6);
  CHECK(t.rank() == 2);
  CHECK(t.dim(1) == 3);
  CHECK(numel({4, 0, 2}) == 0);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  CHECK(shape_str({1, 2, 3}) == "[1,2,3]");
}

TEST_CASE("gradient is absent until accumulated, then matches shape") {
  Tensor x({3}, std::vector<double>{1, 2, 3}, true);
  CHECK_FALSE(x.has_grad());
  CHECK(x.grad().size() == 3);
  sum(x).backward();
  REQUIRE(x.has_grad());
  CHECK(x.grad().size() == x.size());
}

TEST_CASE("two backward passes without reset double the gradient") {
  Tensor x = testutil::random_tensor({2, 3}, 1);
  const auto w = testutil::probe_weights(6);
  weighted_sum(x, w).backward();
  const std::vector<double> once(x.grad().begin(), x.grad().end());
  weighted_sum(x, w).backward();
  for (std::size_t i = 0; i < 6; ++i) CHECK(x.grad()[i] == doctest::Approx(2 * once[i]).epsilon(1e-15));
  x.zero_grad();
  for (double g : x.grad()) CHECK(g == 0.0);
}

TEST_CASE("a tensor reused in one graph accumulates both paths") {
  // f(x) = x^2 written as a 1x1 fully connected layer with x as input and weight.
  Tensor x({1, 1}, std::vector<double>{3.0}, true);
  Tensor b({1}, 0.0);
  auto f = [&] { return sum(fc(x, x, b)); };
  Tensor y = f();
  CHECK(y.item() == 9.0);
  y.backward();
  CHECK(x.grad()[0] == doctest::Approx(6.0));
  x.zero_grad();
  const auto report = finite_diff_check(f, {x});
  CHECK(report.max_rel_error < 1e-8);
  CHECK(report.passed);
}

TEST_CASE("finite_diff_check on a constant function reports zero gradients") {
  Tensor x({3}, std::vector<double>{1, 2, 3}, true);
  Tensor c({3}, std::vector<double>{4, 5, 6});
  const auto report = finite_diff_check([&] { return sum(c); }, {x});
  CHECK(report.passed);
  CHECK(report.max_rel_error == 0.0);
  for (double g : x.grad()) CHECK(g == 0.0);
}

TEST_CASE("finite_diff_check rejects non-finite values") {
  Tensor x({1}, std::vector<double>{std::numeric_limits<double>::infinity()}, true);
  CHECK_THROWS_AS(finite_diff_check([&] { return sum(x); }, {x}), NumericalError);
}

TEST_CASE("NoGradGuard stops graph recording") {
  Tensor x({2}, std::vector<double>{1, 2}, true);
  {
    NoGradGuard guard;
    CHECK_FALSE(grad_enabled());
    Tensor y = sum(x);
    CHECK_FALSE(y.requires_grad());
  }
  CHECK(grad_enabled());
  CHECK(sum(x).requires_grad());
}

TEST_CASE("requires_grad can only be toggled on leaves") {
  Tensor x({2}, 1.0, true);
  Tensor y = sum(x);
  CHECK_THROWS(y.set_requires_grad(false));
}

TEST_CASE("forward passes are bitwise deterministic") {
  auto run = [] {
    Tensor x = testutil::random_tensor({2, 3}, 5);
    Tensor w = testutil::random_tensor({3, 4}, 6);
    Tensor b = testutil::random_tensor({4}, 7);
    Tensor y = tk::tanh(fc(x, w, b));
    return std::vector<double>(y.data().begin(), y.data().end());
  };
  CHECK(run() == run());
}
