#include <gtest/gtest.h>

#include "csanet/error.hpp"
#include "csanet/ops.hpp"
#include "csanet/tensor.hpp"

using namespace csanet;

TEST(Tensor, ShapeAndFill) {
  Tensor<float> t({2, 3}, 1.5f);
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_EQ(t.dim(1), 3u);
  for (float v : t.data()) EXPECT_EQ(v, 1.5f);
  EXPECT_FALSE(t.requires_grad());
  EXPECT_FALSE(t.has_grad());
}

TEST(Tensor, RejectsBadShapes) {
  EXPECT_THROW(Tensor<double>(Shape{}), DimensionError);
  EXPECT_THROW(Tensor<double>(Shape{2, 0}), DimensionError);
  EXPECT_THROW(Tensor<double>(Shape{2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  EXPECT_THROW(Tensor<double>({2}).dim(1), DimensionError);
}

TEST(Tensor, HandlesAliasAndCloneCopies) {
  Tensor<double> a({2}, std::vector<double>{1, 2});
  Tensor<double> alias = a;
  Tensor<double> copy = a.clone();
  alias[0] = 7;
  EXPECT_EQ(a[0], 7);
  EXPECT_EQ(copy[0], 1);
}

TEST(Tensor, BackwardAccumulatesThroughSharedInputs) {
  Tensor<double> x({3}, std::vector<double>{1, 2, 3});
  x.set_requires_grad(true);
  // y = sum(x * x + x) -> dy/dx = 2x + 1
  Tensor<double> y = sum(add(mul(x, x), x));
  y.backward();
  ASSERT_TRUE(x.has_grad());
  EXPECT_DOUBLE_EQ(x.grad()[0], 3);
  EXPECT_DOUBLE_EQ(x.grad()[1], 5);
  EXPECT_DOUBLE_EQ(x.grad()[2], 7);

  // A second backward adds to the existing gradient.
  Tensor<double> z = sum(x);
  z.backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 4);
}

TEST(Tensor, NoGradGuardSkipsGraph) {
  Tensor<double> x({2}, 1.0);
  x.set_requires_grad(true);
  {
    NoGradGuard guard;
    Tensor<double> y = sum(x);
    EXPECT_FALSE(y.requires_grad());
    EXPECT_THROW(y.backward(), StateError);
  }
  EXPECT_TRUE(GradMode::enabled());
}

TEST(Tensor, DetachCutsTheGraph) {
  Tensor<double> x({2}, std::vector<double>{1, 2});
  x.set_requires_grad(true);
  Tensor<double> y = sum(mul(x, x.detach()));
  y.backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 1);
  EXPECT_DOUBLE_EQ(x.grad()[1], 2);
}

TEST(Tensor, BackwardNeedsScalar) {
  Tensor<double> x({2}, 1.0);
  x.set_requires_grad(true);
  EXPECT_THROW(scale(x, 2.0).backward(), DimensionError);
}

TEST(Tensor, ZeroAndClearGrad) {
  Tensor<float> x({3}, 1.0f);
  x.zero_grad();
  ASSERT_TRUE(x.has_grad());
  for (float g : x.grad()) EXPECT_EQ(g, 0.0f);
  x.clear_grad();
  EXPECT_FALSE(x.has_grad());
  EXPECT_THROW(x.grad(), StateError);
}

TEST(Tensor, DeepChainDoesNotOverflowTheStack) {
  Tensor<double> x({1}, 1.0);
  x.set_requires_grad(true);
  Tensor<double> y = x;
  for (int i = 0; i < 500000; ++i) y = add(y, x);
  sum(y).backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 500001);
}
