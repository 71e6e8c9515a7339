#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "degas/error.hpp"
#include "degas/ops.hpp"
#include "degas/tape.hpp"
#include "degas/tensor.hpp"

namespace degas {
namespace {

TEST(Tensor, DataLengthMatchesShape) {
  Tensor t({2, 3, 4});
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(shape_numel({5, 1, 7}), 35u);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
}

TEST(Tensor, RowMajorAccess) {
  Tensor t({1, 2, 2, 3});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i);
  EXPECT_EQ(t.at(0, 1, 0, 2), 8.0);
  EXPECT_EQ(t.at(0, 0, 1, 0), 3.0);
}

TEST(Tensor, ReshapeKeepsData) {
  std::mt19937_64 rng(3);
  Tensor t = Tensor::randn({2, 6}, rng);
  Tensor r = t.reshaped({3, 4});
  EXPECT_EQ(r.shape(), (Shape{3, 4}));
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_EQ(t[i], r[i]);
  EXPECT_THROW(t.reshaped({5}), ShapeError);
}

TEST(Tensor, SeededRandomIsReproducible) {
  std::mt19937_64 a(11), b(11);
  EXPECT_EQ(Tensor::randn({4, 4}, a), Tensor::randn({4, 4}, b));
  Tensor u = Tensor::uniform({1000}, a, -2.0, 3.0);
  for (double v : u.data()) {
    EXPECT_GE(v, -2.0);
    EXPECT_LT(v, 3.0);
  }
}

TEST(Tensor, FiniteCheck) {
  Tensor t({3});
  EXPECT_TRUE(t.all_finite());
  t[1] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_FALSE(t.all_finite());
}

TEST(Tape, SumGradientIsOnes) {
  Tape tape;
  std::mt19937_64 rng(1);
  Var x = tape.leaf(Tensor::randn({2, 3, 4}, rng));
  auto grads = tape.backward(ops::sum(x));
  const Tensor& g = grads.at(x);
  EXPECT_EQ(g.shape(), x.shape());
  for (double v : g.data()) EXPECT_EQ(v, 1.0);
}

TEST(Tape, SquareGradient) {
  Tape tape;
  Var x = tape.leaf(Tensor({2}, {1.0, -2.0}));
  Var x2 = tape.leaf(Tensor({2}, {1.0, -2.0}));
  (void)x2;
  // Σx² written as sum of elementwise product via mean_squared_error against 0.
  Var zero = tape.constant(Tensor::zeros({2}));
  Var loss = ops::scale(ops::mean_squared_error(x, zero), 2.0);
  auto grads = tape.backward(loss);
  EXPECT_DOUBLE_EQ(grads.at(x)[0], 2.0);
  EXPECT_DOUBLE_EQ(grads.at(x)[1], -4.0);
  // Unused trainable leaves still get a zero gradient of their own shape.
  EXPECT_EQ(grads.at(x2), Tensor::zeros({2}));
}

TEST(Tape, ConstantsAndFrozenParametersGetNoGradient) {
  Tape tape;
  Parameter w{Tensor::ones({3}), ParamGroup::weights};
  Parameter a{Tensor::ones({3}), ParamGroup::architecture};
  tape.freeze(ParamGroup::architecture);
  Var c = tape.constant(Tensor::ones({3}));
  Var pw = tape.parameter(w);
  Var pa = tape.parameter(a);
  auto grads = tape.backward(ops::sum(ops::add(ops::add(pw, pa), c)));
  EXPECT_TRUE(grads.contains(w));
  EXPECT_FALSE(grads.contains(a));
  EXPECT_FALSE(grads.contains(c));
  EXPECT_EQ(grads.size(), 1u);
}

TEST(Tape, NonScalarLossRejected) {
  Tape tape;
  Var x = tape.leaf(Tensor::ones({2}));
  EXPECT_THROW(tape.backward(x), ShapeError);
}

TEST(Tape, BackwardRunsOnce) {
  Tape tape;
  Var x = tape.leaf(Tensor::ones({2}));
  Var loss = ops::sum(x);
  tape.backward(loss);
  EXPECT_TRUE(tape.consumed());
  EXPECT_THROW(tape.backward(loss), Error);
}

TEST(Tape, TopologicalOrder) {
  Tape tape;
  Var x = tape.leaf(Tensor::ones({2}));
  Var y = ops::relu(x);
  Var z = ops::add(x, y);
  EXPECT_LT(x.id(), y.id());
  EXPECT_LT(y.id(), z.id());
}

TEST(Tape, ParameterAccumulatesOverReuse) {
  Tape tape;
  Parameter w{Tensor({2}, {0.5, 1.5})};
  Var a = tape.parameter(w);
  Var b = tape.parameter(w);
  auto grads = tape.backward(ops::sum(ops::add(a, ops::scale(b, 3.0))));
  EXPECT_DOUBLE_EQ(grads.at(w)[0], 4.0);
  EXPECT_DOUBLE_EQ(grads.at(w)[1], 4.0);
}

}  // namespace
}  // namespace degas
