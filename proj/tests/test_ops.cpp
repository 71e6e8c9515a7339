#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "degas/error.hpp"
#include "degas/grad_suite.hpp"
#include "degas/op_params.hpp"
#include "degas/ops.hpp"

namespace degas {
namespace {

Var run(OpParams& op, std::vector<Tensor> inputs, Tape& tape) {
  std::vector<Var> vars;
  for (auto& t : inputs) vars.push_back(tape.constant(std::move(t)));
  return forward(op, vars, tape);
}

TEST(Ops, NearestUpsampleExample) {
  Tape tape;
  auto op = OpParams::nn_upsample2d(2);
  Var y = run(op, {Tensor({1, 1, 2, 2}, {1, 2, 3, 4})}, tape);
  const std::vector<double> want{1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
  EXPECT_EQ(y.value(), Tensor({1, 1, 4, 4}, want));
}

TEST(Ops, ConvCentreExample) {
  std::mt19937_64 rng(1);
  auto op = OpParams::conv2d(1, 1, 3, 1, 1, rng);
  op.weights[0].value.fill(1.0);
  op.weights[1].value.fill(0.0);
  Tape tape;
  Var y = run(op, {Tensor({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9})}, tape);
  EXPECT_DOUBLE_EQ(y.value().at(0, 0, 1, 1), 45.0);
}

TEST(Ops, DeconvShapeExample) {
  std::mt19937_64 rng(1);
  auto op = OpParams::deconv2d(2, 3, 4, 2, 1, rng);
  const std::vector<Shape> in{{1, 2, 4, 4}};
  EXPECT_EQ(op.output_shape(in), (Shape{1, 3, 8, 8}));
}

TEST(Ops, ShapeFormulas) {
  std::mt19937_64 rng(2);
  for (std::size_t h : {5, 8, 11}) {
    for (std::size_t s : {1, 2}) {
      for (std::size_t d : {1, 2}) {
        auto op = OpParams::conv2d(3, 4, 3, s, 1, rng, d);
        const std::vector<Shape> in{{2, 3, h, h + 1}};
        const std::size_t want_h = (h + 2 - d * 2 - 1) / s + 1;
        const std::size_t want_w = (h + 1 + 2 - d * 2 - 1) / s + 1;
        EXPECT_EQ(op.output_shape(in), (Shape{2, 4, want_h, want_w}));
      }
    }
    auto up = OpParams::nn_upsample2d(4);
    const std::vector<Shape> in{{1, 2, h, h}};
    EXPECT_EQ(up.output_shape(in), (Shape{1, 2, 4 * h, 4 * h}));
    auto dc = OpParams::deconv2d(2, 2, 6, 2, 2, rng);
    EXPECT_EQ(dc.output_shape(in), (Shape{1, 2, (h - 1) * 2 - 4 + 6, (h - 1) * 2 - 4 + 6}));
  }
}

TEST(Ops, ShapeErrorNamesKindAndDimension) {
  std::mt19937_64 rng(3);
  auto op = OpParams::conv2d(3, 4, 3, 1, 1, rng);
  Tape tape;
  try {
    run(op, {Tensor::zeros({1, 2, 5, 5})}, tape);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("conv2d"), std::string::npos) << msg;
    EXPECT_NE(msg.find("dim 1"), std::string::npos) << msg;
  }
  auto add = OpParams::add();
  EXPECT_THROW(run(add, {Tensor::zeros({1, 2}), Tensor::zeros({1, 3})}, tape), ShapeError);
}

TEST(Ops, NonFiniteInputRejected) {
  Tape tape;
  Tensor x = Tensor::zeros({1, 1, 2, 2});
  x[2] = std::numeric_limits<double>::infinity();
  auto op = OpParams::relu();
  EXPECT_THROW(run(op, {x}, tape), NonFiniteError);
}

TEST(Ops, SoftmaxProperties) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor logits = Tensor::randn({3, 8}, rng, 3.0);
    Tensor shifted = logits;
    for (auto& v : shifted.data()) v += 17.25;
    Tape tape;
    const Tensor p = ops::softmax(tape.constant(logits)).value();
    const Tensor q = ops::softmax(tape.constant(shifted)).value();
    for (std::size_t r = 0; r < 3; ++r) {
      double s = 0.0;
      std::size_t am_p = 0, am_q = 0;
      for (std::size_t k = 0; k < 8; ++k) {
        s += p[r * 8 + k];
        EXPECT_NEAR(p[r * 8 + k], q[r * 8 + k], 1e-9);
        if (p[r * 8 + k] > p[r * 8 + am_p]) am_p = k;
        if (q[r * 8 + k] > q[r * 8 + am_q]) am_q = k;
      }
      EXPECT_NEAR(s, 1.0, 1e-9);
      EXPECT_EQ(am_p, am_q);
    }
  }
}

TEST(Ops, TanhStrictlyBounded) {
  Tape tape;
  Tensor x({6}, {-1e3, -20.0, -1.0, 0.0, 5.0, 1e3});
  const Tensor y = ops::tanh(tape.constant(x)).value();
  for (double v : y.data()) {
    EXPECT_GT(v, -1.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(Ops, BatchNormRunningStatsOnlyInTraining) {
  std::mt19937_64 rng(5);
  auto op = OpParams::batch_norm2d(3);
  const Tensor x = Tensor::randn({4, 3, 3, 3}, rng);
  const auto mean0 = op.buffers.running_mean;
  const auto var0 = op.buffers.running_var;
  op.training = false;
  {
    Tape tape;
    run(op, {x}, tape);
  }
  EXPECT_EQ(op.buffers.running_mean, mean0);
  EXPECT_EQ(op.buffers.running_var, var0);
  op.training = true;
  {
    Tape tape;
    run(op, {x}, tape);
  }
  EXPECT_NE(op.buffers.running_mean, mean0);
  // momentum 0.1 from a zero start: running mean = 0.1 * batch mean.
  double m = 0.0;
  for (std::size_t n = 0; n < 4; ++n)
    for (std::size_t i = 0; i < 9; ++i) m += x[(n * 3 + 0) * 9 + i];
  EXPECT_NEAR(op.buffers.running_mean[0], 0.1 * m / 36.0, 1e-12);
}

TEST(Ops, BatchNormEvalUsesRunningStats) {
  auto op = OpParams::batch_norm2d(1);
  op.training = false;
  op.buffers.running_mean = Tensor({1}, {2.0});
  op.buffers.running_var = Tensor({1}, {4.0});
  Tape tape;
  const Tensor y = run(op, {Tensor({1, 1, 1, 2}, {2.0, 6.0})}, tape).value();
  EXPECT_NEAR(y[0], 0.0, 1e-12);
  EXPECT_NEAR(y[1], 4.0 / std::sqrt(4.0 + 1e-5), 1e-12);
}

TEST(Ops, HeInitStatistics) {
  std::mt19937_64 rng(6);
  auto op = OpParams::conv2d(16, 32, 3, 1, 1, rng);
  double ss = 0.0;
  for (double v : op.weights[0].value.data()) ss += v * v;
  const double var = ss / static_cast<double>(op.weights[0].value.size());
  EXPECT_NEAR(var, 2.0 / (16 * 9), 0.2 * 2.0 / (16 * 9));
  for (double v : op.weights[1].value.data()) EXPECT_EQ(v, 0.0);
  auto bn = OpParams::batch_norm2d(4);
  EXPECT_EQ(bn.weights[0].value, Tensor::ones({4}));
  EXPECT_EQ(bn.weights[1].value, Tensor::zeros({4}));
}

TEST(Ops, DeterministicForwardAndBackward) {
  auto once = [] {
    std::mt19937_64 rng(9);
    auto op = OpParams::sep_conv2d(3, 4, 5, 2, rng);
    Tape tape;
    Var x = tape.leaf(Tensor::randn({2, 3, 6, 6}, rng));
    const std::vector<Var> in{x};
    Var y = forward(op, in, tape);
    auto g = tape.backward(ops::sum(ops::tanh(y)));
    return std::pair{y.value(), g.at(x)};
  };
  EXPECT_EQ(once(), once());
}

TEST(GradCheck, ReluExact) {
  std::mt19937_64 rng(1);
  const std::vector<Shape> in{{2, 3, 4, 4}};
  EXPECT_TRUE(grad_check(OpParams::relu(), in, 1e-6, 1).pass);
}

TEST(GradCheck, BatchNormTrainBatch4) {
  const std::vector<Shape> in{{4, 3, 3, 3}};
  const auto r = grad_check(OpParams::batch_norm2d(3), in, 1e-4, 2);
  EXPECT_TRUE(r.pass) << r.max_rel_error;
}

TEST(GradCheck, Softmax8) {
  const std::vector<Shape> in{{1, 8}};
  const auto r = grad_check(OpParams::softmax(), in, 1e-6, 3);
  EXPECT_TRUE(r.pass) << r.max_rel_error;
}

TEST(GradCheck, ConvAgainstCentralDifferences) {
  std::mt19937_64 rng(4);
  const std::vector<Shape> in{{1, 2, 5, 5}};
  const auto r = grad_check(OpParams::conv2d(2, 3, 3, 1, 1, rng), in, 1e-5, 4);
  EXPECT_TRUE(r.pass) << r.max_rel_error;
  EXPECT_FALSE(r.groups.empty());
}

TEST(GradCheck, DetectsWrongGradient) {
  // A deliberately wrong backward (factor 2 off) must be reported as failing.
  std::vector<CheckTarget> targets{{"x", Tensor({3}, {0.3, -0.7, 1.1})}};
  CheckedFunction f = [](Tape&, std::span<const Var> v) {
    Var x = v[0];
    Tensor y = x.value();
    for (auto& e : y.data()) e = e * e;
    return x.tape().record(std::move(y), {x}, [](BackwardContext& ctx) {
      for (std::size_t i = 0; i < ctx.grad.size(); ++i) (*ctx.input_grads[0])[i] += ctx.grad[i] * (*ctx.inputs[0])[i];
    });
  };
  const auto r = check_gradients("bad", targets, f, 1e-4, 1);
  EXPECT_FALSE(r.pass);
  EXPECT_NEAR(r.max_rel_error, 0.5, 1e-6);
}

TEST(GradCheck, RelativeErrorDefinition) {
  EXPECT_DOUBLE_EQ(relative_error(1.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(2.0, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(relative_error(0.0, 1e-9), 1e-9 / 1e-8);
}

TEST(GradCheck, SuiteCoversEveryKind) {
  const auto suite = gradient_suite(1, 1e-4, 11);
  ASSERT_EQ(suite.size(), std::size(kAllOpKinds) + 3);
  for (std::size_t i = 0; i < std::size(kAllOpKinds); ++i) EXPECT_EQ(suite[i].name, to_string(kAllOpKinds[i]));
  for (const auto& s : suite) EXPECT_TRUE(s.pass) << s.name << " " << s.max_rel_error;
}

}  // namespace
}  // namespace degas
