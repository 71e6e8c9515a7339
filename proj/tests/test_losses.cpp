#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "degas/error.hpp"
#include "degas/losses.hpp"
#include "degas/op_params.hpp"
#include "degas/ops.hpp"
#include "pyramid_oracle.hpp"

namespace degas {
namespace {

TEST(Pyramid, MatchesDenseOracleBandByBand) {
  std::mt19937_64 rng(1);
  const Tensor x = Tensor::randn({2, 3, 16, 8}, rng);
  const auto bands = lap_pyramid(x, 3);
  ASSERT_EQ(bands.size(), 4u);
  for (std::size_t p = 0; p < 6; ++p) {
    const auto want = oracle::plane_pyramid(oracle::plane(x, p), 3);
    for (std::size_t j = 0; j < 4; ++j) {
      const auto got = oracle::plane(bands[j], p);
      ASSERT_EQ(got.rows(), want[j].rows());
      EXPECT_LT((got - want[j]).cwiseAbs().maxCoeff(), 1e-12) << "band " << j;
    }
  }
}

TEST(Pyramid, ConstantImageHasZeroDetailBands) {
  const Tensor x({1, 1, 8, 8}, 0.7);
  const auto bands = lap_pyramid(x, 2);
  for (std::size_t j = 0; j < 2; ++j)
    for (double v : bands[j].data()) EXPECT_NEAR(v, 0.0, 1e-12);
  for (double v : bands[2].data()) EXPECT_NEAR(v, 0.7, 1e-12);
}

TEST(Pyramid, ReconstructionIsExact) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor x = Tensor::uniform({1, 3, 32, 32}, rng, -1.0, 1.0);
    EXPECT_LT(max_abs_diff(lap_reconstruct(lap_pyramid(x, 3)), x), 1e-9);
  }
}

TEST(Pyramid, ZeroLevelsIsIdentity) {
  std::mt19937_64 rng(3);
  const Tensor x = Tensor::randn({1, 1, 5, 7}, rng);
  const auto bands = lap_pyramid(x, 0);
  ASSERT_EQ(bands.size(), 1u);
  EXPECT_EQ(bands[0], x);
}

TEST(Pyramid, IndivisibleSizeRejected) {
  EXPECT_THROW(lap_pyramid(Tensor::zeros({1, 1, 12, 12}), 3), ShapeError);
  EXPECT_NO_THROW(lap_pyramid(Tensor::zeros({1, 1, 12, 12}), 2));
}

TEST(Lap1, MatchesOracle) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor x = Tensor::uniform({2, 3, 8, 8}, rng, -1.0, 1.0);
    const Tensor y = Tensor::uniform({2, 3, 8, 8}, rng, -1.0, 1.0);
    for (int levels : {0, 1, 2, 3}) EXPECT_NEAR(lap1_loss(x, y, levels), oracle::lap1(x, y, levels), 1e-9);
  }
}

TEST(Lap1, ConstantShift) {
  const Tensor a({1, 1, 4, 4}, 0.25);
  const Tensor b({1, 1, 4, 4}, 0.25 + 0.1);
  EXPECT_NEAR(lap1_loss(a, b, 1), 4 * 0.1, 1e-12);
}

TEST(Lap1, Properties) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor x = Tensor::randn({1, 2, 8, 8}, rng);
    Tensor y = x;
    EXPECT_EQ(lap1_loss(x, y, 3), 0.0);
    y[trial % y.size()] += 1e-6;
    const Tensor z = Tensor::randn({1, 2, 8, 8}, rng);
    EXPECT_GT(lap1_loss(x, y, 3), 0.0);
    EXPECT_GE(lap1_loss(x, z, 3), 0.0);
    EXPECT_NEAR(lap1_loss(x, z, 3), lap1_loss(z, x, 3), 1e-12);
  }
}

TEST(Lap1, ShapeMismatch) {
  EXPECT_THROW(lap1_loss(Tensor::zeros({1, 1, 4, 4}), Tensor::zeros({1, 1, 4, 8}), 1), ShapeError);
}

TEST(Lap1, TapeValueMatchesTensorValue) {
  std::mt19937_64 rng(6);
  const Tensor x = Tensor::randn({2, 3, 8, 8}, rng);
  const Tensor y = Tensor::randn({2, 3, 8, 8}, rng);
  Tape tape;
  const double v = lap1_loss(tape.constant(x), tape.constant(y), 2).value().item();
  EXPECT_NEAR(v, lap1_loss(x, y, 2), 1e-12);
}

TEST(Recon, HandExample) {
  const Tensor x({1, 1, 1, 1}, 1.0), y({1, 1, 1, 1}, 0.0);
  EXPECT_DOUBLE_EQ(recon_loss(x, y, 1.0, 0), 2.0);
}

TEST(Recon, LambdaZeroIsLap1Exactly) {
  std::mt19937_64 rng(7);
  const Tensor x = Tensor::randn({1, 3, 8, 8}, rng), y = Tensor::randn({1, 3, 8, 8}, rng);
  EXPECT_EQ(recon_loss(x, y, 0.0, 2), lap1_loss(x, y, 2));
  EXPECT_EQ(recon_loss(x, x, 3.5, 2), 0.0);
}

TEST(Recon, MonotoneInLambda) {
  std::mt19937_64 rng(8);
  const Tensor x = Tensor::randn({1, 3, 8, 8}, rng), y = Tensor::randn({1, 3, 8, 8}, rng);
  double prev = recon_loss(x, y, 0.0, 2);
  for (double lambda : {0.1, 0.5, 1.0, 2.0, 10.0}) {
    const double v = recon_loss(x, y, lambda, 2);
    EXPECT_GE(v, prev);
    prev = v;
  }
  EXPECT_THROW(recon_loss(x, y, -1.0, 2), Error);
}

TEST(Recon, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(9);
  std::vector<CheckTarget> targets{{"x", Tensor::randn({1, 2, 8, 8}, rng)}, {"y", Tensor::randn({1, 2, 8, 8}, rng)}};
  CheckedFunction f = [](Tape&, std::span<const Var> v) { return recon_loss(v[0], v[1], 0.5, 3); };
  const auto r = check_gradients("recon", targets, f, 1e-4, 9);
  EXPECT_TRUE(r.pass) << r.max_rel_error;
}

}  // namespace
}  // namespace degas
