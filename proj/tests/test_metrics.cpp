#include <gtest/gtest.h>

#include <cmath>

#include "degas/error.hpp"
#include "degas/io.hpp"
#include "degas/metrics.hpp"
#include "test_util.hpp"

namespace degas {
namespace {

GaussianStats stats1d(double mu, double var) {
  GaussianStats s;
  s.mean = Eigen::VectorXd::Constant(1, mu);
  s.cov = Eigen::MatrixXd::Constant(1, 1, var);
  return s;
}

GaussianStats random_stats(std::size_t d, std::mt19937_64& rng) {
  const Tensor rows = Tensor::randn({3 * d, d}, rng);
  return fit_gaussian(rows);
}

TEST(Gaussian, IdenticalRowsHaveZeroCovariance) {
  Tensor rows({5, 3});
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 3; ++j) rows[i * 3 + j] = 0.1 * static_cast<double>(j);
  const auto s = fit_gaussian(rows);
  EXPECT_NEAR(s.cov.cwiseAbs().maxCoeff(), 0.0, 1e-15);
  EXPECT_NEAR(s.mean[2], 0.2, 1e-15);
}

TEST(Gaussian, ScaledBasisClosedForm) {
  // Rows c·e_1 .. c·e_d plus a zero row: N = d + 1.
  const std::size_t d = 4;
  const double c = 2.0;
  Tensor rows({d + 1, d});
  for (std::size_t i = 0; i < d; ++i) rows[i * d + i] = c;
  const auto s = fit_gaussian(rows);
  const double n = d + 1;
  for (std::size_t i = 0; i < d; ++i) {
    EXPECT_NEAR(s.mean[i], c / n, 1e-15);
    for (std::size_t j = 0; j < d; ++j) {
      // Σ_ij = (Σ_k x_ki x_kj − N μ_i μ_j) / (N − 1)
      const double want = ((i == j ? c * c : 0.0) - n * (c / n) * (c / n)) / (n - 1);
      EXPECT_NEAR(s.cov(i, j), want, 1e-14);
    }
  }
}

TEST(Gaussian, MeanAndSymmetry) {
  std::mt19937_64 rng(1);
  const Tensor rows = Tensor::randn({40, 6}, rng);
  const auto s = fit_gaussian(rows);
  for (std::size_t j = 0; j < 6; ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < 40; ++i) m += rows[i * 6 + j];
    EXPECT_NEAR(s.mean[j], m / 40, 1e-12);
  }
  EXPECT_LT((s.cov - s.cov.transpose()).cwiseAbs().maxCoeff(), 1e-9);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s.cov);
  EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-9);
}

TEST(Gaussian, TooFewRows) { EXPECT_THROW(fit_gaussian(Tensor::zeros({3, 3})), Error); }

TEST(Frechet, OneDimensionalExamples) {
  EXPECT_NEAR(frechet_distance(stats1d(0, 1), stats1d(1, 1)), 1.0, 1e-12);
  EXPECT_NEAR(frechet_distance(stats1d(0, 1), stats1d(0, 4)), 1.0, 1e-12);
}

TEST(Frechet, DiagonalClosedForm) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  GaussianStats a, b;
  a.mean = Eigen::VectorXd::Random(5);
  b.mean = Eigen::VectorXd::Random(5);
  a.cov = Eigen::MatrixXd::Zero(5, 5);
  b.cov = Eigen::MatrixXd::Zero(5, 5);
  double want = (a.mean - b.mean).squaredNorm();
  for (int i = 0; i < 5; ++i) {
    a.cov(i, i) = u(rng);
    b.cov(i, i) = u(rng);
    want += std::pow(std::sqrt(a.cov(i, i)) - std::sqrt(b.cov(i, i)), 2);
  }
  EXPECT_NEAR(frechet_distance(a, b), want, 1e-12);
}

TEST(Frechet, SymmetricAndZeroOnSelf) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const auto a = random_stats(8, rng);
    const auto b = random_stats(8, rng);
    EXPECT_NEAR(frechet_distance(a, a), 0.0, 1e-9);
    EXPECT_NEAR(frechet_distance(a, b), frechet_distance(b, a), 1e-9);
    EXPECT_GE(frechet_distance(a, b), 0.0);
  }
  EXPECT_THROW(frechet_distance(stats1d(0, 1), random_stats(2, rng)), ShapeError);
}

TEST(Features, Contract) {
  const Tensor images = render_toy_images(6, 16, 4);
  const Tensor f = random_features(images);
  EXPECT_EQ(f.shape(), (Shape{6, kFeatureDim}));
  EXPECT_EQ(random_features(images), f);
  EXPECT_EQ(random_features(render_toy_images(2, 8, 4)).dim(1), kFeatureDim);
  EXPECT_EQ(random_features(render_toy_images(2, 32, 4)).dim(1), kFeatureDim);

  // Duplicate and permute.
  std::vector<std::size_t> order{3, 1, 1, 5};
  const Tensor picked = random_features(gather_images(images, order));
  for (std::size_t k = 0; k < order.size(); ++k)
    for (std::size_t j = 0; j < kFeatureDim; ++j) EXPECT_EQ(picked[k * kFeatureDim + j], f[order[k] * kFeatureDim + j]);
  EXPECT_THROW(random_features(Tensor::zeros({1, 1, 8, 8})), ShapeError);
}

TEST(Features, SeparatesDataFromNoise) {
  const Tensor images = read_dataset(testing::source_dir() / "data" / "toy16_train.dgs");
  std::vector<std::size_t> first, second;
  for (std::size_t i = 0; i < 256; ++i) (i % 2 ? second : first).push_back(i);
  std::mt19937_64 rng(5);
  const Tensor noise = Tensor::uniform({128, 3, 16, 16}, rng, -1.0, 1.0);
  const double halves = proxy_frechet(gather_images(images, first), gather_images(images, second));
  const double vs_noise = proxy_frechet(gather_images(images, first), noise);
  EXPECT_LT(halves, vs_noise);
}

class SmallNet : public ::testing::Test {
 protected:
  SmallNet() {
    RunConfig c = testing::tiny_config();
    Genotype g{2, 1, 4, 8, {}, ""};
    g.nodes = {{"u1", "stem", OpClass::upsample, "deconv4", std::nullopt},
               {"n1", "u1", OpClass::normal, "conv3x3", std::nullopt},
               {"u2", "n1", OpClass::upsample, "nn_conv3", std::nullopt},
               {"n2", "u2", OpClass::normal, "skip", std::nullopt}};
    net = instantiate_genotype(g, c);
    std::mt19937_64 rng(6);
    latents = LatentTable::init(30, 8, rng);
  }
  FixedNetwork net;
  LatentTable latents;
};

TEST_F(SmallNet, SamplingContract) {
  const auto stats = fit_latent_gaussian(latents);
  EXPECT_EQ(sample_images(net, stats, 0, 1).dim(0), 0u);
  const Tensor a = sample_images(net, stats, 5, 7);
  EXPECT_EQ(a, sample_images(net, stats, 5, 7));
  EXPECT_NE(a, sample_images(net, stats, 5, 8));
  EXPECT_EQ(a.shape(), (Shape{5, 3, 16, 16}));
  for (double v : a.data()) {
    EXPECT_GT(v, -1.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST_F(SmallNet, Interpolation) {
  std::vector<double> z0(8, 0.0), z1(8, 0.0);
  z0[0] = 0.5;
  z1[1] = -0.5;
  const Tensor two = interpolate(net, z0, z1, 2);
  ASSERT_EQ(two.dim(0), 2u);
  Tensor ends({2, 8});
  std::copy(z0.begin(), z0.end(), ends.ptr());
  std::copy(z1.begin(), z1.end(), ends.ptr() + 8);
  EXPECT_EQ(two, net.generate(ends, Mode::eval));

  const Tensor same = interpolate(net, z0, z0, 5);
  ASSERT_EQ(same.dim(0), 5u);
  const std::size_t per = same.size() / 5;
  for (std::size_t s = 1; s < 5; ++s)
    for (std::size_t i = 0; i < per; ++i) EXPECT_EQ(same[s * per + i], same[i]);
  EXPECT_EQ(interpolate(net, z0, z1, 7).dim(0), 7u);
}

}  // namespace
}  // namespace degas
