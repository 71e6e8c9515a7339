#include "degas/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "degas/error.hpp"
#include "degas/op_params.hpp"

namespace degas {

GaussianStats fit_gaussian(const Tensor& rows) {
  if (rows.rank() != 2) throw ShapeError("fit_gaussian: expected [N, d], got " + shape_to_string(rows.shape()));
  const std::size_t n = rows.dim(0), d = rows.dim(1);
  if (n < d + 1) {
    throw Error("fit_gaussian: need at least " + std::to_string(d + 1) + " rows, got " + std::to_string(n));
  }
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> x(rows.ptr(), n, d);
  GaussianStats s;
  s.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - s.mean.transpose();
  s.cov = centered.transpose() * centered / static_cast<double>(n - 1);
  return s;
}

GaussianStats fit_latent_gaussian(const LatentTable& latents) { return fit_gaussian(latents.z); }

namespace {

// V · diag(√max(λ, 0)), so that (V√Λ)(V√Λ)ᵀ = Σ.
Eigen::MatrixXd sqrt_factor(const Eigen::MatrixXd& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal();
}

Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

Tensor sample_images(Generator& net, const GaussianStats& stats, std::size_t count, std::uint64_t seed) {
  const std::size_t d = net.latent_dim();
  if (static_cast<std::size_t>(stats.mean.size()) != d || stats.cov.rows() != stats.mean.size() ||
      stats.cov.cols() != stats.mean.size()) {
    throw ShapeError("sample_images: stats dimension " + std::to_string(stats.mean.size()) + " for latent size " +
                     std::to_string(d));
  }
  const std::size_t size = net.topology().output_size();
  if (count == 0) return Tensor(Shape{0, 3, size, size});
  const Eigen::MatrixXd factor = sqrt_factor(stats.cov);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Tensor z({count, d});
  for (std::size_t i = 0; i < count; ++i) {
    Eigen::VectorXd eps(d);
    for (std::size_t j = 0; j < d; ++j) eps[static_cast<Eigen::Index>(j)] = normal(rng);
    const Eigen::VectorXd v = stats.mean + factor * eps;
    const auto p = project_latent(std::span<const double>(v.data(), d));
    std::copy(p.begin(), p.end(), z.ptr() + i * d);
  }
  return net.generate(z, Mode::eval);
}

namespace {

constexpr std::uint64_t kFeatureSeed = 20200711;

struct FeatureNet {
  std::vector<OpParams> convs;
  FeatureNet() {
    std::mt19937_64 rng(kFeatureSeed);
    convs.push_back(OpParams::conv2d(3, 8, 3, 1, 1, rng));
    convs.push_back(OpParams::conv2d(8, 16, 3, 2, 1, rng));
    convs.push_back(OpParams::conv2d(16, kFeatureDim, 3, 2, 1, rng));
  }
};

}  // namespace

Tensor random_features(const Tensor& images) {
  if (images.rank() != 4 || images.dim(1) != 3) {
    throw ShapeError("random_features: expected [N, 3, H, W], got " + shape_to_string(images.shape()));
  }
  const std::size_t n = images.dim(0);
  if (n == 0) return Tensor(Shape{0, kFeatureDim});
  static const FeatureNet net;
  Tape tape;
  Var h = tape.constant(images);
  for (const OpParams& conv : net.convs) {
    Var w = tape.constant(conv.weights[0].value), b = tape.constant(conv.weights[1].value);
    h = ops::relu(ops::conv2d(h, w, b, {conv.stride, conv.padding, 1, 1}));
  }
  const Tensor& act = h.value();
  const std::size_t plane = act.dim(2) * act.dim(3);
  Tensor out({n, kFeatureDim});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < kFeatureDim; ++c) {
      const double* p = act.ptr() + (i * kFeatureDim + c) * plane;
      double sum = 0.0;
      for (std::size_t k = 0; k < plane; ++k) sum += p[k];
      out[i * kFeatureDim + c] = sum / static_cast<double>(plane);
    }
  return out;
}

double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
  if (a.mean.size() != b.mean.size() || a.cov.rows() != b.cov.rows() || a.cov.rows() != a.mean.size()) {
    throw ShapeError("frechet_distance: dimension mismatch (" + std::to_string(a.mean.size()) + " vs " +
                     std::to_string(b.mean.size()) + ")");
  }
  const Eigen::MatrixXd ra = sqrt_psd(a.cov);
  const Eigen::MatrixXd inner = ra * b.cov * ra;
  const Eigen::MatrixXd sym = 0.5 * (inner + inner.transpose());
  const double cross = sqrt_psd(sym).trace();
  const double d = (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() - 2.0 * cross;
  return std::max(d, 0.0);
}

double proxy_frechet(const Tensor& images_a, const Tensor& images_b) {
  return frechet_distance(fit_gaussian(random_features(images_a)), fit_gaussian(random_features(images_b)));
}

Tensor interpolate(Generator& net, std::span<const double> z0, std::span<const double> z1, std::size_t steps) {
  const std::size_t d = net.latent_dim();
  if (z0.size() != d || z1.size() != d) throw ShapeError("interpolate: latent size mismatch");
  const std::size_t size = net.topology().output_size();
  if (steps == 0) return Tensor(Shape{0, 3, size, size});
  Tensor z({steps, d});
  for (std::size_t s = 0; s < steps; ++s) {
    const double t = steps == 1 ? 0.0 : static_cast<double>(s) / static_cast<double>(steps - 1);
    std::vector<double> v(d);
    for (std::size_t j = 0; j < d; ++j) v[j] = (1.0 - t) * z0[j] + t * z1[j];
    const auto p = project_latent(v);
    std::copy(p.begin(), p.end(), z.ptr() + s * d);
  }
  return net.generate(z, Mode::eval);
}

}  // namespace degas
