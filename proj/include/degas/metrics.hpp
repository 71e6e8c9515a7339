#pragma once

// Desk-scale evaluation: Gaussian fits, sampling, and a Fréchet distance on
// features from a fixed random convolutional network.

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "degas/glo.hpp"

namespace degas {

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Sample mean and covariance (denominator N − 1) of the rows of [N, d].
/// Throws Error unless N ≥ d + 1.
GaussianStats fit_gaussian(const Tensor& rows);
GaussianStats fit_latent_gaussian(const LatentTable& latents);

/// z ~ N(μ, Σ) projected to the unit ball, then an eval-mode forward.
/// Returns [count, 3, H, W]; the same seed gives the same batch.
Tensor sample_images(Generator& net, const GaussianStats& stats, std::size_t count, std::uint64_t seed);

inline constexpr std::size_t kFeatureDim = 16;

/// Features of a fixed, never-trained network: conv3x3 3→8 (stride 1),
/// conv3x3 8→16 (stride 2), conv3x3 16→16 (stride 2), ReLU after each, then a
/// global average pool. Weights come from a constant seed. Returns [N, 16].
Tensor random_features(const Tensor& images);

/// ‖μa − μb‖² + Tr(Σa + Σb − 2 (Σa^½ Σb Σa^½)^½), square roots via symmetric
/// eigendecomposition with eigenvalues clamped at 0.
double frechet_distance(const GaussianStats& a, const GaussianStats& b);

/// Convenience: Fréchet distance between the feature statistics of two image sets.
double proxy_frechet(const Tensor& images_a, const Tensor& images_b);

/// `steps` images along the segment z0 → z1 (each point projected to the unit
/// ball), eval mode. Returns [steps, 3, H, W].
Tensor interpolate(Generator& net, std::span<const double> z0, std::span<const double> z1, std::size_t steps);

}  // namespace degas
