#pragma once

// GLO training: per-image latents optimized jointly with generator weights
// under the reconstruction loss, and the alternating architecture search.

#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "degas/config.hpp"
#include "degas/optim.hpp"
#include "degas/search_space.hpp"

namespace degas {

/// z' = z if ‖z‖₂ ≤ 1, else z / ‖z‖₂.
std::vector<double> project_latent(std::span<const double> z);
/// Applies project_latent to every row of a [rows, dim] tensor.
void project_rows(Tensor& z);

/// One learnable latent per training image, with its momentum buffer.
struct LatentTable {
  Tensor z;         // [rows, dim]
  Tensor velocity;  // same shape

  /// Rows drawn i.i.d. N(0, 1), then projected to the unit ball.
  static LatentTable init(std::size_t rows, std::size_t dim, std::mt19937_64& rng);

  std::size_t rows() const { return z.dim(0); }
  std::size_t dim() const { return z.dim(1); }
  /// [idx.size(), dim] copy of the listed rows.
  Tensor gather(std::span<const std::size_t> idx) const;
  /// Momentum SGD (no weight decay) on the listed rows, then projection.
  /// grad[k] belongs to row idx[k]; repeated rows accumulate their gradients.
  void update(std::span<const std::size_t> idx, const Tensor& grad, double lr, double momentum);
};

/// images [N, C, H, W] → [idx.size(), C, H, W].
Tensor gather_images(const Tensor& images, std::span<const std::size_t> idx);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double w_loss = 0.0;
  double a_loss = 0.0;  // 0 for plain training
  double lr = 0.0;
  double seconds = 0.0;
};

/// One GLO step on `net`: forward in train mode, recon_loss, backward, SGD on
/// the generator weights (gradients clipped to config.grad_clip) and on the
/// batch latent rows. Architecture parameters, if any, are held fixed.
/// Returns the loss before the update.
double glo_update(Generator& net, LatentTable& latents, SgdState& opt, const RunConfig& config,
                  const Tensor& images, std::span<const std::size_t> batch, double lr);

struct SearchState {
  RunConfig config;
  SuperGraph graph;
  LatentTable latents;
  std::vector<std::size_t> w_set, a_set;
  SgdState weight_opt;
  AdamState alpha_opt;
  std::size_t epoch = 0;  // completed epochs
  std::mt19937_64 rng;
  std::vector<EpochRecord> history;
};

/// Builds the supergraph, latents and a seeded 50/50 W/A split. Throws
/// FormatError when the image size does not match the config.
SearchState init_search(const RunConfig& config, const Tensor& images);

/// Weight/latent step on a W-set batch.
double glo_step(SearchState& state, const Tensor& images, std::span<const std::size_t> batch, double lr);
/// Adam step on α with weights frozen; the A-set latent rows take an SGD step
/// with `latent_lr`. First-order. Returns the loss before the update.
double alpha_step(SearchState& state, const Tensor& images, std::span<const std::size_t> batch, double latent_lr);

/// One epoch of alternating glo_step / alpha_step over shuffled batches.
EpochRecord search_epoch(SearchState& state, const Tensor& images);

/// Called after every epoch; return false to stop early.
using SearchCallback = std::function<bool(const SearchState&, const EpochRecord&)>;
/// Runs epochs until config.epochs are complete (resumes from state.epoch).
void run_search(SearchState& state, const Tensor& images, const SearchCallback& on_epoch = {});

/// GLO training of a fixed genotype network from scratch on all images.
struct TrainState {
  RunConfig config;
  FixedNetwork net;
  LatentTable latents;
  SgdState opt;
  std::size_t epoch = 0;
  std::mt19937_64 rng;
  std::vector<EpochRecord> history;
};

TrainState init_training(const Genotype& genotype, const RunConfig& config, const Tensor& images);
EpochRecord train_epoch(TrainState& state, const Tensor& images);
using TrainCallback = std::function<bool(const TrainState&, const EpochRecord&)>;
void run_training(TrainState& state, const Tensor& images, const TrainCallback& on_epoch = {});

}  // namespace degas
