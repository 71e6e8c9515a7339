#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace degas {

std::vector<std::string> default_normal_ops();
std::vector<std::string> default_upsample_ops();

/// Every hyperparameter of a search / retrain / eval run.
struct RunConfig {
  // Topology.
  std::size_t stages = 3;
  std::size_t n = 1;
  std::size_t base = 4;
  std::size_t latent_dim = 64;
  std::size_t channels = 32;  // stem channels; halved at each up-sample node
  std::vector<std::string> normal_ops = default_normal_ops();
  std::vector<std::string> upsample_ops = default_upsample_ops();

  // Objective.
  double lambda = 1.0;
  std::size_t levels = 3;

  // Generator weights and latents: SGD with momentum, cosine-annealed.
  double lr = 3e-1;
  double momentum = 0.9;
  double weight_decay = 3e-4;
  double grad_clip = 5.0;  // global L2 norm; 0 disables

  // Architecture parameters: Adam.
  double alpha_lr = 3e-4;
  double alpha_beta1 = 0.5;
  double alpha_beta2 = 0.999;
  double alpha_weight_decay = 1e-3;

  std::size_t batch_size = 32;
  std::size_t epochs = 50;
  std::uint64_t seed = 1;

  std::string profile = "cifar";  // cifar | stl | celeba
  std::size_t image_size = 0;     // 0 = take from the dataset
  std::string dataset;
  std::string output_dir = "runs";

  std::size_t output_size() const { return base << stages; }
};

/// Parses `key = value` lines (`#` starts a comment). Unknown keys, malformed
/// values and violated constraints raise FormatError naming the line.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::string& path);

/// Canonical text form; parse_config(to_text(c)) reproduces c.
std::string to_text(const RunConfig& config);

/// Stable 64-bit FNV-1a hash of the canonical text (output_dir excluded).
std::uint64_t config_hash(const RunConfig& config);
std::string config_hash_hex(const RunConfig& config);

/// Throws FormatError unless base · 2^stages equals the dataset image size.
void check_image_size(const RunConfig& config, std::size_t height, std::size_t width);

}  // namespace degas
