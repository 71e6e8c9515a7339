#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "degas/config.hpp"
#include "degas/tensor.hpp"

namespace degas::testing {

/// Fresh, empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("degas-" + tag + "-" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Small, fast search configuration: S=2, n=1, 16x16 output, few channels.
inline RunConfig tiny_config() {
  RunConfig c;
  c.stages = 2;
  c.n = 1;
  c.base = 4;
  c.latent_dim = 8;
  c.channels = 8;
  c.levels = 2;
  c.lr = 0.03;
  c.batch_size = 16;
  c.epochs = 2;
  c.seed = 5;
  return c;
}

inline std::filesystem::path source_dir() { return DEGAS_SOURCE_DIR; }

}  // namespace degas::testing
