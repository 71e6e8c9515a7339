#pragma once

// File formats: image datasets, genotype text, and the checkpoint container.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "degas/search_space.hpp"

namespace degas {

using Bytes = std::vector<std::uint8_t>;

// ---------------------------------------------------------------------------
// Datasets: "DGS1", u32 count, height, width, channels (little-endian), then
// count·H·W·C bytes, channel-last. Pixels map to v / 127.5 − 1.

double byte_to_pixel(std::uint8_t v);
std::uint8_t pixel_to_byte(double x);

/// Returns [count, C, H, W].
Tensor decode_dataset(std::span<const std::uint8_t> bytes);
Bytes encode_dataset(const Tensor& images);
Tensor read_dataset(const std::filesystem::path& path);
void write_dataset(const std::filesystem::path& path, const Tensor& images);

/// Anti-aliased ellipses and rectangles on gradient backgrounds, RGB.
Tensor render_toy_images(std::size_t count, std::size_t size, std::uint64_t seed);
void gen_toy_dataset(std::size_t count, std::size_t size, std::uint64_t seed, const std::filesystem::path& path);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_file(const std::filesystem::path& path, std::string_view text);

// ---------------------------------------------------------------------------
// Genotype text.
//
//   degas-genotype v1
//   stages S n N base B latent D
//   node <id> <- <src> : <up|normal> <op>[ ; res <src> : <op>]
//   ...
//   # <provenance>            (optional)

std::string serialize_genotype(const Genotype& g);
/// Throws FormatError naming the offending line.
Genotype parse_genotype(std::string_view text);
Genotype load_genotype(const std::filesystem::path& path);

/// "config <hash> seed <seed>"
std::string provenance(const RunConfig& config);

// ---------------------------------------------------------------------------
// Checkpoint container: "DGCK", u32 version, u32 section count, a table of
// (u32 name length, name, u64 offset, u64 size), then the section payloads.
// Multi-byte values are little-endian; doubles are IEEE-754 binary64.

class CheckpointWriter {
 public:
  void add_bytes(const std::string& name, Bytes payload);
  void add_text(const std::string& name, std::string_view text);
  void add_u64s(const std::string& name, std::span<const std::uint64_t> values);
  void add_doubles(const std::string& name, std::span<const double> values);
  void add_tensors(const std::string& name, std::span<const Tensor* const> tensors);
  Bytes finish() const;

 private:
  std::map<std::string, Bytes> sections_;
};

class CheckpointReader {
 public:
  /// Throws FormatError on bad magic, version or truncated data.
  explicit CheckpointReader(Bytes bytes);

  bool has(const std::string& name) const { return sections_.count(name) > 0; }
  const Bytes& bytes(const std::string& name) const;
  std::string text(const std::string& name) const;
  std::vector<std::uint64_t> u64s(const std::string& name) const;
  std::vector<double> doubles(const std::string& name) const;
  std::vector<Tensor> tensors(const std::string& name) const;

 private:
  std::map<std::string, Bytes> sections_;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace degas
