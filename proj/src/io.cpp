#include "degas/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "degas/error.hpp"

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace degas {

namespace {

template <class T>
void put(Bytes& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

class Cursor {
 public:
  Cursor(std::span<const std::uint8_t> bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(what_ + ": truncated (need " + std::to_string(pos_ + n) + " bytes, have " +
                        std::to_string(bytes_.size()) + ")");
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

}  // namespace

// ---------------------------------------------------------------------------
// Datasets

double byte_to_pixel(std::uint8_t v) { return v / 127.5 - 1.0; }

std::uint8_t pixel_to_byte(double x) {
  const double c = std::clamp(x, -1.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(c * 127.5 + 127.5));
}

Tensor decode_dataset(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "DGS1", 4) != 0) throw FormatError("dataset: bad magic");
  Cursor in(bytes.subspan(4), "dataset header");
  const std::uint64_t count = in.get<std::uint32_t>(), h = in.get<std::uint32_t>(), w = in.get<std::uint32_t>(),
                      c = in.get<std::uint32_t>();
  if (count == 0 || h == 0 || w == 0 || c == 0) {
    throw FormatError("dataset: zero dimension (count " + std::to_string(count) + ", " + std::to_string(h) + "x" +
                      std::to_string(w) + "x" + std::to_string(c) + ")");
  }
  const std::uint64_t expected = 20 + count * h * w * c;
  if (bytes.size() != expected) {
    throw FormatError("dataset: expected " + std::to_string(expected) + " bytes, got " +
                      std::to_string(bytes.size()));
  }
  Tensor out({count, c, h, w});
  const std::uint8_t* p = bytes.data() + 20;
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        for (std::size_t ch = 0; ch < c; ++ch) out.at(i, ch, y, x) = byte_to_pixel(*p++);
  return out;
}

Bytes encode_dataset(const Tensor& images) {
  if (images.rank() != 4 || images.size() == 0) {
    throw ShapeError("dataset: images must be non-empty [N, C, H, W], got " + shape_to_string(images.shape()));
  }
  const std::size_t n = images.dim(0), c = images.dim(1), h = images.dim(2), w = images.dim(3);
  Bytes out{'D', 'G', 'S', '1'};
  for (std::size_t v : {n, h, w, c}) put<std::uint32_t>(out, static_cast<std::uint32_t>(v));
  out.reserve(out.size() + images.size());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        for (std::size_t ch = 0; ch < c; ++ch) out.push_back(pixel_to_byte(images.at(i, ch, y, x)));
  return out;
}

Tensor read_dataset(const std::filesystem::path& path) { return decode_dataset(read_file(path)); }

void write_dataset(const std::filesystem::path& path, const Tensor& images) {
  write_file(path, encode_dataset(images));
}

namespace {

// Uniform [0, 1) from the top 53 bits, independent of the standard library's
// distribution implementations.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * unit(rng); }

struct Shape2D {
  bool ellipse;
  double cx, cy, rx, ry, angle;
  double color[3];

  bool inside(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    const double u = (dx * std::cos(angle) + dy * std::sin(angle)) / rx;
    const double v = (-dx * std::sin(angle) + dy * std::cos(angle)) / ry;
    return ellipse ? u * u + v * v <= 1.0 : std::abs(u) <= 1.0 && std::abs(v) <= 1.0;
  }
};

constexpr int kSuper = 4;

}  // namespace

Tensor render_toy_images(std::size_t count, std::size_t size, std::uint64_t seed) {
  if (count == 0 || size == 0) throw FormatError("toy dataset: count and size must be positive");
  std::mt19937_64 rng(seed);
  Tensor out({count, 3, size, size});
  const double s = static_cast<double>(size);
  for (std::size_t i = 0; i < count; ++i) {
    double c0[3], c1[3];
    for (double& v : c0) v = unit(rng);
    for (double& v : c1) v = unit(rng);
    const double theta = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    std::vector<Shape2D> shapes(1 + rng() % 3);
    for (auto& sh : shapes) {
      sh.ellipse = rng() % 2 == 0;
      sh.cx = uniform(rng, 0.2, 0.8) * s;
      sh.cy = uniform(rng, 0.2, 0.8) * s;
      sh.rx = uniform(rng, 0.12, 0.35) * s;
      sh.ry = uniform(rng, 0.12, 0.35) * s;
      sh.angle = uniform(rng, 0.0, std::numbers::pi);
      for (double& v : sh.color) v = unit(rng);
    }
    for (std::size_t y = 0; y < size; ++y)
      for (std::size_t x = 0; x < size; ++x) {
        const double px = x + 0.5, py = y + 0.5;
        double t = ((px - s / 2) * std::cos(theta) + (py - s / 2) * std::sin(theta)) / s + 0.5;
        t = std::clamp(t, 0.0, 1.0);
        double rgb[3];
        for (int ch = 0; ch < 3; ++ch) rgb[ch] = c0[ch] * (1.0 - t) + c1[ch] * t;
        for (const auto& sh : shapes) {
          int hits = 0;
          for (int sy = 0; sy < kSuper; ++sy)
            for (int sx = 0; sx < kSuper; ++sx)
              hits += sh.inside(x + (sx + 0.5) / kSuper, y + (sy + 0.5) / kSuper);
          const double cover = static_cast<double>(hits) / (kSuper * kSuper);
          for (int ch = 0; ch < 3; ++ch) rgb[ch] = sh.color[ch] * cover + rgb[ch] * (1.0 - cover);
        }
        for (std::size_t ch = 0; ch < 3; ++ch) {
          const auto byte = static_cast<std::uint8_t>(std::lround(std::clamp(rgb[ch], 0.0, 1.0) * 255.0));
          out.at(i, ch, y, x) = byte_to_pixel(byte);
        }
      }
  }
  return out;
}

void gen_toy_dataset(std::size_t count, std::size_t size, std::uint64_t seed, const std::filesystem::path& path) {
  write_dataset(path, render_toy_images(count, size, seed));
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return Bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  // Write to a sibling temp file and rename so readers never see a partial file.
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

// ---------------------------------------------------------------------------
// Genotype text

namespace {

constexpr std::string_view kGenotypeMagic = "degas-genotype v1";

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> out;
  for (std::string tok; is >> tok;) out.push_back(tok);
  return out;
}

[[noreturn]] void bad(std::size_t line, const std::string& msg) {
  throw FormatError("genotype line " + std::to_string(line) + ": " + msg);
}

std::size_t parse_count(const std::string& tok, std::size_t line) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(tok, &pos);
  } catch (const std::exception&) {
    bad(line, "expected a number, got '" + tok + "'");
  }
  if (pos != tok.size() || tok[0] == '-' || v == 0) bad(line, "expected a positive number, got '" + tok + "'");
  return static_cast<std::size_t>(v);
}

}  // namespace

std::string serialize_genotype(const Genotype& g) {
  std::ostringstream os;
  os << kGenotypeMagic << '\n'
     << "stages " << g.stages << " n " << g.n << " base " << g.base << " latent " << g.latent_dim << '\n';
  for (const auto& node : g.nodes) {
    os << "node " << node.id << " <- " << node.source << " : "
       << (node.op_class == OpClass::upsample ? "up" : "normal") << ' ' << node.op;
    if (node.residual) os << " ; res " << node.residual->source << " : " << node.residual->op;
    os << '\n';
  }
  if (!g.provenance.empty()) os << "# " << g.provenance << '\n';
  return os.str();
}

Genotype parse_genotype(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line = 0;
  Genotype g;
  bool header = false, have_shape = false;
  while (std::getline(in, raw)) {
    ++line;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (!header) {
      if (raw != kGenotypeMagic) bad(line, "expected '" + std::string(kGenotypeMagic) + "'");
      header = true;
      continue;
    }
    if (!g.provenance.empty()) bad(line, "content after the provenance comment");
    if (raw.starts_with("# ")) {
      if (raw.size() == 2) bad(line, "empty provenance comment");
      g.provenance = raw.substr(2);
      continue;
    }
    const auto tok = split_ws(raw);
    if (tok.empty()) bad(line, "empty line");
    if (!have_shape) {
      if (tok.size() != 8 || tok[0] != "stages" || tok[2] != "n" || tok[4] != "base" || tok[6] != "latent") {
        bad(line, "expected 'stages S n N base B latent D'");
      }
      g.stages = parse_count(tok[1], line);
      g.n = parse_count(tok[3], line);
      g.base = parse_count(tok[5], line);
      g.latent_dim = parse_count(tok[7], line);
      have_shape = true;
      continue;
    }
    if (tok.size() != 7 && tok.size() != 12) bad(line, "malformed node line");
    if (tok[0] != "node" || tok[2] != "<-" || tok[4] != ":") bad(line, "expected 'node <id> <- <src> : <class> <op>'");
    GenotypeNode node;
    node.id = tok[1];
    node.source = tok[3];
    if (tok[5] == "up") node.op_class = OpClass::upsample;
    else if (tok[5] == "normal") node.op_class = OpClass::normal;
    else bad(line, "unknown class '" + tok[5] + "'");
    node.op = tok[6];
    const bool known = node.op_class == OpClass::upsample ? is_upsample_op(node.op) : is_normal_op(node.op);
    if (!known) bad(line, "unknown operation '" + node.op + "'");
    if (tok.size() == 12) {
      if (tok[7] != ";" || tok[8] != "res" || tok[10] != ":") bad(line, "expected '; res <src> : <op>'");
      if (!is_upsample_op(tok[11])) bad(line, "unknown residual operation '" + tok[11] + "'");
      node.residual = ResidualChoice{tok[9], tok[11]};
    }
    g.nodes.push_back(std::move(node));
  }
  if (!header) bad(1, "empty genotype");
  if (!have_shape) bad(line + 1, "missing 'stages' line");
  const std::size_t expected = g.stages * (g.n + 1);
  if (g.nodes.size() != expected) {
    bad(line, std::to_string(g.nodes.size()) + " node lines, expected " + std::to_string(expected));
  }
  return g;
}

Genotype load_genotype(const std::filesystem::path& path) {
  const Bytes b = read_file(path);
  return parse_genotype(std::string_view(reinterpret_cast<const char*>(b.data()), b.size()));
}

std::string provenance(const RunConfig& config) {
  return "config " + config_hash_hex(config) + " seed " + std::to_string(config.seed);
}

// ---------------------------------------------------------------------------
// Checkpoint container

void CheckpointWriter::add_bytes(const std::string& name, Bytes payload) {
  if (name.empty()) throw Error("checkpoint: empty section name");
  if (!sections_.emplace(name, std::move(payload)).second) throw Error("checkpoint: duplicate section " + name);
}

void CheckpointWriter::add_text(const std::string& name, std::string_view text) {
  add_bytes(name, Bytes(text.begin(), text.end()));
}

void CheckpointWriter::add_u64s(const std::string& name, std::span<const std::uint64_t> values) {
  Bytes b;
  for (auto v : values) put(b, v);
  add_bytes(name, std::move(b));
}

void CheckpointWriter::add_doubles(const std::string& name, std::span<const double> values) {
  Bytes b;
  for (auto v : values) put(b, v);
  add_bytes(name, std::move(b));
}

void CheckpointWriter::add_tensors(const std::string& name, std::span<const Tensor* const> tensors) {
  Bytes b;
  put<std::uint64_t>(b, tensors.size());
  for (const Tensor* t : tensors) {
    put<std::uint64_t>(b, t->rank());
    for (auto d : t->shape()) put<std::uint64_t>(b, d);
    for (double v : t->data()) put(b, v);
  }
  add_bytes(name, std::move(b));
}

Bytes CheckpointWriter::finish() const {
  Bytes out{'D', 'G', 'C', 'K'};
  put(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(sections_.size()));
  std::uint64_t table = 0;
  for (const auto& [name, _] : sections_) table += 4 + name.size() + 16;
  std::uint64_t offset = out.size() + table;
  for (const auto& [name, payload] : sections_) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put(out, offset);
    put<std::uint64_t>(out, payload.size());
    offset += payload.size();
  }
  for (const auto& [_, payload] : sections_) out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

CheckpointReader::CheckpointReader(Bytes bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "DGCK", 4) != 0) throw FormatError("checkpoint: bad magic");
  Cursor in(std::span<const std::uint8_t>(bytes).subspan(4), "checkpoint");
  const auto version = in.get<std::uint32_t>();
  if (version != kCheckpointVersion) throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  const auto count = in.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = in.get<std::uint32_t>();
    const auto name_bytes = in.take(len);
    std::string name(name_bytes.begin(), name_bytes.end());
    const auto offset = in.get<std::uint64_t>(), size = in.get<std::uint64_t>();
    if (offset > bytes.size() || size > bytes.size() - offset) {
      throw FormatError("checkpoint: section " + name + " extends past end of file");
    }
    sections_[name] = Bytes(bytes.begin() + static_cast<std::ptrdiff_t>(offset),
                            bytes.begin() + static_cast<std::ptrdiff_t>(offset + size));
  }
}

const Bytes& CheckpointReader::bytes(const std::string& name) const {
  auto it = sections_.find(name);
  if (it == sections_.end()) throw FormatError("checkpoint: missing section " + name);
  return it->second;
}

std::string CheckpointReader::text(const std::string& name) const {
  const Bytes& b = bytes(name);
  return std::string(b.begin(), b.end());
}

std::vector<std::uint64_t> CheckpointReader::u64s(const std::string& name) const {
  const Bytes& b = bytes(name);
  if (b.size() % 8) throw FormatError("checkpoint: section " + name + " is not a u64 array");
  std::vector<std::uint64_t> out(b.size() / 8);
  std::memcpy(out.data(), b.data(), b.size());
  return out;
}

std::vector<double> CheckpointReader::doubles(const std::string& name) const {
  const Bytes& b = bytes(name);
  if (b.size() % 8) throw FormatError("checkpoint: section " + name + " is not a double array");
  std::vector<double> out(b.size() / 8);
  std::memcpy(out.data(), b.data(), b.size());
  return out;
}

std::vector<Tensor> CheckpointReader::tensors(const std::string& name) const {
  Cursor in(bytes(name), "checkpoint section " + name);
  const auto count = in.get<std::uint64_t>();
  std::vector<Tensor> out;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto rank = in.get<std::uint64_t>();
    if (rank > 8) throw FormatError("checkpoint: section " + name + " has a tensor of rank " + std::to_string(rank));
    Shape shape(rank);
    for (auto& d : shape) d = in.get<std::uint64_t>();
    const std::size_t n = shape_numel(shape);
    const auto raw = in.take(n * sizeof(double));
    std::vector<double> data(n);
    std::memcpy(data.data(), raw.data(), raw.size());
    out.emplace_back(std::move(shape), std::move(data));
  }
  if (!in.done()) throw FormatError("checkpoint: trailing bytes in section " + name);
  return out;
}

}  // namespace degas
