#include "degas/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "degas/error.hpp"

namespace degas {

std::vector<std::string> default_normal_ops() {
  return {"conv1x1",     "conv3x3",     "max_pool3x3", "avg_pool3x3", "skip",
          "sep_conv3x3", "sep_conv5x5", "dil_conv3x3", "dil_conv5x5"};
}

std::vector<std::string> default_upsample_ops() { return {"deconv4", "deconv6", "nn_conv1", "nn_conv3"}; }

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void fail(std::size_t line, const std::string& msg) {
  throw FormatError("config line " + std::to_string(line) + ": " + msg);
}

std::uint64_t parse_uint(const std::string& v, std::size_t line, const std::string& key) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) fail(line, key + " expects a non-negative integer, got '" + v + "'");
  return out;
}

double parse_double(const std::string& v, std::size_t line, const std::string& key) {
  std::istringstream is(v);
  double out = 0.0;
  is >> out;
  if (!is || !is.eof()) fail(line, key + " expects a number, got '" + v + "'");
  return out;
}

std::vector<std::string> parse_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(v);
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

}  // namespace

RunConfig parse_config(std::string_view text) {
  RunConfig c;
  std::map<std::string, std::size_t> seen;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    const std::string stripped = trim(raw);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) fail(line, "expected 'key = value'");
    const std::string key = trim(std::string_view(stripped).substr(0, eq));
    const std::string val = trim(std::string_view(stripped).substr(eq + 1));
    if (val.empty()) fail(line, "missing value for " + key);
    if (seen.count(key)) fail(line, "duplicate key " + key);
    seen[key] = line;

    auto u = [&] { return parse_uint(val, line, key); };
    auto d = [&] {
      const double x = parse_double(val, line, key);
      if (x < 0.0) fail(line, key + " must be >= 0");
      return x;
    };
    if (key == "stages") c.stages = u();
    else if (key == "n") c.n = u();
    else if (key == "base") c.base = u();
    else if (key == "latent") c.latent_dim = u();
    else if (key == "channels") c.channels = u();
    else if (key == "normal_ops") c.normal_ops = parse_list(val);
    else if (key == "upsample_ops") c.upsample_ops = parse_list(val);
    else if (key == "lambda") c.lambda = d();
    else if (key == "levels") c.levels = u();
    else if (key == "lr") c.lr = d();
    else if (key == "momentum") c.momentum = d();
    else if (key == "weight_decay") c.weight_decay = d();
    else if (key == "grad_clip") c.grad_clip = d();
    else if (key == "alpha_lr") c.alpha_lr = d();
    else if (key == "alpha_beta1") c.alpha_beta1 = d();
    else if (key == "alpha_beta2") c.alpha_beta2 = d();
    else if (key == "alpha_weight_decay") c.alpha_weight_decay = d();
    else if (key == "batch_size") c.batch_size = u();
    else if (key == "epochs") c.epochs = u();
    else if (key == "seed") c.seed = u();
    else if (key == "profile") c.profile = val;
    else if (key == "image_size") c.image_size = u();
    else if (key == "dataset") c.dataset = val;
    else if (key == "out") c.output_dir = val;
    else fail(line, "unknown key '" + key + "'");
  }

  auto line_of = [&](const char* key) { return seen.count(key) ? seen[key] : std::size_t{0}; };
  if (c.profile != "cifar" && c.profile != "stl" && c.profile != "celeba") {
    fail(line_of("profile"), "profile must be cifar, stl or celeba");
  }
  if (!seen.count("lr") && c.profile != "cifar") c.lr = 3e-2;
  if (c.stages < 1) fail(line_of("stages"), "stages must be >= 1");
  if (c.n < 1) fail(line_of("n"), "n must be >= 1");
  if (c.base < 1) fail(line_of("base"), "base must be >= 1");
  if (c.latent_dim < 1) fail(line_of("latent"), "latent must be >= 1");
  if (c.batch_size < 1) fail(line_of("batch_size"), "batch_size must be >= 1");
  if (c.epochs < 1) fail(line_of("epochs"), "epochs must be >= 1");
  if (c.normal_ops.empty()) fail(line_of("normal_ops"), "normal_ops must not be empty");
  if (c.upsample_ops.empty()) fail(line_of("upsample_ops"), "upsample_ops must not be empty");
  if (c.alpha_beta1 >= 1.0 || c.alpha_beta2 >= 1.0) fail(line_of("alpha_beta1"), "Adam betas must be < 1");
  if (c.output_size() % (std::size_t{1} << c.levels) != 0) {
    fail(line_of("levels"), "image size " + std::to_string(c.output_size()) + " not divisible by 2^levels");
  }
  if (c.image_size != 0 && c.image_size != c.output_size()) {
    fail(line_of("image_size"), "image size " + std::to_string(c.image_size) + " != base * 2^stages = " +
                                    std::to_string(c.output_size()));
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_text(const RunConfig& c) {
  std::ostringstream os;
  os << "stages = " << c.stages << '\n'
     << "n = " << c.n << '\n'
     << "base = " << c.base << '\n'
     << "latent = " << c.latent_dim << '\n'
     << "channels = " << c.channels << '\n'
     << "normal_ops = " << join(c.normal_ops) << '\n'
     << "upsample_ops = " << join(c.upsample_ops) << '\n'
     << "lambda = " << fmt_double(c.lambda) << '\n'
     << "levels = " << c.levels << '\n'
     << "lr = " << fmt_double(c.lr) << '\n'
     << "momentum = " << fmt_double(c.momentum) << '\n'
     << "weight_decay = " << fmt_double(c.weight_decay) << '\n'
     << "grad_clip = " << fmt_double(c.grad_clip) << '\n'
     << "alpha_lr = " << fmt_double(c.alpha_lr) << '\n'
     << "alpha_beta1 = " << fmt_double(c.alpha_beta1) << '\n'
     << "alpha_beta2 = " << fmt_double(c.alpha_beta2) << '\n'
     << "alpha_weight_decay = " << fmt_double(c.alpha_weight_decay) << '\n'
     << "batch_size = " << c.batch_size << '\n'
     << "epochs = " << c.epochs << '\n'
     << "seed = " << c.seed << '\n'
     << "profile = " << c.profile << '\n'
     << "image_size = " << c.image_size << '\n';
  if (!c.dataset.empty()) os << "dataset = " << c.dataset << '\n';
  if (!c.output_dir.empty()) os << "out = " << c.output_dir << '\n';
  return os.str();
}

std::uint64_t config_hash(const RunConfig& config) {
  RunConfig c = config;
  c.output_dir.clear();
  const std::string text = to_text(c);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash_hex(const RunConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(config_hash(config)));
  return buf;
}

void check_image_size(const RunConfig& config, std::size_t height, std::size_t width) {
  if (height != width) {
    throw FormatError("dataset images must be square, got " + std::to_string(height) + "x" + std::to_string(width));
  }
  if (height != config.output_size()) {
    throw FormatError("dataset image size " + std::to_string(height) + " != base * 2^stages = " +
                      std::to_string(config.base) + " * 2^" + std::to_string(config.stages) + " = " +
                      std::to_string(config.output_size()));
  }
}

}  // namespace degas
