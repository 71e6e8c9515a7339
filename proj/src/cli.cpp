#include "degas/cli.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <sstream>

#include "degas/checkpoint.hpp"
#include "degas/error.hpp"
#include "degas/grad_suite.hpp"
#include "degas/kernels.hpp"
#include "degas/metrics.hpp"
#include "degas/pruning.hpp"

namespace fs = std::filesystem;

namespace degas {

namespace {

// At most one writer per output directory.
class OutputLock {
 public:
  explicit OutputLock(const fs::path& dir) : path_(dir / ".degas.lock") {
    fs::create_directories(dir);
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
      throw Error("output directory " + dir.string() + " is in use (remove " + path_.string() + " if stale)");
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
    ::close(fd);
  }
  ~OutputLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  fs::path path_;
};

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  int threads = 0;
};

RunConfig resolve_config(const Globals& g) {
  RunConfig c = g.config_path.empty() ? RunConfig{} : load_config(g.config_path);
  if (g.seed) c.seed = *g.seed;
  if (!g.out.empty()) c.output_dir = g.out;
  return c;
}

std::string dataset_path(const std::string& flag, const RunConfig& c) {
  const std::string path = flag.empty() ? c.dataset : flag;
  if (path.empty()) throw Error("no dataset: pass --data or set 'dataset' in the config");
  return path;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string loss_csv(const std::string& prov, const std::vector<EpochRecord>& history, bool search) {
  std::ostringstream os;
  os << "# " << prov << '\n' << (search ? "epoch,w_loss,a_loss,lr,seconds\n" : "epoch,loss,lr,seconds\n");
  for (const auto& r : history) {
    os << r.epoch << ',' << fmt(r.w_loss) << ',';
    if (search) os << fmt(r.a_loss) << ',';
    os << fmt(r.lr) << ',' << fmt(r.seconds) << '\n';
  }
  return os.str();
}

int cmd_search(const Globals& g, const std::string& data, bool resume, std::size_t stop_after, std::ostream& out) {
  const RunConfig c = resolve_config(g);
  const Tensor images = read_dataset(dataset_path(data, c));
  const fs::path dir = c.output_dir;
  OutputLock lock(dir);
  const fs::path ckpt = dir / "search.ckpt";
  SearchState s = resume && fs::exists(ckpt) ? load_search_state(read_file(ckpt)) : init_search(c, images);
  if (config_hash(s.config) != config_hash(c)) {
    throw Error("checkpoint " + ckpt.string() + " was written with a different config (" +
                config_hash_hex(s.config) + " vs " + config_hash_hex(c) + ")");
  }
  if (s.epoch > 0) out << "resuming at epoch " << s.epoch + 1 << '\n';
  const std::string prov = provenance(c);
  run_search(s, images, [&](const SearchState& st, const EpochRecord& r) {
    write_file(ckpt, save_search_state(st));
    write_text_file(dir / "search_loss.csv", loss_csv(prov, st.history, true));
    out << "epoch " << r.epoch << " w_loss " << fmt(r.w_loss) << " a_loss " << fmt(r.a_loss) << " lr "
        << fmt(r.lr) << " (" << std::fixed << std::setprecision(1) << r.seconds << "s)" << std::defaultfloat
        << std::setprecision(6) << '\n'
        << std::flush;
    return stop_after == 0 || r.epoch < stop_after;
  });
  return 0;
}

int cmd_prune(const Globals& g, const std::string& checkpoint, bool random, const std::string& file,
              std::ostream& out) {
  const RunConfig c = resolve_config(g);
  Genotype geno;
  Topology topo;
  if (random) {
    topo = build_topology(c);
    geno = random_genotype(topo, c.seed);
    geno.provenance = provenance(c) + " random";
  } else {
    const fs::path path = checkpoint.empty() ? fs::path(c.output_dir) / "search.ckpt" : fs::path(checkpoint);
    SearchState s = load_search_state(read_file(path));
    topo = s.graph.topology();
    geno = prune(s.graph.alpha_values(), topo);
    geno.provenance = provenance(s.config);
  }
  if (const auto errors = validate(geno, topo); !errors.empty()) throw Error("pruned genotype invalid: " + errors[0]);
  const std::string text = serialize_genotype(geno);
  fs::path dest = file;
  std::optional<OutputLock> lock;
  if (dest.empty()) {
    lock.emplace(c.output_dir);
    dest = fs::path(c.output_dir) / "genotype.txt";
  }
  write_text_file(dest, text);
  out << text;
  return 0;
}

int cmd_retrain(const Globals& g, const std::string& genotype, const std::string& data, std::size_t base,
                std::size_t latent, bool resume, std::ostream& out) {
  RunConfig c = resolve_config(g);
  if (base) c.base = base;
  if (latent) c.latent_dim = latent;
  const Genotype geno = load_genotype(genotype);
  const Tensor images = read_dataset(dataset_path(data, c));
  const fs::path dir = c.output_dir;
  OutputLock lock(dir);
  const fs::path ckpt = dir / "model.ckpt";
  TrainState s = resume && fs::exists(ckpt) ? load_training_state(read_file(ckpt)) : init_training(geno, c, images);
  if (s.epoch > 0) out << "resuming at epoch " << s.epoch + 1 << '\n';
  const std::string prov = provenance(s.config);
  run_training(s, images, [&](const TrainState& st, const EpochRecord& r) {
    write_file(ckpt, save_training_state(st));
    write_text_file(dir / "retrain_loss.csv", loss_csv(prov, st.history, false));
    out << "epoch " << r.epoch << " loss " << fmt(r.w_loss) << " lr " << fmt(r.lr) << '\n' << std::flush;
    return true;
  });
  return 0;
}

int cmd_eval(const Globals& g, const std::string& model, const std::string& data, std::size_t samples,
             std::ostream& out) {
  const RunConfig c = resolve_config(g);
  const fs::path path = model.empty() ? fs::path(c.output_dir) / "model.ckpt" : fs::path(model);
  TrainState s = load_training_state(read_file(path));
  const Tensor reference = read_dataset(dataset_path(data, c));
  const std::uint64_t seed = g.seed ? *g.seed : s.config.seed;
  const std::size_t count = samples ? samples : reference.dim(0);
  const Tensor images = sample_images(s.net, fit_latent_gaussian(s.latents), count, seed);
  const double fd = proxy_frechet(images, reference);

  const fs::path dir = c.output_dir;
  OutputLock lock(dir);
  write_dataset(dir / "samples.dgs", images);
  const std::size_t d = s.latents.dim();
  if (s.latents.rows() >= 2) {
    const Tensor& z = s.latents.z;
    write_dataset(dir / "interpolation.dgs",
                  interpolate(s.net, std::span<const double>(z.ptr(), d), std::span<const double>(z.ptr() + d, d), 8));
  }
  std::ostringstream csv;
  csv << "# " << provenance(s.config) << " sample_seed " << seed << '\n'
      << "metric,value\n"
      << "proxy_frechet," << fmt(fd) << '\n'
      << "samples," << count << '\n'
      << "reference," << reference.dim(0) << '\n';
  write_text_file(dir / "eval_metrics.csv", csv.str());
  out << "proxy_frechet " << fmt(fd) << '\n';
  return 0;
}

int cmd_count(const std::vector<std::uint64_t>& factors, std::ostream& out) {
  out << count_architectures(factors).str() << '\n';
  return 0;
}

int cmd_grad_check(std::size_t seeds, double tolerance, std::ostream& out, std::ostream& err) {
  const auto results = gradient_suite(seeds, tolerance);
  out << std::left << std::setw(22) << "check" << std::setw(16) << "max_rel_error"
      << "result\n";
  std::vector<std::string> failed;
  for (const auto& r : results) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", r.max_rel_error);
    out << std::setw(22) << r.name << std::setw(16) << buf << (r.pass ? "pass" : "FAIL") << '\n';
    if (!r.pass) failed.push_back(r.name);
  }
  out << std::right;
  if (!failed.empty()) {
    std::string names;
    for (const auto& n : failed) names += (names.empty() ? "" : ", ") + n;
    err << "error: gradient check failed for " << names << '\n';
    return 1;
  }
  out << results.size() << " checks x " << seeds << " seeds passed at tolerance " << fmt(tolerance) << '\n';
  return 0;
}

int cmd_gen_data(const Globals& g, const std::string& path, std::size_t count, std::size_t size,
                 std::ostream& out) {
  const std::uint64_t seed = g.seed ? *g.seed : resolve_config(g).seed;
  gen_toy_dataset(count, size, seed, path);
  out << "wrote " << count << " images of " << size << "x" << size << " to " << path << '\n';
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Differentiable generator architecture search under a GLO objective", "degas"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config_path, "Run configuration file (key = value lines)");
  auto* seed_opt = app.add_option("--seed", seed, "Override the config seed");
  app.add_option("--out", g.out, "Output directory (overrides the config)");
  app.add_option("--threads", g.threads, "OpenMP threads for the kernels (0 = runtime default)")
      ->check(CLI::NonNegativeNumber);

  std::string data, checkpoint, genotype, model, file;
  bool resume = false, random = false;
  std::size_t stop_after = 0, base = 0, latent = 0, samples = 0, count = 512, size = 16, seeds = 5;
  double tolerance = 1e-4;
  std::vector<std::uint64_t> factors;

  auto* search = app.add_subcommand("search", "Run the architecture search");
  search->add_option("--data", data, "Training dataset (.dgs)");
  search->add_flag("--resume", resume, "Continue from <out>/search.ckpt if present");
  search->add_option("--stop-after", stop_after, "Stop after this epoch (the checkpoint allows resuming)");

  auto* prune_cmd = app.add_subcommand("prune", "Discretize a search checkpoint into a genotype");
  prune_cmd->add_option("--checkpoint", checkpoint, "Search checkpoint (default <out>/search.ckpt)");
  prune_cmd->add_flag("--random", random, "Prune uniformly random logits instead (baseline)");
  prune_cmd->add_option("--file", file, "Write the genotype here instead of <out>/genotype.txt");

  auto* retrain = app.add_subcommand("retrain", "Train a genotype from scratch with GLO");
  retrain->add_option("--genotype", genotype, "Genotype text file")->required();
  retrain->add_option("--data", data, "Training dataset (.dgs)");
  retrain->add_option("--base", base, "Override the base size (cross-resolution transfer)");
  retrain->add_option("--latent", latent, "Override the latent size");
  retrain->add_flag("--resume", resume, "Continue from <out>/model.ckpt if present");

  auto* eval = app.add_subcommand("eval", "Sample a trained model and compute the proxy Frechet distance");
  eval->add_option("--model", model, "Model checkpoint (default <out>/model.ckpt)");
  eval->add_option("--data", data, "Reference (held-out) dataset");
  eval->add_option("--samples", samples, "Number of samples (default: reference size)");

  auto* count_cmd = app.add_subcommand("count-space", "Exact product of per-edge choice counts");
  count_cmd->add_option("factors", factors, "Choice counts")->check(CLI::PositiveNumber);

  auto* grad = app.add_subcommand("grad-check", "Check every gradient against central differences");
  grad->add_option("--seeds", seeds, "Seeds per check")->check(CLI::PositiveNumber);
  grad->add_option("--tolerance", tolerance, "Maximum relative error")->check(CLI::PositiveNumber);

  auto* gen = app.add_subcommand("gen-data", "Render a procedural toy dataset");
  gen->add_option("path", file, "Output file")->required();
  gen->add_option("--count", count, "Number of images")->check(CLI::PositiveNumber);
  gen->add_option("--size", size, "Image size")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "error: " << e.what() << '\n';
    return 2;
  }
  if (*seed_opt) g.seed = seed;
  if (g.threads > 0) kernels::set_threads(g.threads);

  try {
    if (*search) return cmd_search(g, data, resume, stop_after, out);
    if (*prune_cmd) return cmd_prune(g, checkpoint, random, file, out);
    if (*retrain) return cmd_retrain(g, genotype, data, base, latent, resume, out);
    if (*eval) return cmd_eval(g, model, data, samples, out);
    if (*count_cmd) return cmd_count(factors, out);
    if (*grad) return cmd_grad_check(seeds, tolerance, out, err);
    if (*gen) return cmd_gen_data(g, file, count, size, out);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error: " << msg << '\n';
    return 1;
  }
  return 2;
}

}  // namespace degas
