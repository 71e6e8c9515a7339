#include "degas/glo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "degas/error.hpp"
#include "degas/losses.hpp"

namespace degas {

std::vector<double> project_latent(std::span<const double> z) {
  double sq = 0.0;
  for (double v : z) sq += v * v;
  std::vector<double> out(z.begin(), z.end());
  const double norm = std::sqrt(sq);
  if (norm > 1.0)
    for (double& v : out) v /= norm;
  return out;
}

void project_rows(Tensor& z) {
  if (z.rank() != 2) throw ShapeError("project_rows: expected [rows, dim], got " + shape_to_string(z.shape()));
  const std::size_t d = z.dim(1);
  for (std::size_t r = 0; r < z.dim(0); ++r) {
    auto row = z.data().subspan(r * d, d);
    const auto p = project_latent(row);
    std::copy(p.begin(), p.end(), row.begin());
  }
}

LatentTable LatentTable::init(std::size_t rows, std::size_t dim, std::mt19937_64& rng) {
  LatentTable t{Tensor::randn({rows, dim}, rng), Tensor::zeros({rows, dim})};
  project_rows(t.z);
  return t;
}

Tensor LatentTable::gather(std::span<const std::size_t> idx) const {
  const std::size_t d = dim();
  Tensor out({idx.size(), d});
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] >= rows()) throw ShapeError("latent row " + std::to_string(idx[k]) + " out of range");
    std::copy_n(z.ptr() + idx[k] * d, d, out.ptr() + k * d);
  }
  return out;
}

void LatentTable::update(std::span<const std::size_t> idx, const Tensor& grad, double lr, double momentum) {
  const std::size_t d = dim();
  if (grad.shape() != Shape{idx.size(), d}) {
    throw ShapeError("latent update: gradient shape " + shape_to_string(grad.shape()) + " for " +
                     std::to_string(idx.size()) + " rows of dim " + std::to_string(d));
  }
  std::vector<std::size_t> rows(idx.begin(), idx.end());
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  for (std::size_t r : rows) {
    std::vector<double> g(d, 0.0);
    for (std::size_t k = 0; k < idx.size(); ++k)
      if (idx[k] == r)
        for (std::size_t j = 0; j < d; ++j) g[j] += grad[k * d + j];
    double* v = velocity.ptr() + r * d;
    double* zr = z.ptr() + r * d;
    for (std::size_t j = 0; j < d; ++j) {
      v[j] = momentum * v[j] + g[j];
      zr[j] -= lr * v[j];
    }
    const auto p = project_latent(std::span<const double>(zr, d));
    std::copy(p.begin(), p.end(), zr);
  }
}

Tensor gather_images(const Tensor& images, std::span<const std::size_t> idx) {
  if (images.rank() != 4) throw ShapeError("images must be [N, C, H, W], got " + shape_to_string(images.shape()));
  const std::size_t per = images.size() / images.dim(0);
  Shape shape = images.shape();
  shape[0] = idx.size();
  Tensor out(shape);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] >= images.dim(0)) throw ShapeError("image index " + std::to_string(idx[k]) + " out of range");
    std::copy_n(images.ptr() + idx[k] * per, per, out.ptr() + k * per);
  }
  return out;
}

double glo_update(Generator& net, LatentTable& latents, SgdState& opt, const RunConfig& config,
                  const Tensor& images, std::span<const std::size_t> batch, double lr) {
  Tape tape;
  tape.freeze(ParamGroup::architecture);
  Var z = tape.leaf(latents.gather(batch));
  Var x = net.forward(z, Mode::train, tape);
  Var loss = recon_loss(x, tape.constant(gather_images(images, batch)), config.lambda, config.levels);
  const double value = loss.value()[0];
  const GradientMap grads = tape.backward(loss);

  std::vector<Tensor*> params;
  std::vector<Tensor> g;
  for (Parameter* p : net.weights()) {
    params.push_back(&p->value);
    g.push_back(grads.at(*p));
  }
  std::vector<Tensor*> gp;
  for (Tensor& t : g) gp.push_back(&t);
  clip_grad_norm(gp, config.grad_clip);
  const std::vector<const Tensor*> gc(gp.begin(), gp.end());
  opt.lr = lr;
  sgd_step(opt, params, gc);
  latents.update(batch, grads.at(z), lr, config.momentum);
  return value;
}

namespace {

constexpr std::uint64_t kStateSalt = 0x9e3779b97f4a7c15ULL;

void check_images(const RunConfig& config, const Tensor& images) {
  if (images.rank() != 4 || images.dim(1) != 3) {
    throw FormatError("expected RGB images [N, 3, H, W], got " + shape_to_string(images.shape()));
  }
  check_image_size(config, images.dim(2), images.dim(3));
}

// Batches of `order` in chunks of batch_size (last chunk may be short).
std::vector<std::span<const std::size_t>> chunks(const std::vector<std::size_t>& order, std::size_t batch_size) {
  std::vector<std::span<const std::size_t>> out;
  for (std::size_t s = 0; s < order.size(); s += batch_size)
    out.emplace_back(order.data() + s, std::min(batch_size, order.size() - s));
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

SearchState init_search(const RunConfig& config, const Tensor& images) {
  check_images(config, images);
  const std::size_t count = images.dim(0);
  if (count < 2) throw FormatError("search needs at least 2 images");
  SearchState s{config, build_supergraph(config, images.dim(2)), {}, {}, {}, {}, {}, 0,
                std::mt19937_64(config.seed ^ kStateSalt), {}};
  s.latents = LatentTable::init(count, config.latent_dim, s.rng);
  std::vector<std::size_t> perm(count);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), s.rng);
  s.w_set.assign(perm.begin(), perm.begin() + count / 2);
  s.a_set.assign(perm.begin() + count / 2, perm.end());
  s.weight_opt = SgdState{config.lr, config.momentum, config.weight_decay, {}, 0};
  s.alpha_opt = AdamState{config.alpha_lr, config.alpha_beta1, config.alpha_beta2, 1e-8, config.alpha_weight_decay,
                          {}, {}, 0};
  return s;
}

double glo_step(SearchState& s, const Tensor& images, std::span<const std::size_t> batch, double lr) {
  return glo_update(s.graph, s.latents, s.weight_opt, s.config, images, batch, lr);
}

double alpha_step(SearchState& s, const Tensor& images, std::span<const std::size_t> batch, double latent_lr) {
  Tape tape;
  tape.freeze(ParamGroup::weights);
  Var z = tape.leaf(s.latents.gather(batch));
  Var x = s.graph.forward(z, Mode::train, tape);
  Var loss = recon_loss(x, tape.constant(gather_images(images, batch)), s.config.lambda, s.config.levels);
  const double value = loss.value()[0];
  const GradientMap grads = tape.backward(loss);

  std::vector<Tensor*> params;
  std::vector<const Tensor*> g;
  for (Parameter* a : s.graph.alphas()) {
    params.push_back(&a->value);
    g.push_back(&grads.at(*a));
  }
  adam_step(s.alpha_opt, params, g);
  s.latents.update(batch, grads.at(z), latent_lr, s.config.momentum);
  return value;
}

EpochRecord search_epoch(SearchState& s, const Tensor& images) {
  const auto t0 = std::chrono::steady_clock::now();
  const double lr = cosine_lr(s.config.lr, static_cast<double>(s.epoch), static_cast<double>(s.config.epochs));
  std::vector<std::size_t> w = s.w_set, a = s.a_set;
  std::shuffle(w.begin(), w.end(), s.rng);
  std::shuffle(a.begin(), a.end(), s.rng);

  double w_sum = 0.0, a_sum = 0.0;
  std::size_t w_count = 0, a_count = 0;
  std::vector<std::size_t> a_batch;
  std::size_t a_pos = 0;
  for (auto wb : chunks(w, s.config.batch_size)) {
    w_sum += glo_step(s, images, wb, lr) * static_cast<double>(wb.size());
    w_count += wb.size();
    a_batch.clear();
    for (std::size_t k = 0; k < wb.size(); ++k) a_batch.push_back(a[a_pos++ % a.size()]);
    a_sum += alpha_step(s, images, a_batch, lr) * static_cast<double>(a_batch.size());
    a_count += a_batch.size();
  }
  ++s.epoch;
  EpochRecord rec{s.epoch, w_sum / static_cast<double>(w_count), a_sum / static_cast<double>(a_count), lr,
                  seconds_since(t0)};
  s.history.push_back(rec);
  return rec;
}

void run_search(SearchState& s, const Tensor& images, const SearchCallback& on_epoch) {
  check_images(s.config, images);
  while (s.epoch < s.config.epochs) {
    const EpochRecord rec = search_epoch(s, images);
    if (on_epoch && !on_epoch(s, rec)) break;
  }
}

TrainState init_training(const Genotype& genotype, const RunConfig& config, const Tensor& images) {
  RunConfig cfg = config;
  cfg.stages = genotype.stages;
  cfg.n = genotype.n;
  check_images(cfg, images);
  TrainState s{cfg, instantiate_genotype(genotype, cfg), {}, {}, 0, std::mt19937_64(cfg.seed ^ kStateSalt), {}};
  s.latents = LatentTable::init(images.dim(0), cfg.latent_dim, s.rng);
  s.opt = SgdState{cfg.lr, cfg.momentum, cfg.weight_decay, {}, 0};
  return s;
}

EpochRecord train_epoch(TrainState& s, const Tensor& images) {
  const auto t0 = std::chrono::steady_clock::now();
  const double lr = cosine_lr(s.config.lr, static_cast<double>(s.epoch), static_cast<double>(s.config.epochs));
  std::vector<std::size_t> order(images.dim(0));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), s.rng);
  double sum = 0.0;
  for (auto b : chunks(order, s.config.batch_size))
    sum += glo_update(s.net, s.latents, s.opt, s.config, images, b, lr) * static_cast<double>(b.size());
  ++s.epoch;
  EpochRecord rec{s.epoch, sum / static_cast<double>(order.size()), 0.0, lr, seconds_since(t0)};
  s.history.push_back(rec);
  return rec;
}

void run_training(TrainState& s, const Tensor& images, const TrainCallback& on_epoch) {
  check_images(s.config, images);
  while (s.epoch < s.config.epochs) {
    const EpochRecord rec = train_epoch(s, images);
    if (on_epoch && !on_epoch(s, rec)) break;
  }
}

}  // namespace degas
