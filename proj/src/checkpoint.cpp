#include "degas/checkpoint.hpp"

#include <sstream>

#include "degas/error.hpp"

namespace degas {

namespace {

std::vector<const Tensor*> values(const std::vector<Parameter*>& params) {
  std::vector<const Tensor*> out;
  for (const Parameter* p : params) out.push_back(&p->value);
  return out;
}

std::vector<const Tensor*> buffer_values(const std::vector<ops::BatchNormBuffers*>& buffers) {
  std::vector<const Tensor*> out;
  for (const auto* b : buffers) {
    out.push_back(&b->running_mean);
    out.push_back(&b->running_var);
  }
  return out;
}

std::vector<const Tensor*> pointers(const std::vector<Tensor>& ts) {
  std::vector<const Tensor*> out;
  for (const Tensor& t : ts) out.push_back(&t);
  return out;
}

void restore(const std::string& section, std::vector<Tensor*> dst, std::vector<Tensor> src) {
  if (dst.size() != src.size()) {
    throw FormatError("checkpoint: section " + section + " holds " + std::to_string(src.size()) + " tensors, model has " +
                      std::to_string(dst.size()));
  }
  for (std::size_t i = 0; i < dst.size(); ++i) {
    // Buffers are created lazily, so an empty destination accepts any shape.
    if (!dst[i]->empty() && !dst[i]->same_shape(src[i])) {
      throw FormatError("checkpoint: section " + section + " tensor " + std::to_string(i) + " has shape " +
                        shape_to_string(src[i].shape()) + ", model expects " + shape_to_string(dst[i]->shape()));
    }
    *dst[i] = std::move(src[i]);
  }
}

std::vector<Tensor*> mutable_values(const std::vector<Parameter*>& params) {
  std::vector<Tensor*> out;
  for (Parameter* p : params) out.push_back(&p->value);
  return out;
}

std::vector<Tensor*> mutable_buffers(const std::vector<ops::BatchNormBuffers*>& buffers) {
  std::vector<Tensor*> out;
  for (auto* b : buffers) {
    out.push_back(&b->running_mean);
    out.push_back(&b->running_var);
  }
  return out;
}

std::string rng_text(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

std::mt19937_64 rng_from(const std::string& text) {
  std::istringstream is(text);
  std::mt19937_64 rng;
  is >> rng;
  if (!is) throw FormatError("checkpoint: corrupt RNG state");
  return rng;
}

void put_history(CheckpointWriter& w, const std::vector<EpochRecord>& history) {
  std::vector<double> flat;
  for (const auto& r : history) {
    flat.insert(flat.end(), {static_cast<double>(r.epoch), r.w_loss, r.a_loss, r.lr, r.seconds});
  }
  w.add_doubles("history", flat);
}

std::vector<EpochRecord> get_history(const CheckpointReader& r) {
  const auto flat = r.doubles("history");
  if (flat.size() % 5) throw FormatError("checkpoint: corrupt history");
  std::vector<EpochRecord> out;
  for (std::size_t i = 0; i < flat.size(); i += 5) {
    out.push_back({static_cast<std::size_t>(flat[i]), flat[i + 1], flat[i + 2], flat[i + 3], flat[i + 4]});
  }
  return out;
}

void put_sgd(CheckpointWriter& w, const std::string& prefix, const SgdState& s) {
  const double meta[] = {s.lr, s.momentum, s.weight_decay};
  w.add_doubles(prefix + ".meta", meta);
  const std::uint64_t steps[] = {s.steps};
  w.add_u64s(prefix + ".steps", steps);
  w.add_tensors(prefix + ".velocity", pointers(s.velocity));
}

SgdState get_sgd(const CheckpointReader& r, const std::string& prefix) {
  const auto meta = r.doubles(prefix + ".meta");
  const auto steps = r.u64s(prefix + ".steps");
  if (meta.size() != 3 || steps.size() != 1) throw FormatError("checkpoint: corrupt " + prefix + " state");
  return SgdState{meta[0], meta[1], meta[2], r.tensors(prefix + ".velocity"), steps[0]};
}

void put_common(CheckpointWriter& w, const RunConfig& config, std::size_t epoch, const LatentTable& latents,
                const std::mt19937_64& rng, const std::vector<EpochRecord>& history) {
  w.add_text("config", to_text(config));
  w.add_text("provenance", provenance(config));
  const std::uint64_t e[] = {epoch};
  w.add_u64s("epoch", e);
  const Tensor* lat[] = {&latents.z, &latents.velocity};
  w.add_tensors("latents", lat);
  w.add_text("rng", rng_text(rng));
  put_history(w, history);
}

std::size_t get_epoch(const CheckpointReader& r) {
  const auto e = r.u64s("epoch");
  if (e.size() != 1) throw FormatError("checkpoint: corrupt epoch");
  return e[0];
}

LatentTable get_latents(const CheckpointReader& r) {
  auto t = r.tensors("latents");
  if (t.size() != 2 || t[0].rank() != 2 || !t[0].same_shape(t[1])) throw FormatError("checkpoint: corrupt latents");
  return LatentTable{std::move(t[0]), std::move(t[1])};
}

}  // namespace

Bytes save_search_state(const SearchState& cs) {
  auto& s = const_cast<SearchState&>(cs);  // accessors are non-const; nothing is modified
  CheckpointWriter w;
  w.add_text("kind", "search");
  put_common(w, s.config, s.epoch, s.latents, s.rng, s.history);
  w.add_tensors("weights", values(s.graph.weights()));
  w.add_tensors("buffers", buffer_values(s.graph.buffers()));
  w.add_tensors("alpha", values(s.graph.alphas()));
  std::vector<std::uint64_t> wset(s.w_set.begin(), s.w_set.end()), aset(s.a_set.begin(), s.a_set.end());
  w.add_u64s("split.w", wset);
  w.add_u64s("split.a", aset);
  put_sgd(w, "sgd", s.weight_opt);
  const double adam_meta[] = {s.alpha_opt.lr, s.alpha_opt.beta1, s.alpha_opt.beta2, s.alpha_opt.eps,
                              s.alpha_opt.weight_decay};
  w.add_doubles("adam.meta", adam_meta);
  const std::uint64_t adam_steps[] = {s.alpha_opt.steps};
  w.add_u64s("adam.steps", adam_steps);
  w.add_tensors("adam.m", pointers(s.alpha_opt.m));
  w.add_tensors("adam.v", pointers(s.alpha_opt.v));
  return w.finish();
}

SearchState load_search_state(const Bytes& bytes) {
  CheckpointReader r(bytes);
  if (r.text("kind") != "search") throw FormatError("checkpoint: not a search checkpoint");
  const RunConfig config = parse_config(r.text("config"));
  SearchState s{config, build_supergraph(config), get_latents(r), {}, {}, get_sgd(r, "sgd"), {}, get_epoch(r),
                rng_from(r.text("rng")), get_history(r)};
  restore("weights", mutable_values(s.graph.weights()), r.tensors("weights"));
  restore("buffers", mutable_buffers(s.graph.buffers()), r.tensors("buffers"));
  restore("alpha", mutable_values(s.graph.alphas()), r.tensors("alpha"));
  for (auto v : r.u64s("split.w")) s.w_set.push_back(v);
  for (auto v : r.u64s("split.a")) s.a_set.push_back(v);
  const auto meta = r.doubles("adam.meta");
  const auto steps = r.u64s("adam.steps");
  if (meta.size() != 5 || steps.size() != 1) throw FormatError("checkpoint: corrupt adam state");
  s.alpha_opt = AdamState{meta[0], meta[1], meta[2], meta[3], meta[4], r.tensors("adam.m"), r.tensors("adam.v"),
                          steps[0]};
  return s;
}

Bytes save_training_state(const TrainState& cs) {
  auto& s = const_cast<TrainState&>(cs);
  CheckpointWriter w;
  w.add_text("kind", "train");
  put_common(w, s.config, s.epoch, s.latents, s.rng, s.history);
  w.add_text("genotype", serialize_genotype(s.net.genotype()));
  w.add_tensors("weights", values(s.net.weights()));
  w.add_tensors("buffers", buffer_values(s.net.buffers()));
  put_sgd(w, "sgd", s.opt);
  return w.finish();
}

TrainState load_training_state(const Bytes& bytes) {
  CheckpointReader r(bytes);
  if (r.text("kind") != "train") throw FormatError("checkpoint: not a training checkpoint");
  const RunConfig config = parse_config(r.text("config"));
  const Genotype g = parse_genotype(r.text("genotype"));
  TrainState s{config,      instantiate_genotype(g, config), get_latents(r), get_sgd(r, "sgd"), get_epoch(r),
               rng_from(r.text("rng")), get_history(r)};
  restore("weights", mutable_values(s.net.weights()), r.tensors("weights"));
  restore("buffers", mutable_buffers(s.net.buffers()), r.tensors("buffers"));
  return s;
}

}  // namespace degas
