#include "degas/search_space.hpp"

#include <algorithm>

#include "degas/error.hpp"

namespace degas {

std::vector<CandidateOp> normal_catalog() {
  std::vector<CandidateOp> ops;
  for (const char* name : {"conv1x1", "conv3x3", "max_pool3x3", "avg_pool3x3", "skip", "sep_conv3x3",
                           "sep_conv5x5", "dil_conv3x3", "dil_conv5x5"}) {
    ops.push_back({name, OpClass::normal, 1});
  }
  return ops;
}

std::vector<CandidateOp> upsample_catalog(std::size_t factor) {
  if (factor != 2 && factor != 4 && factor != 8) {
    throw FormatError("unsupported up-sample factor " + std::to_string(factor) + " (expected 2, 4 or 8)");
  }
  std::vector<CandidateOp> ops;
  for (const char* name : {"deconv4", "deconv6", "nn_conv1", "nn_conv3"}) {
    ops.push_back({name, OpClass::upsample, factor});
  }
  return ops;
}

CandidateOp zero_candidate(std::size_t factor) { return {"zero", OpClass::zero, factor}; }

bool is_normal_op(std::string_view name) {
  const auto cat = normal_catalog();
  return std::any_of(cat.begin(), cat.end(), [&](const CandidateOp& op) { return op.name == name; });
}

bool is_upsample_op(std::string_view name) {
  const auto cat = upsample_catalog(2);
  return std::any_of(cat.begin(), cat.end(), [&](const CandidateOp& op) { return op.name == name; });
}

CandidateModule CandidateModule::build(const CandidateOp& op, std::size_t in, std::size_t out,
                                       std::mt19937_64& rng) {
  CandidateModule m;
  m.spec_ = op;
  m.out_channels_ = out;
  auto& p = m.pipeline_;
  auto bn_relu = [&] {
    p.push_back(OpParams::batch_norm2d(in));
    p.push_back(OpParams::relu());
  };
  auto same_channels = [&] {
    if (in != out) {
      throw FormatError(op.name + " needs equal channel counts, got " + std::to_string(in) + " -> " +
                        std::to_string(out));
    }
  };
  const std::size_t f = op.factor;
  const std::string& name = op.name;
  if (op.op_class == OpClass::zero) {
    // No pipeline: output is all zeros.
  } else if (name == "conv1x1") {
    bn_relu();
    p.push_back(OpParams::conv2d(in, out, 1, 1, 0, rng));
  } else if (name == "conv3x3") {
    bn_relu();
    p.push_back(OpParams::conv2d(in, out, 3, 1, 1, rng));
  } else if (name == "max_pool3x3") {
    same_channels();
    p.push_back(OpParams::max_pool2d(3, 1, 1));
  } else if (name == "avg_pool3x3") {
    same_channels();
    p.push_back(OpParams::avg_pool2d(3, 1, 1));
  } else if (name == "skip") {
    same_channels();
  } else if (name == "sep_conv3x3") {
    bn_relu();
    p.push_back(OpParams::sep_conv2d(in, out, 3, 1, rng));
  } else if (name == "sep_conv5x5") {
    bn_relu();
    p.push_back(OpParams::sep_conv2d(in, out, 5, 2, rng));
  } else if (name == "dil_conv3x3") {
    bn_relu();
    p.push_back(OpParams::dil_conv2d(in, out, 3, 2, 2, rng));
  } else if (name == "dil_conv5x5") {
    bn_relu();
    p.push_back(OpParams::dil_conv2d(in, out, 5, 4, 2, rng));
  } else if (name == "deconv4") {
    bn_relu();
    p.push_back(OpParams::deconv2d(in, out, 2 * f, f, f / 2, rng));
  } else if (name == "deconv6") {
    bn_relu();
    p.push_back(OpParams::deconv2d(in, out, 2 * f + 2, f, f / 2 + 1, rng));
  } else if (name == "nn_conv1") {
    bn_relu();
    p.push_back(OpParams::nn_upsample2d(f));
    p.push_back(OpParams::conv2d(in, out, 1, 1, 0, rng));
  } else if (name == "nn_conv3") {
    bn_relu();
    p.push_back(OpParams::nn_upsample2d(f));
    p.push_back(OpParams::conv2d(in, out, 3, 1, 1, rng));
  } else {
    throw FormatError("unknown operation '" + name + "'");
  }
  return m;
}

Var CandidateModule::apply(Var x, Mode mode, Tape& tape) {
  if (spec_.op_class == OpClass::zero) {
    const Shape& s = x.shape();
    if (s.size() != 4) throw ShapeError("zero: input must have rank 4, got " + shape_to_string(s));
    return tape.constant(Tensor::zeros({s[0], out_channels_, s[2] * spec_.factor, s[3] * spec_.factor}));
  }
  Var y = x;
  for (OpParams& op : pipeline_) {
    op.training = mode == Mode::train;
    const Var in[] = {y};
    y = forward(op, in, tape);
  }
  return y;
}

std::vector<Parameter*> CandidateModule::parameters() {
  std::vector<Parameter*> out;
  for (auto& op : pipeline_)
    for (Parameter* p : op.parameters()) out.push_back(p);
  return out;
}

std::vector<ops::BatchNormBuffers*> CandidateModule::buffers() {
  std::vector<ops::BatchNormBuffers*> out;
  for (auto& op : pipeline_)
    if (op.kind == OpKind::batch_norm2d) out.push_back(&op.buffers);
  return out;
}

std::string_view to_string(EdgeClass cls) {
  switch (cls) {
    case EdgeClass::direct_normal: return "direct-normal";
    case EdgeClass::direct_upsample: return "direct-upsample";
    case EdgeClass::residual_upsample: return "residual-upsample";
  }
  return "unknown";
}

std::optional<std::size_t> Topology::find_node(std::string_view id) const {
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].id == id) return i;
  return std::nullopt;
}

std::vector<std::size_t> Topology::incoming(std::size_t node) const {
  std::vector<std::size_t> out;
  for (std::size_t e = 0; e < edges.size(); ++e)
    if (edges[e].target == node) out.push_back(e);
  return out;
}

std::size_t Topology::direct_edge(std::size_t node) const {
  for (std::size_t e = 0; e < edges.size(); ++e)
    if (edges[e].target == node && edges[e].edge_class != EdgeClass::residual_upsample) return e;
  throw Error("node " + std::to_string(node) + " has no direct edge");
}

std::size_t Topology::count(EdgeClass cls) const {
  return static_cast<std::size_t>(
      std::count_if(edges.begin(), edges.end(), [&](const EdgeSpec& e) { return e.edge_class == cls; }));
}

namespace {

std::vector<CandidateOp> select_ops(const std::vector<CandidateOp>& catalog, const std::vector<std::string>& names,
                                    const char* what) {
  if (names.empty()) throw FormatError(std::string(what) + " catalog is empty");
  std::vector<CandidateOp> out;
  for (const auto& name : names) {
    auto it = std::find_if(catalog.begin(), catalog.end(), [&](const CandidateOp& op) { return op.name == name; });
    if (it == catalog.end()) throw FormatError(std::string("unknown ") + what + " operation '" + name + "'");
    out.push_back(*it);
  }
  return out;
}

}  // namespace

Topology build_topology(const RunConfig& config) {
  if (config.stages < 1) throw FormatError("stages must be >= 1");
  if (config.n < 1) throw FormatError("n must be >= 1");
  if (config.base < 1 || config.latent_dim < 1) throw FormatError("base and latent must be >= 1");
  if (config.channels == 0 || (config.channels >> config.stages) == 0 ||
      ((config.channels >> config.stages) << config.stages) != config.channels) {
    throw FormatError("inconsistent channel plan: " + std::to_string(config.channels) +
                      " stem channels cannot be halved " + std::to_string(config.stages) + " times");
  }
  Topology t;
  t.stages = config.stages;
  t.n = config.n;
  t.base = config.base;
  t.latent_dim = config.latent_dim;

  t.nodes.push_back({"stem", NodeKind::stem, 0, config.channels, config.base});
  std::size_t normal_id = 0;
  for (std::size_t s = 1; s <= config.stages; ++s) {
    t.nodes.push_back({"u" + std::to_string(s), NodeKind::upsample, s, config.channels >> s, config.base << s});
    for (std::size_t k = 0; k < config.n; ++k) {
      t.nodes.push_back({"n" + std::to_string(++normal_id), NodeKind::normal, s, config.channels >> s,
                         config.base << s});
    }
  }

  const auto normal = select_ops(normal_catalog(), config.normal_ops, "normal");
  for (std::size_t i = 1; i < t.nodes.size(); ++i) {
    const NodeSpec& node = t.nodes[i];
    if (node.kind == NodeKind::normal) {
      t.edges.push_back({i - 1, i, EdgeClass::direct_normal, 1, normal});
      continue;
    }
    t.edges.push_back({i - 1, i, EdgeClass::direct_upsample, 2,
                       select_ops(upsample_catalog(2), config.upsample_ops, "up-sample")});
    // Residuals from the stem and every earlier up-sample node, except the
    // node's own direct predecessor.
    for (std::size_t src = 0; src + 1 < i; ++src) {
      const NodeSpec& from = t.nodes[src];
      if (from.kind == NodeKind::normal) continue;
      const std::size_t factor = std::size_t{1} << (node.stage - from.stage);
      auto cands = select_ops(upsample_catalog(factor), config.upsample_ops, "up-sample");
      cands.push_back(zero_candidate(factor));
      t.edges.push_back({src, i, EdgeClass::residual_upsample, factor, std::move(cands)});
    }
  }
  return t;
}

Tensor Generator::generate(const Tensor& z, Mode mode) {
  Tape tape;
  return forward(tape.constant(z), mode, tape).value();
}

Var Stem::forward(Var z, Tape& tape) {
  const Var in[] = {z};
  Var h = degas::forward(linear, in, tape);
  return ops::reshape(h, {z.shape()[0], channels, base, base});
}

Var Head::forward(Var x, Mode mode, Tape& tape) {
  bn.training = mode == Mode::train;
  const Var a[] = {x};
  Var h = degas::forward(bn, a, tape);
  h = ops::relu(h);
  const Var b[] = {h};
  h = degas::forward(conv, b, tape);
  return ops::tanh(h);
}

Var mixed_forward(MixedEdge& edge, Var x, Mode mode, Tape& tape) {
  return mixed_forward(edge, x, tape.parameter(edge.alpha), mode, tape);
}

Var mixed_forward(MixedEdge& edge, Var x, Var alpha, Mode mode, Tape& tape) {
  if (alpha.value().size() != edge.ops.size()) {
    throw ShapeError("mixed edge has " + std::to_string(alpha.value().size()) + " logits for " +
                     std::to_string(edge.ops.size()) + " candidates");
  }
  Var weights = ops::softmax(alpha);
  std::vector<Var> outs;
  outs.reserve(edge.ops.size());
  for (auto& op : edge.ops) outs.push_back(op.apply(x, mode, tape));
  return ops::weighted_sum(weights, outs);
}

namespace {

Stem make_stem(const Topology& t, std::mt19937_64& rng) {
  const std::size_t c = t.nodes[0].channels;
  return Stem{OpParams::linear(t.latent_dim, c * t.base * t.base, rng), c, t.base};
}

Head make_head(const Topology& t, std::mt19937_64& rng) {
  const std::size_t c = t.output_channels();
  return Head{OpParams::batch_norm2d(c), OpParams::conv2d(c, 3, 3, 1, 1, rng)};
}

void check_latent(const Var& z, const Topology& t) {
  if (z.shape().size() != 2 || z.shape()[1] != t.latent_dim) {
    throw ShapeError("generator: latent batch must be [B, " + std::to_string(t.latent_dim) + "], got " +
                     shape_to_string(z.shape()));
  }
}

}  // namespace

SuperGraph SuperGraph::build(const RunConfig& config, std::optional<std::size_t> image_size) {
  SuperGraph g;
  g.topo_ = build_topology(config);
  if (image_size && *image_size != g.topo_.output_size()) {
    throw FormatError("image size " + std::to_string(*image_size) + " does not match base * 2^stages = " +
                      std::to_string(g.topo_.output_size()));
  }
  std::mt19937_64 rng(config.seed);
  g.stem_ = make_stem(g.topo_, rng);
  for (const EdgeSpec& spec : g.topo_.edges) {
    MixedEdge edge;
    edge.spec = spec;
    const std::size_t in = g.topo_.nodes[spec.source].channels, out = g.topo_.nodes[spec.target].channels;
    for (const CandidateOp& op : spec.candidates) edge.ops.push_back(CandidateModule::build(op, in, out, rng));
    edge.alpha = Parameter{Tensor::zeros({spec.candidates.size()}), ParamGroup::architecture};
    g.edges_.push_back(std::move(edge));
  }
  g.head_ = make_head(g.topo_, rng);
  return g;
}

SuperGraph build_supergraph(const RunConfig& config, std::optional<std::size_t> image_size) {
  return SuperGraph::build(config, image_size);
}

Var SuperGraph::forward(Var z, Mode mode, Tape& tape) {
  check_latent(z, topo_);
  std::vector<Var> values(topo_.nodes.size());
  values[0] = stem_.forward(z, tape);
  std::size_t e = 0;
  for (std::size_t i = 1; i < topo_.nodes.size(); ++i) {
    std::optional<Var> acc;
    for (; e < edges_.size() && edges_[e].spec.target == i; ++e) {
      Var out = mixed_forward(edges_[e], values[edges_[e].spec.source], mode, tape);
      acc = acc ? ops::add(*acc, out) : out;
    }
    values[i] = *acc;
  }
  return head_.forward(values.back(), mode, tape);
}

std::vector<Parameter*> SuperGraph::weights() {
  std::vector<Parameter*> out = stem_.linear.parameters();
  for (auto& edge : edges_)
    for (auto& op : edge.ops)
      for (Parameter* p : op.parameters()) out.push_back(p);
  for (Parameter* p : head_.bn.parameters()) out.push_back(p);
  for (Parameter* p : head_.conv.parameters()) out.push_back(p);
  return out;
}

std::vector<ops::BatchNormBuffers*> SuperGraph::buffers() {
  std::vector<ops::BatchNormBuffers*> out;
  for (auto& edge : edges_)
    for (auto& op : edge.ops)
      for (auto* b : op.buffers()) out.push_back(b);
  out.push_back(&head_.bn.buffers);
  return out;
}

std::vector<Parameter*> SuperGraph::alphas() {
  std::vector<Parameter*> out;
  for (auto& edge : edges_) out.push_back(&edge.alpha);
  return out;
}

std::vector<std::vector<double>> SuperGraph::alpha_values() const {
  std::vector<std::vector<double>> out;
  for (const auto& edge : edges_) out.emplace_back(edge.alpha.value.data().begin(), edge.alpha.value.data().end());
  return out;
}

FixedNetwork instantiate_genotype(const Genotype& g, const RunConfig& config) {
  RunConfig cfg = config;
  cfg.stages = g.stages;
  cfg.n = g.n;
  FixedNetwork net;
  net.genotype_ = g;
  net.topo_ = build_topology(cfg);
  const Topology& t = net.topo_;
  if (g.nodes.size() + 1 != t.nodes.size()) {
    throw FormatError("genotype lists " + std::to_string(g.nodes.size()) + " nodes, topology has " +
                      std::to_string(t.nodes.size() - 1));
  }
  std::mt19937_64 rng(config.seed);
  net.stem_ = make_stem(t, rng);
  for (std::size_t i = 1; i < t.nodes.size(); ++i) {
    const GenotypeNode& gn = g.nodes[i - 1];
    const NodeSpec& node = t.nodes[i];
    if (gn.id != node.id) throw FormatError("genotype node '" + gn.id + "' where '" + node.id + "' expected");
    if (gn.source != t.nodes[i - 1].id) {
      throw FormatError("unknown direct source '" + gn.source + "' for node " + gn.id);
    }
    const bool up = node.kind == NodeKind::upsample;
    const auto catalog = up ? upsample_catalog(2) : normal_catalog();
    auto it = std::find_if(catalog.begin(), catalog.end(), [&](const CandidateOp& op) { return op.name == gn.op; });
    if (it == catalog.end()) throw FormatError("unknown operation '" + gn.op + "' for node " + gn.id);
    FixedNetwork::Node fn{i - 1, CandidateModule::build(*it, t.nodes[i - 1].channels, node.channels, rng), {}, {}};
    if (gn.residual) {
      auto src = t.find_node(gn.residual->source);
      const auto incoming = t.incoming(i);
      auto edge = std::find_if(incoming.begin(), incoming.end(), [&](std::size_t e) {
        return src && t.edges[e].source == *src && t.edges[e].edge_class == EdgeClass::residual_upsample;
      });
      if (edge == incoming.end()) {
        throw FormatError("unknown residual source '" + gn.residual->source + "' for node " + gn.id);
      }
      const auto rcat = upsample_catalog(t.edges[*edge].factor);
      auto rit = std::find_if(rcat.begin(), rcat.end(),
                              [&](const CandidateOp& op) { return op.name == gn.residual->op; });
      if (rit == rcat.end()) {
        throw FormatError("unknown residual operation '" + gn.residual->op + "' for node " + gn.id);
      }
      fn.residual_source = *src;
      fn.residual = CandidateModule::build(*rit, t.nodes[*src].channels, node.channels, rng);
    }
    net.nodes_.push_back(std::move(fn));
  }
  net.head_ = make_head(t, rng);
  return net;
}

Var FixedNetwork::forward(Var z, Mode mode, Tape& tape) {
  check_latent(z, topo_);
  std::vector<Var> values(topo_.nodes.size());
  values[0] = stem_.forward(z, tape);
  for (std::size_t i = 1; i < topo_.nodes.size(); ++i) {
    Node& node = nodes_[i - 1];
    Var v = node.direct.apply(values[node.direct_source], mode, tape);
    if (node.residual) v = ops::add(v, node.residual->apply(values[*node.residual_source], mode, tape));
    values[i] = v;
  }
  return head_.forward(values.back(), mode, tape);
}

std::vector<Parameter*> FixedNetwork::weights() {
  std::vector<Parameter*> out = stem_.linear.parameters();
  for (auto& node : nodes_) {
    for (Parameter* p : node.direct.parameters()) out.push_back(p);
    if (node.residual)
      for (Parameter* p : node.residual->parameters()) out.push_back(p);
  }
  for (Parameter* p : head_.bn.parameters()) out.push_back(p);
  for (Parameter* p : head_.conv.parameters()) out.push_back(p);
  return out;
}

std::vector<ops::BatchNormBuffers*> FixedNetwork::buffers() {
  std::vector<ops::BatchNormBuffers*> out;
  for (auto& node : nodes_) {
    for (auto* b : node.direct.buffers()) out.push_back(b);
    if (node.residual)
      for (auto* b : node.residual->buffers()) out.push_back(b);
  }
  out.push_back(&head_.bn.buffers);
  return out;
}

}  // namespace degas
