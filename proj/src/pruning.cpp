#include "degas/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "degas/error.hpp"

namespace degas {

std::vector<double> softmax_weights(std::span<const double> alpha) {
  if (alpha.empty()) return {};
  const double m = *std::max_element(alpha.begin(), alpha.end());
  std::vector<double> w(alpha.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) sum += w[i] = std::exp(alpha[i] - m);
  for (double& x : w) x /= sum;
  return w;
}

namespace {

void check_alpha(const std::vector<std::vector<double>>& alpha, const Topology& t) {
  if (alpha.size() != t.edges.size()) {
    throw Error("prune: " + std::to_string(alpha.size()) + " α vectors for " + std::to_string(t.edges.size()) +
                " edges");
  }
  for (std::size_t e = 0; e < alpha.size(); ++e) {
    if (alpha[e].size() != t.edges[e].candidates.size()) {
      throw Error("prune: edge " + std::to_string(e) + " has " + std::to_string(alpha[e].size()) + " logits for " +
                  std::to_string(t.edges[e].candidates.size()) + " candidates");
    }
    for (double a : alpha[e])
      if (!std::isfinite(a)) throw NonFiniteError("prune: non-finite α on edge " + std::to_string(e));
  }
}

std::size_t argmax(const std::vector<double>& w) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < w.size(); ++i)
    if (w[i] > w[best]) best = i;
  return best;
}

}  // namespace

std::vector<EdgeScore> edge_scores(const std::vector<std::vector<double>>& alpha, const Topology& t) {
  check_alpha(alpha, t);
  std::vector<EdgeScore> out;
  for (std::size_t e = 0; e < t.edges.size(); ++e) {
    const auto w = softmax_weights(alpha[e]);
    for (std::size_t c = 0; c < w.size(); ++c) {
      out.push_back({e, c, t.edges[e].candidates[c].name, w[c], t.edges[e].edge_class});
    }
  }
  return out;
}

Genotype prune(const std::vector<std::vector<double>>& alpha, const Topology& t) {
  check_alpha(alpha, t);
  std::vector<std::vector<double>> weights;
  for (const auto& a : alpha) weights.push_back(softmax_weights(a));

  Genotype g{t.stages, t.n, t.base, t.latent_dim, {}, {}};
  for (std::size_t i = 1; i < t.nodes.size(); ++i) {
    const auto incoming = t.incoming(i);
    if (incoming.empty()) throw Error("prune: node " + t.nodes[i].id + " has no incoming edges");
    std::size_t best_e = incoming.front(), best_c = 0;
    for (std::size_t e : incoming)
      for (std::size_t c = 0; c < weights[e].size(); ++c) {
        const double w = weights[e][c], bw = weights[best_e][best_c];
        if (w > bw || (w == bw && (c < best_c || (c == best_c && e < best_e)))) {
          best_e = e;
          best_c = c;
        }
      }

    const std::size_t direct = t.direct_edge(i);
    const EdgeSpec& d = t.edges[direct];
    const std::size_t direct_c = best_e == direct ? best_c : argmax(weights[direct]);
    GenotypeNode node{t.nodes[i].id, t.nodes[d.source].id,
                      d.edge_class == EdgeClass::direct_upsample ? OpClass::upsample : OpClass::normal,
                      d.candidates[direct_c].name, std::nullopt};
    if (best_e != direct) {
      const EdgeSpec& r = t.edges[best_e];
      if (r.candidates[best_c].op_class != OpClass::zero) {
        node.residual = ResidualChoice{t.nodes[r.source].id, r.candidates[best_c].name};
      }
    }
    g.nodes.push_back(std::move(node));
  }
  return g;
}

std::vector<std::string> validate(const Genotype& g, const Topology& t) {
  std::vector<std::string> errors;
  if (g.stages != t.stages || g.n != t.n) {
    errors.push_back("genotype has stages " + std::to_string(g.stages) + " n " + std::to_string(g.n) +
                     ", topology has stages " + std::to_string(t.stages) + " n " + std::to_string(t.n));
  }
  for (std::size_t i = 1; i < t.nodes.size(); ++i) {
    const NodeSpec& spec = t.nodes[i];
    auto it = std::find_if(g.nodes.begin(), g.nodes.end(), [&](const GenotypeNode& n) { return n.id == spec.id; });
    if (it == g.nodes.end()) {
      errors.push_back("node " + spec.id + ": missing direct operation");
      continue;
    }
    if (static_cast<std::size_t>(it - g.nodes.begin()) != i - 1) {
      errors.push_back("node " + spec.id + ": out of chain order");
    }
    const EdgeSpec& d = t.edges[t.direct_edge(i)];
    if (it->source != t.nodes[d.source].id) {
      errors.push_back("node " + spec.id + ": direct source " + it->source + " breaks the chain (expected " +
                       t.nodes[d.source].id + ")");
    }
    const OpClass want = spec.kind == NodeKind::upsample ? OpClass::upsample : OpClass::normal;
    if (it->op_class != want) errors.push_back("node " + spec.id + ": wrong operation class");
    const bool in_catalog = std::any_of(d.candidates.begin(), d.candidates.end(),
                                        [&](const CandidateOp& c) { return c.name == it->op; });
    if (!in_catalog) errors.push_back("node " + spec.id + ": operation " + it->op + " not in the direct catalog");
    if (it->residual) {
      const auto src = t.find_node(it->residual->source);
      const EdgeSpec* edge = nullptr;
      for (std::size_t e : t.incoming(i))
        if (src && t.edges[e].source == *src && t.edges[e].edge_class == EdgeClass::residual_upsample)
          edge = &t.edges[e];
      if (!edge) {
        errors.push_back("node " + spec.id + ": illegal residual edge from " + it->residual->source);
      } else if (it->residual->op == "zero" ||
                 std::none_of(edge->candidates.begin(), edge->candidates.end(),
                              [&](const CandidateOp& c) { return c.name == it->residual->op; })) {
        errors.push_back("node " + spec.id + ": residual operation " + it->residual->op + " not in the catalog");
      }
    }
  }
  for (const auto& n : g.nodes) {
    if (!t.find_node(n.id) || n.id == "stem") errors.push_back("unknown node " + n.id);
  }
  return errors;
}

BigInt count_architectures(std::span<const std::uint64_t> factors) {
  BigInt product = 1;
  for (auto f : factors) {
    if (f == 0) throw Error("count_architectures: factors must be positive");
    product *= f;
  }
  return product;
}

Genotype random_genotype(const Topology& t, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> alpha;
  for (const auto& e : t.edges) {
    std::vector<double> a(e.candidates.size());
    for (double& x : a) x = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    alpha.push_back(std::move(a));
  }
  return prune(alpha, t);
}

}  // namespace degas
