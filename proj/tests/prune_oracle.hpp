#pragma once

// Brute-force two-stage pruning used to check degas::prune. Every incoming
// (edge, candidate) pair of a node is listed, then sorted by (weight desc,
// candidate index asc, edge id asc); the head of the list is the stage-1 pick.

#include <algorithm>
#include <cmath>
#include <tuple>
#include <vector>

#include "degas/search_space.hpp"

namespace degas::oracle {

inline std::vector<double> softmax(const std::vector<double>& a) {
  double m = a[0];
  for (double v : a) m = v > m ? v : m;
  std::vector<double> e;
  double s = 0.0;
  for (double v : a) {
    e.push_back(std::exp(v - m));
    s += e.back();
  }
  for (double& v : e) v /= s;
  return e;
}

inline Genotype brute_force_prune(const std::vector<std::vector<double>>& alpha, const Topology& t) {
  Genotype g{t.stages, t.n, t.base, t.latent_dim, {}, {}};
  for (std::size_t node = 1; node < t.nodes.size(); ++node) {
    struct Pick {
      double w;
      std::size_t c, e;
    };
    std::vector<Pick> picks;
    std::size_t direct = t.edges.size();
    for (std::size_t e = 0; e < t.edges.size(); ++e) {
      if (t.edges[e].target != node) continue;
      if (t.edges[e].edge_class != EdgeClass::residual_upsample) direct = e;
      const auto w = softmax(alpha[e]);
      for (std::size_t c = 0; c < w.size(); ++c) picks.push_back({w[c], c, e});
    }
    std::sort(picks.begin(), picks.end(), [](const Pick& a, const Pick& b) {
      return std::make_tuple(-a.w, a.c, a.e) < std::make_tuple(-b.w, b.c, b.e);
    });
    const Pick& best = picks.front();
    const EdgeSpec& d = t.edges[direct];

    GenotypeNode out;
    out.id = t.nodes[node].id;
    out.source = t.nodes[d.source].id;
    out.op_class = d.edge_class == EdgeClass::direct_upsample ? OpClass::upsample : OpClass::normal;
    if (best.e == direct) {
      out.op = d.candidates[best.c].name;
    } else {
      // Stage 2: best candidate of the direct edge, first index on ties.
      const auto w = softmax(alpha[direct]);
      std::size_t c = 0;
      for (std::size_t k = 0; k < w.size(); ++k)
        if (w[k] > w[c]) c = k;
      out.op = d.candidates[c].name;
      const EdgeSpec& r = t.edges[best.e];
      if (r.candidates[best.c].op_class != OpClass::zero)
        out.residual = ResidualChoice{t.nodes[r.source].id, r.candidates[best.c].name};
    }
    g.nodes.push_back(out);
  }
  return g;
}

/// Four searched nodes (u1 n1 u2 n2); direct normal edges have 3 candidates,
/// direct up-sample edges 2, residual edges 3 (two ops plus zero).
inline RunConfig small_prune_config() {
  RunConfig c;
  c.stages = 2;
  c.n = 1;
  c.channels = 8;
  c.normal_ops = {"conv3x3", "skip", "max_pool3x3"};
  c.upsample_ops = {"deconv4", "nn_conv3"};
  return c;
}

}  // namespace degas::oracle
