#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "degas/search_space.hpp"

namespace degas {

using BigInt = boost::multiprecision::cpp_int;

struct EdgeScore {
  std::size_t edge = 0;
  std::size_t candidate = 0;
  std::string name;
  double weight = 0.0;  // softmax weight within the edge
  EdgeClass edge_class = EdgeClass::direct_normal;
};

std::vector<double> softmax_weights(std::span<const double> alpha);

/// Scores of every candidate on every edge, in edge then candidate order.
std::vector<EdgeScore> edge_scores(const std::vector<std::vector<double>>& alpha, const Topology& topology);

/// Two-stage rule. Stage 1 picks, per node, the (edge, candidate) pair with the
/// largest softmax weight over all incoming edges (ties: lower candidate
/// index, then lower edge id). If that pair is on a residual edge, it becomes
/// the residual op unless it is `zero`, and stage 2 adds the best candidate of
/// the direct edge. Throws Error for a node without incoming edges or for
/// α lengths that do not match the topology.
Genotype prune(const std::vector<std::vector<double>>& alpha, const Topology& topology);

/// Empty when valid; otherwise one message per problem. Never throws.
std::vector<std::string> validate(const Genotype& genotype, const Topology& topology);

/// Exact product of per-edge choice counts (1 for an empty list).
BigInt count_architectures(std::span<const std::uint64_t> factors);

/// i.i.d. U(0, 1) logits on every edge, then prune.
Genotype random_genotype(const Topology& topology, std::uint64_t seed);

}  // namespace degas
