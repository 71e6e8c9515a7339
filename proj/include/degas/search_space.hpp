#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "degas/config.hpp"
#include "degas/op_params.hpp"

namespace degas {

enum class OpClass { normal, upsample, zero };
enum class Mode { train, eval };

/// A named entry of an operation catalog.
struct CandidateOp {
  std::string name;
  OpClass op_class = OpClass::normal;
  std::size_t factor = 1;  // spatial scale factor (1 for normal ops)

  friend bool operator==(const CandidateOp&, const CandidateOp&) = default;
};

/// conv1x1, conv3x3, max_pool3x3, avg_pool3x3, skip, sep_conv3x3, sep_conv5x5,
/// dil_conv3x3, dil_conv5x5. All preserve spatial size and channel count.
std::vector<CandidateOp> normal_catalog();
/// deconv4, deconv6, nn_conv1, nn_conv3 scaled for factor ∈ {2, 4, 8}.
std::vector<CandidateOp> upsample_catalog(std::size_t factor);
CandidateOp zero_candidate(std::size_t factor);

bool is_normal_op(std::string_view name);
bool is_upsample_op(std::string_view name);

/// A candidate expanded into its primitive pipeline with fresh weights.
class CandidateModule {
 public:
  static CandidateModule build(const CandidateOp& op, std::size_t in_channels, std::size_t out_channels,
                               std::mt19937_64& rng);

  Var apply(Var x, Mode mode, Tape& tape);
  const CandidateOp& spec() const { return spec_; }
  std::vector<Parameter*> parameters();
  std::vector<ops::BatchNormBuffers*> buffers();
  /// The primitive pipeline (empty for skip and zero).
  const std::vector<OpParams>& pipeline() const { return pipeline_; }

 private:
  CandidateOp spec_;
  std::size_t out_channels_ = 0;
  std::vector<OpParams> pipeline_;
};

// ---------------------------------------------------------------------------
// Topology

enum class NodeKind { stem, upsample, normal };
enum class EdgeClass { direct_normal, direct_upsample, residual_upsample };

std::string_view to_string(EdgeClass cls);

struct NodeSpec {
  std::string id;  // "stem", "u1".., "n1"..
  NodeKind kind = NodeKind::stem;
  std::size_t stage = 0;  // up-sample stages completed at this node
  std::size_t channels = 0;
  std::size_t size = 0;  // spatial extent (square)
};

struct EdgeSpec {
  std::size_t source = 0;
  std::size_t target = 0;
  EdgeClass edge_class = EdgeClass::direct_normal;
  std::size_t factor = 1;
  std::vector<CandidateOp> candidates;
};

/// Nodes in chain order (index 0 is the stem) and the edges between them.
/// Edges are ordered by target node, direct edge first, then residual edges by
/// ascending source.
struct Topology {
  std::size_t stages = 0;
  std::size_t n = 0;
  std::size_t base = 0;
  std::size_t latent_dim = 0;
  std::vector<NodeSpec> nodes;
  std::vector<EdgeSpec> edges;

  std::size_t output_size() const { return base << stages; }
  std::size_t output_channels() const { return nodes.back().channels; }
  std::optional<std::size_t> find_node(std::string_view id) const;
  std::vector<std::size_t> incoming(std::size_t node) const;
  std::size_t direct_edge(std::size_t node) const;
  std::size_t count(EdgeClass cls) const;
};

/// Build the supergraph topology described by the config. Throws FormatError
/// for an inconsistent channel plan, unknown catalog names or unsupported
/// residual factors.
Topology build_topology(const RunConfig& config);

// ---------------------------------------------------------------------------
// Networks

/// Common interface of the relaxed supergraph and a fixed genotype network.
class Generator {
 public:
  virtual ~Generator() = default;
  /// z [B, latent] → images [B, 3, size, size] in (−1, 1).
  virtual Var forward(Var z, Mode mode, Tape& tape) = 0;
  virtual const Topology& topology() const = 0;
  /// Generator weights (excluding architecture parameters) in a fixed order.
  virtual std::vector<Parameter*> weights() = 0;
  virtual std::vector<ops::BatchNormBuffers*> buffers() = 0;

  std::size_t latent_dim() const { return topology().latent_dim; }
  /// Convenience: forward without keeping the tape.
  Tensor generate(const Tensor& z, Mode mode);
};

/// Linear map to C·b·b followed by a reshape to [C, b, b].
struct Stem {
  OpParams linear;
  std::size_t channels = 0, base = 0;
  Var forward(Var z, Tape& tape);
};

/// bn → relu → conv3x3 to 3 channels → tanh.
struct Head {
  OpParams bn;
  OpParams conv;
  Var forward(Var x, Mode mode, Tape& tape);
};

struct MixedEdge {
  EdgeSpec spec;
  std::vector<CandidateModule> ops;
  Parameter alpha;  // one logit per candidate
};

/// Σ_o softmax(α)_o · o(x).
Var mixed_forward(MixedEdge& edge, Var x, Mode mode, Tape& tape);
/// Same with the logits supplied as a tape value instead of edge.alpha.
Var mixed_forward(MixedEdge& edge, Var x, Var alpha, Mode mode, Tape& tape);

class SuperGraph final : public Generator {
 public:
  /// Throws FormatError if image_size is given and differs from b · 2^S.
  static SuperGraph build(const RunConfig& config, std::optional<std::size_t> image_size = std::nullopt);

  Var forward(Var z, Mode mode, Tape& tape) override;
  const Topology& topology() const override { return topo_; }
  std::vector<Parameter*> weights() override;
  std::vector<ops::BatchNormBuffers*> buffers() override;

  std::vector<MixedEdge>& edges() { return edges_; }
  const std::vector<MixedEdge>& edges() const { return edges_; }
  std::vector<Parameter*> alphas();
  /// Current α values, one vector per edge.
  std::vector<std::vector<double>> alpha_values() const;

 private:
  Topology topo_;
  Stem stem_;
  std::vector<MixedEdge> edges_;
  Head head_;
};

SuperGraph build_supergraph(const RunConfig& config, std::optional<std::size_t> image_size = std::nullopt);

// ---------------------------------------------------------------------------
// Genotype

struct ResidualChoice {
  std::string source;
  std::string op;
  friend bool operator==(const ResidualChoice&, const ResidualChoice&) = default;
};

struct GenotypeNode {
  std::string id;
  std::string source;
  OpClass op_class = OpClass::normal;
  std::string op;
  std::optional<ResidualChoice> residual;
  friend bool operator==(const GenotypeNode&, const GenotypeNode&) = default;
};

/// Discrete architecture: one direct op per node (chain order, stem excluded)
/// plus optional residual ops. `provenance` is free text carried through the
/// text format as a trailing comment.
struct Genotype {
  std::size_t stages = 0;
  std::size_t n = 0;
  std::size_t base = 0;
  std::size_t latent_dim = 0;
  std::vector<GenotypeNode> nodes;
  std::string provenance;
  friend bool operator==(const Genotype&, const Genotype&) = default;
};

/// Network with exactly the genotype's operations.
class FixedNetwork final : public Generator {
 public:
  Var forward(Var z, Mode mode, Tape& tape) override;
  const Topology& topology() const override { return topo_; }
  std::vector<Parameter*> weights() override;
  std::vector<ops::BatchNormBuffers*> buffers() override;
  const Genotype& genotype() const { return genotype_; }

 private:
  friend FixedNetwork instantiate_genotype(const Genotype&, const RunConfig&);
  struct Node {
    std::size_t direct_source = 0;
    CandidateModule direct;
    std::optional<std::size_t> residual_source;
    std::optional<CandidateModule> residual;
  };

  Genotype genotype_;
  Topology topo_;
  Stem stem_;
  std::vector<Node> nodes_;  // aligned with topo_.nodes[1..]
  Head head_;
};

/// Build the fixed network. Stages and n come from the genotype; base size,
/// latent size, channels and seed come from `config`, so a genotype searched at
/// one resolution can be instantiated at another.
FixedNetwork instantiate_genotype(const Genotype& genotype, const RunConfig& config);

}  // namespace degas
