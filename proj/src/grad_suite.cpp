#include "degas/grad_suite.hpp"

#include <algorithm>
#include <memory>
#include <random>

#include "degas/losses.hpp"
#include "degas/search_space.hpp"

namespace degas {

namespace {

struct PrimitiveCase {
  OpParams op;
  std::vector<Shape> inputs;
};

std::vector<PrimitiveCase> primitive_cases(std::mt19937_64& rng) {
  std::vector<PrimitiveCase> cases;
  cases.push_back({OpParams::conv2d(2, 3, 3, 1, 1, rng), {{1, 2, 5, 5}}});
  cases.push_back({OpParams::sep_conv2d(3, 4, 3, 1, rng), {{2, 3, 5, 5}}});
  cases.push_back({OpParams::dil_conv2d(3, 4, 3, 2, 2, rng), {{2, 3, 6, 6}}});
  cases.push_back({OpParams::deconv2d(3, 2, 4, 2, 1, rng), {{2, 3, 3, 3}}});
  cases.push_back({OpParams::nn_upsample2d(2), {{2, 3, 3, 3}}});
  cases.push_back({OpParams::max_pool2d(3, 1, 1), {{2, 2, 4, 4}}});
  cases.push_back({OpParams::avg_pool2d(3, 1, 1), {{2, 2, 4, 4}}});
  cases.push_back({OpParams::batch_norm2d(3), {{4, 3, 3, 3}}});
  cases.push_back({OpParams::relu(), {{2, 3, 4, 4}}});
  cases.push_back({OpParams::tanh(), {{2, 3, 4, 4}}});
  cases.push_back({OpParams::linear(6, 4, rng), {{3, 6}}});
  cases.push_back({OpParams::reshape({12}), {{2, 3, 4}}});
  cases.push_back({OpParams::add(), {{2, 3, 4, 4}, {2, 3, 4, 4}}});
  cases.push_back({OpParams::scale(), {{2, 3, 4}, {1}}});
  cases.push_back({OpParams::softmax(), {{3, 8}}});
  return cases;
}

// A residual-style edge (×2 up-sample candidates plus zero) and a normal edge.
MixedEdge make_edge(bool upsample, std::mt19937_64& rng) {
  MixedEdge edge;
  if (upsample) {
    edge.spec.candidates = upsample_catalog(2);
    edge.spec.candidates.push_back(zero_candidate(2));
    edge.spec.edge_class = EdgeClass::residual_upsample;
    edge.spec.factor = 2;
  } else {
    edge.spec.candidates = normal_catalog();
  }
  const std::size_t out = upsample ? 2 : 4;
  for (const auto& c : edge.spec.candidates) edge.ops.push_back(CandidateModule::build(c, 4, out, rng));
  edge.alpha = Parameter{Tensor::zeros({edge.spec.candidates.size()}), ParamGroup::architecture};
  return edge;
}

GradCheckReport check_mixed(bool upsample, double tolerance, std::uint64_t seed, double h) {
  std::mt19937_64 rng(seed);
  auto edge = std::make_shared<MixedEdge>(make_edge(upsample, rng));
  const Shape x_shape = upsample ? Shape{2, 4, 2, 2} : Shape{2, 4, 4, 4};
  std::vector<CheckTarget> targets{{"alpha", Tensor::randn({edge->ops.size()}, rng)},
                                   {"input", Tensor::randn(x_shape, rng)}};
  CheckedFunction f = [edge](Tape& tape, std::span<const Var> v) {
    return mixed_forward(*edge, v[1], v[0], Mode::train, tape);
  };
  return check_gradients(upsample ? "mixed_edge_upsample" : "mixed_edge_normal", std::move(targets), f, tolerance,
                         seed, h);
}

GradCheckReport check_recon(double tolerance, std::uint64_t seed, double h) {
  std::mt19937_64 rng(seed);
  std::vector<CheckTarget> targets{{"x", Tensor::randn({2, 3, 8, 8}, rng)}, {"y", Tensor::randn({2, 3, 8, 8}, rng)}};
  CheckedFunction f = [](Tape&, std::span<const Var> v) { return recon_loss(v[0], v[1], 1.0, 2); };
  return check_gradients("recon_loss", std::move(targets), f, tolerance, seed, h);
}

void add_run(SuiteResult& r, GradCheckReport run) {
  r.max_rel_error = std::max(r.max_rel_error, run.max_rel_error);
  r.pass = r.pass && run.pass;
  r.runs.push_back(std::move(run));
}

}  // namespace

std::vector<SuiteResult> gradient_suite(std::size_t seeds, double tolerance, std::uint64_t first_seed, double h) {
  std::vector<SuiteResult> out;
  for (std::size_t k = 0; k < seeds; ++k) {
    const std::uint64_t seed = first_seed + k;
    std::mt19937_64 rng(seed);
    const auto cases = primitive_cases(rng);
    if (out.empty()) {
      for (const auto& c : cases) out.push_back({std::string(to_string(c.op.kind)), {}, 0.0, true});
      for (const char* name : {"mixed_edge_normal", "mixed_edge_upsample", "recon_loss"})
        out.push_back({name, {}, 0.0, true});
    }
    for (std::size_t i = 0; i < cases.size(); ++i) {
      add_run(out[i], grad_check(cases[i].op, cases[i].inputs, tolerance, seed, h));
    }
    add_run(out[cases.size()], check_mixed(false, tolerance, seed, h));
    add_run(out[cases.size() + 1], check_mixed(true, tolerance, seed, h));
    add_run(out[cases.size() + 2], check_recon(tolerance, seed, h));
  }
  return out;
}

}  // namespace degas
