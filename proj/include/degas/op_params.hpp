#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "degas/ops.hpp"
#include "degas/tape.hpp"

namespace degas {

enum class OpKind {
  conv2d,
  sep_conv2d,
  dil_conv2d,
  deconv2d,
  nn_upsample2d,
  max_pool2d,
  avg_pool2d,
  batch_norm2d,
  relu,
  tanh,
  linear,
  reshape,
  add,
  scale,
  softmax,
};

inline constexpr OpKind kAllOpKinds[] = {
    OpKind::conv2d,     OpKind::sep_conv2d, OpKind::dil_conv2d,   OpKind::deconv2d, OpKind::nn_upsample2d,
    OpKind::max_pool2d, OpKind::avg_pool2d, OpKind::batch_norm2d, OpKind::relu,     OpKind::tanh,
    OpKind::linear,     OpKind::reshape,    OpKind::add,          OpKind::scale,    OpKind::softmax,
};

std::string_view to_string(OpKind kind);

/// One primitive layer: its kind, geometry, and learnable state.
///
/// Weight layout by kind:
///   conv2d        [out, in, k, k], bias [out]
///   sep_conv2d    depthwise [in, 1, k, k], pointwise [out, in, 1, 1], bias [out]
///   dil_conv2d    same as sep_conv2d with the depthwise stage dilated
///   deconv2d      [in, out, k, k], bias [out]
///   batch_norm2d  gamma [C], beta [C]  (+ running mean/var buffers)
///   linear        [out, in], bias [out]
/// `reshape` keeps the batch axis and views the rest as `target_shape`.
/// `scale` multiplies its first input by a one-element second input.
struct OpParams {
  OpKind kind = OpKind::relu;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t dilation = 1;
  std::size_t scale_factor = 1;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  Shape target_shape;
  std::vector<Parameter> weights;
  ops::BatchNormBuffers buffers;
  bool training = true;

  static OpParams conv2d(std::size_t in, std::size_t out, std::size_t k, std::size_t stride, std::size_t pad,
                         std::mt19937_64& rng, std::size_t dilation = 1);
  static OpParams sep_conv2d(std::size_t in, std::size_t out, std::size_t k, std::size_t pad, std::mt19937_64& rng);
  static OpParams dil_conv2d(std::size_t in, std::size_t out, std::size_t k, std::size_t pad, std::size_t dilation,
                             std::mt19937_64& rng);
  static OpParams deconv2d(std::size_t in, std::size_t out, std::size_t k, std::size_t stride, std::size_t pad,
                           std::mt19937_64& rng);
  static OpParams nn_upsample2d(std::size_t factor);
  static OpParams max_pool2d(std::size_t k, std::size_t stride, std::size_t pad);
  static OpParams avg_pool2d(std::size_t k, std::size_t stride, std::size_t pad);
  static OpParams batch_norm2d(std::size_t channels);
  static OpParams relu();
  static OpParams tanh();
  static OpParams linear(std::size_t in, std::size_t out, std::mt19937_64& rng);
  static OpParams reshape(Shape per_sample);
  static OpParams add();
  static OpParams scale();
  static OpParams softmax();

  std::size_t input_count() const;
  /// Output shape for the given input shapes; throws ShapeError naming the
  /// kind and the offending dimension.
  Shape output_shape(std::span<const Shape> inputs) const;
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
};

/// Apply `op` to `inputs`, binding its weights as tape parameters.
Var forward(OpParams& op, std::span<const Var> inputs, Tape& tape);
/// Same, but with the weights supplied explicitly as tape values.
Var forward_with(OpParams& op, std::span<const Var> inputs, std::span<const Var> weights);

// ---------------------------------------------------------------------------
// Gradient checking against central differences.

struct GradCheckGroup {
  std::string name;
  double max_rel_error = 0.0;
  bool pass = true;
};

struct GradCheckReport {
  std::string name;
  double max_rel_error = 0.0;
  bool pass = true;
  std::vector<GradCheckGroup> groups;
};

/// |a − n| / max(|a|, |n|, 1e-8)
double relative_error(double analytic, double numeric);

/// A named tensor the checked function is differentiated with respect to.
struct CheckTarget {
  std::string name;
  Tensor value;
};

/// Builds the checked function's output from one Var per target.
using CheckedFunction = std::function<Var(Tape&, std::span<const Var>)>;

/// Compares reverse-mode gradients of L = Σ r ⊙ f(targets) (r a fixed random
/// projection drawn from `seed`) against central differences with step h.
GradCheckReport check_gradients(std::string name, std::vector<CheckTarget> targets, const CheckedFunction& f,
                                double tolerance, std::uint64_t seed, double h = 1e-5);

/// Gradient check of a single primitive. Inputs are drawn from `seed` away from
/// non-differentiable points (relu kinks, max-pool ties).
GradCheckReport grad_check(const OpParams& op, std::span<const Shape> input_shapes, double tolerance,
                           std::uint64_t seed, double h = 1e-5);

}  // namespace degas
