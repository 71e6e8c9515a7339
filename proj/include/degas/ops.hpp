#pragma once

// Differentiable primitives recorded on a Tape. All image tensors are NCHW.

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>

#include "degas/tape.hpp"

namespace degas::ops {

struct ConvOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t dilation = 1;
  std::size_t groups = 1;
};

/// Running statistics of a batch-norm layer; updated only in training mode.
struct BatchNormBuffers {
  Tensor running_mean;
  Tensor running_var;
};

struct BatchNormOptions {
  bool training = true;
  double eps = 1e-5;
  double momentum = 0.1;
};

/// Throws NonFiniteError naming `op` if t holds NaN or Inf.
void require_finite(std::string_view op, const Tensor& t);

/// x [N, C, H, W], w [O, C / groups, k, k], b [O].
Var conv2d(Var x, Var w, std::optional<Var> b, ConvOptions opt);
/// x [N, C, H, W], w [C, O, k, k], b [O].
Var deconv2d(Var x, Var w, std::optional<Var> b, std::size_t stride, std::size_t padding);
Var upsample_nearest(Var x, std::size_t factor);
Var max_pool2d(Var x, std::size_t kernel, std::size_t stride, std::size_t padding);
Var avg_pool2d(Var x, std::size_t kernel, std::size_t stride, std::size_t padding);
Var batch_norm2d(Var x, Var gamma, Var beta, BatchNormBuffers& buffers, BatchNormOptions opt);
Var relu(Var x);
Var tanh(Var x);
/// x [N, in], w [out, in], b [out].
Var linear(Var x, Var w, std::optional<Var> b);
Var reshape(Var x, Shape shape);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var x, double c);
/// s must hold exactly one element.
Var scale(Var x, Var s);
/// Softmax along the last axis.
Var softmax(Var logits);
/// Σ_k weights[k] · terms[k]; weights is 1-D of length terms.size().
Var weighted_sum(Var weights, std::span<const Var> terms);
Var sum(Var x);
/// Mean over all elements of |a − b| (subgradient 0 at equality).
Var mean_abs_error(Var a, Var b);
Var mean_squared_error(Var a, Var b);

}  // namespace degas::ops
