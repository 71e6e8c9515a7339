#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "degas/tensor.hpp"

namespace degas {

/// SGD with momentum and coupled weight decay:
///   v ← μ·v + (g + wd·θ);  θ ← θ − lr·v
struct SgdState {
  double lr = 0.0;
  double momentum = 0.9;
  double weight_decay = 0.0;
  std::vector<Tensor> velocity;  // created on the first step
  std::uint64_t steps = 0;
};

/// Bias-corrected Adam; weight decay is added to the gradient.
struct AdamState {
  double lr = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  std::vector<Tensor> m, v;
  std::uint64_t steps = 0;
};

/// params[i] and grads[i] must have equal shapes, and the list must keep the
/// same length and shapes from step to step (ShapeError otherwise).
void sgd_step(SgdState& state, std::span<Tensor* const> params, std::span<const Tensor* const> grads);
void adam_step(AdamState& state, std::span<Tensor* const> params, std::span<const Tensor* const> grads);

/// lr₀ · ½ (1 + cos(π · epoch / total)).
double cosine_lr(double lr0, double epoch, double total);

/// Scales grads in place so their joint L2 norm is at most max_norm
/// (no-op when max_norm ≤ 0). Returns the norm before clipping.
double clip_grad_norm(std::span<Tensor* const> grads, double max_norm);

}  // namespace degas
