#pragma once

// Laplacian pyramid and the GLO reconstruction objective.
//
// The pyramid uses the separable 5-tap binomial kernel [1, 4, 6, 4, 1] / 16
// with reflect borders. reduce = blur then keep even rows/cols; expand =
// zero-insert then 4 × blur. Band j < J is G_j − expand(G_{j+1}); band J is
// the low-pass residual G_J, so reconstruction is exact by construction.
// Tensors of any rank ≥ 2 are treated as stacks of planes over the last two
// axes.

#include <cstddef>
#include <vector>

#include "degas/tape.hpp"

namespace degas {

Tensor pyramid_reduce(const Tensor& x);
Tensor pyramid_expand(const Tensor& x);

/// J + 1 bands; throws ShapeError unless both spatial dims divide by 2^J.
std::vector<Tensor> lap_pyramid(const Tensor& x, std::size_t levels);
Tensor lap_reconstruct(const std::vector<Tensor>& bands);

namespace ops {
Var pyramid_reduce(Var x);
Var pyramid_expand(Var x);
}  // namespace ops

/// Σ_{j=0..J} 4^j · mean |L^j(x) − L^j(y)|.
Var lap1_loss(Var x, Var y, std::size_t levels);
double lap1_loss(const Tensor& x, const Tensor& y, std::size_t levels);

/// lap1_loss + λ · mean (x − y)².
Var recon_loss(Var x, Var y, double lambda, std::size_t levels);
double recon_loss(const Tensor& x, const Tensor& y, double lambda, std::size_t levels);

}  // namespace degas
