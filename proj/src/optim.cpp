#include "degas/optim.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "degas/error.hpp"

namespace degas {

namespace {

void check_lists(const char* op, std::span<Tensor* const> params, std::span<const Tensor* const> grads,
                 std::vector<Tensor>& buffer) {
  if (params.size() != grads.size()) {
    throw ShapeError(std::string(op) + ": " + std::to_string(params.size()) + " parameters but " +
                     std::to_string(grads.size()) + " gradients");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->same_shape(*grads[i])) {
      throw ShapeError(std::string(op) + ": parameter " + std::to_string(i) + " has shape " +
                       shape_to_string(params[i]->shape()) + ", gradient " + shape_to_string(grads[i]->shape()));
    }
  }
  if (buffer.empty()) {
    for (Tensor* p : params) buffer.push_back(Tensor::zeros(p->shape()));
    return;
  }
  if (buffer.size() != params.size()) throw ShapeError(std::string(op) + ": parameter list changed length");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!buffer[i].same_shape(*params[i])) {
      throw ShapeError(std::string(op) + ": state buffer " + std::to_string(i) + " has shape " +
                       shape_to_string(buffer[i].shape()) + ", parameter " + shape_to_string(params[i]->shape()));
    }
  }
}

}  // namespace

void sgd_step(SgdState& s, std::span<Tensor* const> params, std::span<const Tensor* const> grads) {
  check_lists("sgd_step", params, grads, s.velocity);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto theta = params[i]->data();
    auto g = grads[i]->data();
    auto v = s.velocity[i].data();
    for (std::size_t k = 0; k < theta.size(); ++k) {
      v[k] = s.momentum * v[k] + (g[k] + s.weight_decay * theta[k]);
      theta[k] -= s.lr * v[k];
    }
  }
  ++s.steps;
}

void adam_step(AdamState& s, std::span<Tensor* const> params, std::span<const Tensor* const> grads) {
  check_lists("adam_step", params, grads, s.m);
  check_lists("adam_step", params, grads, s.v);
  ++s.steps;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.steps));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.steps));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto theta = params[i]->data();
    auto g = grads[i]->data();
    auto m = s.m[i].data();
    auto v = s.v[i].data();
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const double gk = g[k] + s.weight_decay * theta[k];
      m[k] = s.beta1 * m[k] + (1.0 - s.beta1) * gk;
      v[k] = s.beta2 * v[k] + (1.0 - s.beta2) * gk * gk;
      theta[k] -= s.lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + s.eps);
    }
  }
}

double cosine_lr(double lr0, double epoch, double total) {
  if (total <= 0.0) return lr0;
  return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * epoch / total));
}

double clip_grad_norm(std::span<Tensor* const> grads, double max_norm) {
  double sq = 0.0;
  for (const Tensor* g : grads)
    for (double x : g->data()) sq += x * x;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double c = max_norm / (norm + 1e-6);
    for (Tensor* g : grads)
      for (double& x : g->data()) x *= c;
  }
  return norm;
}

}  // namespace degas
