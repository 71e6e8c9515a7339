#include "degas/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "degas/error.hpp"
#include "degas/kernels.hpp"

namespace degas::ops {

namespace {

[[noreturn]] void shape_fail(std::string_view op, const std::string& what) {
  throw ShapeError(std::string(op) + ": " + what);
}

void require_rank(std::string_view op, const Tensor& t, std::size_t rank, std::string_view name) {
  if (t.rank() != rank) {
    shape_fail(op, std::string(name) + " must have rank " + std::to_string(rank) + ", got " +
                       shape_to_string(t.shape()));
  }
}

void require_dim(std::string_view op, std::string_view what, std::size_t got, std::size_t want) {
  if (got != want) {
    shape_fail(op, std::string(what) + " is " + std::to_string(got) + ", expected " + std::to_string(want));
  }
}

void require_same(std::string_view op, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    shape_fail(op, "operand shapes differ: " + shape_to_string(a.shape()) + " vs " + shape_to_string(b.shape()));
  }
}

}  // namespace

void require_finite(std::string_view op, const Tensor& t) {
  if (!t.all_finite()) throw NonFiniteError(std::string(op) + ": non-finite input");
}

Var conv2d(Var x, Var w, std::optional<Var> b, ConvOptions opt) {
  constexpr std::string_view op = "conv2d";
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  require_rank(op, xv, 4, "input");
  require_rank(op, wv, 4, "weight");
  require_finite(op, xv);
  if (opt.groups == 0 || xv.dim(1) % opt.groups != 0 || wv.dim(0) % opt.groups != 0) {
    shape_fail(op, "channels not divisible by groups " + std::to_string(opt.groups));
  }
  require_dim(op, "weight dim 1 (in-channels per group)", wv.dim(1), xv.dim(1) / opt.groups);
  require_dim(op, "weight dim 3 (kernel width)", wv.dim(3), wv.dim(2));
  kernels::ConvGeometry g{xv.dim(0), xv.dim(1), xv.dim(2), xv.dim(3), wv.dim(0),
                          wv.dim(2),  opt.stride, opt.padding, opt.dilation, opt.groups};
  const long eff = static_cast<long>(opt.dilation * (wv.dim(2) - 1) + 1);
  if (static_cast<long>(xv.dim(2) + 2 * opt.padding) < eff || static_cast<long>(xv.dim(3) + 2 * opt.padding) < eff) {
    shape_fail(op, "input spatial dim 2/3 " + shape_to_string(xv.shape()) + " smaller than kernel extent");
  }
  if (b) require_dim(op, "bias length", b->value().size(), wv.dim(0));

  Tensor y({g.batch, g.out_ch, g.out_h(), g.out_w()});
  kernels::conv2d_forward(g, xv.data(), wv.data(), b ? b->value().data() : std::span<const double>{}, y.data());

  std::vector<Var> inputs{x, w};
  if (b) inputs.push_back(*b);
  return x.tape().record(std::move(y), inputs, [g](BackwardContext& ctx) {
    const Tensor& gy = ctx.grad;
    if (Tensor* gx = ctx.input_grads[0]) {
      Tensor tmp(gx->shape());
      kernels::conv2d_backward_input(g, gy.data(), ctx.inputs[1]->data(), tmp.data());
      *gx += tmp;
    }
    if (Tensor* gw = ctx.input_grads[1]) {
      Tensor tmp(gw->shape());
      kernels::conv2d_backward_weight(g, gy.data(), ctx.inputs[0]->data(), tmp.data());
      *gw += tmp;
    }
    if (ctx.input_grads.size() > 2 && ctx.input_grads[2]) {
      Tensor& gb = *ctx.input_grads[2];
      const std::size_t plane = g.out_h() * g.out_w();
      for (std::size_t n = 0; n < g.batch; ++n)
        for (std::size_t c = 0; c < g.out_ch; ++c) {
          const double* p = gy.ptr() + (n * g.out_ch + c) * plane;
          double acc = 0.0;
          for (std::size_t i = 0; i < plane; ++i) acc += p[i];
          gb[c] += acc;
        }
    }
  });
}

Var deconv2d(Var x, Var w, std::optional<Var> b, std::size_t stride, std::size_t padding) {
  constexpr std::string_view op = "deconv2d";
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  require_rank(op, xv, 4, "input");
  require_rank(op, wv, 4, "weight");
  require_finite(op, xv);
  require_dim(op, "weight dim 0 (in-channels)", wv.dim(0), xv.dim(1));
  require_dim(op, "weight dim 3 (kernel width)", wv.dim(3), wv.dim(2));
  if ((xv.dim(2) - 1) * stride + wv.dim(2) <= 2 * padding) shape_fail(op, "padding leaves empty output");
  if (b) require_dim(op, "bias length", b->value().size(), wv.dim(1));
  kernels::DeconvGeometry g{xv.dim(0), xv.dim(1), xv.dim(2), xv.dim(3), wv.dim(1), wv.dim(2), stride, padding};

  Tensor y({g.batch, g.out_ch, g.out_h(), g.out_w()});
  kernels::deconv2d_forward(g, xv.data(), wv.data(), b ? b->value().data() : std::span<const double>{}, y.data());

  std::vector<Var> inputs{x, w};
  if (b) inputs.push_back(*b);
  return x.tape().record(std::move(y), inputs, [g](BackwardContext& ctx) {
    const Tensor& gy = ctx.grad;
    if (Tensor* gx = ctx.input_grads[0]) {
      Tensor tmp(gx->shape());
      kernels::deconv2d_backward_input(g, gy.data(), ctx.inputs[1]->data(), tmp.data());
      *gx += tmp;
    }
    if (Tensor* gw = ctx.input_grads[1]) {
      Tensor tmp(gw->shape());
      kernels::deconv2d_backward_weight(g, gy.data(), ctx.inputs[0]->data(), tmp.data());
      *gw += tmp;
    }
    if (ctx.input_grads.size() > 2 && ctx.input_grads[2]) {
      Tensor& gb = *ctx.input_grads[2];
      const std::size_t plane = g.out_h() * g.out_w();
      for (std::size_t n = 0; n < g.batch; ++n)
        for (std::size_t c = 0; c < g.out_ch; ++c) {
          const double* p = gy.ptr() + (n * g.out_ch + c) * plane;
          double acc = 0.0;
          for (std::size_t i = 0; i < plane; ++i) acc += p[i];
          gb[c] += acc;
        }
    }
  });
}

Var upsample_nearest(Var x, std::size_t factor) {
  constexpr std::string_view op = "nn_upsample2d";
  const Tensor& xv = x.value();
  require_rank(op, xv, 4, "input");
  require_finite(op, xv);
  if (factor == 0) shape_fail(op, "scale factor must be positive");
  const std::size_t planes = xv.dim(0) * xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  const std::size_t OH = H * factor, OW = W * factor;
  Tensor y({xv.dim(0), xv.dim(1), OH, OW});
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t oy = 0; oy < OH; ++oy)
      for (std::size_t ox = 0; ox < OW; ++ox)
        y[(p * OH + oy) * OW + ox] = xv[(p * H + oy / factor) * W + ox / factor];
  return x.tape().record(std::move(y), {x}, [=](BackwardContext& ctx) {
    Tensor& gx = *ctx.input_grads[0];
    for (std::size_t p = 0; p < planes; ++p)
      for (std::size_t oy = 0; oy < OH; ++oy)
        for (std::size_t ox = 0; ox < OW; ++ox)
          gx[(p * H + oy / factor) * W + ox / factor] += ctx.grad[(p * OH + oy) * OW + ox];
  });
}

Var max_pool2d(Var x, std::size_t kernel, std::size_t stride, std::size_t padding) {
  constexpr std::string_view op = "max_pool2d";
  const Tensor& xv = x.value();
  require_rank(op, xv, 4, "input");
  require_finite(op, xv);
  if (xv.dim(2) + 2 * padding < kernel || xv.dim(3) + 2 * padding < kernel || padding >= kernel) {
    shape_fail(op, "window does not fit input " + shape_to_string(xv.shape()));
  }
  kernels::PoolGeometry g{xv.dim(0), xv.dim(1), xv.dim(2), xv.dim(3), kernel, stride, padding};
  Tensor y({g.batch, g.channels, g.out_h(), g.out_w()});
  auto argmax = std::make_shared<std::vector<std::size_t>>(y.size());
  kernels::max_pool2d_forward(g, xv.data(), y.data(), *argmax);
  return x.tape().record(std::move(y), {x}, [g, argmax](BackwardContext& ctx) {
    Tensor tmp(ctx.input_grads[0]->shape());
    kernels::max_pool2d_backward(g, ctx.grad.data(), *argmax, tmp.data());
    *ctx.input_grads[0] += tmp;
  });
}

Var avg_pool2d(Var x, std::size_t kernel, std::size_t stride, std::size_t padding) {
  constexpr std::string_view op = "avg_pool2d";
  const Tensor& xv = x.value();
  require_rank(op, xv, 4, "input");
  require_finite(op, xv);
  if (xv.dim(2) + 2 * padding < kernel || xv.dim(3) + 2 * padding < kernel || padding >= kernel) {
    shape_fail(op, "window does not fit input " + shape_to_string(xv.shape()));
  }
  kernels::PoolGeometry g{xv.dim(0), xv.dim(1), xv.dim(2), xv.dim(3), kernel, stride, padding};
  Tensor y({g.batch, g.channels, g.out_h(), g.out_w()});
  kernels::avg_pool2d_forward(g, xv.data(), y.data());
  return x.tape().record(std::move(y), {x}, [g](BackwardContext& ctx) {
    Tensor tmp(ctx.input_grads[0]->shape());
    kernels::avg_pool2d_backward(g, ctx.grad.data(), tmp.data());
    *ctx.input_grads[0] += tmp;
  });
}

Var batch_norm2d(Var x, Var gamma, Var beta, BatchNormBuffers& buffers, BatchNormOptions opt) {
  constexpr std::string_view op = "batch_norm2d";
  const Tensor& xv = x.value();
  require_rank(op, xv, 4, "input");
  require_finite(op, xv);
  const std::size_t N = xv.dim(0), C = xv.dim(1), HW = xv.dim(2) * xv.dim(3);
  require_dim(op, "gamma length", gamma.value().size(), C);
  require_dim(op, "beta length", beta.value().size(), C);
  require_dim(op, "running mean length", buffers.running_mean.size(), C);
  require_dim(op, "running var length", buffers.running_var.size(), C);
  const std::size_t m = N * HW;
  if (opt.training && m < 2) shape_fail(op, "training mode needs more than one value per channel");

  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();
  auto xhat = std::make_shared<Tensor>(xv.shape());
  auto inv_std = std::make_shared<std::vector<double>>(C);
  Tensor y(xv.shape());

  const long channels = static_cast<long>(C);
#pragma omp parallel for schedule(static)
  for (long cl = 0; cl < channels; ++cl) {
    const std::size_t c = static_cast<std::size_t>(cl);
    double mean, var;
    if (opt.training) {
      double s = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        const double* p = xv.ptr() + (n * C + c) * HW;
        for (std::size_t i = 0; i < HW; ++i) s += p[i];
      }
      mean = s / static_cast<double>(m);
      double ss = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        const double* p = xv.ptr() + (n * C + c) * HW;
        for (std::size_t i = 0; i < HW; ++i) ss += (p[i] - mean) * (p[i] - mean);
      }
      var = ss / static_cast<double>(m);
      buffers.running_mean[c] = (1.0 - opt.momentum) * buffers.running_mean[c] + opt.momentum * mean;
      buffers.running_var[c] =
          (1.0 - opt.momentum) * buffers.running_var[c] + opt.momentum * ss / static_cast<double>(m - 1);
    } else {
      mean = buffers.running_mean[c];
      var = buffers.running_var[c];
    }
    const double is = 1.0 / std::sqrt(var + opt.eps);
    (*inv_std)[c] = is;
    for (std::size_t n = 0; n < N; ++n) {
      const std::size_t off = (n * C + c) * HW;
      for (std::size_t i = 0; i < HW; ++i) {
        const double h = (xv[off + i] - mean) * is;
        (*xhat)[off + i] = h;
        y[off + i] = gv[c] * h + bv[c];
      }
    }
  }

  const bool training = opt.training;
  return x.tape().record(std::move(y), {x, gamma, beta}, [=](BackwardContext& ctx) {
    const Tensor& gy = ctx.grad;
    const Tensor& gam = *ctx.inputs[1];
    Tensor* gx = ctx.input_grads[0];
    Tensor* gg = ctx.input_grads[1];
    Tensor* gb = ctx.input_grads[2];
#pragma omp parallel for schedule(static)
    for (long cl = 0; cl < channels; ++cl) {
      const std::size_t c = static_cast<std::size_t>(cl);
      double sum_g = 0.0, sum_gh = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        const std::size_t off = (n * C + c) * HW;
        for (std::size_t i = 0; i < HW; ++i) {
          sum_g += gy[off + i];
          sum_gh += gy[off + i] * (*xhat)[off + i];
        }
      }
      if (gg) (*gg)[c] += sum_gh;
      if (gb) (*gb)[c] += sum_g;
      if (!gx) continue;
      const double k = gam[c] * (*inv_std)[c];
      const double md = static_cast<double>(m);
      for (std::size_t n = 0; n < N; ++n) {
        const std::size_t off = (n * C + c) * HW;
        for (std::size_t i = 0; i < HW; ++i) {
          if (training) {
            (*gx)[off + i] += k * (gy[off + i] - sum_g / md - (*xhat)[off + i] * sum_gh / md);
          } else {
            (*gx)[off + i] += k * gy[off + i];
          }
        }
      }
    }
  });
}

Var relu(Var x) {
  const Tensor& xv = x.value();
  require_finite("relu", xv);
  Tensor y(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) y[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  return x.tape().record(std::move(y), {x}, [](BackwardContext& ctx) {
    const Tensor& xv = *ctx.inputs[0];
    Tensor& gx = *ctx.input_grads[0];
    for (std::size_t i = 0; i < xv.size(); ++i)
      if (xv[i] > 0.0) gx[i] += ctx.grad[i];
  });
}

Var tanh(Var x) {
  const Tensor& xv = x.value();
  require_finite("tanh", xv);
  // std::tanh rounds to ±1 beyond |x| ≈ 19; keep the open interval.
  const double bound = std::nextafter(1.0, 0.0);
  Tensor y(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) y[i] = std::clamp(std::tanh(xv[i]), -bound, bound);
  return x.tape().record(std::move(y), {x}, [](BackwardContext& ctx) {
    Tensor& gx = *ctx.input_grads[0];
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += ctx.grad[i] * (1.0 - ctx.output[i] * ctx.output[i]);
  });
}

Var linear(Var x, Var w, std::optional<Var> b) {
  constexpr std::string_view op = "linear";
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  require_rank(op, xv, 2, "input");
  require_rank(op, wv, 2, "weight");
  require_finite(op, xv);
  require_dim(op, "input dim 1 (features)", xv.dim(1), wv.dim(1));
  const std::size_t N = xv.dim(0), In = xv.dim(1), Out = wv.dim(0);
  if (b) require_dim(op, "bias length", b->value().size(), Out);
  Tensor y({N, Out});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t o = 0; o < Out; ++o) {
      double acc = b ? b->value()[o] : 0.0;
      for (std::size_t i = 0; i < In; ++i) acc += wv[o * In + i] * xv[n * In + i];
      y[n * Out + o] = acc;
    }
  std::vector<Var> inputs{x, w};
  if (b) inputs.push_back(*b);
  return x.tape().record(std::move(y), inputs, [=](BackwardContext& ctx) {
    const Tensor& gy = ctx.grad;
    const Tensor& xin = *ctx.inputs[0];
    const Tensor& win = *ctx.inputs[1];
    if (Tensor* gx = ctx.input_grads[0])
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t i = 0; i < In; ++i) {
          double acc = 0.0;
          for (std::size_t o = 0; o < Out; ++o) acc += gy[n * Out + o] * win[o * In + i];
          (*gx)[n * In + i] += acc;
        }
    if (Tensor* gw = ctx.input_grads[1])
      for (std::size_t o = 0; o < Out; ++o)
        for (std::size_t i = 0; i < In; ++i) {
          double acc = 0.0;
          for (std::size_t n = 0; n < N; ++n) acc += gy[n * Out + o] * xin[n * In + i];
          (*gw)[o * In + i] += acc;
        }
    if (ctx.input_grads.size() > 2 && ctx.input_grads[2])
      for (std::size_t o = 0; o < Out; ++o) {
        double acc = 0.0;
        for (std::size_t n = 0; n < N; ++n) acc += gy[n * Out + o];
        (*ctx.input_grads[2])[o] += acc;
      }
  });
}

Var reshape(Var x, Shape shape) {
  const Tensor& xv = x.value();
  if (shape_numel(shape) != xv.size()) {
    shape_fail("reshape", "cannot view " + shape_to_string(xv.shape()) + " as " + shape_to_string(shape));
  }
  return x.tape().record(xv.reshaped(std::move(shape)), {x}, [](BackwardContext& ctx) {
    Tensor& gx = *ctx.input_grads[0];
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += ctx.grad[i];
  });
}

Var add(Var a, Var b) {
  require_same("add", a.value(), b.value());
  Tensor y = a.value();
  y += b.value();
  return a.tape().record(std::move(y), {a, b}, [](BackwardContext& ctx) {
    for (Tensor* g : ctx.input_grads)
      if (g) *g += ctx.grad;
  });
}

Var sub(Var a, Var b) {
  require_same("sub", a.value(), b.value());
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor y(av.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] - bv[i];
  return a.tape().record(std::move(y), {a, b}, [](BackwardContext& ctx) {
    if (Tensor* ga = ctx.input_grads[0]) *ga += ctx.grad;
    if (Tensor* gb = ctx.input_grads[1])
      for (std::size_t i = 0; i < gb->size(); ++i) (*gb)[i] -= ctx.grad[i];
  });
}

Var scale(Var x, double c) {
  Tensor y = x.value();
  for (auto& v : y.data()) v *= c;
  return x.tape().record(std::move(y), {x}, [c](BackwardContext& ctx) {
    Tensor& gx = *ctx.input_grads[0];
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += c * ctx.grad[i];
  });
}

Var scale(Var x, Var s) {
  if (s.value().size() != 1) shape_fail("scale", "factor must be a single element, got " + shape_to_string(s.shape()));
  const double c = s.value()[0];
  Tensor y = x.value();
  for (auto& v : y.data()) v *= c;
  return x.tape().record(std::move(y), {x, s}, [](BackwardContext& ctx) {
    const Tensor& xv = *ctx.inputs[0];
    const double c = (*ctx.inputs[1])[0];
    if (Tensor* gx = ctx.input_grads[0])
      for (std::size_t i = 0; i < gx->size(); ++i) (*gx)[i] += c * ctx.grad[i];
    if (Tensor* gs = ctx.input_grads[1]) {
      double acc = 0.0;
      for (std::size_t i = 0; i < xv.size(); ++i) acc += xv[i] * ctx.grad[i];
      (*gs)[0] += acc;
    }
  });
}

Var softmax(Var logits) {
  const Tensor& xv = logits.value();
  require_finite("softmax", xv);
  if (xv.rank() == 0 || xv.size() == 0) shape_fail("softmax", "empty input");
  const std::size_t K = xv.shape().back(), rows = xv.size() / K;
  Tensor y(xv.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.ptr() + r * K;
    double* out = y.ptr() + r * K;
    const double mx = *std::max_element(in, in + K);
    double z = 0.0;
    for (std::size_t k = 0; k < K; ++k) z += (out[k] = std::exp(in[k] - mx));
    for (std::size_t k = 0; k < K; ++k) out[k] /= z;
  }
  return logits.tape().record(std::move(y), {logits}, [K, rows](BackwardContext& ctx) {
    Tensor& gx = *ctx.input_grads[0];
    for (std::size_t r = 0; r < rows; ++r) {
      const double* s = ctx.output.ptr() + r * K;
      const double* g = ctx.grad.ptr() + r * K;
      double dot = 0.0;
      for (std::size_t k = 0; k < K; ++k) dot += s[k] * g[k];
      for (std::size_t k = 0; k < K; ++k) gx[r * K + k] += s[k] * (g[k] - dot);
    }
  });
}

Var weighted_sum(Var weights, std::span<const Var> terms) {
  constexpr std::string_view op = "weighted_sum";
  const Tensor& wv = weights.value();
  if (terms.empty()) shape_fail(op, "no terms");
  require_dim(op, "weight count", wv.size(), terms.size());
  const Shape& shape = terms[0].shape();
  Tensor y(shape);
  for (std::size_t k = 0; k < terms.size(); ++k) {
    const Tensor& t = terms[k].value();
    if (t.shape() != shape) {
      shape_fail(op, "term " + std::to_string(k) + " has shape " + shape_to_string(t.shape()) + ", expected " +
                         shape_to_string(shape));
    }
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += wv[k] * t[i];
  }
  std::vector<Var> inputs{weights};
  inputs.insert(inputs.end(), terms.begin(), terms.end());
  return weights.tape().record(std::move(y), inputs, [](BackwardContext& ctx) {
    const Tensor& w = *ctx.inputs[0];
    const std::size_t K = ctx.inputs.size() - 1;
    for (std::size_t k = 0; k < K; ++k) {
      const Tensor& t = *ctx.inputs[k + 1];
      if (Tensor* gw = ctx.input_grads[0]) {
        double acc = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) acc += t[i] * ctx.grad[i];
        (*gw)[k] += acc;
      }
      if (Tensor* gt = ctx.input_grads[k + 1])
        for (std::size_t i = 0; i < gt->size(); ++i) (*gt)[i] += w[k] * ctx.grad[i];
    }
  });
}

Var sum(Var x) {
  double acc = 0.0;
  for (double v : x.value().data()) acc += v;
  return x.tape().record(Tensor::scalar(acc), {x}, [](BackwardContext& ctx) {
    const double g = ctx.grad[0];
    for (auto& v : ctx.input_grads[0]->data()) v += g;
  });
}

Var mean_abs_error(Var a, Var b) {
  require_same("mean_abs_error", a.value(), b.value());
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  double acc = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) acc += std::abs(av[i] - bv[i]);
  const double n = static_cast<double>(av.size());
  return a.tape().record(Tensor::scalar(acc / n), {a, b}, [n](BackwardContext& ctx) {
    const Tensor& av = *ctx.inputs[0];
    const Tensor& bv = *ctx.inputs[1];
    const double g = ctx.grad[0] / n;
    for (std::size_t i = 0; i < av.size(); ++i) {
      const double d = av[i] - bv[i];
      const double s = d > 0.0 ? g : (d < 0.0 ? -g : 0.0);
      if (ctx.input_grads[0]) (*ctx.input_grads[0])[i] += s;
      if (ctx.input_grads[1]) (*ctx.input_grads[1])[i] -= s;
    }
  });
}

Var mean_squared_error(Var a, Var b) {
  require_same("mean_squared_error", a.value(), b.value());
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  double acc = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) acc += (av[i] - bv[i]) * (av[i] - bv[i]);
  const double n = static_cast<double>(av.size());
  return a.tape().record(Tensor::scalar(acc / n), {a, b}, [n](BackwardContext& ctx) {
    const Tensor& av = *ctx.inputs[0];
    const Tensor& bv = *ctx.inputs[1];
    const double g = 2.0 * ctx.grad[0] / n;
    for (std::size_t i = 0; i < av.size(); ++i) {
      const double d = g * (av[i] - bv[i]);
      if (ctx.input_grads[0]) (*ctx.input_grads[0])[i] += d;
      if (ctx.input_grads[1]) (*ctx.input_grads[1])[i] -= d;
    }
  });
}

}  // namespace degas::ops
