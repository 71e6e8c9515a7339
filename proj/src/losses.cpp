#include "degas/losses.hpp"

#include <array>

#include "degas/error.hpp"
#include "degas/ops.hpp"

namespace degas {

namespace {

constexpr std::array<double, 5> kBinomial = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};

std::ptrdiff_t reflect(std::ptrdiff_t i, std::ptrdiff_t n) {
  if (n == 1) return 0;
  const std::ptrdiff_t period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

struct Planes {
  std::size_t count, h, w;
};

Planes planes_of(const Tensor& t, const char* op) {
  if (t.rank() < 2) throw ShapeError(std::string(op) + ": input needs at least 2 dims, got " + shape_to_string(t.shape()));
  const std::size_t h = t.dim(t.rank() - 2), w = t.dim(t.rank() - 1);
  return {t.size() / (h * w), h, w};
}

Shape with_spatial(const Shape& s, std::size_t h, std::size_t w) {
  Shape out = s;
  out[out.size() - 2] = h;
  out[out.size() - 1] = w;
  return out;
}

// Blur along one axis (1 = width, 0 = height); adjoint applies the transpose.
Tensor blur_axis(const Tensor& in, int axis, bool adjoint) {
  const Planes p = planes_of(in, "blur");
  Tensor out(in.shape());
  const std::ptrdiff_t H = p.h, W = p.w;
  for (std::size_t q = 0; q < p.count; ++q) {
    const double* src = in.ptr() + q * p.h * p.w;
    double* dst = out.ptr() + q * p.h * p.w;
    for (std::ptrdiff_t y = 0; y < H; ++y)
      for (std::ptrdiff_t x = 0; x < W; ++x)
        for (std::ptrdiff_t t = 0; t < 5; ++t) {
          const std::ptrdiff_t yy = axis == 0 ? reflect(y + t - 2, H) : y;
          const std::ptrdiff_t xx = axis == 1 ? reflect(x + t - 2, W) : x;
          if (adjoint) dst[yy * W + xx] += kBinomial[t] * src[y * W + x];
          else dst[y * W + x] += kBinomial[t] * src[yy * W + xx];
        }
  }
  return out;
}

Tensor subsample(const Tensor& in) {
  const Planes p = planes_of(in, "pyramid_reduce");
  if (p.h % 2 || p.w % 2) throw ShapeError("pyramid_reduce: odd spatial size " + shape_to_string(in.shape()));
  Tensor out(with_spatial(in.shape(), p.h / 2, p.w / 2));
  const std::size_t oh = p.h / 2, ow = p.w / 2;
  for (std::size_t q = 0; q < p.count; ++q)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x) out[(q * oh + y) * ow + x] = in[(q * p.h + 2 * y) * p.w + 2 * x];
  return out;
}

Tensor zero_insert(const Tensor& in) {
  const Planes p = planes_of(in, "pyramid_expand");
  const std::size_t oh = 2 * p.h, ow = 2 * p.w;
  Tensor out(with_spatial(in.shape(), oh, ow));
  for (std::size_t q = 0; q < p.count; ++q)
    for (std::size_t y = 0; y < p.h; ++y)
      for (std::size_t x = 0; x < p.w; ++x) out[(q * oh + 2 * y) * ow + 2 * x] = in[(q * p.h + y) * p.w + x];
  return out;
}

Tensor scaled(Tensor t, double c) {
  for (auto& v : t.data()) v *= c;
  return t;
}

Tensor reduce_adjoint(const Tensor& g) { return blur_axis(blur_axis(zero_insert(g), 0, true), 1, true); }

Tensor expand_adjoint(const Tensor& g) { return subsample(blur_axis(blur_axis(scaled(g, 4.0), 0, true), 1, true)); }

void check_levels(const Tensor& x, std::size_t levels) {
  const Planes p = planes_of(x, "lap_pyramid");
  const std::size_t m = std::size_t{1} << levels;
  if (p.h % m || p.w % m) {
    throw ShapeError("lap_pyramid: spatial size " + std::to_string(p.h) + "x" + std::to_string(p.w) +
                     " not divisible by 2^" + std::to_string(levels));
  }
}

}  // namespace

Tensor pyramid_reduce(const Tensor& x) { return subsample(blur_axis(blur_axis(x, 1, false), 0, false)); }

Tensor pyramid_expand(const Tensor& x) { return scaled(blur_axis(blur_axis(zero_insert(x), 1, false), 0, false), 4.0); }

std::vector<Tensor> lap_pyramid(const Tensor& x, std::size_t levels) {
  check_levels(x, levels);
  std::vector<Tensor> bands;
  Tensor g = x;
  for (std::size_t j = 0; j < levels; ++j) {
    Tensor next = pyramid_reduce(g);
    Tensor up = pyramid_expand(next);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] -= up[i];
    bands.push_back(std::move(g));
    g = std::move(next);
  }
  bands.push_back(std::move(g));
  return bands;
}

Tensor lap_reconstruct(const std::vector<Tensor>& bands) {
  if (bands.empty()) throw ShapeError("lap_reconstruct: no bands");
  Tensor g = bands.back();
  for (std::size_t j = bands.size() - 1; j-- > 0;) {
    Tensor up = pyramid_expand(g);
    if (!up.same_shape(bands[j])) {
      throw ShapeError("lap_reconstruct: band " + std::to_string(j) + " has shape " +
                       shape_to_string(bands[j].shape()) + ", expected " + shape_to_string(up.shape()));
    }
    up += bands[j];
    g = std::move(up);
  }
  return g;
}

namespace ops {

Var pyramid_reduce(Var x) {
  return x.tape().record(degas::pyramid_reduce(x.value()), {x},
                         [](BackwardContext& ctx) { *ctx.input_grads[0] += reduce_adjoint(ctx.grad); });
}

Var pyramid_expand(Var x) {
  return x.tape().record(degas::pyramid_expand(x.value()), {x},
                         [](BackwardContext& ctx) { *ctx.input_grads[0] += expand_adjoint(ctx.grad); });
}

}  // namespace ops

Var lap1_loss(Var x, Var y, std::size_t levels) {
  if (!x.value().same_shape(y.value())) {
    throw ShapeError("lap1_loss: shapes differ: " + shape_to_string(x.shape()) + " vs " + shape_to_string(y.shape()));
  }
  check_levels(x.value(), levels);
  Tape& tape = x.tape();
  // The pyramid is linear, so the bands of x − y are the band differences.
  Var g = ops::sub(x, y);
  std::optional<Var> total;
  double weight = 1.0;
  for (std::size_t j = 0; j <= levels; ++j) {
    Var band = g;
    if (j < levels) {
      Var next = ops::pyramid_reduce(g);
      band = ops::sub(g, ops::pyramid_expand(next));
      g = next;
    }
    Var term = ops::scale(ops::mean_abs_error(band, tape.constant(Tensor::zeros(band.shape()))), weight);
    total = total ? ops::add(*total, term) : term;
    weight *= 4.0;
  }
  return *total;
}

double lap1_loss(const Tensor& x, const Tensor& y, std::size_t levels) {
  Tape tape;
  return lap1_loss(tape.constant(x), tape.constant(y), levels).value()[0];
}

Var recon_loss(Var x, Var y, double lambda, std::size_t levels) {
  if (lambda < 0.0) throw Error("recon_loss: lambda must be >= 0");
  Var lap = lap1_loss(x, y, levels);
  if (lambda == 0.0) return lap;
  return ops::add(lap, ops::scale(ops::mean_squared_error(x, y), lambda));
}

double recon_loss(const Tensor& x, const Tensor& y, double lambda, std::size_t levels) {
  Tape tape;
  return recon_loss(tape.constant(x), tape.constant(y), lambda, levels).value()[0];
}

}  // namespace degas
