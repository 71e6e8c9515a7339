#include <algorithm>
#include <cstddef>
#include <limits>

#include "degas/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace degas::kernels {

namespace {

using Index = std::ptrdiff_t;

// Half-open range of output positions o in [0, out) whose input index
// o * stride + offset falls inside [0, in).
struct Span1 {
  Index lo, hi;
};

Span1 valid_range(Index out, Index in, Index stride, Index offset) {
  Index lo = 0;
  if (offset < 0) lo = (-offset + stride - 1) / stride;
  Index hi = 0;
  if (in - 1 - offset >= 0) hi = std::min(out, (in - 1 - offset) / stride + 1);
  if (hi < lo) hi = lo;
  return {lo, hi};
}

}  // namespace

std::size_t ConvGeometry::out_h() const {
  return (in_h + 2 * padding - dilation * (kernel - 1) - 1) / stride + 1;
}
std::size_t ConvGeometry::out_w() const {
  return (in_w + 2 * padding - dilation * (kernel - 1) - 1) / stride + 1;
}
std::size_t DeconvGeometry::out_h() const { return (in_h - 1) * stride + kernel - 2 * padding; }
std::size_t DeconvGeometry::out_w() const { return (in_w - 1) * stride + kernel - 2 * padding; }
std::size_t PoolGeometry::out_h() const { return (in_h + 2 * padding - kernel) / stride + 1; }
std::size_t PoolGeometry::out_w() const { return (in_w + 2 * padding - kernel) / stride + 1; }

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
  omp_set_num_threads(std::max(1, n));
#else
  (void)n;
#endif
}

void conv2d_forward(const ConvGeometry& g, std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> y) {
  const Index H = g.in_h, W = g.in_w, OH = g.out_h(), OW = g.out_w();
  const Index K = g.kernel, S = g.stride, P = g.padding, D = g.dilation;
  const Index ipg = g.in_per_group(), opg = g.out_per_group();
  const Index out_ch = g.out_ch, in_ch = g.in_ch;
  const Index planes = static_cast<Index>(g.batch) * out_ch;

#pragma omp parallel for schedule(static)
  for (Index t = 0; t < planes; ++t) {
    const Index n = t / out_ch, oc = t % out_ch, grp = oc / opg;
    double* yp = y.data() + t * OH * OW;
    std::fill(yp, yp + OH * OW, bias.empty() ? 0.0 : bias[oc]);
    for (Index icg = 0; icg < ipg; ++icg) {
      const Index ic = grp * ipg + icg;
      const double* xp = x.data() + (n * in_ch + ic) * H * W;
      const double* wp = w.data() + (oc * ipg + icg) * K * K;
      for (Index ky = 0; ky < K; ++ky) {
        const Index off_y = ky * D - P;
        const Span1 ry = valid_range(OH, H, S, off_y);
        for (Index kx = 0; kx < K; ++kx) {
          const Index off_x = kx * D - P;
          const Span1 rx = valid_range(OW, W, S, off_x);
          const double wv = wp[ky * K + kx];
          for (Index oy = ry.lo; oy < ry.hi; ++oy) {
            const double* xrow = xp + (oy * S + off_y) * W + off_x;
            double* yrow = yp + oy * OW;
            if (S == 1) {
              for (Index ox = rx.lo; ox < rx.hi; ++ox) yrow[ox] += wv * xrow[ox];
            } else {
              for (Index ox = rx.lo; ox < rx.hi; ++ox) yrow[ox] += wv * xrow[ox * S];
            }
          }
        }
      }
    }
  }
}

void conv2d_backward_input(const ConvGeometry& g, std::span<const double> gy, std::span<const double> w,
                           std::span<double> gx) {
  const Index H = g.in_h, W = g.in_w, OH = g.out_h(), OW = g.out_w();
  const Index K = g.kernel, S = g.stride, P = g.padding, D = g.dilation;
  const Index ipg = g.in_per_group(), opg = g.out_per_group();
  const Index out_ch = g.out_ch, in_ch = g.in_ch;
  const Index planes = static_cast<Index>(g.batch) * in_ch;

#pragma omp parallel for schedule(static)
  for (Index t = 0; t < planes; ++t) {
    const Index n = t / in_ch, ic = t % in_ch, grp = ic / ipg, icg = ic % ipg;
    double* gxp = gx.data() + t * H * W;
    std::fill(gxp, gxp + H * W, 0.0);
    for (Index ocg = 0; ocg < opg; ++ocg) {
      const Index oc = grp * opg + ocg;
      const double* gyp = gy.data() + (n * out_ch + oc) * OH * OW;
      const double* wp = w.data() + (oc * ipg + icg) * K * K;
      for (Index ky = 0; ky < K; ++ky) {
        const Index off_y = ky * D - P;
        const Span1 ry = valid_range(OH, H, S, off_y);
        for (Index kx = 0; kx < K; ++kx) {
          const Index off_x = kx * D - P;
          const Span1 rx = valid_range(OW, W, S, off_x);
          const double wv = wp[ky * K + kx];
          for (Index oy = ry.lo; oy < ry.hi; ++oy) {
            double* gxrow = gxp + (oy * S + off_y) * W + off_x;
            const double* gyrow = gyp + oy * OW;
            for (Index ox = rx.lo; ox < rx.hi; ++ox) gxrow[ox * S] += wv * gyrow[ox];
          }
        }
      }
    }
  }
}

void conv2d_backward_weight(const ConvGeometry& g, std::span<const double> gy, std::span<const double> x,
                            std::span<double> gw) {
  const Index H = g.in_h, W = g.in_w, OH = g.out_h(), OW = g.out_w();
  const Index K = g.kernel, S = g.stride, P = g.padding, D = g.dilation;
  const Index ipg = g.in_per_group(), opg = g.out_per_group();
  const Index out_ch = g.out_ch, in_ch = g.in_ch, batch = g.batch;
  const Index filters = out_ch * ipg;

#pragma omp parallel for schedule(static)
  for (Index t = 0; t < filters; ++t) {
    const Index oc = t / ipg, icg = t % ipg, grp = oc / opg, ic = grp * ipg + icg;
    double* gwp = gw.data() + t * K * K;
    for (Index ky = 0; ky < K; ++ky) {
      const Index off_y = ky * D - P;
      const Span1 ry = valid_range(OH, H, S, off_y);
      for (Index kx = 0; kx < K; ++kx) {
        const Index off_x = kx * D - P;
        const Span1 rx = valid_range(OW, W, S, off_x);
        double acc = 0.0;
        for (Index n = 0; n < batch; ++n) {
          const double* xp = x.data() + (n * in_ch + ic) * H * W;
          const double* gyp = gy.data() + (n * out_ch + oc) * OH * OW;
          for (Index oy = ry.lo; oy < ry.hi; ++oy) {
            const double* xrow = xp + (oy * S + off_y) * W + off_x;
            const double* gyrow = gyp + oy * OW;
            for (Index ox = rx.lo; ox < rx.hi; ++ox) acc += gyrow[ox] * xrow[ox * S];
          }
        }
        gwp[ky * K + kx] = acc;
      }
    }
  }
}

void deconv2d_forward(const DeconvGeometry& g, std::span<const double> x, std::span<const double> w,
                      std::span<const double> bias, std::span<double> y) {
  const Index H = g.in_h, W = g.in_w, OH = g.out_h(), OW = g.out_w();
  const Index K = g.kernel, S = g.stride, P = g.padding;
  const Index out_ch = g.out_ch, in_ch = g.in_ch;
  const Index planes = static_cast<Index>(g.batch) * out_ch;

#pragma omp parallel for schedule(static)
  for (Index t = 0; t < planes; ++t) {
    const Index n = t / out_ch, oc = t % out_ch;
    double* yp = y.data() + t * OH * OW;
    std::fill(yp, yp + OH * OW, bias.empty() ? 0.0 : bias[oc]);
    for (Index ic = 0; ic < in_ch; ++ic) {
      const double* xp = x.data() + (n * in_ch + ic) * H * W;
      const double* wp = w.data() + (ic * out_ch + oc) * K * K;
      for (Index ky = 0; ky < K; ++ky) {
        const Index off_y = ky - P;
        const Span1 ry = valid_range(H, OH, S, off_y);
        for (Index kx = 0; kx < K; ++kx) {
          const Index off_x = kx - P;
          const Span1 rx = valid_range(W, OW, S, off_x);
          const double wv = wp[ky * K + kx];
          for (Index iy = ry.lo; iy < ry.hi; ++iy) {
            double* yrow = yp + (iy * S + off_y) * OW + off_x;
            const double* xrow = xp + iy * W;
            for (Index ix = rx.lo; ix < rx.hi; ++ix) yrow[ix * S] += wv * xrow[ix];
          }
        }
      }
    }
  }
}

void deconv2d_backward_input(const DeconvGeometry& g, std::span<const double> gy, std::span<const double> w,
                             std::span<double> gx) {
  const Index H = g.in_h, W = g.in_w, OH = g.out_h(), OW = g.out_w();
  const Index K = g.kernel, S = g.stride, P = g.padding;
  const Index out_ch = g.out_ch, in_ch = g.in_ch;
  const Index planes = static_cast<Index>(g.batch) * in_ch;

#pragma omp parallel for schedule(static)
  for (Index t = 0; t < planes; ++t) {
    const Index n = t / in_ch, ic = t % in_ch;
    double* gxp = gx.data() + t * H * W;
    std::fill(gxp, gxp + H * W, 0.0);
    for (Index oc = 0; oc < out_ch; ++oc) {
      const double* gyp = gy.data() + (n * out_ch + oc) * OH * OW;
      const double* wp = w.data() + (ic * out_ch + oc) * K * K;
      for (Index ky = 0; ky < K; ++ky) {
        const Index off_y = ky - P;
        const Span1 ry = valid_range(H, OH, S, off_y);
        for (Index kx = 0; kx < K; ++kx) {
          const Index off_x = kx - P;
          const Span1 rx = valid_range(W, OW, S, off_x);
          const double wv = wp[ky * K + kx];
          for (Index iy = ry.lo; iy < ry.hi; ++iy) {
            const double* gyrow = gyp + (iy * S + off_y) * OW + off_x;
            double* gxrow = gxp + iy * W;
            for (Index ix = rx.lo; ix < rx.hi; ++ix) gxrow[ix] += wv * gyrow[ix * S];
          }
        }
      }
    }
  }
}

void deconv2d_backward_weight(const DeconvGeometry& g, std::span<const double> gy, std::span<const double> x,
                              std::span<double> gw) {
  const Index H = g.in_h, W = g.in_w, OH = g.out_h(), OW = g.out_w();
  const Index K = g.kernel, S = g.stride, P = g.padding;
  const Index out_ch = g.out_ch, in_ch = g.in_ch, batch = g.batch;
  const Index filters = in_ch * out_ch;

#pragma omp parallel for schedule(static)
  for (Index t = 0; t < filters; ++t) {
    const Index ic = t / out_ch, oc = t % out_ch;
    double* gwp = gw.data() + t * K * K;
    for (Index ky = 0; ky < K; ++ky) {
      const Index off_y = ky - P;
      const Span1 ry = valid_range(H, OH, S, off_y);
      for (Index kx = 0; kx < K; ++kx) {
        const Index off_x = kx - P;
        const Span1 rx = valid_range(W, OW, S, off_x);
        double acc = 0.0;
        for (Index n = 0; n < batch; ++n) {
          const double* xp = x.data() + (n * in_ch + ic) * H * W;
          const double* gyp = gy.data() + (n * out_ch + oc) * OH * OW;
          for (Index iy = ry.lo; iy < ry.hi; ++iy) {
            const double* gyrow = gyp + (iy * S + off_y) * OW + off_x;
            const double* xrow = xp + iy * W;
            for (Index ix = rx.lo; ix < rx.hi; ++ix) acc += xrow[ix] * gyrow[ix * S];
          }
        }
        gwp[ky * K + kx] = acc;
      }
    }
  }
}

void max_pool2d_forward(const PoolGeometry& g, std::span<const double> x, std::span<double> y,
                        std::span<std::size_t> argmax) {
  const Index H = g.in_h, W = g.in_w, OH = g.out_h(), OW = g.out_w();
  const Index K = g.kernel, S = g.stride, P = g.padding;
  const Index planes = static_cast<Index>(g.batch * g.channels);

#pragma omp parallel for schedule(static)
  for (Index t = 0; t < planes; ++t) {
    const Index base = t * H * W;
    for (Index oy = 0; oy < OH; ++oy) {
      for (Index ox = 0; ox < OW; ++ox) {
        double best = -std::numeric_limits<double>::infinity();
        Index best_i = -1;
        for (Index ky = 0; ky < K; ++ky) {
          const Index iy = oy * S - P + ky;
          if (iy < 0 || iy >= H) continue;
          for (Index kx = 0; kx < K; ++kx) {
            const Index ix = ox * S - P + kx;
            if (ix < 0 || ix >= W) continue;
            const Index i = base + iy * W + ix;
            if (best_i < 0 || x[i] > best) {
              best = x[i];
              best_i = i;
            }
          }
        }
        const Index o = (t * OH + oy) * OW + ox;
        y[o] = best;
        argmax[o] = static_cast<std::size_t>(best_i);
      }
    }
  }
}

void max_pool2d_backward(const PoolGeometry& g, std::span<const double> gy, std::span<const std::size_t> argmax,
                         std::span<double> gx) {
  const Index HW = g.in_h * g.in_w, OHW = g.out_h() * g.out_w();
  const Index planes = static_cast<Index>(g.batch * g.channels);

#pragma omp parallel for schedule(static)
  for (Index t = 0; t < planes; ++t) {
    std::fill(gx.begin() + t * HW, gx.begin() + (t + 1) * HW, 0.0);
    for (Index o = t * OHW; o < (t + 1) * OHW; ++o) gx[argmax[o]] += gy[o];
  }
}

void avg_pool2d_forward(const PoolGeometry& g, std::span<const double> x, std::span<double> y) {
  const Index H = g.in_h, W = g.in_w, OH = g.out_h(), OW = g.out_w();
  const Index K = g.kernel, S = g.stride, P = g.padding;
  const Index planes = static_cast<Index>(g.batch * g.channels);

#pragma omp parallel for schedule(static)
  for (Index t = 0; t < planes; ++t) {
    const double* xp = x.data() + t * H * W;
    for (Index oy = 0; oy < OH; ++oy) {
      const Index y0 = std::max<Index>(0, oy * S - P), y1 = std::min(H, oy * S - P + K);
      for (Index ox = 0; ox < OW; ++ox) {
        const Index x0 = std::max<Index>(0, ox * S - P), x1 = std::min(W, ox * S - P + K);
        double acc = 0.0;
        for (Index iy = y0; iy < y1; ++iy)
          for (Index ix = x0; ix < x1; ++ix) acc += xp[iy * W + ix];
        y[(t * OH + oy) * OW + ox] = acc / static_cast<double>((y1 - y0) * (x1 - x0));
      }
    }
  }
}

void avg_pool2d_backward(const PoolGeometry& g, std::span<const double> gy, std::span<double> gx) {
  const Index H = g.in_h, W = g.in_w, OH = g.out_h(), OW = g.out_w();
  const Index K = g.kernel, S = g.stride, P = g.padding;
  const Index planes = static_cast<Index>(g.batch * g.channels);

#pragma omp parallel for schedule(static)
  for (Index t = 0; t < planes; ++t) {
    double* gxp = gx.data() + t * H * W;
    std::fill(gxp, gxp + H * W, 0.0);
    for (Index oy = 0; oy < OH; ++oy) {
      const Index y0 = std::max<Index>(0, oy * S - P), y1 = std::min(H, oy * S - P + K);
      for (Index ox = 0; ox < OW; ++ox) {
        const Index x0 = std::max<Index>(0, ox * S - P), x1 = std::min(W, ox * S - P + K);
        const double share = gy[(t * OH + oy) * OW + ox] / static_cast<double>((y1 - y0) * (x1 - x0));
        for (Index iy = y0; iy < y1; ++iy)
          for (Index ix = x0; ix < x1; ++ix) gxp[iy * W + ix] += share;
      }
    }
  }
}

}  // namespace degas::kernels
