// Serial textbook kernels. Kept deliberately naive: they are the oracle the
// parallel kernels are tested against.

#include <algorithm>
#include <cstddef>
#include <limits>

#include "degas/kernels.hpp"

namespace degas::kernels::reference {

namespace {
using Index = std::ptrdiff_t;
}

void conv2d_forward(const ConvGeometry& g, std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> y) {
  const Index H = g.in_h, W = g.in_w, OH = g.out_h(), OW = g.out_w();
  const Index K = g.kernel, S = g.stride, P = g.padding, D = g.dilation;
  const Index ipg = g.in_per_group(), opg = g.out_per_group();
  for (Index n = 0; n < static_cast<Index>(g.batch); ++n)
    for (Index oc = 0; oc < static_cast<Index>(g.out_ch); ++oc)
      for (Index oy = 0; oy < OH; ++oy)
        for (Index ox = 0; ox < OW; ++ox) {
          double sum = bias.empty() ? 0.0 : bias[oc];
          const Index grp = oc / opg;
          for (Index icg = 0; icg < ipg; ++icg)
            for (Index ky = 0; ky < K; ++ky)
              for (Index kx = 0; kx < K; ++kx) {
                const Index iy = oy * S - P + ky * D, ix = ox * S - P + kx * D;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                const Index ic = grp * ipg + icg;
                sum += x[((n * g.in_ch + ic) * H + iy) * W + ix] * w[((oc * ipg + icg) * K + ky) * K + kx];
              }
          y[((n * g.out_ch + oc) * OH + oy) * OW + ox] = sum;
        }
}

void conv2d_backward_input(const ConvGeometry& g, std::span<const double> gy, std::span<const double> w,
                           std::span<double> gx) {
  const Index H = g.in_h, W = g.in_w, OH = g.out_h(), OW = g.out_w();
  const Index K = g.kernel, S = g.stride, P = g.padding, D = g.dilation;
  const Index ipg = g.in_per_group(), opg = g.out_per_group();
  for (Index n = 0; n < static_cast<Index>(g.batch); ++n)
    for (Index ic = 0; ic < static_cast<Index>(g.in_ch); ++ic)
      for (Index iy = 0; iy < H; ++iy)
        for (Index ix = 0; ix < W; ++ix) {
          double sum = 0.0;
          const Index grp = ic / ipg, icg = ic % ipg;
          for (Index ocg = 0; ocg < opg; ++ocg)
            for (Index ky = 0; ky < K; ++ky)
              for (Index kx = 0; kx < K; ++kx) {
                const Index ny = iy + P - ky * D, nx = ix + P - kx * D;
                if (ny < 0 || nx < 0 || ny % S != 0 || nx % S != 0) continue;
                const Index oy = ny / S, ox = nx / S;
                if (oy >= OH || ox >= OW) continue;
                const Index oc = grp * opg + ocg;
                sum += gy[((n * g.out_ch + oc) * OH + oy) * OW + ox] * w[((oc * ipg + icg) * K + ky) * K + kx];
              }
          gx[((n * g.in_ch + ic) * H + iy) * W + ix] = sum;
        }
}

void conv2d_backward_weight(const ConvGeometry& g, std::span<const double> gy, std::span<const double> x,
                            std::span<double> gw) {
  const Index H = g.in_h, W = g.in_w, OH = g.out_h(), OW = g.out_w();
  const Index K = g.kernel, S = g.stride, P = g.padding, D = g.dilation;
  const Index ipg = g.in_per_group(), opg = g.out_per_group();
  for (Index oc = 0; oc < static_cast<Index>(g.out_ch); ++oc)
    for (Index icg = 0; icg < ipg; ++icg)
      for (Index ky = 0; ky < K; ++ky)
        for (Index kx = 0; kx < K; ++kx) {
          double sum = 0.0;
          const Index ic = (oc / opg) * ipg + icg;
          for (Index n = 0; n < static_cast<Index>(g.batch); ++n)
            for (Index oy = 0; oy < OH; ++oy)
              for (Index ox = 0; ox < OW; ++ox) {
                const Index iy = oy * S - P + ky * D, ix = ox * S - P + kx * D;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                sum += gy[((n * g.out_ch + oc) * OH + oy) * OW + ox] * x[((n * g.in_ch + ic) * H + iy) * W + ix];
              }
          gw[((oc * ipg + icg) * K + ky) * K + kx] = sum;
        }
}

void deconv2d_forward(const DeconvGeometry& g, std::span<const double> x, std::span<const double> w,
                      std::span<const double> bias, std::span<double> y) {
  const Index H = g.in_h, W = g.in_w, OH = g.out_h(), OW = g.out_w();
  const Index K = g.kernel, S = g.stride, P = g.padding;
  const Index IC = g.in_ch, OC = g.out_ch;
  for (Index n = 0; n < static_cast<Index>(g.batch); ++n)
    for (Index oc = 0; oc < OC; ++oc)
      for (Index i = 0; i < OH * OW; ++i) y[(n * OC + oc) * OH * OW + i] = bias.empty() ? 0.0 : bias[oc];
  // Scatter form: every input pixel stamps a weighted kernel onto the output.
  for (Index n = 0; n < static_cast<Index>(g.batch); ++n)
    for (Index ic = 0; ic < IC; ++ic)
      for (Index iy = 0; iy < H; ++iy)
        for (Index ix = 0; ix < W; ++ix)
          for (Index oc = 0; oc < OC; ++oc)
            for (Index ky = 0; ky < K; ++ky)
              for (Index kx = 0; kx < K; ++kx) {
                const Index oy = iy * S - P + ky, ox = ix * S - P + kx;
                if (oy < 0 || oy >= OH || ox < 0 || ox >= OW) continue;
                y[((n * OC + oc) * OH + oy) * OW + ox] +=
                    x[((n * IC + ic) * H + iy) * W + ix] * w[((ic * OC + oc) * K + ky) * K + kx];
              }
}

void deconv2d_backward_input(const DeconvGeometry& g, std::span<const double> gy, std::span<const double> w,
                             std::span<double> gx) {
  const Index H = g.in_h, W = g.in_w, OH = g.out_h(), OW = g.out_w();
  const Index K = g.kernel, S = g.stride, P = g.padding;
  const Index IC = g.in_ch, OC = g.out_ch;
  for (Index n = 0; n < static_cast<Index>(g.batch); ++n)
    for (Index ic = 0; ic < IC; ++ic)
      for (Index iy = 0; iy < H; ++iy)
        for (Index ix = 0; ix < W; ++ix) {
          double sum = 0.0;
          for (Index oc = 0; oc < OC; ++oc)
            for (Index ky = 0; ky < K; ++ky)
              for (Index kx = 0; kx < K; ++kx) {
                const Index oy = iy * S - P + ky, ox = ix * S - P + kx;
                if (oy < 0 || oy >= OH || ox < 0 || ox >= OW) continue;
                sum += gy[((n * OC + oc) * OH + oy) * OW + ox] * w[((ic * OC + oc) * K + ky) * K + kx];
              }
          gx[((n * IC + ic) * H + iy) * W + ix] = sum;
        }
}

void deconv2d_backward_weight(const DeconvGeometry& g, std::span<const double> gy, std::span<const double> x,
                              std::span<double> gw) {
  const Index H = g.in_h, W = g.in_w, OH = g.out_h(), OW = g.out_w();
  const Index K = g.kernel, S = g.stride, P = g.padding;
  const Index IC = g.in_ch, OC = g.out_ch;
  for (Index ic = 0; ic < IC; ++ic)
    for (Index oc = 0; oc < OC; ++oc)
      for (Index ky = 0; ky < K; ++ky)
        for (Index kx = 0; kx < K; ++kx) {
          double sum = 0.0;
          for (Index n = 0; n < static_cast<Index>(g.batch); ++n)
            for (Index iy = 0; iy < H; ++iy)
              for (Index ix = 0; ix < W; ++ix) {
                const Index oy = iy * S - P + ky, ox = ix * S - P + kx;
                if (oy < 0 || oy >= OH || ox < 0 || ox >= OW) continue;
                sum += x[((n * IC + ic) * H + iy) * W + ix] * gy[((n * OC + oc) * OH + oy) * OW + ox];
              }
          gw[((ic * OC + oc) * K + ky) * K + kx] = sum;
        }
}

void max_pool2d_forward(const PoolGeometry& g, std::span<const double> x, std::span<double> y,
                        std::span<std::size_t> argmax) {
  const Index H = g.in_h, W = g.in_w, OH = g.out_h(), OW = g.out_w();
  const Index K = g.kernel, S = g.stride, P = g.padding;
  for (Index t = 0; t < static_cast<Index>(g.batch * g.channels); ++t)
    for (Index oy = 0; oy < OH; ++oy)
      for (Index ox = 0; ox < OW; ++ox) {
        Index best = -1;
        for (Index ky = 0; ky < K; ++ky)
          for (Index kx = 0; kx < K; ++kx) {
            const Index iy = oy * S - P + ky, ix = ox * S - P + kx;
            if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
            const Index i = (t * H + iy) * W + ix;
            if (best < 0 || x[i] > x[best]) best = i;
          }
        y[(t * OH + oy) * OW + ox] = x[best];
        argmax[(t * OH + oy) * OW + ox] = static_cast<std::size_t>(best);
      }
}

void max_pool2d_backward(const PoolGeometry& g, std::span<const double> gy, std::span<const std::size_t> argmax,
                         std::span<double> gx) {
  std::fill(gx.begin(), gx.end(), 0.0);
  const std::size_t outputs = g.batch * g.channels * g.out_h() * g.out_w();
  for (std::size_t o = 0; o < outputs; ++o) gx[argmax[o]] += gy[o];
}

void avg_pool2d_forward(const PoolGeometry& g, std::span<const double> x, std::span<double> y) {
  const Index H = g.in_h, W = g.in_w, OH = g.out_h(), OW = g.out_w();
  const Index K = g.kernel, S = g.stride, P = g.padding;
  for (Index t = 0; t < static_cast<Index>(g.batch * g.channels); ++t)
    for (Index oy = 0; oy < OH; ++oy)
      for (Index ox = 0; ox < OW; ++ox) {
        double sum = 0.0;
        int count = 0;
        for (Index ky = 0; ky < K; ++ky)
          for (Index kx = 0; kx < K; ++kx) {
            const Index iy = oy * S - P + ky, ix = ox * S - P + kx;
            if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
            sum += x[(t * H + iy) * W + ix];
            ++count;
          }
        y[(t * OH + oy) * OW + ox] = sum / count;
      }
}

void avg_pool2d_backward(const PoolGeometry& g, std::span<const double> gy, std::span<double> gx) {
  const Index H = g.in_h, W = g.in_w, OH = g.out_h(), OW = g.out_w();
  const Index K = g.kernel, S = g.stride, P = g.padding;
  std::fill(gx.begin(), gx.end(), 0.0);
  for (Index t = 0; t < static_cast<Index>(g.batch * g.channels); ++t)
    for (Index oy = 0; oy < OH; ++oy)
      for (Index ox = 0; ox < OW; ++ox) {
        int count = 0;
        for (Index ky = 0; ky < K; ++ky)
          for (Index kx = 0; kx < K; ++kx) {
            const Index iy = oy * S - P + ky, ix = ox * S - P + kx;
            if (iy >= 0 && iy < H && ix >= 0 && ix < W) ++count;
          }
        for (Index ky = 0; ky < K; ++ky)
          for (Index kx = 0; kx < K; ++kx) {
            const Index iy = oy * S - P + ky, ix = ox * S - P + kx;
            if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
            gx[(t * H + iy) * W + ix] += gy[(t * OH + oy) * OW + ox] / count;
          }
      }
}

}  // namespace degas::kernels::reference
