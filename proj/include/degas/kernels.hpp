#pragma once

// Dense convolution and pooling kernels over NCHW double buffers.
//
// Two implementations share one interface: `degas::kernels` holds the
// OpenMP-parallel versions used by the engine, `degas::kernels::reference`
// holds straightforward serial loops used as the test oracle. Every parallel
// kernel partitions work so that each output element is owned by exactly one
// iteration with a fixed accumulation order, which makes results bitwise
// independent of the thread count.

#include <cstddef>
#include <span>

namespace degas::kernels {

/// Geometry of a (possibly grouped, strided, dilated) 2-D convolution.
/// Weight layout is [out_ch, in_ch / groups, k, k].
struct ConvGeometry {
  std::size_t batch = 1;
  std::size_t in_ch = 1, in_h = 1, in_w = 1;
  std::size_t out_ch = 1;
  std::size_t kernel = 1, stride = 1, padding = 0, dilation = 1, groups = 1;

  std::size_t out_h() const;
  std::size_t out_w() const;
  std::size_t in_per_group() const { return in_ch / groups; }
  std::size_t out_per_group() const { return out_ch / groups; }
};

/// Geometry of a 2-D transposed convolution. Weight layout is [in_ch, out_ch, k, k].
struct DeconvGeometry {
  std::size_t batch = 1;
  std::size_t in_ch = 1, in_h = 1, in_w = 1;
  std::size_t out_ch = 1;
  std::size_t kernel = 1, stride = 1, padding = 0;

  std::size_t out_h() const;
  std::size_t out_w() const;
};

/// Geometry of a square pooling window. Padded cells never contribute.
struct PoolGeometry {
  std::size_t batch = 1, channels = 1, in_h = 1, in_w = 1;
  std::size_t kernel = 1, stride = 1, padding = 0;

  std::size_t out_h() const;
  std::size_t out_w() const;
};

// y must be sized batch*out_ch*out_h*out_w; bias may be empty.
void conv2d_forward(const ConvGeometry& g, std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> y);
// Overwrites gx.
void conv2d_backward_input(const ConvGeometry& g, std::span<const double> gy, std::span<const double> w,
                           std::span<double> gx);
// Overwrites gw.
void conv2d_backward_weight(const ConvGeometry& g, std::span<const double> gy, std::span<const double> x,
                            std::span<double> gw);

void deconv2d_forward(const DeconvGeometry& g, std::span<const double> x, std::span<const double> w,
                      std::span<const double> bias, std::span<double> y);
void deconv2d_backward_input(const DeconvGeometry& g, std::span<const double> gy, std::span<const double> w,
                             std::span<double> gx);
void deconv2d_backward_weight(const DeconvGeometry& g, std::span<const double> gy, std::span<const double> x,
                              std::span<double> gw);

// argmax receives the flat input index of the chosen element per output cell
// (first maximal element on ties).
void max_pool2d_forward(const PoolGeometry& g, std::span<const double> x, std::span<double> y,
                        std::span<std::size_t> argmax);
void max_pool2d_backward(const PoolGeometry& g, std::span<const double> gy, std::span<const std::size_t> argmax,
                         std::span<double> gx);
void avg_pool2d_forward(const PoolGeometry& g, std::span<const double> x, std::span<double> y);
void avg_pool2d_backward(const PoolGeometry& g, std::span<const double> gy, std::span<double> gx);

/// Number of threads the parallel kernels will use.
int max_threads();
/// Override the thread count (no-op without OpenMP).
void set_threads(int n);

namespace reference {

void conv2d_forward(const ConvGeometry& g, std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> y);
void conv2d_backward_input(const ConvGeometry& g, std::span<const double> gy, std::span<const double> w,
                           std::span<double> gx);
void conv2d_backward_weight(const ConvGeometry& g, std::span<const double> gy, std::span<const double> x,
                            std::span<double> gw);

void deconv2d_forward(const DeconvGeometry& g, std::span<const double> x, std::span<const double> w,
                      std::span<const double> bias, std::span<double> y);
void deconv2d_backward_input(const DeconvGeometry& g, std::span<const double> gy, std::span<const double> w,
                             std::span<double> gx);
void deconv2d_backward_weight(const DeconvGeometry& g, std::span<const double> gy, std::span<const double> x,
                              std::span<double> gw);

void max_pool2d_forward(const PoolGeometry& g, std::span<const double> x, std::span<double> y,
                        std::span<std::size_t> argmax);
void max_pool2d_backward(const PoolGeometry& g, std::span<const double> gy, std::span<const std::size_t> argmax,
                         std::span<double> gx);
void avg_pool2d_forward(const PoolGeometry& g, std::span<const double> x, std::span<double> y);
void avg_pool2d_backward(const PoolGeometry& g, std::span<const double> gy, std::span<double> gx);

}  // namespace reference

}  // namespace degas::kernels
