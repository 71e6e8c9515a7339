#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "degas/kernels.hpp"
#include "degas/tensor.hpp"

namespace degas::kernels {
namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

class ThreadGuard {
 public:
  ThreadGuard() : saved_(max_threads()) {}
  ~ThreadGuard() { set_threads(saved_); }

 private:
  int saved_;
};

std::vector<ConvGeometry> conv_cases() {
  std::vector<ConvGeometry> out;
  ConvGeometry g;
  g.batch = 2, g.in_ch = 3, g.in_h = 7, g.in_w = 6, g.out_ch = 4, g.kernel = 3, g.padding = 1;
  out.push_back(g);
  g.stride = 2;
  out.push_back(g);
  g.stride = 1, g.dilation = 2, g.padding = 2;
  out.push_back(g);
  g.in_ch = 4, g.out_ch = 4, g.groups = 4, g.kernel = 5, g.dilation = 1, g.padding = 2;
  out.push_back(g);
  g.groups = 2, g.out_ch = 6, g.kernel = 1, g.padding = 0;
  out.push_back(g);
  return out;
}

TEST(Kernels, ConvMatchesReference) {
  std::mt19937_64 rng(1);
  for (const auto& g : conv_cases()) {
    const std::size_t nx = g.batch * g.in_ch * g.in_h * g.in_w;
    const std::size_t nw = g.out_ch * g.in_per_group() * g.kernel * g.kernel;
    const std::size_t ny = g.batch * g.out_ch * g.out_h() * g.out_w();
    auto x = random_vec(nx, rng), w = random_vec(nw, rng), b = random_vec(g.out_ch, rng), gy = random_vec(ny, rng);
    std::vector<double> y1(ny), y2(ny), gx1(nx), gx2(nx), gw1(nw), gw2(nw);
    conv2d_forward(g, x, w, b, y1);
    reference::conv2d_forward(g, x, w, b, y2);
    conv2d_backward_input(g, gy, w, gx1);
    reference::conv2d_backward_input(g, gy, w, gx2);
    conv2d_backward_weight(g, gy, x, gw1);
    reference::conv2d_backward_weight(g, gy, x, gw2);
    for (std::size_t i = 0; i < ny; ++i) EXPECT_NEAR(y1[i], y2[i], 1e-12);
    for (std::size_t i = 0; i < nx; ++i) EXPECT_NEAR(gx1[i], gx2[i], 1e-12);
    for (std::size_t i = 0; i < nw; ++i) EXPECT_NEAR(gw1[i], gw2[i], 1e-12);
  }
}

TEST(Kernels, DeconvMatchesReference) {
  std::mt19937_64 rng(2);
  for (std::size_t k : {2, 4, 6, 8}) {
    DeconvGeometry g;
    g.batch = 2, g.in_ch = 3, g.in_h = 4, g.in_w = 5, g.out_ch = 2, g.kernel = k, g.stride = 2, g.padding = k / 2 - 1;
    const std::size_t nx = g.batch * g.in_ch * g.in_h * g.in_w;
    const std::size_t nw = g.in_ch * g.out_ch * k * k;
    const std::size_t ny = g.batch * g.out_ch * g.out_h() * g.out_w();
    auto x = random_vec(nx, rng), w = random_vec(nw, rng), b = random_vec(g.out_ch, rng), gy = random_vec(ny, rng);
    std::vector<double> y1(ny), y2(ny), gx1(nx), gx2(nx), gw1(nw), gw2(nw);
    deconv2d_forward(g, x, w, b, y1);
    reference::deconv2d_forward(g, x, w, b, y2);
    deconv2d_backward_input(g, gy, w, gx1);
    reference::deconv2d_backward_input(g, gy, w, gx2);
    deconv2d_backward_weight(g, gy, x, gw1);
    reference::deconv2d_backward_weight(g, gy, x, gw2);
    for (std::size_t i = 0; i < ny; ++i) EXPECT_NEAR(y1[i], y2[i], 1e-12);
    for (std::size_t i = 0; i < nx; ++i) EXPECT_NEAR(gx1[i], gx2[i], 1e-12);
    for (std::size_t i = 0; i < nw; ++i) EXPECT_NEAR(gw1[i], gw2[i], 1e-12);
  }
}

TEST(Kernels, PoolMatchesReference) {
  std::mt19937_64 rng(3);
  PoolGeometry g;
  g.batch = 2, g.channels = 3, g.in_h = 5, g.in_w = 6, g.kernel = 3, g.stride = 1, g.padding = 1;
  for (std::size_t stride : {1, 2}) {
    g.stride = stride;
    const std::size_t nx = g.batch * g.channels * g.in_h * g.in_w;
    const std::size_t ny = g.batch * g.channels * g.out_h() * g.out_w();
    auto x = random_vec(nx, rng), gy = random_vec(ny, rng);
    std::vector<double> y1(ny), y2(ny), gx1(nx), gx2(nx);
    std::vector<std::size_t> a1(ny), a2(ny);
    max_pool2d_forward(g, x, y1, a1);
    reference::max_pool2d_forward(g, x, y2, a2);
    EXPECT_EQ(y1, y2);
    EXPECT_EQ(a1, a2);
    max_pool2d_backward(g, gy, a1, gx1);
    reference::max_pool2d_backward(g, gy, a2, gx2);
    EXPECT_EQ(gx1, gx2);
    avg_pool2d_forward(g, x, y1);
    reference::avg_pool2d_forward(g, x, y2);
    for (std::size_t i = 0; i < ny; ++i) EXPECT_NEAR(y1[i], y2[i], 1e-12);
    avg_pool2d_backward(g, gy, gx1);
    reference::avg_pool2d_backward(g, gy, gx2);
    for (std::size_t i = 0; i < nx; ++i) EXPECT_NEAR(gx1[i], gx2[i], 1e-12);
  }
}

TEST(Kernels, ThreadCountDoesNotChangeBits) {
  ThreadGuard guard;
  std::mt19937_64 rng(4);
  ConvGeometry g;
  g.batch = 3, g.in_ch = 5, g.in_h = 9, g.in_w = 9, g.out_ch = 7, g.kernel = 3, g.padding = 1;
  const std::size_t nx = g.batch * g.in_ch * g.in_h * g.in_w;
  const std::size_t nw = g.out_ch * g.in_ch * 9;
  const std::size_t ny = g.batch * g.out_ch * g.out_h() * g.out_w();
  auto x = random_vec(nx, rng), w = random_vec(nw, rng), gy = random_vec(ny, rng);
  auto run = [&](int threads) {
    set_threads(threads);
    std::vector<double> y(ny), gx(nx), gw(nw);
    conv2d_forward(g, x, w, {}, y);
    conv2d_backward_input(g, gy, w, gx);
    conv2d_backward_weight(g, gy, x, gw);
    y.insert(y.end(), gx.begin(), gx.end());
    y.insert(y.end(), gw.begin(), gw.end());
    return y;
  };
  const auto one = run(1);
  EXPECT_EQ(one, run(4));
  EXPECT_EQ(one, run(3));
}

TEST(Kernels, OutputExtentFormulas) {
  ConvGeometry c;
  c.in_h = 10, c.in_w = 7, c.kernel = 3, c.stride = 2, c.padding = 1, c.dilation = 2;
  EXPECT_EQ(c.out_h(), (10 + 2 - 2 * 2 - 1) / 2 + 1);
  EXPECT_EQ(c.out_w(), (7 + 2 - 2 * 2 - 1) / 2 + 1);
  DeconvGeometry d;
  d.in_h = 4, d.in_w = 4, d.kernel = 4, d.stride = 2, d.padding = 1;
  EXPECT_EQ(d.out_h(), 8u);
  PoolGeometry p;
  p.in_h = 4, p.in_w = 4, p.kernel = 3, p.stride = 1, p.padding = 1;
  EXPECT_EQ(p.out_h(), 4u);
}

// The 3x3 all-ones kernel over the 1..9 grid sums every cell at the centre.
TEST(Kernels, ReferenceConvCentreExample) {
  ConvGeometry g;
  g.in_h = 3, g.in_w = 3, g.kernel = 3, g.padding = 1;
  std::vector<double> x{1, 2, 3, 4, 5, 6, 7, 8, 9}, w(9, 1.0), y(9);
  reference::conv2d_forward(g, x, w, {}, y);
  EXPECT_DOUBLE_EQ(y[4], 45.0);
  EXPECT_DOUBLE_EQ(y[0], 1 + 2 + 4 + 5);
}

TEST(Kernels, MaxPoolTiesPickFirst) {
  PoolGeometry g;
  g.in_h = 2, g.in_w = 2, g.kernel = 2, g.stride = 2;
  std::vector<double> x{3, 3, 3, 3}, y(1);
  std::vector<std::size_t> arg(1);
  max_pool2d_forward(g, x, y, arg);
  EXPECT_EQ(arg[0], 0u);
}

TEST(Kernels, AvgPoolExcludesPadding) {
  PoolGeometry g;
  g.in_h = 2, g.in_w = 2, g.kernel = 3, g.stride = 1, g.padding = 1;
  std::vector<double> x{1, 2, 3, 4}, y(4);
  avg_pool2d_forward(g, x, y);
  for (double v : y) EXPECT_DOUBLE_EQ(v, 2.5);
}

}  // namespace
}  // namespace degas::kernels
