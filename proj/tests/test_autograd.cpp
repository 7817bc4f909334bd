#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "linet/network_blocks.hpp"
#include "linet/optim.hpp"

using namespace linet;
using linet::testing::check_gradients;
using linet::testing::random_tensor;

namespace {

Var<double> leaf(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  return Var<double>::parameter(random_tensor(s, rng, lo, hi));
}

// Reduces an arbitrary tensor to a scalar with a fixed random projection so
// every output element contributes a distinct weight.
Var<double> project(const Var<double>& y, std::uint64_t seed = 99) {
  Rng rng(seed);
  Var<double> w(random_tensor(y.shape(), rng));
  return sum(mul(y, w));
}

constexpr double kTol = 1e-6;

}  // namespace

TEST(Autograd, ConvolutionMatchesFiniteDifferences) {
  Rng rng(1);
  for (int stride : {1, 2}) {
    Var<double> x = leaf({2, 3, 7, 7}, rng);
    Var<double> w = leaf({4, 3, 3, 3}, rng);
    Var<double> b = leaf({1, 4, 1, 1}, rng);
    auto r = check_gradients([&] { return project(conv2d(x, w, b, stride, 1)); },
                             {{"x", x}, {"w", w}, {"b", b}}, 40);
    EXPECT_LT(r.max_rel_error, kTol) << r.worst;
  }
}

TEST(Autograd, ConvolutionAgreesWithDirectSum) {
  Rng rng(2);
  Var<double> x = leaf({1, 2, 5, 6}, rng), w = leaf({3, 2, 4, 4}, rng), b = leaf({1, 3, 1, 1}, rng);
  const auto y = conv2d(x, w, b, 2, 1).value();
  for (int o = 0; o < 3; ++o)
    for (int oy = 0; oy < y.shape().h; ++oy)
      for (int ox = 0; ox < y.shape().w; ++ox) {
        double acc = b.value()(0, o, 0, 0);
        for (int c = 0; c < 2; ++c)
          for (int ky = 0; ky < 4; ++ky)
            for (int kx = 0; kx < 4; ++kx) {
              const int iy = oy * 2 - 1 + ky, ix = ox * 2 - 1 + kx;
              if (iy >= 0 && iy < 5 && ix >= 0 && ix < 6) acc += w.value()(o, c, ky, kx) * x.value()(0, c, iy, ix);
            }
        EXPECT_NEAR(y(0, o, oy, ox), acc, 1e-12);
      }
}

TEST(Autograd, LinearAndPooling) {
  Rng rng(3);
  Var<double> x = leaf({3, 4, 5, 5}, rng);
  Var<double> w = leaf({6, 4, 1, 1}, rng), b = leaf({1, 6, 1, 1}, rng);
  auto r = check_gradients([&] { return project(linear(global_avg_pool(x), w, b)); },
                           {{"x", x}, {"w", w}, {"b", b}}, 30);
  EXPECT_LT(r.max_rel_error, kTol) << r.worst;
}

TEST(Autograd, ShapeOps) {
  Rng rng(4);
  Var<double> a = leaf({2, 2, 3, 3}, rng), b = leaf({2, 3, 3, 3}, rng), v = leaf({2, 5, 1, 1}, rng);
  auto r = check_gradients(
      [&] { return project(concat_channels(upsample2x(concat_channels(a, b)), tile_spatial(v, 6, 6))); },
      {{"a", a}, {"b", b}, {"v", v}}, 30);
  EXPECT_LT(r.max_rel_error, kTol) << r.worst;
}

TEST(Autograd, Normalization) {
  Rng rng(5);
  Var<double> x = leaf({2, 3, 4, 4}, rng);
  Var<double> s = leaf({2, 3, 1, 1}, rng, 0.5, 2.0), t = leaf({2, 3, 1, 1}, rng);
  Var<double> g = leaf({1, 3, 1, 1}, rng, 0.5, 2.0);
  auto r = check_gradients(
      [&] { return project(channel_affine(instance_standardize(x, 1e-5), s, t)); },
      {{"x", x}, {"s", s}, {"t", t}}, 40);
  EXPECT_LT(r.max_rel_error, kTol) << r.worst;
  auto r2 = check_gradients([&] { return project(channel_affine(x, g, t)); }, {{"x", x}, {"g", g}}, 40);
  EXPECT_LT(r2.max_rel_error, kTol) << r2.worst;
}

TEST(Autograd, Pointwise) {
  Rng rng(6);
  // Kinked ops are checked on inputs bounded away from their kinks.
  Var<double> x = leaf({1, 2, 4, 4}, rng, 0.1, 0.9);
  Var<double> y = leaf({1, 2, 4, 4}, rng, -2.0, 2.0);
  auto smooth = check_gradients(
      [&] {
        return project(add(add(silu(y), softplus(y)), add(mul(sigmoid(y), tanh(y)), square(y))));
      },
      {{"y", y}}, 32);
  EXPECT_LT(smooth.max_rel_error, kTol) << smooth.worst;
  auto kinked = check_gradients(
      [&] {
        return project(add(add(log(x), clamp(x, 0.0, 1.0)), add(abs(add_scalar(x, -2.0)), leaky_relu(x, 0.2))));
      },
      {{"x", x}}, 32);
  EXPECT_LT(kinked.max_rel_error, kTol) << kinked.worst;
}

TEST(Autograd, CrossEntropyAndWeightedSum) {
  Rng rng(7);
  Var<double> z = leaf({4, 5, 1, 1}, rng, -3, 3);
  Var<double> a = leaf({1, 1, 1, 1}, rng), b = leaf({1, 1, 1, 1}, rng);
  auto r = check_gradients(
      [&] { return weighted_sum<double>({cross_entropy(z, {0, 3, 4, 1}), mul(a, b)}, {0.7, 1.3}); },
      {{"z", z}, {"a", a}, {"b", b}}, 20);
  EXPECT_LT(r.max_rel_error, kTol) << r.worst;
}

TEST(Autograd, CrossEntropyOfUniformLogitsIsLogN) {
  Var<double> z(Tensor<double>(Shape{3, 8, 1, 1}, 0.25));
  EXPECT_NEAR(cross_entropy(z, {0, 5, 7}).item(), std::log(8.0), 1e-12);
  EXPECT_NEAR(std::log(8.0), 2.0794, 1e-4);
}

TEST(Autograd, SharedSubgraphAccumulates) {
  Var<double> x = Var<double>::parameter(Tensor<double>(Shape{1, 1, 1, 1}, 3.0));
  Var<double> y = mul(x, x);
  backward(sum(add(y, y)));  // d/dx 2x^2 = 4x
  EXPECT_DOUBLE_EQ(x.grad().item(), 12.0);
}

TEST(Autograd, NoGradGuardSkipsRecording) {
  Var<double> x = Var<double>::parameter(Tensor<double>(Shape{1, 1, 1, 1}, 2.0));
  NoGradGuard guard;
  Var<double> y = mul(x, x);
  EXPECT_FALSE(y.requires_grad());
}

TEST(Autograd, ZeroGradientLeavesAdamParametersUnchanged) {
  Rng rng(8);
  Linear<float> layer(3, 2, rng);
  ParameterList<float> params;
  layer.collect(params, "fc");
  const Tensor<float> before = layer.weight.value();
  Adam<float> opt(params, {});
  Var<float> x(Tensor<float>(Shape{1, 3, 1, 1}, 1.0f));
  backward(scale(sum(layer(x)), 0.0f));
  opt.step();
  EXPECT_TRUE((layer.weight.value().array() == before.array()).all());
}
