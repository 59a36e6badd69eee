#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "pfci/nn/layers.hpp"
#include "pfci/nn/ops.hpp"

using namespace pfci;
using namespace pfci::nn;

namespace {

Var<double> leaf(std::mt19937_64& rng, Shape s, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<double> t(s);
  for (auto& v : t.span()) v = u(rng);
  return Var<double>(t, true);
}

// Fixed random projection so every output element influences the scalar.
Var<double> project(const Var<double>& y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  Tensor<double> w(y.shape());
  for (auto& v : w.span()) v = u(rng);
  // sum(w * y) == mean((y + w)^2 - y^2 - w^2) * numel / 2; expressed with available ops.
  Tensor<double> zero(y.shape());
  const Var<double> wv(w);
  const double n = static_cast<double>(y.value().numel());
  Var<double> a = mse_const(add(y, wv), 0.0);
  Var<double> b = mse_const(y, 0.0);
  return scale(add(a, scale(b, -1.0)), n / 2.0);
}

void expect_grad_ok(const std::vector<Var<double>>& params, const std::function<Var<double>()>& f,
                    double tol = 1e-6) {
  const gradcheck::Result r = gradcheck::check<double>(params, f, 1e-5, 200, 1);
  EXPECT_GT(r.checked, 0u);
  EXPECT_LT(r.normwise_error, tol) << "checked " << r.checked << " skipped " << r.skipped;
}

// Direct seven-loop convolution.
Tensor<double> conv_oracle(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b, int stride,
                           int pad) {
  const Shape xs = x.shape(), ws = w.shape();
  const int oh = (xs.h + 2 * pad - ws.h) / stride + 1, ow = (xs.w + 2 * pad - ws.w) / stride + 1;
  Tensor<double> y(Shape{xs.n, ws.n, oh, ow});
  for (int n = 0; n < xs.n; ++n)
    for (int o = 0; o < ws.n; ++o)
      for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j) {
          double s = b.at(0, o, 0, 0);
          for (int c = 0; c < xs.c; ++c)
            for (int ki = 0; ki < ws.h; ++ki)
              for (int kj = 0; kj < ws.w; ++kj) {
                const int r = i * stride - pad + ki, q = j * stride - pad + kj;
                if (r >= 0 && r < xs.h && q >= 0 && q < xs.w) s += x.at(n, c, r, q) * w.at(o, c, ki, kj);
              }
          y.at(n, o, i, j) = s;
        }
  return y;
}

// Scatter form of the transposed convolution.
Tensor<double> convt_oracle(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b, int stride,
                            int pad, int opad) {
  const Shape xs = x.shape(), ws = w.shape();
  const int oh = (xs.h - 1) * stride - 2 * pad + ws.h + opad, ow = (xs.w - 1) * stride - 2 * pad + ws.w + opad;
  Tensor<double> y(Shape{xs.n, ws.c, oh, ow});
  for (int n = 0; n < xs.n; ++n)
    for (int o = 0; o < ws.c; ++o)
      for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j) y.at(n, o, i, j) = b.at(0, o, 0, 0);
  for (int n = 0; n < xs.n; ++n)
    for (int c = 0; c < xs.c; ++c)
      for (int i = 0; i < xs.h; ++i)
        for (int j = 0; j < xs.w; ++j)
          for (int o = 0; o < ws.c; ++o)
            for (int ki = 0; ki < ws.h; ++ki)
              for (int kj = 0; kj < ws.w; ++kj) {
                const int r = i * stride - pad + ki, q = j * stride - pad + kj;
                if (r >= 0 && r < oh && q >= 0 && q < ow) y.at(n, o, r, q) += x.at(n, c, i, j) * w.at(c, o, ki, kj);
              }
  return y;
}

void expect_close(const Tensor<double>& a, const Tensor<double>& b, double tol = 1e-12) {
  ASSERT_EQ(a.shape(), b.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "at " << i;
}

}  // namespace

TEST(Conv2d, MatchesDirectLoops) {
  std::mt19937_64 rng(1);
  for (auto [k, s, p] : {std::tuple{3, 1, 1}, {4, 2, 1}, {7, 1, 3}, {1, 1, 0}, {4, 1, 1}, {3, 2, 0}}) {
    const Var<double> x = leaf(rng, Shape{2, 3, 9, 8}), w = leaf(rng, Shape{5, 3, k, k}), b = leaf(rng, {1, 5, 1, 1});
    expect_close(conv2d(x, w, b, s, p).value(), conv_oracle(x.value(), w.value(), b.value(), s, p));
  }
}

TEST(ConvTranspose2d, MatchesScatterLoops) {
  std::mt19937_64 rng(2);
  for (auto [k, s, p, op] : {std::tuple{4, 2, 1, 0}, {3, 2, 1, 1}, {2, 2, 0, 0}, {3, 1, 1, 0}}) {
    const Var<double> x = leaf(rng, Shape{2, 3, 5, 4}), w = leaf(rng, Shape{3, 2, k, k}), b = leaf(rng, {1, 2, 1, 1});
    expect_close(conv_transpose2d(x, w, b, s, p, op).value(),
                 convt_oracle(x.value(), w.value(), b.value(), s, p, op));
  }
}

TEST(OpsGradient, Conv2d) {
  std::mt19937_64 rng(3);
  for (auto [k, s, p] : {std::tuple{3, 1, 1}, {4, 2, 1}, {4, 1, 1}}) {
    const Var<double> x = leaf(rng, Shape{2, 2, 6, 7}), w = leaf(rng, Shape{3, 2, k, k}), b = leaf(rng, {1, 3, 1, 1});
    expect_grad_ok({x, w, b}, [&] { return project(conv2d(x, w, b, s, p), 9); });
  }
}

TEST(OpsGradient, ConvTranspose2d) {
  std::mt19937_64 rng(4);
  for (auto [k, s, p, op] : {std::tuple{4, 2, 1, 0}, {3, 2, 1, 1}, {2, 2, 0, 0}}) {
    const Var<double> x = leaf(rng, Shape{2, 2, 3, 4}), w = leaf(rng, Shape{2, 3, k, k}), b = leaf(rng, {1, 3, 1, 1});
    expect_grad_ok({x, w, b}, [&] { return project(conv_transpose2d(x, w, b, s, p, op), 9); });
  }
}

TEST(OpsGradient, ReflectPad) {
  std::mt19937_64 rng(5);
  const Var<double> x = leaf(rng, Shape{1, 2, 4, 5});
  expect_grad_ok({x}, [&] { return project(reflect_pad2d(x, 3), 2); });
  const Tensor<double> y = reflect_pad2d(x, 1).value();
  EXPECT_EQ(y.at(0, 0, 0, 0), x.value().at(0, 0, 1, 1));
  EXPECT_EQ(y.at(0, 1, 5, 6), x.value().at(0, 1, 2, 3));
}

TEST(OpsGradient, InstanceNorm) {
  std::mt19937_64 rng(6);
  const Var<double> x = leaf(rng, Shape{2, 3, 4, 4});
  expect_grad_ok({x}, [&] { return project(instance_norm2d(x), 3); });
  const Var<double> small = leaf(rng, Shape{1, 2, 2, 2});
  expect_grad_ok({small}, [&] { return project(instance_norm2d(small), 3); });
}

TEST(OpsGradient, Activations) {
  std::mt19937_64 rng(7);
  const Var<double> x = leaf(rng, Shape{1, 2, 5, 5}, -2, 2);
  expect_grad_ok({x}, [&] { return project(tanh(x), 4); });
  expect_grad_ok({x}, [&] { return project(sigmoid(x), 4); });
  expect_grad_ok({x}, [&] { return project(relu(x), 4); });
  expect_grad_ok({x}, [&] { return project(leaky_relu(x, 0.2), 4); });
}

TEST(OpsGradient, PoolConcatAndLosses) {
  std::mt19937_64 rng(8);
  const Var<double> x = leaf(rng, Shape{2, 2, 6, 6}), z = leaf(rng, Shape{2, 1, 6, 6});
  expect_grad_ok({x}, [&] { return project(max_pool2(x), 5); });
  expect_grad_ok({x, z}, [&] { return project(concat_channels(x, z), 5); });
  Tensor<double> t(Shape{2, 2, 6, 6});
  std::bernoulli_distribution coin(0.5);
  for (auto& v : t.span()) v = coin(rng) ? 1.0 : 0.0;
  const Var<double> target(t);
  expect_grad_ok({x}, [&] { return mse_const(x, 0.3); });
  expect_grad_ok({x}, [&] { return l1_loss(x, target); });
  expect_grad_ok({x}, [&] { return bce_logits(x, t); });
  expect_grad_ok({x}, [&] { return bce_logits_const(x, 1.0); });
  expect_grad_ok({x}, [&] { return dice_loss(sigmoid(x), t); });
}

TEST(Ops, LossValues) {
  const Var<double> x(Tensor<double>(Shape{1, 1, 1, 2}, std::vector<double>{0.0, 2.0}));
  EXPECT_NEAR(mse_const(x, 1.0).item(), 1.0, 1e-15);
  EXPECT_NEAR(bce_logits_const(x, 1.0).item(), 0.5 * (std::log(2.0) + std::log1p(std::exp(-2.0))), 1e-15);
  const Tensor<double> t(Shape{1, 1, 1, 2}, std::vector<double>{1.0, 0.0});
  const Var<double> p(Tensor<double>(Shape{1, 1, 1, 2}, std::vector<double>{1.0, 0.0}));
  EXPECT_NEAR(dice_loss(p, t).item(), 0.0, 1e-6);
  const Var<double> big(Tensor<double>(Shape{1, 1, 1, 2}, std::vector<double>{800.0, -800.0}));
  EXPECT_TRUE(std::isfinite(bce_logits(big, t).item()));
}

TEST(Ops, MaxPoolTiesGoToFirst) {
  Var<double> x(Tensor<double>(Shape{1, 1, 2, 2}, std::vector<double>{1, 1, 1, 1}), true);
  backward(scale(mse_const(max_pool2(x), 0.0), 0.5));
  EXPECT_EQ(x.grad()[0], 1.0);
  EXPECT_EQ(x.grad()[1], 0.0);
  EXPECT_EQ(x.grad()[3], 0.0);
}

TEST(Autograd, GradientsAccumulateThroughSharedInputs) {
  Var<double> x(Tensor<double>(Shape{1, 1, 1, 1}, std::vector<double>{3.0}), true);
  // mean((x + x)^2) = 4 x^2 -> 8 x
  backward(mse_const(add(x, x), 0.0));
  EXPECT_NEAR(x.grad()[0], 24.0, 1e-12);
}

TEST(Autograd, FrozenLeavesReceiveNoGradient) {
  Var<double> x(Tensor<double>(Shape{1, 1, 1, 1}, std::vector<double>{3.0}), true);
  Var<double> y(Tensor<double>(Shape{1, 1, 1, 1}, std::vector<double>{2.0}), true);
  y.set_requires_grad(false);
  backward(mse_const(add(x, y), 0.0));
  EXPECT_TRUE(x.has_grad());
  EXPECT_FALSE(y.has_grad());
}

TEST(Autograd, NoGradGuardRecordsNothing) {
  Var<double> x(Tensor<double>(Shape{1, 1, 1, 1}, std::vector<double>{3.0}), true);
  NoGradGuard g;
  EXPECT_FALSE(mse_const(x, 0.0).requires_grad());
}

TEST(Adam, SkipsParametersWithoutGradientAndMovesOthers) {
  Var<double> a(Tensor<double>(Shape{1, 1, 1, 1}, std::vector<double>{1.0}), true);
  Var<double> b(Tensor<double>(Shape{1, 1, 1, 1}, std::vector<double>{1.0}), true);
  Adam<double> opt({a, b}, AdamConfig{0.1, 0.9, 0.999, 1e-8});
  backward(mse_const(a, 0.0));
  opt.step();
  // First bias-corrected step has magnitude lr.
  EXPECT_NEAR(a.value()[0], 0.9, 1e-9);
  EXPECT_EQ(b.value()[0], 1.0);
}
