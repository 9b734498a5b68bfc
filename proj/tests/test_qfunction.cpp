#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "csar/qfunction.hpp"

using namespace csar;

namespace {

Heightmaps random_state(std::mt19937_64& gen, int h, int w) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Heightmaps s{Grid<double>(h, w), Grid<double>(h, w)};
  for (double& v : s.color.values()) v = u(gen);
  for (double& v : s.depth.values()) v = 0.1 * u(gen);
  return s;
}

// Straightforward "same"-padded convolution stack, channel-major planes.
std::vector<double> naive_forward(const ParameterVector& p, const Heightmaps& s) {
  const Layout& L = p.layout;
  const int h = L.height, w = L.width;
  std::vector<double> x(static_cast<std::size_t>(2 * h * w));
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      x[static_cast<std::size_t>(r * w + c)] = s.color(r, c);
      x[static_cast<std::size_t>(h * w + r * w + c)] = s.depth(r, c);
    }
  std::size_t off = 0;
  for (const auto& l : L.layers) {
    std::vector<double> y(static_cast<std::size_t>(l.out_channels * h * w), 0.0);
    const std::size_t boff = off + l.weight_count();
    for (int o = 0; o < l.out_channels; ++o)
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
          double acc = p.weights[boff + static_cast<std::size_t>(o)];
          for (int i = 0; i < l.in_channels; ++i)
            for (int ky = 0; ky < l.kernel; ++ky)
              for (int kx = 0; kx < l.kernel; ++kx) {
                const int rr = r + ky - l.kernel / 2;
                const int cc = c + kx - l.kernel / 2;
                if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
                acc += p.weights[off + static_cast<std::size_t>(((o * l.in_channels + i) * l.kernel + ky) * l.kernel + kx)] *
                       x[static_cast<std::size_t>(i * h * w + rr * w + cc)];
              }
          y[static_cast<std::size_t>(o * h * w + r * w + c)] = l.relu ? std::max(0.0, acc) : acc;
        }
    x = std::move(y);
    off += l.param_count();
  }
  return x;
}

ParameterVector perturbed(std::mt19937_64& gen, const Layout& L) {
  ParameterVector p = init_params(L, gen());
  std::normal_distribution<double> d(0.0, 0.1);
  for (double& v : p.weights) v += d(gen);  // non-zero biases too
  return p;
}

}  // namespace

TEST(Layout, DeskDefaultHas745Parameters) {
  // 2*8*9+8 + 8*8*9+8 + 8*1+1
  EXPECT_EQ(Layout::desk_default().num_params(), 745u);
  EXPECT_EQ(Layout::desk_default().offset(1), 152u);
  EXPECT_EQ(Layout::desk_default().offset(2), 736u);
}

TEST(Layout, ValidateRejectsBadShapes) {
  Layout L = Layout::desk_default();
  L.layers[1].in_channels = 7;
  EXPECT_THROW(L.validate(), std::invalid_argument);
  L = Layout::desk_default();
  L.layers[0].kernel = 2;
  EXPECT_THROW(L.validate(), std::invalid_argument);
  L = Layout::desk_default();
  L.layers[0].in_channels = 1;
  EXPECT_THROW(L.validate(), std::invalid_argument);
}

TEST(Init, BoundedWeightsZeroBiasesDeterministic) {
  const Layout L = Layout::desk_default();
  const auto p = init_params(L, 42);
  EXPECT_EQ(p, init_params(L, 42));
  EXPECT_NE(p, init_params(L, 43));
  std::size_t off = 0;
  for (const auto& l : L.layers) {
    const double bound = std::sqrt(1.0 / (l.in_channels * l.kernel * l.kernel));
    for (std::size_t i = 0; i < l.weight_count(); ++i) EXPECT_LE(std::abs(p.weights[off + i]), bound);
    for (int o = 0; o < l.out_channels; ++o)
      EXPECT_EQ(p.weights[off + l.weight_count() + static_cast<std::size_t>(o)], 0.0);
    off += l.param_count();
  }
}

TEST(Forward, MatchesNaiveConvolution) {
  std::mt19937_64 gen(1);
  for (int trial = 0; trial < 5; ++trial) {
    const Layout L = Layout::desk_default();
    const auto p = perturbed(gen, L);
    const auto s = random_state(gen, 16, 16);
    const auto q = forward(p, s);
    const auto ref = naive_forward(p, s);
    for (int r = 0; r < 16; ++r)
      for (int c = 0; c < 16; ++c) EXPECT_NEAR(q(r, c), ref[static_cast<std::size_t>(r * 16 + c)], 1e-12);
  }
}

TEST(Forward, QValueIsBitwiseEqualToFullMap) {
  std::mt19937_64 gen(2);
  const auto p = perturbed(gen, Layout::desk_default());
  const auto s = random_state(gen, 16, 16);
  const auto q = forward(p, s);
  for (int r = 0; r < 16; ++r)
    for (int c = 0; c < 16; ++c) EXPECT_EQ(q_value(p, s, {c, r, 0.0}), q(r, c));
}

TEST(Forward, RejectsShapeMismatch) {
  const auto p = init_params(Layout::desk_default(), 1);
  Heightmaps s{Grid<double>(8, 8), Grid<double>(8, 8)};
  EXPECT_THROW(forward(p, s), std::invalid_argument);
  std::mt19937_64 gen(3);
  EXPECT_THROW(q_value(p, random_state(gen, 16, 16), {16, 0, 0.0}), std::out_of_range);
}

TEST(Policy, ArgmaxTiesGoToLowestRowMajorIndex) {
  QMap q(4, 4, 0.0);
  q(2, 1) = 5.0;
  q(1, 3) = 5.0;
  EXPECT_EQ(argmax_cell(q), std::make_pair(1, 3));
  EXPECT_EQ(argmax_cell(QMap(3, 3, 1.0)), std::make_pair(0, 0));
}

TEST(Policy, GreedyAndExploratoryActions) {
  QMap q(4, 4, 0.0);
  q(3, 2) = 1.0;
  Grid<double> depth(4, 4, 0.0);
  depth(3, 2) = 0.05;
  Rng rng = make_rng(9);
  const Action a = select_action(q, depth, 0.0, rng);
  EXPECT_EQ(a.x, 2);
  EXPECT_EQ(a.y, 3);
  EXPECT_DOUBLE_EQ(a.z, 0.05);

  std::vector<int> counts(16, 0);
  for (int i = 0; i < 16000; ++i) {
    const Action e = select_action(q, depth, 1.0, rng);
    ++counts[static_cast<std::size_t>(e.y * 4 + e.x)];
  }
  for (int c : counts) EXPECT_NEAR(c, 1000, 150);
  EXPECT_THROW(select_action(q, depth, 1.5, rng), std::invalid_argument);
}

TEST(Td, TargetAndError) {
  QMap next(2, 2, 0.0);
  next(1, 1) = 4.0;
  EXPECT_DOUBLE_EQ(td_target(10.0, next, 0.5, false), 12.0);
  EXPECT_DOUBLE_EQ(td_target(10.0, next, 0.5, true), 10.0);
  EXPECT_THROW(td_target(1.0, next, 1.5, false), std::invalid_argument);
  EXPECT_DOUBLE_EQ(td_error(3.0, 12.0), -9.0);
}

TEST(Huber, ValuesAndClippedDerivative) {
  EXPECT_EQ(huber_loss(0.0), 0.0);
  EXPECT_EQ(huber_loss(0.5), 0.125);
  EXPECT_EQ(huber_loss(-0.5), 0.125);
  EXPECT_EQ(huber_loss(1.0), 0.5);
  EXPECT_EQ(huber_loss(-2.0), 1.5);
  EXPECT_EQ(huber_derivative(0.5), 0.5);
  EXPECT_EQ(huber_derivative(2.0), 1.0);
  EXPECT_EQ(huber_derivative(-2.0), -1.0);
}

TEST(Backward, MatchesFiniteDifferences) {
  std::mt19937_64 gen(4);
  Layout L = Layout::desk_default(6, 6);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 10; ++trial) {
    const auto p = perturbed(gen, L);
    const auto s = random_state(gen, 6, 6);
    const Action a{static_cast<int>(gen() % 6), static_cast<int>(gen() % 6), 0.0};
    const double q0 = q_value(p, s, a);
    const double target = q0 - u(gen);
    const double xi = q0 - target;
    const Gradient g = backward(p, s, a, xi);
    const double h = 1e-6;
    for (std::size_t i = 0; i < p.weights.size(); ++i) {
      auto plus = p, minus = p;
      plus.weights[i] += h;
      minus.weights[i] -= h;
      const double fd =
          (huber_loss(q_value(plus, s, a) - target) - huber_loss(q_value(minus, s, a) - target)) /
          (2 * h);
      EXPECT_NEAR(g.values[i], fd, 1e-5 + 1e-4 * std::abs(fd)) << "param " << i;
    }
  }
}

TEST(Backward, OnlyTheActionCellContributes) {
  std::mt19937_64 gen(5);
  const auto p = perturbed(gen, Layout::desk_default());
  auto s = random_state(gen, 16, 16);
  const Action a{3, 4, 0.0};
  const Gradient g = backward(p, s, a, 0.7);
  // Cells outside the 5x5 receptive field do not change the gradient.
  for (int r = 0; r < 16; ++r)
    for (int c = 0; c < 16; ++c)
      if (std::abs(r - a.y) > 2 || std::abs(c - a.x) > 2) {
        s.color(r, c) += 1.0;
        s.depth(r, c) += 1.0;
      }
  EXPECT_EQ(backward(p, s, a, 0.7), g);
  EXPECT_EQ(backward(p, s, a, 0.0), Gradient::zeros(p.layout));
  // |xi| beyond 1 is clipped.
  EXPECT_EQ(backward(p, s, a, 5.0), backward(p, s, a, 1.0));
}

TEST(Sgd, StepAndLayoutCheck) {
  const auto p = init_params(Layout::desk_default(), 1);
  Gradient g = Gradient::zeros(p.layout);
  g.values[3] = 2.0;
  const auto q = apply_sgd(p, g, 0.5);
  EXPECT_EQ(q.weights[3], p.weights[3] - 1.0);
  EXPECT_EQ(q.weights[4], p.weights[4]);
  EXPECT_THROW(apply_sgd(p, Gradient::zeros(Layout::desk_default(8, 8)), 0.1), std::invalid_argument);
}
