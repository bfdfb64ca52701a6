#include <gtest/gtest.h>

#include <cmath>

#include "hydat/error.hpp"
#include "hydat/mlp.hpp"
#include "hydat/random.hpp"

namespace hydat {
namespace {

const std::vector<std::size_t> kDefault{3, 32, 32, 16, 8, 1};
const std::vector<std::size_t> kDefaultTwo{3, 32, 32, 16, 8, 2};

std::vector<double> random_input(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.gaussian();
  return v;
}

TEST(Mlp, ShapesAndParameterCount) {
  const Mlp net(kDefault, Activation::logistic, 1);
  EXPECT_EQ(net.layer_count(), 6u);
  EXPECT_EQ(net.input_size(), 3u);
  EXPECT_EQ(net.output_size(), 1u);
  const std::size_t expected = (3 * 32 + 32) + (32 * 32 + 32) + (32 * 16 + 16) + (16 * 8 + 8) + (8 * 1 + 1);
  EXPECT_EQ(net.parameters().size(), expected);
  EXPECT_THROW(Mlp({3}, Activation::identity, 1), ValidationError);
  EXPECT_THROW(Mlp({3, 0, 1}, Activation::identity, 1), ValidationError);
  EXPECT_THROW(net.forward(std::vector<double>{1, 2}), ValidationError);
}

TEST(Mlp, HeUniformInitialisation) {
  const Mlp net({3, 4, 2}, Activation::identity, 5);
  const auto p = net.parameters();
  const double l0 = std::sqrt(6.0 / 3.0), l1 = std::sqrt(6.0 / 4.0);
  for (std::size_t i = 0; i < 12; ++i) EXPECT_LE(std::abs(p[i]), l0);
  for (std::size_t i = 12; i < 16; ++i) EXPECT_EQ(p[i], 0.0);
  for (std::size_t i = 16; i < 24; ++i) EXPECT_LE(std::abs(p[i]), l1);
  for (std::size_t i = 24; i < 26; ++i) EXPECT_EQ(p[i], 0.0);
}

TEST(Mlp, HandComputedForward) {
  Mlp net({2, 2, 1}, Activation::identity, 0);
  auto p = net.parameters();
  // layer 0: W = [[1, -1], [0.5, 2]], b = [0, -1]; layer 1: W = [[3, -2]], b = [0.25]
  const double values[] = {1, -1, 0.5, 2, 0, -1, 3, -2, 0.25};
  std::copy(std::begin(values), std::end(values), p.begin());
  const std::vector<double> x{2, 1};
  // h = relu([1, 2]) = [1, 2]; y = 3 - 4 + 0.25
  EXPECT_DOUBLE_EQ(net.forward(x)[0], -0.75);
  const std::vector<double> x2{-1, 0};
  // h = relu([-1, -1.5]) = [0, 0]; y = 0.25
  EXPECT_DOUBLE_EQ(net.forward(x2)[0], 0.25);
}

TEST(Mlp, LogisticOutputStaysInsideTheUnitInterval) {
  Rng rng(3);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Mlp net(kDefault, Activation::logistic, seed);
    for (int i = 0; i < 200; ++i) {
      auto x = random_input(rng, 3);
      for (auto& v : x) v *= std::pow(10.0, rng.uniform(-3, 6));
      const double p = net.forward(x)[0];
      EXPECT_GT(p, 0.0);
      EXPECT_LT(p, 1.0);
      EXPECT_TRUE(std::isfinite(net.loss(x, std::vector<double>{rng.uniform() < 0.5 ? 0.0 : 1.0},
                                         Loss::binary_cross_entropy)));
    }
  }
}

TEST(Mlp, CrossEntropyMatchesTheTextbookForm) {
  const Mlp net({3, 4, 1}, Activation::logistic, 9);
  Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    const auto x = random_input(rng, 3);
    const double p = net.forward(x)[0];
    EXPECT_NEAR(net.loss(x, std::vector<double>{1.0}, Loss::binary_cross_entropy), -std::log(p), 1e-12);
    EXPECT_NEAR(net.loss(x, std::vector<double>{0.0}, Loss::binary_cross_entropy), -std::log(1 - p), 1e-12);
  }
  const std::vector<double> x{1, 2, 3};
  const Mlp linear({3, 1}, Activation::identity, 1);
  std::vector<double> g2(linear.parameters().size());
  EXPECT_THROW(linear.accumulate_gradient(x, std::vector<double>{1.0}, Loss::binary_cross_entropy, g2),
               ValidationError);
}

TEST(GradCheck, FreshDefaultNetworks) {
  Rng rng(100);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Mlp cls(kDefault, Activation::logistic, seed);
    const Mlp reg(kDefaultTwo, Activation::identity, seed);
    for (int k = 0; k < 3; ++k) {
      const auto x = random_input(rng, 3);
      EXPECT_LT(grad_check(cls, x, std::vector<double>{1.0}, Loss::binary_cross_entropy), 1e-4) << seed;
      EXPECT_LT(grad_check(reg, x, random_input(rng, 2), Loss::mean_squared_error), 1e-4) << seed;
    }
  }
}

TEST(GradCheck, ZeroNetworkLinearHeadAgrees) {
  Mlp net(kDefaultTwo, Activation::identity, 1);
  for (auto& p : net.parameters()) p = 0.0;
  const std::vector<double> x{0, 0, 0}, y{0.7, -1.3};
  EXPECT_LT(grad_check(net, x, y, Loss::mean_squared_error), 1e-9);
  std::vector<double> grad(net.parameters().size(), 0.0);
  net.accumulate_gradient(x, y, Loss::mean_squared_error, grad);
  // Only the output biases move: d/db mean((b - y)^2) = 2 (b - y) / 2
  const std::size_t n = grad.size();
  EXPECT_DOUBLE_EQ(grad[n - 2], -0.7);
  EXPECT_DOUBLE_EQ(grad[n - 1], 1.3);
  for (std::size_t i = 0; i + 2 < n; ++i) EXPECT_EQ(grad[i], 0.0);
}

TEST(GradCheck, HoldsAfterTraining) {
  Rng rng(8);
  std::vector<std::vector<double>> xs, ys;
  for (int i = 0; i < 256; ++i) {
    auto x = random_input(rng, 3);
    ys.push_back({x[0] + 0.5 * x[1] > 0 ? 1.0 : 0.0});
    xs.push_back(std::move(x));
  }
  Mlp net(kDefault, Activation::logistic, 2);
  train_sgd(net, xs, ys, Loss::binary_cross_entropy, {.seed = 2, .epochs = 20, .learning_rate = 0.01});
  for (int k = 0; k < 5; ++k) {
    EXPECT_LT(grad_check(net, xs[k], ys[k], Loss::binary_cross_entropy), 1e-4);
  }
}

TEST(Train, DeterministicForASeed) {
  Rng rng(1);
  std::vector<std::vector<double>> xs, ys;
  for (int i = 0; i < 100; ++i) {
    auto x = random_input(rng, 3);
    ys.push_back({2 * x[0] - x[2], x[1]});
    xs.push_back(std::move(x));
  }
  Mlp a(kDefaultTwo, Activation::identity, 7), b(kDefaultTwo, Activation::identity, 7);
  const SgdConfig cfg{.seed = 7, .epochs = 5};
  EXPECT_EQ(train_sgd(a, xs, ys, Loss::mean_squared_error, cfg), train_sgd(b, xs, ys, Loss::mean_squared_error, cfg));
  EXPECT_EQ(a, b);
  Mlp c(kDefaultTwo, Activation::identity, 8);
  train_sgd(c, xs, ys, Loss::mean_squared_error, cfg);
  EXPECT_NE(a, c);
}

TEST(Train, LossDecreasesAndCallbackFires) {
  Rng rng(2);
  std::vector<std::vector<double>> xs, ys;
  for (int i = 0; i < 400; ++i) {
    auto x = random_input(rng, 3);
    ys.push_back({0.5 * x[0] - x[1] + 0.25 * x[2]});
    xs.push_back(std::move(x));
  }
  Mlp net({3, 16, 1}, Activation::identity, 3);
  std::vector<double> losses;
  train_sgd(net, xs, ys, Loss::mean_squared_error, {.seed = 3, .epochs = 60, .learning_rate = 0.01},
            [&](std::size_t epoch, std::size_t epochs, double l) {
              EXPECT_EQ(epochs, 60u);
              EXPECT_EQ(epoch, losses.size() + 1);
              losses.push_back(l);
            });
  ASSERT_EQ(losses.size(), 60u);
  EXPECT_LT(losses.back(), 0.05 * losses.front());
  EXPECT_THROW(train_sgd(net, {}, {}, Loss::mean_squared_error, {}), InsufficientDataError);
  EXPECT_THROW(train_sgd(net, xs, {}, Loss::mean_squared_error, {}), ValidationError);
}

TEST(Serialization, RoundTripIsBitExact) {
  Mlp net(kDefault, Activation::logistic, 4);
  Rng rng(4);
  for (auto& p : net.parameters()) p = rng.gaussian(0, 1e-3) + p;
  const auto text = net.to_json().dump();
  const auto back = Mlp::from_json(nlohmann::json::parse(text));
  EXPECT_EQ(back, net);
  const auto x = random_input(rng, 3);
  EXPECT_EQ(back.forward(x), net.forward(x));
}

TEST(Serialization, RejectsMismatchedShapes) {
  auto j = Mlp({3, 4, 1}, Activation::identity, 1).to_json();
  j["layers"][0]["weights"].erase(0);
  EXPECT_THROW(Mlp::from_json(j), IncompatibleError);
  auto k = Mlp({3, 4, 1}, Activation::identity, 1).to_json();
  k["layers"][1]["activation"] = "tanh";
  EXPECT_THROW(Mlp::from_json(k), IncompatibleError);
}

TEST(Standardizer, FitApplyInvert) {
  const std::vector<std::vector<double>> rows{{1, 10, 5}, {3, 10, 7}, {5, 10, 9}};
  const auto s = Standardizer::fit(rows);
  EXPECT_DOUBLE_EQ(s.mean[0], 3.0);
  EXPECT_DOUBLE_EQ(s.stddev[0], std::sqrt(8.0 / 3.0));
  EXPECT_DOUBLE_EQ(s.stddev[1], 1.0);  // constant column keeps unit scale
  const auto z = s.apply(rows[2]);
  EXPECT_NEAR(z[0], 2.0 / std::sqrt(8.0 / 3.0), 1e-15);
  EXPECT_EQ(z[1], 0.0);
  const auto back = s.invert(z);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(back[i], rows[2][i], 1e-12);
  EXPECT_EQ(Standardizer::from_json(s.to_json()), s);
  EXPECT_THROW(Standardizer::fit({}), InsufficientDataError);
}

}  // namespace
}  // namespace hydat
