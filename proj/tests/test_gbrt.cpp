#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "fcu/gbrt.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace fcu;
using namespace fcu::oracle;

namespace {

void compare_node(const RegressionTree& tree, int idx, const Matrix& X, const std::vector<double>& y,
                  const std::vector<std::size_t>& rows, int depth_left) {
  const auto& node = tree.nodes[idx];
  const Split expect = depth_left > 0 && rows.size() >= 2 ? best_split_exhaustive(X, y, rows) : Split{};
  CHECK(node.feature == expect.feature);
  if (node.feature < 0 || expect.feature < 0) return;
  CHECK(node.threshold == doctest::Approx(expect.threshold).epsilon(1e-14));
  std::vector<std::size_t> left, right;
  for (auto r : rows) (X(r, node.feature) <= node.threshold ? left : right).push_back(r);
  compare_node(tree, node.left, X, y, left, depth_left - 1);
  compare_node(tree, node.right, X, y, right, depth_left - 1);
}

double mse_of(const GbrtModel& m, const Matrix& X, std::span<const double> y) {
  const auto p = predict(m, X);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (p[i] - y[i]) * (p[i] - y[i]);
  return s / y.size();
}

} // namespace

TEST_SUITE("gbrt") {
  TEST_CASE("depth-2 splits match exhaustive enumeration on 8-point instances") {
    std::mt19937_64 rng(41);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_int_distribution<int> small(0, 3);
    for (int rep = 0; rep < 200; ++rep) {
      const std::size_t p = 1 + rep % 3;
      Matrix X(8, p);
      std::vector<double> y(8);
      const bool ties = rep % 4 == 0;
      for (std::size_t i = 0; i < 8; ++i) {
        for (std::size_t f = 0; f < p; ++f) X(i, f) = ties ? small(rng) : n(rng);
        y[i] = ties ? small(rng) : n(rng);
      }
      const auto tree = fit_regression_tree(X, y, TreeOptions{2, 1});
      std::vector<std::size_t> rows(8);
      std::iota(rows.begin(), rows.end(), 0);
      CAPTURE(rep);
      compare_node(tree, 0, X, y, rows, 2);
      CHECK(tree.depth() <= 2);
    }
  }

  TEST_CASE("one depth-1 tree fits a clean step exactly") {
    Matrix X(10, 1);
    std::vector<double> y(10);
    for (std::size_t i = 0; i < 10; ++i) {
      X(i, 0) = double(i) - 4.5;
      y[i] = X(i, 0) > 0 ? 1.0 : 0.0;
    }
    const auto fit = train_gbrt(X, y, GbrtOptions{1, 1, 1.0, 1});
    CHECK(fit.mse_trace.back() == 0.0);
    CHECK(fit.model.trees[0].nodes[0].threshold == 0.0);
  }

  TEST_CASE("unit learning rate with unlimited depth interpolates distinct inputs") {
    std::mt19937_64 rng(42);
    const auto X = fcu::test::random_matrix(60, 3, rng);
    std::vector<double> y(60);
    for (std::size_t i = 0; i < 60; ++i) y[i] = std::sin(3.0 * X(i, 0)) + X(i, 1) * X(i, 2);
    const auto fit = train_gbrt(X, y, GbrtOptions{5, 1000, 1.0, 1});
    CHECK(fit.mse_trace.back() < 1e-20);
    CHECK(mse_of(fit.model, X, y) < 1e-20);
  }

  TEST_CASE("training MSE never increases over 300 trees") {
    std::mt19937_64 rng(43);
    std::normal_distribution<double> n(0.0, 1.0);
    const auto X = fcu::test::random_matrix(300, 4, rng);
    std::vector<double> y(300);
    for (std::size_t i = 0; i < 300; ++i) y[i] = X(i, 0) * X(i, 0) - X(i, 1) + 0.3 * n(rng);
    for (double lr : {0.05, 0.5, 1.0}) {
      const auto fit = train_gbrt(X, y, GbrtOptions{300, 3, lr, 5});
      REQUIRE(fit.mse_trace.size() == 301);
      for (std::size_t k = 1; k < fit.mse_trace.size(); ++k) CHECK(fit.mse_trace[k] <= fit.mse_trace[k - 1]);
      CHECK(std::abs(fit.mse_trace.back() - mse_of(fit.model, X, y)) < 1e-12);
    }
  }

  TEST_CASE("initial prediction is the training mean; no trees means a constant") {
    const Matrix X(4, 1, std::vector<double>{0.0, 1.0, 2.0, 3.0});
    const std::vector<double> y{1.0, 2.0, 3.0, 6.0};
    const auto fit = train_gbrt(X, y, GbrtOptions{3, 1, 0.1, 1});
    CHECK(fit.model.initial_prediction == 3.0);
    GbrtModel empty = fit.model;
    empty.trees.clear();
    for (double v : predict(empty, X)) CHECK(v == 3.0);
  }

  TEST_CASE("leaves respect min_leaf") {
    std::mt19937_64 rng(44);
    const auto X = fcu::test::random_matrix(50, 2, rng);
    std::vector<double> y(50);
    for (std::size_t i = 0; i < 50; ++i) y[i] = X(i, 0);
    const auto tree = fit_regression_tree(X, y, TreeOptions{10, 7});
    std::vector<int> counts(tree.nodes.size(), 0);
    for (std::size_t i = 0; i < 50; ++i) {
      int idx = 0;
      while (tree.nodes[idx].feature >= 0) {
        idx = X(i, tree.nodes[idx].feature) <= tree.nodes[idx].threshold ? tree.nodes[idx].left : tree.nodes[idx].right;
      }
      ++counts[idx];
    }
    for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
      if (tree.nodes[k].feature < 0) CHECK(counts[k] >= 7);
    }
  }

  TEST_CASE("invalid options") {
    const Matrix X(4, 1, std::vector<double>{0.0, 1.0, 2.0, 3.0});
    const std::vector<double> y{1.0, 2.0, 3.0, 6.0};
    CHECK_THROWS_AS(train_gbrt(X, y, GbrtOptions{0, 3, 0.1, 1}), std::invalid_argument);
    CHECK_THROWS_AS(train_gbrt(X, y, GbrtOptions{5, 0, 0.1, 1}), std::invalid_argument);
    CHECK_THROWS_AS(train_gbrt(X, y, GbrtOptions{5, 3, 0.0, 1}), std::invalid_argument);
    CHECK_THROWS_AS(train_gbrt(X, y, GbrtOptions{5, 3, 1.5, 1}), std::invalid_argument);
    CHECK_THROWS_AS(train_gbrt(X, y, GbrtOptions{5, 3, 0.1, 5}), std::invalid_argument);
    const auto fit = train_gbrt(X, y, GbrtOptions{2, 2, 0.1, 1});
    CHECK_THROWS_AS(predict(fit.model, Matrix(2, 3)), std::invalid_argument);
  }

  TEST_CASE("training is deterministic") {
    std::mt19937_64 rng(45);
    const auto X = fcu::test::random_matrix(100, 3, rng);
    std::vector<double> y(100);
    for (std::size_t i = 0; i < 100; ++i) y[i] = X(i, 2) - X(i, 0);
    const auto a = train_gbrt(X, y, GbrtOptions{20, 3, 0.1, 2});
    const auto b = train_gbrt(X, y, GbrtOptions{20, 3, 0.1, 2});
    CHECK(predict(a.model, X) == predict(b.model, X));
  }
}
