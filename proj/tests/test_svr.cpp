#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "fcu/svr.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace fcu;
using namespace fcu::oracle;

TEST_SUITE("svr") {
  TEST_CASE("four-sample dual matches the brute-force grid optimum") {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int rep = 0; rep < 3; ++rep) {
      const auto X = fcu::test::random_matrix(4, 2, rng);
      std::vector<double> y(4);
      for (auto& v : y) v = n(rng);
      const double C = rep == 0 ? 1.0 : (rep == 1 ? 0.3 : 5.0);
      SvrOptions opt;
      opt.C = C;
      opt.epsilon = 0.1;
      opt.gamma = 0.5;
      opt.tol = 1e-9;
      const auto fit = train_svr(X, y, opt);
      const double smo = svr_dual_objective(X, y, fit.beta, opt.epsilon, opt.gamma);
      const double grid = brute_force_dual(X, y, C, opt.epsilon, opt.gamma);
      CAPTURE(rep);
      CHECK(std::abs(smo - grid) < 1e-4);
      CHECK(smo >= grid - 1e-9);
    }
  }

  TEST_CASE("targets inside the epsilon tube give a constant predictor") {
    std::mt19937_64 rng(22);
    const auto X = fcu::test::random_matrix(30, 3, rng);
    std::vector<double> y(30);
    for (std::size_t i = 0; i < 30; ++i) y[i] = 0.4 + 0.1 * std::sin(double(i));
    SvrOptions opt;
    opt.C = 10.0;
    opt.epsilon = 0.5;
    const auto fit = train_svr(X, y, opt);
    CHECK(fit.model.dual_coef.empty());
    CHECK(fit.model.support_vectors.rows() == 0);
    const auto p = predict(fit.model, X);
    for (double v : p) CHECK(v == p[0]);
    for (double v : y) CHECK(std::abs(v - p[0]) <= opt.epsilon);
  }

  TEST_CASE("sine regression beats the constant-mean baseline") {
    Matrix X(50, 1);
    std::vector<double> y(50);
    for (std::size_t i = 0; i < 50; ++i) {
      X(i, 0) = -3.0 + 6.0 * i / 49.0;
      y[i] = std::sin(X(i, 0));
    }
    SvrOptions opt;
    opt.C = 10.0;
    opt.epsilon = 0.01;
    opt.gamma = 1.0;
    const auto fit = train_svr(X, y, opt);
    const auto p = predict(fit.model, X);
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / 50.0;
    double mse = 0.0, var = 0.0;
    for (std::size_t i = 0; i < 50; ++i) {
      mse += (p[i] - y[i]) * (p[i] - y[i]);
      var += (y[i] - mean) * (y[i] - mean);
    }
    CHECK(mse < var);
    CHECK(mse / 50.0 < 1e-3);
  }

  TEST_CASE("box and equality constraints, monotone objective, and tube sparsity") {
    std::mt19937_64 rng(23);
    std::normal_distribution<double> n(0.0, 1.0);
    const auto X = fcu::test::random_matrix(80, 3, rng);
    std::vector<double> y(80);
    for (std::size_t i = 0; i < 80; ++i) y[i] = X(i, 0) - 0.5 * X(i, 1) * X(i, 2) + 0.2 * n(rng);
    SvrOptions opt;
    opt.C = 2.0;
    opt.epsilon = 0.2;
    opt.gamma = 0.3;
    const auto fit = train_svr(X, y, opt);
    CHECK(fit.converged);
    double sum = 0.0;
    for (double b : fit.beta) {
      CHECK(std::abs(b) <= opt.C);
      sum += b;
    }
    CHECK(std::abs(sum) < 1e-9);
    for (std::size_t k = 1; k < fit.objective_trace.size(); ++k) {
      CHECK(fit.objective_trace[k] >= fit.objective_trace[k - 1] - 1e-12);
    }
    const auto p = predict(fit.model, X);
    for (std::size_t i = 0; i < 80; ++i) {
      if (std::abs(p[i] - y[i]) < opt.epsilon - opt.tol) CHECK(fit.beta[i] == 0.0);
    }
  }

  TEST_CASE("invalid hyperparameters") {
    const Matrix X(3, 1, std::vector<double>{0.0, 1.0, 2.0});
    const std::vector<double> y{0.0, 1.0, 2.0};
    SvrOptions bad;
    bad.C = 0.0;
    CHECK_THROWS_AS(train_svr(X, y, bad), std::invalid_argument);
    bad = SvrOptions{};
    bad.epsilon = -0.1;
    CHECK_THROWS_AS(train_svr(X, y, bad), std::invalid_argument);
    bad = SvrOptions{};
    bad.gamma = 0.0;
    CHECK_THROWS_AS(train_svr(X, y, bad), std::invalid_argument);
  }

  TEST_CASE("training is deterministic") {
    std::mt19937_64 rng(24);
    const auto X = fcu::test::random_matrix(40, 2, rng);
    std::vector<double> y(40);
    for (std::size_t i = 0; i < 40; ++i) y[i] = X(i, 0) * X(i, 1);
    const auto a = train_svr(X, y, SvrOptions{});
    const auto b = train_svr(X, y, SvrOptions{});
    CHECK(a.beta == b.beta);
    CHECK(a.model.bias == b.model.bias);
  }

  TEST_CASE("rbf kernel") {
    const std::vector<double> a{0.0, 0.0}, b{1.0, 1.0};
    CHECK(rbf_kernel(a, a, 0.7) == 1.0);
    CHECK(rbf_kernel(a, b, 0.5) == doctest::Approx(std::exp(-1.0)));
  }
}
