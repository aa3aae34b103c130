#include "fcu/lasso.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fcu {

namespace {

void check_inputs(const Matrix& X, std::span<const double> y) {
  if (X.rows() == 0) throw std::invalid_argument("lasso needs at least one sample");
  if (X.rows() != y.size()) throw std::invalid_argument("lasso: X and y lengths differ");
  for (double v : X.data()) {
    if (!std::isfinite(v)) throw std::invalid_argument("lasso: non-finite feature value");
  }
  for (double v : y) {
    if (!std::isfinite(v)) throw std::invalid_argument("lasso: non-finite target value");
  }
}

struct Centred {
  std::vector<double> x_mean;
  double y_mean = 0.0;
  std::vector<double> gram;  // p x p, (Xc^T Xc)/n
  std::vector<double> xty;   // Xc^T yc / n
};

Centred centre(const Matrix& X, std::span<const double> y) {
  const std::size_t n = X.rows();
  const std::size_t p = X.cols();
  Centred c;
  c.x_mean.assign(p, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < p; ++j) c.x_mean[j] += X(r, j);
    c.y_mean += y[r];
  }
  for (auto& m : c.x_mean) m /= static_cast<double>(n);
  c.y_mean /= static_cast<double>(n);

  c.gram.assign(p * p, 0.0);
  c.xty.assign(p, 0.0);
  std::vector<double> xc(p);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < p; ++j) xc[j] = X(r, j) - c.x_mean[j];
    const double yc = y[r] - c.y_mean;
    for (std::size_t j = 0; j < p; ++j) {
      c.xty[j] += xc[j] * yc;
      double* g = &c.gram[j * p];
      for (std::size_t k = j; k < p; ++k) g[k] += xc[j] * xc[k];
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t j = 0; j < p; ++j) {
    c.xty[j] *= inv_n;
    for (std::size_t k = j; k < p; ++k) {
      c.gram[j * p + k] *= inv_n;
      c.gram[k * p + j] = c.gram[j * p + k];
    }
  }
  return c;
}

} // namespace

double lasso_lambda_max(const Matrix& X, std::span<const double> y) {
  check_inputs(X, y);
  const auto c = centre(X, y);
  double best = 0.0;
  for (double v : c.xty) best = std::max(best, std::abs(v));
  return best;
}

LassoFit train_lasso(const Matrix& X, std::span<const double> y, double lambda, double tol, int max_iter) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("lasso lambda must be non-negative");
  if (max_iter < 1) throw std::invalid_argument("lasso max_iter must be positive");
  check_inputs(X, y);
  const std::size_t p = X.cols();
  const auto c = centre(X, y);

  std::vector<double> w(p, 0.0);
  std::vector<double> gw(p, 0.0);  // gram * w
  LassoFit fit;
  for (int it = 1; it <= max_iter; ++it) {
    double max_change = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      const double gjj = c.gram[j * p + j];
      if (gjj <= 0.0) continue;  // constant column: coefficient stays 0
      const double rho = c.xty[j] - gw[j] + gjj * w[j];
      const double updated = soft_threshold(rho, lambda) / gjj;
      const double delta = updated - w[j];
      if (delta != 0.0) {
        const double* g = &c.gram[j * p];
        for (std::size_t k = 0; k < p; ++k) gw[k] += g[k] * delta;
        w[j] = updated;
        max_change = std::max(max_change, std::abs(delta));
      }
    }
    fit.iterations = it;
    if (max_change < tol) {
      fit.converged = true;
      break;
    }
  }

  fit.model.coefficients = std::move(w);
  fit.model.lambda = lambda;
  double offset = 0.0;
  for (std::size_t j = 0; j < p; ++j) offset += c.x_mean[j] * fit.model.coefficients[j];
  fit.model.intercept = c.y_mean - offset;
  fit.objective = lasso_objective(fit.model, X, y);
  return fit;
}

double lasso_objective(const LassoModel& model, const Matrix& X, std::span<const double> y) {
  const auto yhat = predict(model, X);
  double sse = 0.0;
  for (std::size_t i = 0; i < yhat.size(); ++i) sse += (y[i] - yhat[i]) * (y[i] - yhat[i]);
  double l1 = 0.0;
  for (double w : model.coefficients) l1 += std::abs(w);
  return sse / (2.0 * static_cast<double>(X.rows())) + model.lambda * l1;
}

std::vector<double> predict(const LassoModel& model, const Matrix& X) {
  if (X.cols() != model.coefficients.size()) {
    throw std::invalid_argument("lasso predict: expected " + std::to_string(model.coefficients.size()) +
                                " features, got " + std::to_string(X.cols()));
  }
  std::vector<double> out(X.rows(), model.intercept);
  for (std::size_t r = 0; r < X.rows(); ++r) {
    const auto row = X.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) out[r] += row[j] * model.coefficients[j];
  }
  return out;
}

} // namespace fcu
