#pragma once

#include <span>
#include <vector>

#include "fcu/matrix.hpp"

namespace fcu {

/// Minimizer of (1/2n)||y - b - Xw||^2 + lambda * ||w||_1 with unpenalized intercept b.
struct LassoModel {
  std::vector<double> coefficients;
  double intercept = 0.0;
  double lambda = 0.0;
};

struct LassoFit {
  LassoModel model;
  int iterations = 0;
  /// False when max_iter sweeps ran out before the coefficient change fell below tol.
  bool converged = false;
  double objective = 0.0;
};

/// Cyclic coordinate descent with soft-thresholding on the centred Gram matrix.
LassoFit train_lasso(const Matrix& X, std::span<const double> y, double lambda, double tol = 1e-6,
                     int max_iter = 10000);

/// Smallest lambda for which every coefficient is exactly zero: max_j |x_j^T (y - mean(y))| / n.
double lasso_lambda_max(const Matrix& X, std::span<const double> y);

double lasso_objective(const LassoModel& model, const Matrix& X, std::span<const double> y);

std::vector<double> predict(const LassoModel& model, const Matrix& X);

inline double soft_threshold(double rho, double lambda) {
  if (rho > lambda) return rho - lambda;
  if (rho < -lambda) return rho + lambda;
  return 0.0;
}

} // namespace fcu
