#pragma once

#include <span>
#include <vector>

#include "fcu/matrix.hpp"

namespace fcu {

struct SvrOptions {
  double C = 1.0;
  double epsilon = 0.1;
  /// RBF width: k(a, b) = exp(-gamma * ||a - b||^2).
  double gamma = 1.0;
  /// Stop once the maximal KKT violation drops below this.
  double tol = 1e-4;
  /// One sweep is n pair updates.
  int max_sweeps = 1000;
};

/// epsilon-SVR with RBF kernel; f(x) = sum_i beta_i k(sv_i, x) + bias, beta = alpha - alpha*.
struct SvrModel {
  Matrix support_vectors;
  std::vector<double> dual_coef;
  double bias = 0.0;
  double C = 1.0;
  double epsilon = 0.1;
  double gamma = 1.0;
};

struct SvrFit {
  SvrModel model;
  long iterations = 0;
  bool converged = false;
  double max_violation = 0.0;
  /// Dual objective after every completed sweep, plus the final value.
  std::vector<double> objective_trace;
  /// Full dual vector over the training samples (zeros included).
  std::vector<double> beta;
};

double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma);

/// Dual objective -1/2 beta^T K beta + y^T beta - epsilon * ||beta||_1.
double svr_dual_objective(const Matrix& X, std::span<const double> y, std::span<const double> beta,
                          double epsilon, double gamma);

/// Pairwise dual coordinate ascent: each step picks the maximal violating pair and solves
/// the two-variable subproblem (piecewise quadratic in the step) exactly.
SvrFit train_svr(const Matrix& X, std::span<const double> y, const SvrOptions& options);

std::vector<double> predict(const SvrModel& model, const Matrix& X);

} // namespace fcu
