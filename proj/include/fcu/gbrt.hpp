#pragma once

#include <span>
#include <vector>

#include "fcu/matrix.hpp"

namespace fcu {

struct TreeNode {
  /// -1 marks a leaf.
  int feature = -1;
  /// Samples with x[feature] <= threshold go left.
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

/// Axis-aligned binary regression tree; each leaf is a constant over its rectangle.
struct RegressionTree {
  std::vector<TreeNode> nodes;

  double predict(std::span<const double> x) const;
  int depth() const;
};

struct TreeOptions {
  /// Number of split levels; a large value means effectively unlimited.
  int max_depth = 3;
  int min_leaf = 1;
};

/// Greedy variance-reduction tree on `targets`. Ties go to the lowest feature index,
/// then the lowest threshold.
RegressionTree fit_regression_tree(const Matrix& X, std::span<const double> targets, const TreeOptions& options);

struct GbrtModel {
  double initial_prediction = 0.0;
  double learning_rate = 0.1;
  std::vector<RegressionTree> trees;
  std::size_t n_inputs = 0;
};

struct GbrtOptions {
  int n_trees = 100;
  int max_depth = 3;
  double learning_rate = 0.1;
  int min_leaf = 1;
};

struct GbrtFit {
  GbrtModel model;
  /// Training MSE of the initial constant (index 0) and after each added tree.
  std::vector<double> mse_trace;
};

/// Squared-loss gradient boosting: tree m is fit to the residuals of the first m-1 trees.
GbrtFit train_gbrt(const Matrix& X, std::span<const double> y, const GbrtOptions& options);

std::vector<double> predict(const GbrtModel& model, const Matrix& X);

} // namespace fcu
