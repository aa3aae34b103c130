#include "fcu/gbrt.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>

namespace fcu {

double RegressionTree::predict(std::span<const double> x) const {
  int k = 0;
  while (nodes[k].feature >= 0) {
    k = x[nodes[k].feature] <= nodes[k].threshold ? nodes[k].left : nodes[k].right;
  }
  return nodes[k].value;
}

int RegressionTree::depth() const {
  std::vector<int> level(nodes.size(), 0);
  int deepest = 0;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (nodes[k].feature < 0) continue;
    level[nodes[k].left] = level[k] + 1;
    level[nodes[k].right] = level[k] + 1;
    deepest = std::max(deepest, level[k] + 1);
  }
  return deepest;
}

namespace {

using Index = std::uint32_t;

// Presorted exact greedy builder. Each node owns the range [begin, end) of every per-feature
// order array, sorted by that feature; children are formed by stable partitions of the range.
// `columns` is X in column-major order.
class TreeBuilder {
public:
  TreeBuilder(const Matrix& X, const std::vector<double>& columns, std::span<const double> targets,
              const TreeOptions& options, const std::vector<std::vector<Index>>& presorted)
      : X_(X), columns_(columns), y_(targets), options_(options), order_(presorted), go_left_(X.rows(), 0),
        scratch_(X.rows()) {
    tree_.nodes.emplace_back();
    build(0, 0, X.rows(), 0);
  }

  RegressionTree take() { return std::move(tree_); }

private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
  };

  Split best_split(std::size_t begin, std::size_t end, double sum) const {
    Split best;
    const std::size_t n = end - begin;
    const double parent = sum * sum / static_cast<double>(n);
    const std::size_t min_leaf = static_cast<std::size_t>(options_.min_leaf);
    for (std::size_t f = 0; f < order_.size(); ++f) {
      const Index* order = order_[f].data() + begin;
      const double* column = columns_.data() + f * X_.rows();
      double left_sum = 0.0;
      for (std::size_t k = 0; k + 1 < n; ++k) {
        left_sum += y_[order[k]];
        const double v = column[order[k]];
        const double next = column[order[k + 1]];
        if (v == next) continue;
        const std::size_t nl = k + 1;
        const std::size_t nr = n - nl;
        if (nl < min_leaf || nr < min_leaf) continue;
        const double right_sum = sum - left_sum;
        const double gain = left_sum * left_sum / static_cast<double>(nl) +
                            right_sum * right_sum / static_cast<double>(nr) - parent;
        if (best.feature < 0 || gain > best.gain + 1e-12 * std::max(1.0, std::abs(best.gain))) {
          double threshold = 0.5 * (v + next);
          if (!(threshold < next)) threshold = v;
          best = {static_cast<int>(f), threshold, gain};
        }
      }
    }
    return best;
  }

  void build(int node, std::size_t begin, std::size_t end, int depth) {
    const std::size_t n = end - begin;
    const Index* members = order_.front().data() + begin;
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) sum += y_[members[k]];
    const double mean = sum / static_cast<double>(n);
    tree_.nodes[node].value = mean;

    if (depth >= options_.max_depth || n < 2 * static_cast<std::size_t>(options_.min_leaf)) return;
    double ss = 0.0;
    for (std::size_t k = 0; k < n; ++k) ss += (y_[members[k]] - mean) * (y_[members[k]] - mean);
    if (!(ss > 0.0)) return;

    const Split split = best_split(begin, end, sum);
    if (split.feature < 0 || !(split.gain > 1e-12 * ss)) return;

    const double* column = columns_.data() + static_cast<std::size_t>(split.feature) * X_.rows();
    std::size_t n_left = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const Index i = members[k];
      go_left_[i] = column[i] <= split.threshold;
      n_left += go_left_[i];
    }
    for (auto& order : order_) {
      Index* seg = order.data() + begin;
      std::size_t l = 0, r = 0;
      for (std::size_t k = 0; k < n; ++k) {
        if (go_left_[seg[k]]) {
          seg[l++] = seg[k];
        } else {
          scratch_[r++] = seg[k];
        }
      }
      std::copy(scratch_.begin(), scratch_.begin() + static_cast<std::ptrdiff_t>(r), seg + l);
    }

    const int l = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    const int r = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    tree_.nodes[node].feature = split.feature;
    tree_.nodes[node].threshold = split.threshold;
    tree_.nodes[node].left = l;
    tree_.nodes[node].right = r;
    build(l, begin, begin + n_left, depth + 1);
    build(r, begin + n_left, end, depth + 1);
  }

  const Matrix& X_;
  const std::vector<double>& columns_;
  std::span<const double> y_;
  TreeOptions options_;
  std::vector<std::vector<Index>> order_;
  std::vector<char> go_left_;
  std::vector<Index> scratch_;
  RegressionTree tree_;
};

std::vector<double> column_major(const Matrix& X) {
  std::vector<double> out(X.rows() * X.cols());
  for (std::size_t r = 0; r < X.rows(); ++r) {
    for (std::size_t f = 0; f < X.cols(); ++f) out[f * X.rows() + r] = X(r, f);
  }
  return out;
}

std::vector<std::vector<Index>> presort(const Matrix& X) {
  std::vector<std::vector<Index>> sorted(X.cols(), std::vector<Index>(X.rows()));
  for (std::size_t f = 0; f < X.cols(); ++f) {
    auto& order = sorted[f];
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return X(a, f) < X(b, f); });
  }
  return sorted;
}

void check(const Matrix& X, std::span<const double> y, int max_depth, int min_leaf) {
  if (X.rows() == 0 || X.cols() == 0 || X.rows() != y.size()) {
    throw std::invalid_argument("regression tree: bad training shape");
  }
  if (max_depth < 1) throw std::invalid_argument("max_depth must be >= 1");
  if (min_leaf < 1) throw std::invalid_argument("min_leaf must be >= 1");
  if (static_cast<std::size_t>(min_leaf) > X.rows()) {
    throw std::invalid_argument("min_leaf " + std::to_string(min_leaf) + " exceeds sample count " +
                                std::to_string(X.rows()));
  }
  for (double v : X.data()) {
    if (!std::isfinite(v)) throw std::invalid_argument("regression tree: non-finite feature");
  }
}

} // namespace

RegressionTree fit_regression_tree(const Matrix& X, std::span<const double> targets, const TreeOptions& options) {
  check(X, targets, options.max_depth, options.min_leaf);
  const auto sorted = presort(X);
  const auto columns = column_major(X);
  return TreeBuilder(X, columns, targets, options, sorted).take();
}

GbrtFit train_gbrt(const Matrix& X, std::span<const double> y, const GbrtOptions& options) {
  if (options.n_trees < 1) throw std::invalid_argument("n_trees must be >= 1");
  if (!(options.learning_rate > 0.0 && options.learning_rate <= 1.0)) {
    throw std::invalid_argument("learning_rate must lie in (0, 1]");
  }
  check(X, y, options.max_depth, options.min_leaf);
  const std::size_t n = X.rows();
  const auto sorted = presort(X);
  const auto columns = column_major(X);

  GbrtFit fit;
  auto& model = fit.model;
  model.learning_rate = options.learning_rate;
  model.n_inputs = X.cols();
  model.initial_prediction = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);

  std::vector<double> prediction(n, model.initial_prediction);
  std::vector<double> residual(n);
  auto mse = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += (y[i] - prediction[i]) * (y[i] - prediction[i]);
    return s / static_cast<double>(n);
  };
  fit.mse_trace.push_back(mse());

  const TreeOptions tree_options{options.max_depth, options.min_leaf};
  for (int m = 0; m < options.n_trees; ++m) {
    for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - prediction[i];
    RegressionTree tree = TreeBuilder(X, columns, residual, tree_options, sorted).take();
    for (auto& node : tree.nodes) node.value *= options.learning_rate;
    for (std::size_t i = 0; i < n; ++i) prediction[i] += tree.predict(X.row(i));
    model.trees.push_back(std::move(tree));
    fit.mse_trace.push_back(mse());
  }
  return fit;
}

std::vector<double> predict(const GbrtModel& model, const Matrix& X) {
  if (!model.trees.empty() && X.cols() != model.n_inputs) {
    throw std::invalid_argument("GBRT predict: expected " + std::to_string(model.n_inputs) +
                                " features, got " + std::to_string(X.cols()));
  }
  std::vector<double> out(X.rows(), model.initial_prediction);
  for (std::size_t r = 0; r < X.rows(); ++r) {
    const auto x = X.row(r);
    for (const auto& t : model.trees) out[r] += t.predict(x);
  }
  return out;
}

} // namespace fcu
